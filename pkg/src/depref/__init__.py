"""De-preferential attachment random graphs: simulation, limits and oracles."""

__version__ = "0.1.0"
