from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from depref.graph import ModelVariant, grow
from depref.harness.cli import main
from depref.harness.config import ConfigError, ExperimentConfig, Statistic
from depref.harness.report import Report, ReportIOError, emit_report, load_report, read_csv_table
from depref.harness.runner import replicate_records, run_replicates
from depref.harness.seeding import replicate_rng
from depref.harness.stats import (
    chi_square_against,
    ks_normal,
    mean_estimate,
    total_variation,
    variance_se,
)
from depref.oracles import ExactModelDistribution


def cfg(**kw):
    base = dict(statistic="trajectory", n_target=300, replicates=4, master_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


# -- config -----------------------------------------------------------------


def test_config_defaults_and_validation():
    c = cfg()
    assert c.checkpoints == (300,)
    assert c.variant is ModelVariant.LINEAR and c.statistic is Statistic.TRAJECTORY
    with pytest.raises(ConfigError):
        cfg(checkpoints=(1, 10))
    with pytest.raises(ConfigError):
        cfg(checkpoints=(400,))
    with pytest.raises(ConfigError):
        cfg(replicates=0)
    with pytest.raises(ConfigError):
        cfg(variant="quadratic")
    with pytest.raises(ConfigError):
        cfg(master_seed=2**64)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n": 10, "colour": "red"})


def test_config_hash_ignores_presentation():
    a = cfg()
    assert a.config_hash == cfg(workers=3, output_path="/tmp", format="csv").config_hash
    assert a.config_hash != cfg(master_seed=12).config_hash
    assert cfg(checkpoints=(300, 10)).checkpoints == (10, 300)


def test_config_from_flag_keys():
    c = ExperimentConfig.from_dict({"model": "inverse", "n": 50, "seed": 3, "track": [1, 2]})
    assert (c.variant, c.n_target, c.master_seed, c.tracked_vertices) == (ModelVariant.INVERSE, 50, 3, (1, 2))


# -- seeding and orchestration ---------------------------------------------------


def test_replicate_streams_distinct_and_stable():
    a = replicate_rng(5, 0).random(4)
    assert np.array_equal(a, replicate_rng(5, 0).random(4))
    assert not np.array_equal(a, replicate_rng(5, 1).random(4))
    assert not np.array_equal(a, replicate_rng(6, 0).random(4))
    with pytest.raises(ValueError):
        replicate_rng(-1, 0)


def test_single_replicate_equals_direct_grow():
    c = cfg(replicates=1, checkpoints=(10, 300), tracked_vertices=(1, 3))
    direct = grow(300, 1, "linear", replicate_rng(11, 0), checkpoints=[10, 300], tracked=[1, 3])
    assert replicate_records(c) == [direct]


def test_worker_count_does_not_change_results():
    c = cfg(variant="inverse", m=2, replicates=6, checkpoints=(50, 300))
    one = run_replicates(c)
    two = run_replicates(c.with_(workers=2))
    assert one.to_json() == two.to_json()


def test_same_config_same_bytes(tmp_path):
    c = cfg(statistic="degree_dist", replicates=5)
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    fa = emit_report(run_replicates(c), tmp_path / "a")
    fb = emit_report(run_replicates(c), tmp_path / "b")
    assert [p.name for p in fa] == [p.name for p in fb]
    for p, q in zip(fa, fb):
        assert p.read_bytes() == q.read_bytes()


def test_standard_error_scales_with_replicates():
    small = run_replicates(cfg(n_target=500, replicates=400))
    big = run_replicates(cfg(n_target=500, replicates=800, master_seed=99))
    ratio = small.summary["by_checkpoint"][0]["se"] / big.summary["by_checkpoint"][0]["se"]
    assert ratio == pytest.approx(math.sqrt(2), rel=0.10)


# -- reports -------------------------------------------------------------------


def test_report_round_trip(tmp_path):
    rep = run_replicates(cfg(checkpoints=(5, 300), tracked_vertices=(1, 2)))
    emit_report(rep, tmp_path)
    back = load_report(tmp_path / "trajectory.json")
    assert back == rep
    assert json.loads((tmp_path / "trajectory.timing.json").read_text())["wall_time_seconds"] >= 0


def test_csv_rows_follow_replicate_structure(tmp_path):
    c = cfg(checkpoints=(5, 100, 300), tracked_vertices=(1, 2, 4), replicates=7)
    emit_report(run_replicates(c), tmp_path)
    h, table = read_csv_table(tmp_path / "trajectory_trajectory.csv")
    assert h == c.config_hash
    assert table.columns == ["replicate", "n", "vertex", "degree"]
    assert len(table.rows) == 3 * 3 * 7


def test_missing_directory_named(tmp_path):
    rep = run_replicates(cfg())
    missing = tmp_path / "nope"
    with pytest.raises(ReportIOError, match=str(missing)):
        emit_report(rep, missing)


def test_non_finite_values_serialize_as_null():
    rep = Report("x", {}, "h", {"a": float("inf"), "b": np.float64(1.5), "c": np.int64(2)}, {}, {}, "0", "s")
    assert json.loads(rep.to_json())["summary"] == {"a": None, "b": 1.5, "c": 2}


def test_every_report_carries_lambda_star():
    rep = run_replicates(cfg())
    assert set(rep.lambda_star) >= {"lambda_star", "rho_hat_at_root", "series_terms_used"}


# -- statistics ------------------------------------------------------------------


def test_chi_square_outside_support_is_decisive():
    exact = ExactModelDistribution(3, 1, ModelVariant.INVERSE,
                                   {(3, 1, 1): Fraction(1, 3), (2, 2, 1): Fraction(2, 3)}, 2)
    ok = chi_square_against({(3, 1, 1): 330, (2, 2, 1): 670}, exact)
    assert ok.p_value > 0.1
    bad = chi_square_against({(3, 1, 1): 330, (2, 2, 1): 669, (1, 3, 1): 1}, exact)
    assert bad.p_value == 0 and bad.outside_support == 1


def test_small_helpers():
    r = np.random.default_rng(0)
    x = r.standard_normal(20_000)
    assert ks_normal(x) < 0.02
    assert ks_normal(x + 1) > 0.3
    est = mean_estimate(x)
    assert est.se == pytest.approx(1 / math.sqrt(20_000), rel=0.05)
    # var of the sample variance of N(0,1) is 2/(n-1)
    assert variance_se(x) == pytest.approx(math.sqrt(2 / 20_000), rel=0.1)
    assert total_variation(np.array([0.5, 0.5]), np.array([1.0])) == pytest.approx(0.5)


# -- estimators ------------------------------------------------------------------


def test_clt_rejects_inverse():
    with pytest.raises(ValueError):
        run_replicates(cfg(statistic="clt", variant="inverse"))


def test_size_biased_needs_m1_and_sums_to_one():
    with pytest.raises(ValueError):
        run_replicates(cfg(statistic="size_biased", m=2))
    for variant in ModelVariant:
        rep = run_replicates(cfg(statistic="size_biased", variant=variant, replicates=20, n_target=2000))
        assert rep.summary["by_checkpoint"][0]["max_total"] <= 1 + 1e-12
        first = rep.tables["size_biased"].rows[0]
        cols = rep.tables["size_biased"].columns
        # RB and naive estimators agree within noise
        rb, naive, naive_se = (first[cols.index(c)] for c in ("estimate", "naive_estimate", "naive_se"))
        assert abs(rb - naive) < 5 * naive_se


def test_degree_dist_oracle_at_tiny_n():
    # n = 4: mean of P_k over many replicates equals E[N_k(4)]/4 = (27, 22, 10, 1)/60
    rep = run_replicates(cfg(statistic="degree_dist", n_target=4, replicates=4000))
    rows = rep.tables["degree_dist"].rows
    cols = rep.tables["degree_dist"].columns
    oracle = [r[cols.index("oracle")] for r in rows]
    assert oracle == pytest.approx([27 / 60, 22 / 60, 10 / 60, 1 / 60])
    assert rep.summary["by_checkpoint"][0]["max_abs_oracle_z"] < 4


def test_degree_dist_m2_asserts_no_limit():
    rep = run_replicates(cfg(statistic="degree_dist", m=2, replicates=3))
    assert rep.summary["limit_asserted"] is False
    assert "max_abs_dev" not in rep.summary["by_checkpoint"][0]


def test_embedding_equivalence_guards():
    with pytest.raises(ValueError):
        run_replicates(cfg(statistic="embedding_equiv", variant="linear", n_target=4))
    with pytest.raises(ValueError):
        run_replicates(cfg(statistic="embedding_equiv", variant="inverse", n_target=6))


def test_embedding_equivalence_small():
    rep = run_replicates(cfg(statistic="embedding_equiv", variant="inverse", n_target=4, m=2,
                             replicates=60_000))
    s = rep.summary
    assert s["graph"]["p_value"] > 1e-4 and s["embedding"]["p_value"] > 1e-4
    assert s["corrupt"]["rejected"]
    counts = np.array([r[4:] for r in rep.tables["frequencies"].rows])
    assert counts.sum(axis=0).tolist() == [60_000] * 3


def test_normalizer_report():
    rep = run_replicates(cfg(statistic="normalizer", variant="inverse", m=2, n_target=400,
                             checkpoints=(10, 400), tracked_vertices=(1, 2), replicates=3))
    assert rep.summary["b_bounds_hold"] and rep.summary["C_bounds_hold"]
    assert len(rep.tables["embedding"].rows) == 3 * 2 * 2


# -- CLI -------------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["lambda-star"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"lambda_star", "rho_hat_at_root", "series_terms_used"}
    with pytest.raises(SystemExit) as exc:
        main(["grow", "--no-such-flag"])
    assert exc.value.code == 1
    assert main(["grow", "--n", "10", "--out", str(tmp_path / "missing")]) == 1
    assert main(["clt", "--model", "inverse", "--n", "10"]) == 1
    assert main(["verify", "nosuchsuite"]) == 1
    assert main(["verify", "4"]) == 0


def test_cli_verify_failure_exit_code(monkeypatch):
    from depref.harness import verify
    monkeypatch.setitem(verify.CRITERIA, 4, ("forced", lambda seed, workers: [verify.Check("x", False)]))
    assert main(["verify", "4"]) == 2


def test_cli_config_file_with_override(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "inverse", "n": 500, "replicates": 2, "seed": 4}))
    assert main(["degree-dist", "--config", str(path), "--n", "200"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["config"]["variant"] == "inverse" and rep["config"]["n_target"] == 200


def test_cli_embed_and_oracle_csv(tmp_path, capsys):
    assert main(["embed", "--n", "50", "--checkpoints", "10,50", "--track", "1", "--replicates", "2",
                 "--out", str(tmp_path), "--format", "csv"]) == 0
    _, table = read_csv_table(tmp_path / "normalizer_embedding.csv")
    assert table.columns == ["replicate", "n", "tau_n", "vertex", "count"]
    assert len(table.rows) == 4
    capsys.readouterr()
    assert main(["oracle", "--n", "4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n,vertex,expected_degree,variance_bound"
    assert lines[-1].startswith("4,1,2.6")
    assert main(["oracle", "--table", "nk", "--n", "3"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "n,k,expected_Nk,epsilon_k"


def test_cli_report_reemit(tmp_path, capsys):
    assert main(["trajectory", "--n", "100", "--replicates", "2", "--out", str(tmp_path)]) == 0
    out = tmp_path / "again"
    out.mkdir()
    assert main(["report", str(tmp_path / "trajectory.json"), "--out", str(out)]) == 0
    assert (out / "trajectory.json").read_bytes() == (tmp_path / "trajectory.json").read_bytes()
