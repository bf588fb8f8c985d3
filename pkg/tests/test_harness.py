import copy
import json
import math

import numpy as np
import pytest

from seqbandit.harness import (
    CSV_COLUMNS, CellSummary, ConfigError, ExperimentConfig, emit_csv, lower_bound_curve, read_csv, run_campaign,
    run_cell, summarize,
)
from seqbandit.policy import TrialRecord

from conftest import CONFIGS


def small_raw(**over):
    raw = json.loads((CONFIGS / "odd_mean.json").read_text())
    raw.update(grid={"log_L": [1.0, 2.0], "gamma": [1.0, 0.5], "beta": [0.5]}, trials=8)
    raw.update(over)
    return raw


def test_shipped_configs_load():
    for name in ("odd_mean", "odd_variance", "odd_mean_variance"):
        cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
        assert cfg.K == 8 and cfg.true_hypothesis() == 0
        assert cfg.trials == 500


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r.pop("trials"),
        lambda r: r.update(trials=0),
        lambda r: r.update(bogus=1),
        lambda r: r.update(true_natural=r["true_expectation"]),
        lambda r: r["grid"].update(gamma=[0.0]),
        lambda r: r["grid"].update(beta=[1.0]),
        lambda r: r["structure"].update(family="cauchy"),
        lambda r: r.update(true_expectation=[[1.0]] * 8),
        lambda r: r.update(prior={"n0": 1.0, "kappa_ref": [0.0, 1.0]}),
        lambda r: r["structure"].update(K=2),
    ],
)
def test_bad_configs_rejected(mutate):
    raw = small_raw()
    mutate(raw)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict(small_raw())
    again = ExperimentConfig.from_dict(cfg.to_dict())
    np.testing.assert_array_equal(again.true_natural, cfg.true_natural)
    assert again.cells() == cfg.cells()


def test_summary_statistics():
    recs = [TrialRecord(tau=t, delta=0 if t != 7 else 1, cost=t + 2.0, switches=2, correct=t != 7) for t in (5, 7, 9, 11)]
    s = summarize(recs, 1.0, 0.5, 0.5, 3.0)
    assert s.mean_tau == 8.0 and s.mean_cost == 10.0
    assert s.se_tau == pytest.approx(np.std([5, 7, 9, 11], ddof=1) / 2)
    assert s.err_rate == 0.25 and s.trials == 4 and s.censored == 0


def test_censored_trials_excluded_with_warning():
    recs = [TrialRecord(tau=5, delta=0, cost=6.0, switches=1, correct=True),
            TrialRecord(tau=50, delta=None, cost=60.0, switches=9, correct=False, censored=True)]
    with pytest.warns(RuntimeWarning):
        s = summarize(recs, 1.0, 1.0, 0.5, 1.0)
    assert s.mean_tau == 5.0 and s.censored == 1 and s.err_rate == 0.0


def test_emit_and_read_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(small_raw())
    sums = run_campaign(cfg, jobs=1)
    path = tmp_path / "out.csv"
    emit_csv(sums, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert all(len(line.split(",")) == 9 for line in lines)
    rows = read_csv(path)
    keys = [(r["beta"], r["gamma"], r["logL"]) for r in rows]
    assert keys == sorted(keys)
    by_key = {(s.beta, s.gamma, s.logL): s for s in sums}
    for r in rows:
        s = by_key[(r["beta"], r["gamma"], r["logL"])]
        for c in CSV_COLUMNS:
            assert r[c] == getattr(s, c)


def test_empty_summary_list(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_campaign_deterministic_and_parallel_invariant(tmp_path):
    cfg = ExperimentConfig.from_dict(small_raw())
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    emit_csv(run_campaign(cfg, jobs=1), a)
    emit_csv(run_campaign(cfg, jobs=1), b)
    emit_csv(run_campaign(cfg, jobs=2), c)
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_single_trial_cell_reproducible():
    cfg = ExperimentConfig.from_dict(small_raw(trials=1))
    s1 = run_cell(cfg, 2.0, 1.0, 0.5)
    s2 = run_cell(cfg, 2.0, 1.0, 0.5)
    assert s1 == s2 and s1.trials == 1 and s1.se_tau == 0.0


def test_lower_bound_column():
    cfg = ExperimentConfig.from_dict(small_raw(trials=1))
    s = run_cell(cfg, 5.0, 1.0, 0.5)
    assert s.lower_bound == pytest.approx(43.26, abs=0.01)


def test_lower_bound_curve():
    rows = lower_bound_curve(0.11555580955, 5.0, 1.0)
    assert [x for x, _ in rows] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert rows[0][1] == 0.0
    assert rows[-1][1] == pytest.approx(43.27, abs=0.01)


def test_cell_failure_does_not_abort(monkeypatch):
    import seqbandit.harness as h
    from seqbandit.oracle import NonConvergenceError

    def boom(*a, **k):
        raise NonConvergenceError("forced")

    cfg = ExperimentConfig.from_dict(small_raw())
    monkeypatch.setattr(h, "_run_cell", boom)
    sums = run_campaign(cfg, jobs=1)
    assert len(sums) == 4 and all(s.error and "forced" in s.error for s in sums)
    assert all(math.isnan(s.mean_tau) for s in sums)


@pytest.mark.slow
def test_campaign_slope(campaign):
    L = np.arange(6)
    tau = np.array([campaign[(l, 1.0, 0.5)].mean_tau for l in L])
    slope = np.polyfit(L, tau, 1)[0]
    assert abs(slope - 10.6) <= 0.15 * 10.6, slope
