from __future__ import annotations

import csv
import json
from fractions import Fraction

import numpy as np
import pytest

from nsbc.harness import (SCHEMA_VERSION, ConfigError, ExperimentConfig, ScriptedRng,
                          compare_same_marginals, enumerate_outcomes, run_experiment, trial_rng,
                          worker_count)

PATH4 = {"network": "path", "K": 4}


def test_zero_errors_on_path4():
    rec = run_experiment(ExperimentConfig("ns-successive", PATH4, "GF(5)", trials=2000, seed=7))
    assert rec.error_counts == [0, 0, 0, 0]
    assert rec.rate_bits == pytest.approx([np.log2(5)] * 4)
    assert rec.schema == SCHEMA_VERSION


def test_same_config_same_record():
    cfg = ExperimentConfig("naive", PATH4, "GF(3)", trials=300, seed=11)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.dumps() == b.dumps()
    assert a.digest() == b.digest()
    assert "wall_time" not in a.to_json()
    c = run_experiment(ExperimentConfig("naive", PATH4, "GF(3)", trials=300, seed=12))
    assert c.config_hash != a.config_hash


def test_serial_and_parallel_records_agree():
    cfg = ExperimentConfig("tdma", PATH4, "GF(4)", trials=40, seed=3, n=8, d=[0.25] * 4)
    serial = run_experiment(cfg, workers=1)
    split = run_experiment(cfg, workers=3)
    assert serial.dumps() == split.dumps()
    cfg = ExperimentConfig("naive-blind", {"network": "full", "K": 2}, "GF(3)", trials=50, seed=1)
    assert run_experiment(cfg, workers=1).dumps() == run_experiment(cfg, workers=2).dumps()


def test_trial_streams_are_reproducible_individually():
    a = trial_rng(5, 17).integers(1 << 30, size=4)
    b = trial_rng(5, 17).integers(1 << 30, size=4)
    c = trial_rng(5, 18).integers(1 << 30, size=4)
    assert a.tolist() == b.tolist() != c.tolist()


def test_tdma_on_full_pattern_is_a_config_error():
    with pytest.raises(ConfigError) as e:
        run_experiment(ExperimentConfig("tdma", {"network": "full", "K": 3}, "GF(3)", d=[0.1] * 3))
    assert not e.value.usage


@pytest.mark.parametrize("kwargs,usage", [
    (dict(scheme="bogus"), True),
    (dict(scheme="ns-successive", channel=PATH4), True),  # no field
    (dict(scheme="ns-successive", channel={"network": "full", "K": 2}, field="GF(3)"), False),
    (dict(scheme="tdma", channel=PATH4, field="GF(3)"), True),  # no d
    (dict(scheme="tdma", channel=PATH4, field="GF(3)", d=[0.5] * 4), False),
    (dict(scheme="gaussian", channel=PATH4), True),
    (dict(scheme="mac-convert", channel={"f": "cube"}, field="GF(3)"), True),
    (dict(scheme="naive", channel={"shape": "blob"}, field="GF(3)"), True),
    (dict(scheme="naive", channel=PATH4, field="GF(3)", trials=0), True),
])
def test_config_errors(kwargs, usage):
    with pytest.raises(ConfigError) as e:
        run_experiment(ExperimentConfig(**kwargs))
    assert e.value.usage is usage


@pytest.mark.parametrize("scheme,channel,extra", [
    ("ns-multipartite", {"pattern": ["*00", "**0", "0**"]}, {}),
    ("fading-dirt", {}, {}),
    ("ns-toy1", {}, {}),
    ("ns-toy2", {}, {}),
    ("mac-convert", {"K": 3, "f": "product"}, {}),
    ("tdma", {"tree": {"parent": {"1": 0, "2": 1}, "rx_assoc": [1, 2]}}, {"d": [0.5, 0.5], "n": 4}),
])
def test_every_zero_error_scheme_runs(scheme, channel, extra):
    rec = run_experiment(ExperimentConfig(scheme, channel, "GF(3)", trials=50, seed=2, **extra))
    assert sum(rec.error_counts) == 0


def test_gaussian_through_the_harness():
    cfg = ExperimentConfig("gaussian", {"network": "path", "K": 3, "noise": False}, power=100.0,
                           n=200, trials=3)
    rec = run_experiment(cfg)
    assert rec.error_counts == [0, 0, 0]
    assert rec.rate_bits == pytest.approx([np.log2(10)] * 3)


def test_out_and_csv(tmp_path):
    out, table = tmp_path / "run.json", tmp_path / "rows.csv"
    cfg = ExperimentConfig("naive", {"network": "path", "K": 2}, "GF(3)", trials=20, seed=4,
                           out=str(out), csv=str(table))
    rec = run_experiment(cfg)
    data = json.loads(out.read_text())
    assert data["config_hash"] == rec.config_hash == cfg.hash()
    assert data["schema"] == SCHEMA_VERSION
    # where the output goes is not part of the config identity
    assert "out" not in data["config"] and "csv" not in data["config"]
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["trial", "error_1", "error_2"]
    assert len(rows) == 21
    assert sum(int(r[2]) for r in rows[1:]) == rec.error_counts[1]
    again = ExperimentConfig.from_json(json.dumps(data["config"]))
    assert again.hash() == rec.config_hash


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("NSBC_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("NSBC_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_scripted_rng_enumerates_uniform_branches():
    def two_dice(rng):
        return int(rng.integers(1, 4)) + int(rng.integers(3))
    out = enumerate_outcomes(two_dice)
    assert len(out) == 9
    assert all(p == Fraction(1, 9) for p, _ in out)
    assert sorted(v for _, v in out) == [1, 2, 2, 3, 3, 3, 4, 4, 5]
    # branch count can depend on earlier choices
    out = enumerate_outcomes(lambda rng: rng.integers(2) and rng.integers(2))
    assert sorted(p for p, _ in out) == [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)]
    with pytest.raises(TypeError):
        ScriptedRng([]).standard_normal()
    with pytest.raises(ConfigError):
        enumerate_outcomes(lambda rng: rng.integers(10, size=3), limit=100)


def test_identity_coupling_gives_zero_difference():
    cfg = ExperimentConfig("naive-blind", {"network": "full", "K": 2}, "GF(3)", trials=500, seed=9)
    rec = compare_same_marginals(cfg, "mc", gbar="draw", lam=[1, 1])
    assert rec.exact_match
    assert rec.error_original == rec.error_coupled
    with pytest.raises(ConfigError):
        compare_same_marginals(cfg, "mc", gbar="ones")


def test_random_lambda_within_three_sigma():
    cfg = ExperimentConfig("naive-blind", {"network": "full", "K": 2}, "GF(3)", trials=20000, seed=2)
    rec = compare_same_marginals(cfg, "mc")
    assert rec.within_band
    assert max(rec.sigma) > 0
    assert rec.to_json()["within_3sigma"] is True


def test_exhaustive_comparison_is_exact():
    for scheme in ("naive-blind", "ns-successive"):
        cfg = ExperimentConfig(scheme, {"network": "path", "K": 2}, "GF(3)")
        rec = compare_same_marginals(cfg, "exhaustive")
        assert rec.exact_match
        assert rec.error_original == rec.error_coupled
    # naive without CSIR errs at Rx-1 whenever G_11 = 2 and W_1 != 0
    assert rec.mode == "exhaustive"
    cfg = ExperimentConfig("naive-blind", {"network": "path", "K": 2}, "GF(3)")
    rec = compare_same_marginals(cfg, "exhaustive")
    assert rec.error_original[0] == Fraction(1, 2) * Fraction(2, 3)
    assert json.loads(json.dumps(rec.to_json()))["difference"] == ["0", "0"]


def test_comparison_rejects_other_schemes():
    with pytest.raises(ConfigError):
        compare_same_marginals(ExperimentConfig("tdma", PATH4, "GF(3)", d=[0.25] * 4))
    with pytest.raises(ConfigError):
        compare_same_marginals(ExperimentConfig("naive", PATH4, "GF(3)"), mode="quantum")
