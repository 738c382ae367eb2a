import json
import math
import time

import numpy as np
import pytest

from conftest import random_problem
from mmiva.exceptions import ConfigError
from mmiva.experiment import (
    ExperimentConfig,
    RunRecord,
    bench,
    iterations_to_fraction,
    load_trial,
    make_trial,
    run_experiment,
    run_trial,
    scaling_bench,
)
from mmiva.mm import SOLVERS, SolverConfig, inner_pass
from mmiva.signals import MixingScenario, StftConfig
from mmiva.wavio import read_wav, write_wav


def small_config(tmp_path=None, **kw):
    base = dict(
        solver=SolverConfig("iss2", iterations=6),
        stft=StftConfig(1024, 256),
        m=2,
        duration=2.0,
        out=str(tmp_path) if tmp_path is not None else None,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = small_config(tmp_path, trials=3, seed=11)
        path = tmp_path / "cfg.json"
        cfg.save(path)
        assert ExperimentConfig.load(path) == cfg

    @pytest.mark.parametrize(
        "kw",
        [
            {"trials": 0},
            {"m": 0},
            {"duration": -1.0},
            {"source": "speech"},
            {"mixture_path": "/does/not/exist.wav"},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            small_config(**kw)

    def test_malformed_dict(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"solver": {"kind": "iss2"}, "unknown_field": 1})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"solver": {"kind": "iss3"}})

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("[")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(bad)


class TestRunRecord:
    def test_csv_round_trip_with_sentinels(self, tmp_path):
        rec = RunRecord("iss2", 2, 10, 5, 0)
        for c, d, t in [(3.0, -math.inf, 0.0), (2.5, 1.25, 0.4), (2.0, math.inf, 0.3)]:
            rec.append(c, d, t)
        path = tmp_path / "r.csv"
        rec.to_csv(path)
        text = path.read_text().splitlines()
        assert text[0] == "iter,cost,delta_sdr_db,ms"
        assert "-inf" in text[1] and text[3].split(",")[2] == "inf"
        cols = RunRecord.read_csv(path)
        np.testing.assert_array_equal(cols["iter"], [0, 1, 2])
        np.testing.assert_array_equal(cols["delta_sdr_db"], [-math.inf, 1.25, math.inf])
        np.testing.assert_array_equal(cols["cost"], rec.cost)


class TestIterationsToFraction:
    def test_rising_curve(self):
        assert iterations_to_fraction([0.0, 5.0, 9.0, 10.0]) == 2

    def test_reaches_at_start(self):
        assert iterations_to_fraction([10.0, 10.0]) == 0

    def test_non_positive_final(self):
        assert iterations_to_fraction([-4.0, -1.0, -3.0, -2.0]) == 1

    def test_overshoot(self):
        assert iterations_to_fraction([0.0, 12.0, 10.0, 10.0]) == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            iterations_to_fraction([])


class TestRuns:
    def test_single_run_outputs(self, tmp_path):
        cfg = small_config(tmp_path)
        rec = run_experiment(cfg)[0]
        assert len(rec) == 7
        assert np.all(np.diff(rec.cost) <= 1e-9 * np.abs(rec.cost[:-1]))
        assert rec.final_delta and rec.delta_sdr_db[-1] > 0
        cols = RunRecord.read_csv(tmp_path / "run.csv")
        np.testing.assert_array_equal(cols["cost"], rec.cost)
        summary = json.loads((tmp_path / "run.json").read_text())
        assert summary["config"]["solver"]["kind"] == "iss2"
        assert summary["runs"][0]["iterations"] == 6
        for i in range(2):
            sep = read_wav(tmp_path / f"separated_{i}.wav")
            assert sep.samples.shape == (cfg.length,)

    def test_deterministic(self, tmp_path):
        runs = []
        for sub in ("a", "b"):
            cfg = small_config(tmp_path / sub, seed=4)
            run_experiment(cfg)
            runs.append(RunRecord.read_csv(tmp_path / sub / "run.csv"))
        # wall-clock column excluded
        for col in ("iter", "cost", "delta_sdr_db"):
            np.testing.assert_array_equal(runs[0][col], runs[1][col])

    def test_threads_do_not_change_results(self):
        cfg = small_config(trials=2)
        a = run_experiment(cfg, threads=1)
        b = run_experiment(cfg, threads=2)
        for ra, rb in zip(a, b):
            assert ra.cost == rb.cost and ra.delta_sdr_db == rb.delta_sdr_db

    def test_multi_trial_files(self, tmp_path):
        run_experiment(small_config(tmp_path, trials=2))
        assert (tmp_path / "run_000.csv").exists() and (tmp_path / "run_001.csv").exists()

    def test_wav_input(self, tmp_path):
        trial = make_trial(small_config())
        write_wav(tmp_path / "mix.wav", trial.mixture)
        write_wav(tmp_path / "ref.wav", trial.references)
        cfg = small_config(
            tmp_path / "out", mixture_path=str(tmp_path / "mix.wav"), reference_path=str(tmp_path / "ref.wav")
        )
        loaded = load_trial(cfg)
        np.testing.assert_allclose(loaded.X, trial.X, atol=1e-5)
        rec = run_experiment(cfg)[0]
        assert np.isfinite(rec.delta_sdr_db[-1])

    def test_near_identity_mixing_does_not_hurt(self, tmp_path):
        # exact identity filters leave zero reference images, so a 10% cross-talk system stands in
        taps = np.eye(2)[..., None] + 0.1 * np.array([[0, 1], [-1, 0]])[..., None]
        path = tmp_path / "scenario.json"
        MixingScenario(taps).save(path)
        cfg = small_config(duration=5.0, scenario_path=str(path), stft=StftConfig())
        trial = make_trial(cfg)
        for s in SOLVERS:
            rec = run_trial(trial, SolverConfig(s, 20), cfg.stft)
            assert min(rec.final_delta) >= -0.5

    def test_bench(self, tmp_path):
        cfg = small_config(tmp_path, trials=2, m=4)
        records, summary = bench(cfg, ("iss1", "iss2", "ip2"))
        assert set(summary) == {"iss1", "iss2", "ip2"}
        for s, recs in records.items():
            assert len(recs) == 2
            assert (tmp_path / s / "run_001.csv").exists()
            assert len(summary[s]["iterations_to_fraction"]) == 2
        assert json.loads((tmp_path / "bench.json").read_text())["fraction"] == 0.9


class TestScaling:
    def test_small_grid(self, tmp_path):
        res = scaling_bench(m_list=(2, 4, 16), n=32, K=2, reps=2, solvers=("iss1", "ip2"))
        assert set(res.slopes) == {"iss1", "ip2"}
        assert res.times["iss1"].shape == (3, 2)
        res.to_csv(tmp_path / "s.csv")
        assert len((tmp_path / "s.csv").read_text().splitlines()) == 1 + 2 * 3 * 2

    def test_span_required(self):
        with pytest.raises(ConfigError):
            scaling_bench(m_list=(4, 8))

    def test_time_linear_in_bins(self):
        rng = np.random.default_rng(0)
        m, n, reps = 4, 256, 9
        problems = {K: random_problem(rng, K, m, n) for K in (64, 128)}
        best = {K: np.inf for K in problems}
        for _ in range(reps):
            for K, (X, lam) in problems.items():
                W = np.broadcast_to(np.eye(m, dtype=complex), (K, m, m)).copy()
                Y = X.copy()
                t0 = time.perf_counter()
                inner_pass("iss2", X, W, Y, lam)
                best[K] = min(best[K], time.perf_counter() - t0)
        assert 0.75 <= best[128] / (2 * best[64]) <= 1.25
