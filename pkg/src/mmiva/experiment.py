"""Experiment driver: trial synthesis, convergence logging and runtime scaling."""

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .contrast import EPS
from .core import frame_norms
from .evaluation import evaluate_delta_sdr, initial_sdr, mdp_rescale
from .exceptions import ConfigError, LengthMismatch, ShapeMismatch
from .mm import SOLVERS, SolverConfig, check_solver, inner_pass, separate
from .signals import (
    DEFAULT_SAMPLE_RATE,
    MixingScenario,
    StftConfig,
    TimeSignal,
    istft,
    mix_convolutive,
    sample_modulated_sources,
    sample_sources,
    source_images,
    spectrogram_stack,
)
from .wavio import read_wav, write_wav

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "Trial",
    "make_trial",
    "load_trial",
    "run_trial",
    "run_experiment",
    "bench",
    "iterations_to_fraction",
    "ScalingResult",
    "scaling_bench",
]

SOURCE_KINDS = ("modulated", "iid")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run.

    A synthetic scenario is used unless ``mixture_path`` names a WAV file;
    ``reference_path`` (per-source images at the first channel) enables
    the SDR columns for WAV input.
    """

    solver: SolverConfig = field(default_factory=SolverConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    m: int = 4
    n_taps: int = 8
    duration: float = 10.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    source: str = "modulated"
    segment: int = 4096
    trials: int = 1
    seed: int = 0
    mixture_path: Optional[str] = None
    reference_path: Optional[str] = None
    scenario_path: Optional[str] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trial count must be at least 1")
        if self.m < 1 or self.n_taps < 1 or self.duration <= 0 or self.sample_rate <= 0:
            raise ConfigError("m, n_taps, duration and sample_rate must be positive")
        if self.source not in SOURCE_KINDS:
            raise ConfigError(f"source must be one of {SOURCE_KINDS}, got {self.source!r}")
        for path in (self.mixture_path, self.reference_path, self.scenario_path):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"file not found: {path}")

    @property
    def length(self):
        return int(round(self.duration * self.sample_rate))

    def to_dict(self):
        d = asdict(self)
        d["solver"] = asdict(self.solver)
        d["stft"] = self.stft.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        try:
            solver = SolverConfig(**d.pop("solver", {}))
            stft = StftConfig(**d.pop("stft", {}))
            return cls(solver=solver, stft=stft, **d)
        except TypeError as err:
            raise ConfigError(f"malformed configuration: {err}") from err

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except OSError as err:
            raise ConfigError(f"cannot read configuration {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def _fmt(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


@dataclass
class RunRecord:
    """Per-iteration log of one solver run; row 0 is the initialization."""

    solver: str
    m: int
    n: int
    K: int
    seed: int
    cost: List[float] = field(default_factory=list)
    delta_sdr_db: List[float] = field(default_factory=list)
    ms: List[float] = field(default_factory=list)
    final_delta: List[float] = field(default_factory=list)

    COLUMNS = ("iter", "cost", "delta_sdr_db", "ms")

    def append(self, cost, delta, ms):
        self.cost.append(float(cost))
        self.delta_sdr_db.append(float(delta))
        self.ms.append(float(ms))

    def __len__(self):
        return len(self.cost)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.COLUMNS)
            for i, row in enumerate(zip(self.cost, self.delta_sdr_db, self.ms)):
                w.writerow([i] + [_fmt(v) for v in row])

    @staticmethod
    def read_csv(path):
        """Columns of a run CSV as a dict of float arrays (``inf``/``-inf``/``nan`` parsed)."""
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        return {c: np.array([float(r[c]) for r in rows]) for c in RunRecord.COLUMNS}

    def summary(self, fraction=0.9):
        return {
            "solver": self.solver,
            "m": self.m,
            "n": self.n,
            "K": self.K,
            "seed": self.seed,
            "iterations": len(self) - 1,
            "final_cost": self.cost[-1],
            "final_delta_sdr_db": self.delta_sdr_db[-1],
            "final_delta_per_source": list(self.final_delta),
            "iterations_to_fraction": iterations_to_fraction(self.delta_sdr_db, fraction),
            "mean_ms": float(np.mean(self.ms[1:])) if len(self) > 1 else 0.0,
        }


def iterations_to_fraction(curve, fraction=0.9):
    """First iteration at which ``curve`` reaches ``fraction`` of its final value.

    When the final value is not positive there is no improvement to scale,
    and the first iteration reaching the final value is returned instead.
    """
    c = np.asarray(curve, dtype=float)
    if c.size == 0:
        raise ValueError("empty curve")
    final = c[-1]
    target = fraction * final if final > 0 else final
    if math.isinf(target):
        target = final
    return int(np.argmax(c >= target))


class Trial(NamedTuple):
    """One mixture with its evaluation oracle."""

    X: np.ndarray
    mixture: TimeSignal
    references: Optional[TimeSignal]
    scenario: Optional[MixingScenario]
    seed: int


def _trial_seeds(seed, t):
    src, mix = np.random.SeedSequence([seed, t]).generate_state(2)
    return int(src), int(mix)


def make_trial(cfg, t=0):
    """Synthesize trial ``t``: sources, a random scenario, mixtures and references."""
    src_seed, mix_seed = _trial_seeds(cfg.seed, t)
    model = cfg.solver.model
    if cfg.source == "modulated":
        S = sample_modulated_sources(cfg.m, cfg.length, model, src_seed, cfg.segment, cfg.sample_rate)
    else:
        S = sample_sources(cfg.m, cfg.length, model, src_seed, cfg.sample_rate)
    if cfg.scenario_path is not None:
        scenario = MixingScenario.load(cfg.scenario_path)
        if scenario.m != cfg.m:
            raise ConfigError(f"scenario has m={scenario.m}, configuration has m={cfg.m}")
    else:
        scenario = MixingScenario.random(cfg.m, cfg.n_taps, mix_seed, sample_rate=cfg.sample_rate)
    x = mix_convolutive(S, scenario)
    refs = source_images(S, scenario, mic=0)
    return Trial(spectrogram_stack(x, cfg.stft), x, refs, scenario, src_seed)


def load_trial(cfg):
    """Trial from the WAV files named in ``cfg``."""
    x = read_wav(cfg.mixture_path)
    if x.samples.ndim != 2:
        raise ShapeMismatch("mixture must have at least two channels")
    refs = None
    if cfg.reference_path is not None:
        refs = read_wav(cfg.reference_path)
        if refs.samples.ndim == 1:
            refs = TimeSignal(refs.samples[None], refs.sample_rate)
        if refs.samples.shape != x.samples.shape:
            raise LengthMismatch(f"references {refs.samples.shape} do not match mixture {x.samples.shape}")
    return Trial(spectrogram_stack(x, cfg.stft), x, refs, None, cfg.seed)


def run_trial(trial, solver_cfg, stft_cfg=StftConfig(), keep_state=False):
    """Run one solver on a trial and log cost, mean ΔSDR and pass time per iteration.

    Returns:
        :class:`RunRecord`, or ``(RunRecord, final_state)`` when ``keep_state``.
    """
    K, m, n = trial.X.shape
    rec = RunRecord(solver_cfg.kind, m, n, K, trial.seed)
    refs = trial.references
    mix0 = trial.mixture.samples[0]
    s0 = initial_sdr(mix0, refs) if refs is not None else None
    last = {}

    def log(state):
        if refs is not None:
            res = evaluate_delta_sdr(state, refs, mix0, stft_cfg, sdr_initial=s0)
            last["delta"] = res.delta
            delta = float(np.mean(res.delta))
        else:
            delta = float("nan")
        rec.delta_sdr_db.append(delta)
        rec.ms.append(float(state.info.get("pass_ms", 0.0)))

    state = separate(
        trial.X,
        solver_cfg.kind,
        solver_cfg.iterations,
        solver_cfg.model,
        solver_cfg.eps,
        tol=solver_cfg.tol,
        callback=log,
    )
    rec.cost = [float(c) for c in state.info["cost"]]
    rec.final_delta = [float(v) for v in last.get("delta", [])]
    return (rec, state) if keep_state else rec


def separated_signals(state, stft_cfg, length):
    """Time-domain sources after MDP rescaling, ``(m, length)``."""
    return istft(np.swapaxes(mdp_rescale(state).Y, 0, 1), stft_cfg, length)


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_experiment(cfg, threads=1):
    """Run the configured solver on every trial and write the outputs.

    With ``cfg.out`` set, a single trial writes ``run.csv``, ``run.json`` and
    ``separated_<i>.wav``; several trials write ``run_<t>.csv`` per trial and
    a ``run.json`` summary.

    Returns:
        List of :class:`RunRecord`, one per trial.
    """
    check_solver(cfg.solver.kind, cfg.m if cfg.mixture_path is None else 2)

    def one(t):
        trial = load_trial(cfg) if cfg.mixture_path is not None else make_trial(cfg, t)
        check_solver(cfg.solver.kind, trial.X.shape[1])
        rec, state = run_trial(trial, cfg.solver, cfg.stft, keep_state=True)
        sep = separated_signals(state, cfg.stft, trial.mixture.samples.shape[-1]) if cfg.trials == 1 else None
        return rec, sep, trial.mixture.sample_rate

    trials = 1 if cfg.mixture_path is not None else cfg.trials
    results = _map(one, range(trials), threads)
    records = [r[0] for r in results]

    if cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)
        if len(records) == 1:
            records[0].to_csv(os.path.join(cfg.out, "run.csv"))
            _, sep, sr = results[0]
            for i, s in enumerate(sep):
                write_wav(os.path.join(cfg.out, f"separated_{i}.wav"), TimeSignal(s, sr))
        else:
            for t, rec in enumerate(records):
                rec.to_csv(os.path.join(cfg.out, f"run_{t:03d}.csv"))
        with open(os.path.join(cfg.out, "run.json"), "w") as f:
            json.dump(
                {"config": cfg.to_dict(), "runs": [r.summary() for r in records]},
                f,
                indent=2,
                default=_json_default,
            )
    return records


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(type(x))


def bench(cfg, solvers=SOLVERS, threads=1, fraction=0.9, progress=None):
    """Convergence study: every solver on the same synthetic trials.

    Args:
        cfg: :class:`ExperimentConfig`; ``cfg.solver`` supplies the iteration
            budget, ``beta`` and ``eps`` shared by all solvers.
        solvers: Solver ids to compare.
        threads: Trials run concurrently on this many threads.
        fraction: Level for :func:`iterations_to_fraction`.
        progress: Optional ``callable(t)`` called when trial ``t`` finishes.

    Returns:
        ``(records, summary)``: ``records[solver]`` lists one
        :class:`RunRecord` per trial; ``summary[solver]`` holds medians.
    """
    for s in solvers:
        check_solver(s, cfg.m)

    def one(t):
        trial = make_trial(cfg, t)
        out = {}
        for s in solvers:
            scfg = SolverConfig(s, cfg.solver.iterations, cfg.solver.beta, cfg.solver.eps, cfg.solver.seed, cfg.solver.tol)
            out[s] = run_trial(trial, scfg, cfg.stft)
        if progress is not None:
            progress(t)
        return out

    per_trial = _map(one, range(cfg.trials), threads)
    records = {s: [r[s] for r in per_trial] for s in solvers}
    summary = {}
    for s, recs in records.items():
        its = [iterations_to_fraction(r.delta_sdr_db, fraction) for r in recs]
        summary[s] = {
            "median_iterations_to_fraction": float(np.median(its)),
            "iterations_to_fraction": its,
            "median_final_delta_sdr_db": float(np.median([r.delta_sdr_db[-1] for r in recs])),
            "median_ms_per_iteration": float(np.median([np.mean(r.ms[1:]) for r in recs if len(r) > 1] or [0.0])),
        }

    if cfg.out is not None:
        for s, recs in records.items():
            d = os.path.join(cfg.out, s)
            os.makedirs(d, exist_ok=True)
            for t, rec in enumerate(recs):
                rec.to_csv(os.path.join(d, f"run_{t:03d}.csv"))
        with open(os.path.join(cfg.out, "bench.json"), "w") as f:
            json.dump({"config": cfg.to_dict(), "fraction": fraction, "summary": summary}, f, indent=2)
    return records, summary


class ScalingResult(NamedTuple):
    """Raw pass timings ``times[solver]`` of shape ``(len(m_list), reps)`` in ms."""

    m_list: tuple
    n: int
    K: int
    times: dict
    slopes: dict

    def fitted_ms(self, solver):
        return self.times[solver].min(axis=1)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["solver", "m", "n", "K", "rep", "ms"])
            for s, t in self.times.items():
                for i, m in enumerate(self.m_list):
                    for r, v in enumerate(t[i]):
                        w.writerow([s, m, self.n, self.K, r, repr(float(v))])


def _bench_problem(rng, K, m, n):
    X = rng.normal(size=(K, m, n)) + 1j * rng.normal(size=(K, m, n))
    lam = rng.uniform(0.5, 2.0, size=(m, n))
    return X, lam


def scaling_bench(m_list=(8, 16, 32, 64), n=256, K=8, reps=7, solvers=("iss1", "iss2", "ip2"), seed=0, warmup=1):
    """Per-pass wall time of each solver against ``m`` and its log-log slope.

    Repetitions are interleaved over ``m`` and solvers so slow phases of the
    machine spread across all configurations. The slope is fitted to the
    minimum time over repetitions, the estimate least affected by
    scheduler noise.

    Raises:
        ConfigError: fewer than two ``m`` values, or a span below 8x.
    """
    m_list = tuple(int(m) for m in m_list)
    if len(m_list) < 2 or max(m_list) < 8 * min(m_list):
        raise ConfigError("m values must span at least a factor of 8")
    for s in solvers:
        for m in m_list:
            check_solver(s, m)
    rng = np.random.default_rng(seed)
    problems = {m: _bench_problem(rng, K, m, n) for m in m_list}
    eye = {m: np.broadcast_to(np.eye(m, dtype=np.complex128), (K, m, m)) for m in m_list}
    times = {s: np.zeros((len(m_list), reps)) for s in solvers}
    for r in range(warmup + reps):
        for i, m in enumerate(m_list):
            X, lam = problems[m]
            for s in solvers:
                W, Y = eye[m].copy(), X.copy()
                t0 = time.perf_counter()
                inner_pass(s, X, W, Y, lam)
                dt = (time.perf_counter() - t0) * 1e3
                if r >= warmup:
                    times[s][i, r - warmup] = dt
    logm = np.log(m_list)
    slopes = {s: float(np.polyfit(logm, np.log(t.min(axis=1)), 1)[0]) for s, t in times.items()}
    return ScalingResult(m_list, n, K, times, slopes)
