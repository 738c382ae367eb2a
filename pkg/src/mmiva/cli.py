"""Command-line interface: ``synth``, ``separate``, ``bench`` and ``scaling``."""

import argparse
import json
import os
import sys

from . import exceptions as exc
from .experiment import ExperimentConfig, bench, make_trial, run_experiment, scaling_bench
from .mm import SOLVERS
from .wavio import write_wav

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NUMERIC = (
    exc.NotPositiveDefinite,
    exc.SingularMatrix,
    exc.ConvergenceFailure,
    exc.NumericalBreakdown,
    exc.DomainError,
)
_IO = (exc.IoFailure, exc.UnsupportedFormat, exc.CorruptHeader)


def exit_code(err):
    """Process exit status for an exception raised by a subcommand."""
    if isinstance(err, (exc.ConfigError, exc.OddChannelCount, exc.IndivisibleBlock)):
        return EXIT_CONFIG
    if isinstance(err, _NUMERIC):
        return EXIT_NUMERIC
    if isinstance(err, _IO) or isinstance(err, OSError):
        return EXIT_IO
    return EXIT_ERROR


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--solver", choices=SOLVERS, help="inner solver (default: iss2)")
    p.add_argument("--iters", type=int, help="MM iteration budget")
    p.add_argument("--beta", type=float, help="generalized Gaussian shape, 0 < beta < 2")
    p.add_argument("--eps", type=float, help="weight stabilizer")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="trials run concurrently")
    return p


def _scenario():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--m", type=int, help="number of sources and channels")
    p.add_argument("--taps", type=int, help="FIR filter length")
    p.add_argument("--duration", type=float, help="signal length in seconds")
    p.add_argument("--source", choices=("modulated", "iid"), help="source process")
    return p


def build_parser():
    common = _common()
    scenario = _scenario()
    parser = argparse.ArgumentParser(prog="mmiva", description="MM-based independent vector analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common, scenario], help="generate a scenario and its mixtures")

    p = sub.add_parser("separate", parents=[common, scenario], help="run one solver and write the separated sources")
    p.add_argument("--input", help="multichannel mixture WAV (default: synthesize)")
    p.add_argument("--references", help="per-source images at the first channel, for SDR logging")

    p = sub.add_parser("bench", parents=[common, scenario], help="convergence study over an ensemble of trials")
    p.add_argument("--trials", type=int, help="number of trials")
    p.add_argument("--solvers", default=",".join(SOLVERS), help="comma-separated solver list")

    p = sub.add_parser("scaling", parents=[common], help="per-iteration time against the channel count")
    p.add_argument("--m-list", default="8,16,32,64", help="comma-separated channel counts")
    p.add_argument("--n", type=int, default=256, help="frames")
    p.add_argument("--K", type=int, default=8, help="frequency bins")
    p.add_argument("--reps", type=int, default=7, help="timed repetitions")
    p.add_argument("--solvers", default="iss1,iss2,ip2", help="comma-separated solver list")
    return parser


def load_config(args):
    """Configuration file (if any) overridden by explicit flags."""
    d = ExperimentConfig().to_dict()
    if args.config:
        d = ExperimentConfig.load(args.config).to_dict()
    solver = d["solver"]
    for flag, key in (("solver", "kind"), ("iters", "iterations"), ("beta", "beta"), ("eps", "eps"), ("seed", "seed")):
        v = getattr(args, flag, None)
        if v is not None:
            solver[key] = v
    for flag, key in (
        ("seed", "seed"),
        ("out", "out"),
        ("m", "m"),
        ("taps", "n_taps"),
        ("duration", "duration"),
        ("source", "source"),
        ("trials", "trials"),
        ("input", "mixture_path"),
        ("references", "reference_path"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    return ExperimentConfig.from_dict(d)


def _solvers(text):
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SOLVERS]
    if bad or not names:
        raise exc.ConfigError(f"unknown solvers {bad}; choose from {SOLVERS}")
    return tuple(names)


def cmd_synth(args, out):
    cfg = load_config(args)
    if cfg.out is None:
        raise exc.ConfigError("synth needs --out")
    os.makedirs(cfg.out, exist_ok=True)
    trial = make_trial(cfg, 0)
    trial.scenario.save(os.path.join(cfg.out, "scenario.json"))
    write_wav(os.path.join(cfg.out, "mixture.wav"), trial.mixture)
    write_wav(os.path.join(cfg.out, "references.wav"), trial.references)
    cfg.save(os.path.join(cfg.out, "config.json"))
    print(f"wrote scenario.json, mixture.wav, references.wav to {cfg.out}", file=out)


def cmd_separate(args, out):
    cfg = load_config(args)
    rec = run_experiment(cfg, threads=args.threads)[0]
    s = rec.summary()
    print(
        f"{rec.solver}: {s['iterations']} iterations, final cost {s['final_cost']:.6g}, "
        f"final dSDR {s['final_delta_sdr_db']:.2f} dB, {s['mean_ms']:.2f} ms/iteration",
        file=out,
    )


def cmd_bench(args, out):
    cfg = load_config(args)
    _, summary = bench(cfg, _solvers(args.solvers), threads=args.threads)
    print(f"{'solver':8s} {'median iters to 90%':>20s} {'median final dSDR':>18s} {'ms/iter':>9s}", file=out)
    for s, v in summary.items():
        print(
            f"{s:8s} {v['median_iterations_to_fraction']:20.1f} "
            f"{v['median_final_delta_sdr_db']:18.2f} {v['median_ms_per_iteration']:9.2f}",
            file=out,
        )


def cmd_scaling(args, out):
    try:
        m_list = [int(v) for v in args.m_list.split(",")]
    except ValueError as err:
        raise exc.ConfigError(f"bad --m-list: {err}") from err
    res = scaling_bench(m_list, args.n, args.K, args.reps, _solvers(args.solvers), seed=args.seed or 0)
    for s, slope in res.slopes.items():
        ms = ", ".join(f"{t:.3f}" for t in res.fitted_ms(s))
        print(f"{s:6s} slope {slope:5.2f}   ms per pass: {ms}", file=out)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        res.to_csv(os.path.join(args.out, "scaling.csv"))
        with open(os.path.join(args.out, "scaling.json"), "w") as f:
            json.dump({"m_list": list(res.m_list), "n": res.n, "K": res.K, "slopes": res.slopes}, f, indent=2)


COMMANDS = {"synth": cmd_synth, "separate": cmd_separate, "bench": cmd_bench, "scaling": cmd_scaling}


def main(argv=None, out=None, err=None):
    """Entry point; returns the process exit status."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("mmiva: error: ConfigError: --threads must be at least 1", file=err)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args, out)
    except (exc.IVAError, OSError) as e:
        print(f"mmiva: error: {type(e).__name__}: {e}", file=err)
        return exit_code(e)
    return EXIT_OK


__all__ = ["main", "build_parser", "load_config", "exit_code"]
