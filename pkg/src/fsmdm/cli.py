"""Command-line entry point.

    fsmdm --scenario outlier_sweep --trials 100 --out fig1.csv
    fsmdm --config experiment.cfg
    fsmdm summarize fig1.csv

Config files are flat ``key = value`` lines (``#`` starts a comment); keys
match the long flag names with underscores.  Flags override the file.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import (ALGORITHMS, SCENARIOS, ExperimentConfig, ResultsFormatError,
                          format_summary, run_experiment, summarize)
from .model import Hyperparams
from .orchestrator import MODES, AsyncProfile

CONFIG_KEYS = {
    "scenario": str, "trials": int, "seed": int, "L": int, "region_half_width": float,
    "c": float, "d": float, "alpha": float, "beta": float, "omega": float,
    "rounds": int, "local_per_global": int, "k_a": int, "async_mode": str,
    "slow_factor": float, "algorithms": str, "sweep_values": str, "eta0": float,
    "out": str, "trace_out": str,
}


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
            try:
                out[key] = CONFIG_KEYS[key](value)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def build_config(opts: dict) -> ExperimentConfig:
    hp_defaults = Hyperparams()
    lpg = opts.get("local_per_global", 1)
    k_a = opts.get("k_a", hp_defaults.k_a)
    hp = Hyperparams(
        c=opts.get("c", hp_defaults.c), d=opts.get("d", hp_defaults.d),
        alpha=opts.get("alpha", hp_defaults.alpha), beta=opts.get("beta", hp_defaults.beta),
        omega=opts.get("omega", hp_defaults.omega), k_local_per_global=lpg,
        k_global_max=opts.get("rounds", hp_defaults.k_global_max), k_a=k_a,
    )
    mode = opts.get("async_mode", "synchronous")
    if mode not in MODES:
        raise ValueError(f"async_mode: expected one of {MODES}, got {mode!r}")
    L = opts.get("L", 21)
    if mode == "heterogeneous":
        profile = AsyncProfile.with_slow_client(L, 0, opts.get("slow_factor", 100.0), k_a, lpg)
    else:
        profile = AsyncProfile(mode=mode, local_per_global=lpg, k_a=k_a)
    kwargs = {}
    if "sweep_values" in opts:
        kwargs["sweep_values"] = [float(v) for v in opts["sweep_values"].split(",") if v.strip()]
    if "algorithms" in opts:
        kwargs["algorithms"] = tuple(a.strip() for a in opts["algorithms"].split(",") if a.strip())
    for key, attr in (("trials", "trials"), ("seed", "seed"), ("region_half_width",
                      "region_half_width"), ("eta0", "eta0"), ("out", "output_path"),
                      ("trace_out", "trace_path")):
        if key in opts:
            kwargs[attr] = opts[key]
    return ExperimentConfig(scenario=opts.get("scenario", "single"), L=L, hyperparams=hp,
                            async_profile=profile, **kwargs)


def _run_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsmdm", description="Run localization experiments.")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="results CSV path")
    p.add_argument("--trace-out", dest="trace_out", help="per-round trace CSV path")
    p.add_argument("--algorithms", help=f"comma list from {','.join(ALGORITHMS)}")
    p.add_argument("--local-per-global", dest="local_per_global", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--async-mode", dest="async_mode", choices=MODES)
    p.add_argument("--rounds", type=int, help="server rounds per run")
    p.add_argument("--sweep-values", dest="sweep_values", help="comma list of sweep values")
    p.add_argument("--eta0", type=float, help="baseline initial step")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "summarize":
        p = argparse.ArgumentParser(prog="fsmdm summarize")
        p.add_argument("csv_path")
        args = p.parse_args(argv[1:])
        try:
            print(format_summary(summarize(args.csv_path)))
        except (OSError, ResultsFormatError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0

    args = _run_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        opts = read_config(args.config) if args.config else {}
        opts.update({k: v for k, v in vars(args).items()
                     if v is not None and k not in ("config", "verbose")})
        cfg = build_config(opts)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        run_experiment(cfg)
    except KeyboardInterrupt:
        print(f"interrupted; partial results in {cfg.output_path}", file=sys.stderr)
        return 130
    except Exception as exc:  # surfaced as a nonzero exit with diagnostics
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
