"""Seeded Monte Carlo experiment harness.

Every (trial, sweep value) cell is keyed by a ``cell_seed`` derived from the
experiment seed and the trial index only, so all sweep values and both
algorithms of a trial share one geometry and one set of underlying
uniforms.  Re-running a cell from its logged seed reproduces its row.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import DEFAULT_ETA0, SubgradConfig, run_dsrl
from .datagen import OUTLIER_HIGH, apply_cauchy, apply_outliers, generate_network
from .diagnostics import kkt_residuals, states_from_fleet, validate_hyperparams
from .model import Hyperparams
from .orchestrator import AsyncProfile, run

SCENARIOS = ("outlier_sweep", "cauchy_sweep", "convergence", "single")
ALGORITHMS = ("fsmdm", "dsrl")
CSV_COLUMNS = ("scenario", "algorithm", "sweep_value", "trial", "cell_seed",
               "final_rmse_local", "final_rmse_global", "consensus_max",
               "dual_sum_norm", "rounds")
TRACE_COLUMNS = CSV_COLUMNS[:5] + ("round", "rmse")


def _grid(start: float, stop: float, step: float) -> list[float]:
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


DEFAULT_SWEEPS = {
    "outlier_sweep": _grid(0.025, 0.3, 0.025),
    "cauchy_sweep": _grid(0.2, 4.0, 0.2),
    "convergence": [1.0],
    "single": [0.0],
}


@dataclass
class ExperimentConfig:
    scenario: str = "single"
    trials: int = 100
    seed: int = 0
    L: int = 21
    region_half_width: float = 30.0
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    async_profile: AsyncProfile = field(default_factory=AsyncProfile)
    algorithms: tuple = ALGORITHMS
    sweep_values: list | None = None
    output_path: str = "results.csv"
    eta0: float = DEFAULT_ETA0
    outlier_high: float = OUTLIER_HIGH
    trace_path: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario: expected one of {SCENARIOS}, got {self.scenario!r}")
        if self.trials < 1:
            raise ValueError(f"trials: must be >= 1, got {self.trials}")
        if self.L < 1:
            raise ValueError(f"L: must be >= 1, got {self.L}")
        if not self.region_half_width > 0:
            raise ValueError("region_half_width: must be > 0")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ValueError(f"algorithms: expected a subset of {ALGORITHMS}, got {self.algorithms}")
        if self.sweep_values is None:
            self.sweep_values = list(DEFAULT_SWEEPS[self.scenario])
        if not self.sweep_values:
            raise ValueError("sweep_values: must be non-empty")
        if "fsmdm" in self.algorithms:
            violations = validate_hyperparams(self.hyperparams)
            if violations:
                raise ValueError("hyperparams: " + "; ".join(violations))
        if self.scenario == "outlier_sweep" and not all(0 <= p <= 1 for p in self.sweep_values):
            raise ValueError("sweep_values: outlier probabilities must lie in [0, 1]")
        if self.scenario in ("cauchy_sweep", "convergence") and not all(
                g > 0 for g in self.sweep_values):
            raise ValueError("sweep_values: Cauchy scales must be > 0")


def cell_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1)[0])


def make_cell_network(cfg: ExperimentConfig, sweep_value: float, seed: int):
    geo, noise, sched = np.random.SeedSequence(seed).spawn(3)
    net = generate_network(cfg.L, cfg.region_half_width, 3, seed=np.random.default_rng(geo))
    noise_rng = np.random.default_rng(noise)
    if cfg.scenario == "outlier_sweep":
        net = apply_outliers(net, sweep_value, 0.0, cfg.outlier_high, seed=noise_rng)
    elif cfg.scenario in ("cauchy_sweep", "convergence"):
        net = apply_cauchy(net, sweep_value, seed=noise_rng)
    return net, int(sched.generate_state(1)[0])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run_cell(cfg: ExperimentConfig, algorithm: str, sweep_value: float, trial: int,
             seed: int | None = None):
    """Run one cell; returns ``(row, trace)`` with ``trace`` the per-round local RMSE."""
    seed = cell_seed(cfg.seed, trial) if seed is None else seed
    net, sched_seed = make_cell_network(cfg, sweep_value, seed)
    truth = net.source
    solver_net = net.blind()
    record = cfg.scenario == "convergence"
    if algorithm == "fsmdm":
        profile = replace(cfg.async_profile, rng_seed=sched_seed)
        res = run(solver_net, cfg.hyperparams, profile, record=record)
        report = kkt_residuals(states_from_fleet(res.fleet, solver_net, cfg.hyperparams), res.w)
        consensus, dual = report.consensus_max, report.dual_sum_norm
    else:
        res = run_dsrl(solver_net, SubgradConfig(cfg.eta0, iterations=cfg.hyperparams.k_global_max),
                       record=record)
        consensus, dual = 0.0, None
    row = {
        "scenario": cfg.scenario, "algorithm": algorithm, "sweep_value": sweep_value,
        "trial": trial, "cell_seed": seed,
        "final_rmse_local": res.final_rmse_local(truth),
        "final_rmse_global": res.final_rmse_global(truth),
        "consensus_max": consensus, "dual_sum_norm": dual, "rounds": res.rounds,
    }
    trace = res.history.rmse_local(truth) if record else None
    return row, trace


def format_row(row: dict, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([_fmt(row[c]) if c not in ("scenario", "algorithm")
                                                   else row[c] for c in columns])
    return buf.getvalue()


def iter_cells(cfg: ExperimentConfig):
    for trial in range(cfg.trials):
        seed = cell_seed(cfg.seed, trial)
        for value in cfg.sweep_values:
            for algorithm in cfg.algorithms:
                yield algorithm, value, trial, seed


def run_experiment(cfg: ExperimentConfig, *, out=None, echo=True):
    """Run every cell, stream rows to ``cfg.output_path`` and print a summary.

    Rows are flushed as they are produced so an interrupt leaves a valid
    partial file.
    """
    trace_path = cfg.trace_path
    if cfg.scenario == "convergence" and trace_path is None:
        stem = cfg.output_path[:-4] if cfg.output_path.endswith(".csv") else cfg.output_path
        trace_path = stem + "_trace.csv"
    tfh = None
    with open(cfg.output_path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        if trace_path:
            tfh = open(trace_path, "w", newline="")
            tfh.write(",".join(TRACE_COLUMNS) + "\n")
        try:
            for algorithm, value, trial, seed in iter_cells(cfg):
                row, trace = run_cell(cfg, algorithm, value, trial, seed)
                fh.write(format_row(row))
                fh.flush()
                if tfh is not None and trace is not None:
                    for k, r in enumerate(trace, start=1):
                        tfh.write(format_row({**row, "round": k, "rmse": r}, TRACE_COLUMNS))
                    tfh.flush()
        finally:
            if tfh is not None:
                tfh.close()
    table = summarize(cfg.output_path)
    if echo:
        print(format_summary(table), file=out or sys.stdout)
    return table


class ResultsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SummaryRow:
    algorithm: str
    sweep_value: float
    mean_rmse: float
    stderr: float
    trials: int
    flag: str = ""


def summarize(csv_path) -> list[SummaryRow]:
    """Mean and standard error of the final local RMSE per (algorithm, sweep value)."""
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ResultsFormatError(f"{csv_path}: line 1: empty results file")
        missing = [c for c in ("algorithm", "sweep_value", "final_rmse_local") if c not in header]
        if missing:
            raise ResultsFormatError(f"{csv_path}: line 1: missing columns {missing}")
        ia, iv, ir = (header.index(c) for c in ("algorithm", "sweep_value", "final_rmse_local"))
        groups: dict = {}
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ResultsFormatError(
                    f"{csv_path}: line {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                key = (rec[ia], float(rec[iv]))
                groups.setdefault(key, []).append(float(rec[ir]))
            except ValueError as exc:
                raise ResultsFormatError(f"{csv_path}: line {lineno}: {exc}") from None
    out = []
    for (alg, val), vals in sorted(groups.items()):
        v = np.asarray(vals)
        if len(v) == 1:
            out.append(SummaryRow(alg, val, float(v[0]), 0.0, 1, "single-trial"))
        else:
            out.append(SummaryRow(alg, val, float(v.mean()),
                                  float(v.std(ddof=1) / math.sqrt(len(v))), len(v)))
    return out


def format_summary(rows) -> str:
    lines = [f"{'algorithm':<10}{'sweep':>10}{'mean_rmse':>14}{'stderr':>12}{'n':>6}"]
    for r in rows:
        lines.append(f"{r.algorithm:<10}{r.sweep_value:>10.4g}{r.mean_rmse:>14.6g}"
                     f"{r.stderr:>12.4g}{r.trials:>6d} {r.flag}".rstrip())
    return "\n".join(lines)
