"""Federated diminishing-step subgradient baseline on the l1 range loss.

Each round every client sends a subgradient of ``| ||w - a_l|| - d_l |`` at
the broadcast ``w`` and the server steps ``w -= eta0 / sqrt(k) * mean(g_l)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .model import SensorNetwork
from .orchestrator import RoundHistory, RunResult

ETA0_GRID = (0.1, 0.5, 1.0, 2.0)
# best clean-data value of ETA0_GRID (see tune_eta0); frozen for noisy runs
DEFAULT_ETA0 = 2.0


@dataclass(frozen=True)
class SubgradConfig:
    eta0: float = DEFAULT_ETA0
    decay: str = "one_over_sqrt_k"
    iterations: int = 2000

    def __post_init__(self):
        if not self.eta0 >= 0:
            raise ValueError("eta0 must be nonnegative")
        if self.decay != "one_over_sqrt_k":
            raise ValueError(f"unsupported decay {self.decay!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def step(self, k: int) -> float:
        return self.eta0 / np.sqrt(k)


def subgradient_f_l(w, anchor, range_: float) -> np.ndarray:
    """A subgradient of ``| ||w - a|| - d |``; zero at either kink."""
    diff = np.asarray(w, dtype=float) - np.asarray(anchor, dtype=float)
    r = float(np.linalg.norm(diff))
    if r == 0.0 or r == range_:
        return np.zeros_like(diff)
    return np.sign(r - range_) * diff / r


def _subgradients(w: np.ndarray, anchors: np.ndarray, ranges: np.ndarray) -> np.ndarray:
    diff = w[None, :] - anchors
    r = np.linalg.norm(diff, axis=1)
    s = np.sign(r - ranges)
    safe = np.where(r > 0, r, 1.0)
    return (s / safe)[:, None] * diff


def run_dsrl(net: SensorNetwork, cfg: SubgradConfig | None = None, seed=None, *,
             record: bool = True) -> RunResult:
    """Run the baseline from ``w = 0``; ``seed`` is accepted and unused (deterministic)."""
    cfg = cfg or SubgradConfig()
    L, n = net.L, net.n
    w = np.zeros(n)
    hist = np.zeros((cfg.iterations if record else 0, n))
    for k in range(1, cfg.iterations + 1):
        g = _subgradients(w, net.anchors, net.measurements)
        w = w - cfg.step(k) * g.mean(axis=0)
        if not np.all(np.isfinite(w)):
            raise DivergenceError(k - 1)
        if record:
            hist[k - 1] = w
    x = np.tile(w, (L, 1))
    history = None
    if record:
        history = RoundHistory(w=hist, x=np.repeat(hist[:, None, :], L, axis=1))
    return RunResult(algorithm="dsrl", w=w, x=x, rounds=cfg.iterations, history=history,
                     backend="numpy")


def tune_eta0(networks, grid=ETA0_GRID, iterations: int = 2000) -> tuple[float, dict]:
    """Pick the grid value with the lowest mean final error over clean ``networks``."""
    scores = {}
    for eta in grid:
        errs = [run_dsrl(net, SubgradConfig(eta, iterations=iterations), record=False)
                .final_rmse_global(net.source) for net in networks]
        scores[eta] = float(np.mean(errs))
    return min(scores, key=scores.get), scores
