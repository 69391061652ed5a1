"""Problem definition for robust single-source range localization.

Each of the ``L`` anchors ``a_l`` observes a range ``d_l`` to the unknown
source.  The robust estimate minimizes the mean absolute range residual

    (1/L) * sum_l | ||x - a_l|| - d_l |

and every local term splits as a difference of convex functions,
``|r - d| = 2 max(0, r - d) - (r - d)`` with ``r = ||x - a_l||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Point = np.ndarray


def as_point(x, name: str = "x") -> Point:
    """Return ``x`` as a finite 1-D float array, raising ``ValueError`` otherwise."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _check_range(value: float, name: str = "range") -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and nonnegative, got {value}")
    return value


@dataclass(frozen=True)
class SensorNetwork:
    """Anchors, their range measurements and the (hidden) true source.

    ``anchors`` has shape ``(L, n)``; ``measurements`` has shape ``(L,)``.
    ``source`` is ground truth for scoring only; solvers never read it.
    """

    anchors: np.ndarray
    measurements: np.ndarray
    source: np.ndarray | None = None

    def __post_init__(self):
        anchors = np.array(self.anchors, dtype=float)
        meas = np.array(self.measurements, dtype=float).reshape(-1)
        if anchors.ndim != 2:
            raise ValueError("anchors must have shape (L, n)")
        if anchors.shape[0] < 1:
            raise ValueError("network needs at least one anchor")
        if anchors.shape[0] != meas.shape[0]:
            raise ValueError(
                f"{anchors.shape[0]} anchors but {meas.shape[0]} measurements"
            )
        if not np.all(np.isfinite(anchors)) or not np.all(np.isfinite(meas)):
            raise ValueError("anchors and measurements must be finite")
        if np.any(meas < 0):
            raise ValueError("range measurements must be nonnegative")
        anchors.setflags(write=False)
        meas.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "measurements", meas)
        if self.source is not None:
            src = as_point(self.source, "source").copy()
            if src.shape[0] != anchors.shape[1]:
                raise ValueError("source dimension does not match anchors")
            src.setflags(write=False)
            object.__setattr__(self, "source", src)

    @property
    def L(self) -> int:
        return self.anchors.shape[0]

    @property
    def n(self) -> int:
        return self.anchors.shape[1]

    def with_measurements(self, measurements) -> "SensorNetwork":
        return SensorNetwork(self.anchors, measurements, self.source)

    def blind(self) -> "SensorNetwork":
        """Copy of the network with the ground truth stripped."""
        return SensorNetwork(self.anchors, self.measurements, None)


@dataclass(frozen=True)
class Hyperparams:
    """Schedule constants and budgets for the federated ADMM solver.

    Defaults are the simulation constants ``c = 1/(100 sqrt 2)``,
    ``d = sqrt(3/500)``, ``alpha = beta = 100 sqrt 3``.
    """

    c: float = 1.0 / (100.0 * math.sqrt(2.0))
    d: float = math.sqrt(3.0) / math.sqrt(500.0)
    alpha: float = 100.0 * math.sqrt(3.0)
    beta: float = 100.0 * math.sqrt(3.0)
    omega: float = 2.0
    k_local_per_global: int = 1
    k_global_max: int = 2000
    k_a: int = 10

    def __post_init__(self):
        for name in ("c", "d", "alpha", "beta", "omega"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        for name in ("k_local_per_global", "k_global_max", "k_a"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


def gamma_l(x, anchor, range_: float) -> float:
    """Convex part ``2 max(0, ||x - a|| - d)`` of the local loss."""
    x = as_point(x)
    a = as_point(anchor, "anchor")
    d = _check_range(range_)
    return 2.0 * max(0.0, float(np.linalg.norm(x - a)) - d)


def phi_l(x, anchor, range_: float) -> float:
    """Subtracted convex part ``||x - a|| - d``; negative inside the ball."""
    x = as_point(x)
    a = as_point(anchor, "anchor")
    d = _check_range(range_)
    return float(np.linalg.norm(x - a)) - d


def objective(x, net: SensorNetwork) -> float:
    """Mean absolute range residual of candidate ``x`` on ``net``."""
    x = as_point(x)
    if net.L == 0:
        raise ValueError("empty network")
    r = np.linalg.norm(x[None, :] - net.anchors, axis=1)
    return float(np.mean(np.abs(r - net.measurements)))
