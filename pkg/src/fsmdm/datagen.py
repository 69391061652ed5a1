"""Reproducible sensor networks and measurement corruption models.

Geometry, outlier coin flips/values and additive noise are drawn from
separately seeded generators, so sweeping an outlier probability or a
noise scale holds the geometry (and the underlying uniforms) fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import SensorNetwork

log = logging.getLogger(__name__)

OUTLIER_HIGH = 60.0 * math.sqrt(3.0)
FORMAT_TAG = "# fsmdm-network v1"


@dataclass(frozen=True)
class NoiseModel:
    """``kind`` is one of ``clean``, ``gaussian``, ``outlier``, ``cauchy``."""

    kind: str = "clean"
    sigma: float = 0.0
    p: float = 0.0
    lo: float = 0.0
    hi: float = OUTLIER_HIGH
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("clean", "gaussian", "outlier", "cauchy"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind == "outlier" and not (0 <= self.p <= 1 and self.hi >= self.lo >= 0):
            raise ValueError("outlier model needs 0 <= p <= 1 and hi >= lo >= 0")
        if self.kind == "cauchy" and not self.gamma > 0:
            raise ValueError("gamma must be > 0")

    def apply(self, net: SensorNetwork, seed) -> SensorNetwork:
        if self.kind == "clean":
            return net
        if self.kind == "outlier":
            return apply_outliers(net, self.p, self.lo, self.hi, seed)
        if self.kind == "cauchy":
            return apply_cauchy(net, self.gamma, seed)
        return apply_gaussian(net, self.sigma, seed)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _true_ranges(net: SensorNetwork) -> np.ndarray:
    if net.source is None:
        raise ValueError("corruption models need the ground-truth source")
    return np.linalg.norm(net.anchors - net.source, axis=1)


def generate_network(L: int = 21, region_half_width: float = 30.0, n: int = 3,
                     seed=None) -> SensorNetwork:
    """Anchors and source i.i.d. uniform on ``[-h, h]^n`` with exact ranges."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if not region_half_width > 0:
        raise ValueError("region_half_width must be > 0")
    rng = _rng(seed)
    h = float(region_half_width)
    anchors = rng.uniform(-h, h, size=(L, n))
    source = rng.uniform(-h, h, size=n)
    return SensorNetwork(anchors, np.linalg.norm(anchors - source, axis=1), source)


def apply_outliers(net: SensorNetwork, p: float, lo: float = 0.0, hi: float = OUTLIER_HIGH,
                   seed=None) -> SensorNetwork:
    """Replace each true range by ``U(lo, hi)`` independently with probability ``p``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rng = _rng(seed)
    L = net.L
    coins = rng.random(L)
    values = lo + (hi - lo) * rng.random(L)
    d = _true_ranges(net)
    return net.with_measurements(np.where(coins < p, values, d))


def cauchy_noise(u, gamma: float) -> np.ndarray:
    """Inverse-CDF Cauchy(0, gamma) samples from uniforms ``u`` in (0, 1)."""
    return gamma * np.tan(np.pi * (np.asarray(u, dtype=float) - 0.5))


def apply_cauchy(net: SensorNetwork, gamma: float, seed=None) -> SensorNetwork:
    """Add Cauchy(0, gamma) noise to the true ranges; negative ranges clip to 0."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    rng = _rng(seed)
    d = _true_ranges(net) + cauchy_noise(rng.random(net.L), gamma)
    clipped = int(np.sum(d < 0))
    if clipped:
        log.info("clipped %d negative Cauchy-corrupted ranges to 0", clipped)
    return net.with_measurements(np.maximum(d, 0.0))


def apply_gaussian(net: SensorNetwork, sigma: float, seed=None) -> SensorNetwork:
    rng = _rng(seed)
    d = _true_ranges(net) + sigma * rng.standard_normal(net.L)
    return net.with_measurements(np.maximum(d, 0.0))


def _fmt(v) -> str:
    return format(float(v), ".17g")


def dump_network(net: SensorNetwork, path, *, h: float | None = None, seed=None) -> None:
    """Write ``net`` in the line-oriented text format.

    Header ``key value`` lines, an ``anchors`` block of ``coords... range``
    rows, and (if known) a separate ``ground_truth`` block.
    """
    lines = [FORMAT_TAG, f"L {net.L}", f"n {net.n}",
             f"h {'' if h is None else _fmt(h)}".rstrip(),
             f"seed {'' if seed is None else seed}".rstrip(), "anchors"]
    for a, d in zip(net.anchors, net.measurements):
        lines.append(" ".join(_fmt(v) for v in a) + " " + _fmt(d))
    if net.source is not None:
        lines.append("ground_truth")
        lines.append(" ".join(_fmt(v) for v in net.source))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path, *, blind: bool = False) -> tuple[SensorNetwork, dict]:
    """Read a network file; ``blind=True`` drops the ground truth."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != FORMAT_TAG:
        raise ValueError(f"{path}: not a network file (missing '{FORMAT_TAG}')")
    meta, i = {}, 1
    while i < len(lines) and lines[i] != "anchors":
        key, _, val = lines[i].partition(" ")
        meta[key] = val.strip() or None
        i += 1
    if i == len(lines):
        raise ValueError(f"{path}: missing 'anchors' block")
    L, n = int(meta["L"]), int(meta["n"])
    rows = [np.array(ln.split(), dtype=float) for ln in lines[i + 1:i + 1 + L]]
    if len(rows) != L or any(r.shape != (n + 1,) for r in rows):
        raise ValueError(f"{path}: expected {L} anchor rows with {n + 1} values")
    rows = np.array(rows)
    source = None
    rest = lines[i + 1 + L:]
    if rest and rest[0] == "ground_truth" and not blind:
        source = np.array(rest[1].split(), dtype=float)
    meta = {"L": L, "n": n,
            "h": float(meta["h"]) if meta.get("h") else None,
            "seed": int(meta["seed"]) if meta.get("seed") else None}
    return SensorNetwork(rows[:, :n], rows[:, n], source), meta
