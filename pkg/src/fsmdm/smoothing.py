"""Smooth surrogates and closed-form proximal maps.

Conventions: ``Prox_f(p; lam)`` is ``argmin_x f(x) + ||x - p||^2 / (2 lam)``.
All distances are Euclidean distances to the anchor; every operator here
is radial about the anchor, so the vector problems reduce to choosing a
radius along the ray from the anchor through the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True)
class SmoothingParams:
    mu_phi: float
    mu_h: float

    def __post_init__(self):
        if not (self.mu_phi > 0 and self.mu_h > 0):
            raise ValueError("smoothing parameters must be positive")


def _positive(value: float, name: str) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def smooth_abs(z, mu: float):
    """Huber-type upper bound on ``|z|``: exact for ``|z| >= mu``, quadratic inside.

    Works elementwise on arrays.
    """
    mu = _positive(mu, "mu")
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    out = np.where(az >= mu, az, z * z / (2.0 * mu) + mu / 2.0)
    return float(out) if out.ndim == 0 else out


def smooth_l1(v, mu: float) -> float:
    """Sum of :func:`smooth_abs` over the components of ``v``."""
    return float(np.sum(smooth_abs(np.asarray(v, dtype=float).reshape(-1), mu)))


def moreau_phi(x, anchor, range_: float, mu: float) -> float:
    """Moreau envelope of ``||x - a|| - d`` with parameter ``mu``."""
    mu = _positive(mu, "mu")
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(anchor, dtype=float)))
    if r <= mu:
        return r * r / (2.0 * mu) - range_
    return r - mu / 2.0 - range_


def prox_gamma(p, anchor, range_: float, lam: float) -> np.ndarray:
    """Prox of ``2 max(0, ||x - a|| - d)`` with step ``lam``.

    Inside the ball the point is kept; a shell of width ``2 lam`` outside
    it is projected onto the sphere; beyond that the point moves ``2 lam``
    toward the anchor.
    """
    lam = _positive(lam, "lam")
    p = np.asarray(p, dtype=float)
    a = np.asarray(anchor, dtype=float)
    diff = p - a
    r = math.sqrt(float(diff @ diff))
    if r <= range_:
        return p.copy()
    if r <= range_ + 2.0 * lam:
        return a + (range_ / r) * diff
    return p - (2.0 * lam / r) * diff


def prox_neg_moreau(c, anchor, mu_phi: float, alpha: float) -> np.ndarray:
    """Prox of ``-e_phi(., mu_phi)`` with step ``alpha`` (needs ``alpha < mu_phi``).

    The range ``d`` only shifts ``e_phi`` by a constant and does not enter.
    """
    mu_phi = _positive(mu_phi, "mu_phi")
    alpha = _positive(alpha, "alpha")
    if not alpha < mu_phi:
        raise PreconditionError(
            f"prox of -e_phi is not single-valued for alpha={alpha} >= mu_phi={mu_phi}"
        )
    c = np.asarray(c, dtype=float)
    a = np.asarray(anchor, dtype=float)
    diff = c - a
    r = math.sqrt(float(diff @ diff))
    if r <= mu_phi - alpha:
        return a + (mu_phi / (mu_phi - alpha)) * diff
    return a + ((r + alpha) / r) * diff


def prox_smooth_abs(v, lam: float, mu: float):
    """Prox of ``smooth_abs(., mu)`` with step ``lam``, elementwise.

    Shrinks linearly by ``mu / (mu + lam)`` for ``|v| <= mu + lam`` and
    soft-thresholds by ``lam`` beyond.
    """
    lam = _positive(lam, "lam")
    mu = _positive(mu, "mu")
    v = np.asarray(v, dtype=float)
    out = np.where(np.abs(v) <= mu + lam, v * (mu / (mu + lam)), v - lam * np.sign(v))
    return float(out) if out.ndim == 0 else out
