"""Per-client state and the local iteration of the federated ADMM solver.

A local iteration ``k`` runs, in order:

1. schedule refresh: ``sigma_psi = c sqrt k``, ``mu_phi = alpha / sqrt k``,
   ``sigma_xi = d sqrt k``, ``mu_h = beta / sqrt k``;
2. ``x`` as a prox step on ``2 max(0, ||x - a|| - d)``;
3. ``z`` as a prox step on the negated Moreau envelope of ``||x - a|| - d``;
4. ascent on ``psi`` (the ``x = z`` multiplier);
5. joint ``(g, q)`` update against the latest broadcast ``w``;
6. ascent on ``xi`` (``x = g``) and ``zeta`` (``q = w``).

Only ``(q, zeta, sigma_xi, k)`` leave the client.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .model import Hyperparams
from .smoothing import prox_gamma, prox_neg_moreau, prox_smooth_abs


@dataclass(frozen=True)
class ScheduleValues:
    sigma_psi: float
    sigma_xi: float
    mu_phi: float
    mu_h: float


def schedule_at(k: int, params: Hyperparams) -> ScheduleValues:
    if k < 1:
        raise PreconditionError(f"schedule is defined for k >= 1, got k={k}")
    s = math.sqrt(k)
    return ScheduleValues(
        sigma_psi=params.c * s,
        sigma_xi=params.d * s,
        mu_phi=params.alpha / s,
        mu_h=params.beta / s,
    )


@dataclass(frozen=True)
class ClientOutbox:
    """Message from a client to the server after a local iteration."""

    client_id: int
    k_l: int
    q: np.ndarray
    zeta: np.ndarray
    sigma_xi: float


@dataclass
class ClientState:
    """Local primal/dual variables of one client.

    ``k`` counts completed local iterations (0 before the first one).  The
    raw range never leaves this object.
    """

    anchor: np.ndarray
    range: float
    params: Hyperparams
    client_id: int = 0
    x: np.ndarray = None
    z: np.ndarray = None
    g: np.ndarray = None
    q: np.ndarray = None
    psi: np.ndarray = None
    xi: np.ndarray = None
    zeta: np.ndarray = None
    k: int = 0
    schedule: ScheduleValues | None = field(default=None)

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        n = self.anchor.shape[0]
        for name in ("x", "z", "g", "q", "psi", "xi", "zeta"):
            v = getattr(self, name)
            setattr(self, name, np.zeros(n) if v is None else np.array(v, dtype=float))

    @property
    def n(self) -> int:
        return self.anchor.shape[0]

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(getattr(self, name)))
            for name in ("x", "z", "g", "q", "psi", "xi", "zeta")
        )


def update_schedule(state: ClientState, params: Hyperparams | None = None) -> ScheduleValues:
    """Schedule values for the client's current iteration index ``state.k``."""
    return schedule_at(state.k, params or state.params)


def update_x(state: ClientState) -> np.ndarray:
    s = state.schedule
    upsilon = s.sigma_psi + s.sigma_xi
    p = -(state.psi + state.xi - s.sigma_psi * state.z - s.sigma_xi * state.g) / upsilon
    return prox_gamma(p, state.anchor, state.range, 1.0 / upsilon)


def update_z(state: ClientState) -> np.ndarray:
    """Minimize ``-e_phi(z) + psi.(x - z) + sigma_psi/2 ||x - z||^2`` over ``z``.

    Completing the square centres the prox at ``x + psi / sigma_psi``.
    """
    s = state.schedule
    step = 1.0 / s.sigma_psi
    if not step < s.mu_phi:
        raise PreconditionError(
            f"sigma_psi * mu_phi = {s.sigma_psi * s.mu_phi} <= 1 at k={state.k}"
        )
    center = state.x + state.psi / s.sigma_psi
    return prox_neg_moreau(center, state.anchor, s.mu_phi, step)


def update_psi(state: ClientState) -> np.ndarray:
    return state.psi + state.schedule.sigma_psi * (state.x - state.z)


def update_gq(state: ClientState, w) -> tuple[np.ndarray, np.ndarray]:
    """Joint minimizer of ``omega h(g - q) + sigma_xi/2 (||g - u||^2 + ||q - v||^2)``.

    With ``u = x + xi/sigma_xi`` and ``v = w + zeta/sigma_xi``, the pair
    splits into its mean ``(u + v)/2`` and the difference ``e = q - g``,
    which is a 1-D prox of the smoothed absolute value per coordinate.
    """
    s = state.schedule
    w = np.asarray(w, dtype=float)
    u = state.x + state.xi / s.sigma_xi
    v = w + state.zeta / s.sigma_xi
    e = prox_smooth_abs(v - u, 2.0 * state.params.omega / s.sigma_xi, s.mu_h)
    mid = (u + v) / 2.0
    return mid - e / 2.0, mid + e / 2.0


def update_xi_zeta(state: ClientState, w) -> tuple[np.ndarray, np.ndarray]:
    sx = state.schedule.sigma_xi
    return state.xi + sx * (state.x - state.g), state.zeta + sx * (np.asarray(w, float) - state.q)


def update_duals(state: ClientState, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All three ascent steps from the iterate's current ``x, z, g, q``."""
    xi, zeta = update_xi_zeta(state, w)
    return update_psi(state), xi, zeta


def local_primal_block(state: ClientState) -> None:
    """Schedule, ``x``, ``z`` and ``psi`` updates; does not need ``w``."""
    state.k += 1
    state.schedule = update_schedule(state)
    state.x = update_x(state)
    state.z = update_z(state)
    state.psi = update_psi(state)


def local_consensus_block(state: ClientState, w) -> ClientOutbox:
    """``(g, q)`` then ``(xi, zeta)`` updates against snapshot ``w``."""
    w = np.array(w, dtype=float)
    state.g, state.q = update_gq(state, w)
    state.xi, state.zeta = update_xi_zeta(state, w)
    return ClientOutbox(
        client_id=state.client_id,
        k_l=state.k,
        q=state.q.copy(),
        zeta=state.zeta.copy(),
        sigma_xi=state.schedule.sigma_xi,
    )


def local_iteration(state: ClientState, w) -> ClientOutbox:
    """One full local iteration; returns the message for the server."""
    local_primal_block(state)
    return local_consensus_block(state, w)


def init_client(anchor, range_: float, params: Hyperparams, client_id: int = 0) -> ClientState:
    return ClientState(anchor=anchor, range=float(range_), params=params, client_id=client_id)
