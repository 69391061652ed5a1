"""Hyperparameter checks, Lagrangian evaluation, KKT residuals and RMSE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .client import ClientState, ScheduleValues, schedule_at
from .model import Hyperparams
from .smoothing import moreau_phi, smooth_l1

SQRT_80 = math.sqrt(80.0)
SQRT_3_2 = math.sqrt(1.5)
# products of the default constants land within a few ulps of the bounds
_REL_SLACK = 1e-12


def validate_hyperparams(params) -> list[str]:
    """Return the violated conditions (empty list if the schedule is admissible).

    Convergence needs ``beta * d >= sqrt(80)`` and ``alpha * c >= sqrt(3/2)``;
    the latter also makes every z-update prox single-valued.
    """
    out = []
    for name in ("c", "d", "alpha", "beta", "omega"):
        v = getattr(params, name)
        if not (v > 0 and math.isfinite(v)):
            out.append(f"{name} = {v} must be positive")
    if out:
        return out
    bd = params.beta * params.d
    ac = params.alpha * params.c
    if bd < SQRT_80 * (1.0 - _REL_SLACK):
        out.append(f"beta*d = {bd:.6g} < sqrt(80) = {SQRT_80:.6g}")
    if ac < SQRT_3_2 * (1.0 - _REL_SLACK):
        out.append(f"alpha*c = {ac:.6g} < sqrt(3/2) = {SQRT_3_2:.6g}")
    return out


def _schedule(state: ClientState, params: Hyperparams) -> ScheduleValues:
    if state.schedule is not None:
        return state.schedule
    return schedule_at(max(state.k, 1), params)


def client_lagrangian(state: ClientState, w, params: Hyperparams,
                      schedule: ScheduleValues | None = None) -> float:
    s = schedule or _schedule(state, params)
    w = np.asarray(w, dtype=float)
    r = float(np.linalg.norm(state.x - state.anchor))
    gamma = 2.0 * max(0.0, r - state.range)
    xz, xg, wq = state.x - state.z, state.x - state.g, w - state.q
    return (
        gamma
        - moreau_phi(state.z, state.anchor, state.range, s.mu_phi)
        + float(state.psi @ xz) + 0.5 * s.sigma_psi * float(xz @ xz)
        + params.omega * smooth_l1(state.g - state.q, s.mu_h)
        + 0.5 * s.sigma_xi * float(xg @ xg) + 0.5 * s.sigma_xi * float(wq @ wq)
        + float(state.xi @ xg) + float(state.zeta @ wq)
    )


def augmented_lagrangian(states, w, params: Hyperparams, schedules=None) -> float:
    """Smoothed augmented Lagrangian summed over clients.

    Each client's own schedule values are used unless ``schedules`` (one per
    client) overrides them.
    """
    if schedules is None:
        schedules = [None] * len(states)
    return float(sum(client_lagrangian(st, w, params, s) for st, s in zip(states, schedules)))


def smooth_lagrangian_gradient(state: ClientState, w, params: Hyperparams,
                               schedule: ScheduleValues | None = None) -> dict:
    """Gradients of the client's Lagrangian minus its ``Gamma`` term.

    Keys ``x, z, g, q``; used to cross-check against finite differences.
    """
    s = schedule or _schedule(state, params)
    w = np.asarray(w, dtype=float)
    dz = state.z - state.anchor
    rz = float(np.linalg.norm(dz))
    grad_e = dz / s.mu_phi if rz <= s.mu_phi else dz / rz
    diff = state.g - state.q
    grad_h = np.where(np.abs(diff) >= s.mu_h, np.sign(diff), diff / s.mu_h)
    xz, xg, wq = state.x - state.z, state.x - state.g, w - state.q
    return {
        "x": state.psi + s.sigma_psi * xz + s.sigma_xi * xg + state.xi,
        "z": -grad_e - state.psi - s.sigma_psi * xz,
        "g": params.omega * grad_h - s.sigma_xi * xg - state.xi,
        "q": -params.omega * grad_h - s.sigma_xi * wq - state.zeta,
    }


@dataclass
class ResidualReport:
    consensus_max: float
    dual_sum_norm: float
    xz_gap_max: float
    xg_gap_max: float
    wq_gap_max: float
    stationarity_max: float
    kink_clients: tuple = field(default_factory=tuple)

    def as_row(self) -> dict:
        return {
            "consensus_max": self.consensus_max,
            "dual_sum_norm": self.dual_sum_norm,
            "xz_gap_max": self.xz_gap_max,
            "xg_gap_max": self.xg_gap_max,
            "wq_gap_max": self.wq_gap_max,
            "stationarity_max": self.stationarity_max,
        }


def kkt_residuals(states, w, tol: float = 1e-9) -> ResidualReport:
    """Consensus, dual-balance and stationarity residuals of a fleet state.

    Stationarity is ``||grad(Gamma - phi)(x_l) + xi_l||`` and is only
    evaluated where ``|| ||x_l - a_l|| - d_l |`` and ``||x_l - a_l||`` are
    both above ``tol``; other clients are listed in ``kink_clients``.
    """
    w = np.asarray(w, dtype=float)
    X = np.array([st.x for st in states])
    Z = np.array([st.z for st in states])
    G = np.array([st.g for st in states])
    Q = np.array([st.q for st in states])
    zeta_sum = np.sum([st.zeta for st in states], axis=0)
    stat, kinks = 0.0, []
    for i, st in enumerate(states):
        diff = st.x - st.anchor
        r = float(np.linalg.norm(diff))
        if r <= tol or abs(r - st.range) <= tol:
            kinks.append(i)
            continue
        grad = math.copysign(1.0, r - st.range) * diff / r
        stat = max(stat, float(np.linalg.norm(grad + st.xi)))
    return ResidualReport(
        consensus_max=float(np.max(np.linalg.norm(X - w, axis=1))),
        dual_sum_norm=float(np.linalg.norm(zeta_sum)),
        xz_gap_max=float(np.max(np.linalg.norm(X - Z, axis=1))),
        xg_gap_max=float(np.max(np.linalg.norm(X - G, axis=1))),
        wq_gap_max=float(np.max(np.linalg.norm(Q - w, axis=1))),
        stationarity_max=stat,
        kink_clients=tuple(kinks),
    )


def rmse(estimates, truth) -> float:
    """Root mean squared distance of the estimates to ``truth``."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("rmse needs at least one estimate")
    est = est.reshape(-1, np.asarray(truth).shape[-1])
    err = est - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def states_from_fleet(fleet, net, params: Hyperparams) -> list[ClientState]:
    """Rebuild per-client :class:`ClientState` objects from a fleet array state."""
    out = []
    for i in range(net.L):
        st = ClientState(anchor=net.anchors[i], range=float(net.measurements[i]), params=params,
                         client_id=i, x=fleet.X[i], z=fleet.Z[i], g=fleet.G[i], q=fleet.Q[i],
                         psi=fleet.PSI[i], xi=fleet.XI[i], zeta=fleet.ZETA[i], k=int(fleet.K[i]))
        if st.k > 0:
            st.schedule = schedule_at(st.k, params)
        out.append(st)
    return out
