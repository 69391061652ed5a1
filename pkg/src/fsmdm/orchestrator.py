"""Deterministic logical-time simulation of asynchronous federated runs.

A run is split into two stages:

* a *schedule* -- the ordered list of events, ``client id >= 0`` for one
  local iteration of that client and ``GLOBAL`` (-1) for one server
  aggregation -- produced by :class:`StepPolicy` from an
  :class:`AsyncProfile` alone (it never looks at solver state), and
* an *executor* that applies the schedule to the fleet state
  (compiled kernel, or the pure-Python fallback).

Each local iteration is executed atomically against the ``w`` broadcast
by the most recent server round, so a server round never interleaves a
client's ``(g, q, xi, zeta)`` block.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .diagnostics import validate_hyperparams
from .errors import DivergenceError, NotReadyError, PreconditionError
from .model import Hyperparams, SensorNetwork

GLOBAL = -1
MODES = ("synchronous", "fixed-ratio", "heterogeneous")


@dataclass(frozen=True)
class AsyncProfile:
    """How local iterations are interleaved with server rounds.

    ``synchronous``
        every client runs ``local_per_global`` iterations back to back,
        client by client, then one server round;
    ``fixed-ratio``
        the same counts, round-robin interleaved across clients;
    ``heterogeneous``
        ``L * local_per_global`` draws per round by seeded weighted
        sampling on ``client_speed_weights``, plus a forced iteration for
        any client that would otherwise miss ``k_a`` consecutive rounds.
    """

    mode: str = "synchronous"
    local_per_global: int = 1
    client_speed_weights: tuple | None = None
    k_a: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.local_per_global) != self.local_per_global or self.local_per_global < 1:
            raise ValueError("local_per_global must be a positive integer")
        if int(self.k_a) != self.k_a or self.k_a < 1:
            raise ValueError("k_a must be a positive integer")
        if self.client_speed_weights is not None:
            w = tuple(float(v) for v in self.client_speed_weights)
            if not all(v > 0 for v in w):
                raise ValueError("client speed weights must be positive")
            object.__setattr__(self, "client_speed_weights", w)

    @classmethod
    def with_slow_client(cls, L: int, slow_client: int = 0, slowdown: float = 100.0,
                         k_a: int = 10, local_per_global: int = 1, rng_seed: int = 0):
        weights = [1.0] * L
        weights[slow_client] = 1.0 / slowdown
        return cls(mode="heterogeneous", local_per_global=local_per_global,
                   client_speed_weights=tuple(weights), k_a=k_a, rng_seed=rng_seed)


class StepPolicy:
    """Stream of scheduling events for ``L`` clients under ``profile``."""

    def __init__(self, profile: AsyncProfile, L: int):
        self.profile = profile
        self.L = int(L)
        self._pending: deque = deque()
        self._gap = 0
        self._last = np.full(self.L, -profile.k_a, dtype=np.int64)
        self._rng = np.random.default_rng(profile.rng_seed)
        if profile.mode == "heterogeneous":
            w = profile.client_speed_weights or (1.0,) * self.L
            if len(w) != self.L:
                raise ValueError(f"{len(w)} speed weights for {self.L} clients")
            w = np.asarray(w, dtype=float)
            self._p = w / w.sum()

    def _gap_events(self) -> list[int]:
        prof, L, lpg = self.profile, self.L, self.profile.local_per_global
        if prof.mode == "synchronous":
            steps = [c for c in range(L) for _ in range(lpg)]
        elif prof.mode == "fixed-ratio":
            steps = [c for _ in range(lpg) for c in range(L)]
        else:
            steps = [int(c) for c in self._rng.choice(L, size=L * lpg, p=self._p)]
            seen = set(steps)
            # a client idle for k_a - 1 rounds must step before this round closes
            steps += [c for c in range(L)
                      if c not in seen and self._gap - self._last[c] >= prof.k_a - 1]
        for c in steps:
            self._last[c] = self._gap
        self._gap += 1
        return steps + [GLOBAL]

    def next_event(self) -> int:
        if not self._pending:
            self._pending.extend(self._gap_events())
        return self._pending.popleft()

    def __iter__(self):
        while True:
            yield self.next_event()


def build_schedule(profile: AsyncProfile, L: int, n_global: int) -> np.ndarray:
    """Events up to and including the ``n_global``-th server round."""
    policy = StepPolicy(profile, L)
    out = []
    for _ in range(n_global):
        out.extend(policy._gap_events())
    return np.asarray(out, dtype=np.int64)


def step_policy(profile: AsyncProfile, history, L: int) -> int:
    """Next event after ``history``, which must be a prefix this policy produced."""
    hist = [int(e) for e in (history.events if isinstance(history, EventTrace) else history)]
    policy = StepPolicy(profile, L)
    for i, ev in enumerate(hist):
        nxt = policy.next_event()
        if nxt != ev:
            raise ValueError(f"history diverges from policy at event {i}: {ev} != {nxt}")
    return policy.next_event()


@dataclass
class EventTrace:
    """Executed schedule with per-event logical indices.

    ``k_l[i]`` is the client's local index for client events (-1 for server
    rounds); ``k_w[i]`` is the number of server rounds completed before the
    event for client events and the new round index for server events.
    ``w_seen[i]`` is the broadcast round the executor actually handed to
    the client (-1 for server events).
    """

    events: np.ndarray
    L: int
    w_seen: np.ndarray | None = None
    k_l: np.ndarray = field(init=False)
    k_w: np.ndarray = field(init=False)

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=np.int64)
        counts = np.zeros(self.L, dtype=np.int64)
        k_l = np.full(len(self.events), -1, dtype=np.int64)
        k_w = np.zeros(len(self.events), dtype=np.int64)
        kw = 0
        for i, ev in enumerate(self.events):
            if ev >= 0:
                counts[ev] += 1
                k_l[i] = counts[ev]
                k_w[i] = kw
            else:
                kw += 1
                k_w[i] = kw
        self.k_l, self.k_w = k_l, k_w

    @property
    def n_global(self) -> int:
        return int(np.sum(self.events == GLOBAL))

    def gaps(self) -> list[np.ndarray]:
        """Client events between consecutive server rounds (the last gap may be open)."""
        out, cur = [], []
        for ev in self.events:
            if ev == GLOBAL:
                out.append(np.asarray(cur, dtype=np.int64))
                cur = []
            else:
                cur.append(ev)
        if cur:
            out.append(np.asarray(cur, dtype=np.int64))
        return out

    def fairness_violations(self, k_a: int) -> list[tuple[int, int]]:
        """``(client, first_round)`` pairs where a client misses ``k_a`` consecutive rounds."""
        closed = self.gaps()[: self.n_global]
        present = np.zeros((len(closed), self.L), dtype=bool)
        for g, evs in enumerate(closed):
            present[g, evs] = True
        bad = []
        for start in range(0, len(closed) - k_a + 1):
            window = present[start:start + k_a].any(axis=0)
            bad.extend((int(c), start) for c in np.flatnonzero(~window))
        return bad

    def pause_violations(self) -> list[int]:
        """Client events whose ``w`` was not the latest broadcast when they ran."""
        if self.w_seen is None:
            return []
        client = self.events >= 0
        return [int(i) for i in np.flatnonzero(client & (self.w_seen != self.k_w))]

    def duplicate_kl_violations(self) -> list[int]:
        bad = []
        seen = set()
        for i, ev in enumerate(self.events):
            if ev == GLOBAL:
                seen.clear()
                continue
            key = (int(ev), int(self.k_l[i]))
            if key in seen:
                bad.append(i)
            seen.add(key)
        return bad

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("event_type,client_id,k_l,k_w\n")
        for ev, kl, kw in zip(self.events, self.k_l, self.k_w):
            if ev == GLOBAL:
                buf.write(f"global,-1,-1,{kw}\n")
            else:
                buf.write(f"client,{ev},{kl},{kw}\n")
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


@dataclass
class FleetState:
    """Struct-of-arrays state of every client plus the server snapshot table."""

    X: np.ndarray
    Z: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    PSI: np.ndarray
    XI: np.ndarray
    ZETA: np.ndarray
    K: np.ndarray
    SQ: np.ndarray
    SZETA: np.ndarray
    SK: np.ndarray
    W: np.ndarray
    k_w: int = 0

    @classmethod
    def zeros(cls, L: int, n: int) -> "FleetState":
        z = lambda: np.zeros((L, n))  # noqa: E731
        return cls(X=z(), Z=z(), G=z(), Q=z(), PSI=z(), XI=z(), ZETA=z(),
                   K=np.zeros(L, dtype=np.int64), SQ=z(), SZETA=z(),
                   SK=np.full(L, -1, dtype=np.int64), W=np.zeros(n))

    def copy(self) -> "FleetState":
        return FleetState(**{k: (v.copy() if isinstance(v, np.ndarray) else v)
                             for k, v in self.__dict__.items()})


@dataclass
class RoundHistory:
    """State snapshots taken right after each server round."""

    w: np.ndarray
    x: np.ndarray
    z: np.ndarray | None = None
    g: np.ndarray | None = None
    q: np.ndarray | None = None
    zeta: np.ndarray | None = None

    def rmse_local(self, truth) -> np.ndarray:
        err = self.x - np.asarray(truth, dtype=float)
        return np.sqrt(np.mean(np.sum(err * err, axis=2), axis=1))

    def rmse_global(self, truth) -> np.ndarray:
        return np.linalg.norm(self.w - np.asarray(truth, dtype=float), axis=1)

    def consensus_max(self) -> np.ndarray:
        return np.max(np.linalg.norm(self.x - self.w[:, None, :], axis=2), axis=1)

    def dual_sum_norm(self) -> np.ndarray:
        return np.linalg.norm(self.zeta.sum(axis=1), axis=1)

    def xz_gap_max(self) -> np.ndarray:
        return np.max(np.linalg.norm(self.x - self.z, axis=2), axis=1)

    def wq_gap_max(self) -> np.ndarray:
        return np.max(np.linalg.norm(self.q - self.w[:, None, :], axis=2), axis=1)


@dataclass
class RunResult:
    algorithm: str
    w: np.ndarray
    x: np.ndarray
    rounds: int
    history: RoundHistory | None = None
    trace: EventTrace | None = None
    fleet: FleetState | None = None
    backend: str = ""

    def final_rmse_local(self, truth) -> float:
        err = self.x - np.asarray(truth, dtype=float)
        return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))

    def final_rmse_global(self, truth) -> float:
        return float(np.linalg.norm(self.w - np.asarray(truth, dtype=float)))


def execute_schedule(net: SensorNetwork, params: Hyperparams, events, *,
                     fleet: FleetState | None = None, backend: str | None = None,
                     record: bool = True) -> tuple[FleetState, EventTrace, RoundHistory | None]:
    """Apply an explicit event schedule to ``fleet`` (fresh zero state by default)."""
    L, n = net.L, net.n
    events = np.ascontiguousarray(events, dtype=np.int64)
    if events.size and (events.max() >= L or events.min() < GLOBAL):
        raise ValueError("schedule references unknown clients")
    fleet = FleetState.zeros(L, n) if fleet is None else fleet
    R = int(np.sum(events == GLOBAL)) if record else 0
    rec = [np.zeros((R, L, n)) for _ in range(5)]
    rec_w = np.zeros((R, n))
    w_seen = np.zeros(len(events), dtype=np.int64)
    execute = _backend.get_executor(backend)
    status, where, kw = execute(
        events, net.anchors, net.measurements,
        params.c, params.d, params.alpha, params.beta, params.omega,
        fleet.X, fleet.Z, fleet.G, fleet.Q, fleet.PSI, fleet.XI, fleet.ZETA, fleet.K,
        fleet.SQ, fleet.SZETA, fleet.SK, fleet.W, fleet.k_w,
        w_seen, *rec, rec_w, record,
    )
    fleet.k_w = int(kw)
    if status == 1:
        raise DivergenceError(where)
    if status == 2:
        raise NotReadyError(f"server round at event {where} before every client reported")
    if status == 3:
        raise PreconditionError(f"z-update prox not single-valued at event {where}")
    trace = EventTrace(events, L, w_seen=w_seen)
    history = None
    if record:
        history = RoundHistory(w=rec_w, x=rec[0], z=rec[1], g=rec[2], q=rec[3], zeta=rec[4])
    return fleet, trace, history


def run(net: SensorNetwork, params: Hyperparams, profile: AsyncProfile | None = None, *,
        backend: str | None = None, record: bool = True) -> RunResult:
    """Run the federated solver on ``net`` for ``params.k_global_max`` server rounds."""
    violations = validate_hyperparams(params)
    if violations:
        raise ValueError("hyperparameters rejected: " + "; ".join(violations))
    if profile is None:
        profile = AsyncProfile(local_per_global=params.k_local_per_global, k_a=params.k_a)
    events = build_schedule(profile, net.L, params.k_global_max)
    fleet, trace, history = execute_schedule(net, params, events, backend=backend, record=record)
    return RunResult(
        algorithm="fsmdm",
        w=fleet.W.copy(),
        x=fleet.X.copy(),
        rounds=fleet.k_w,
        history=history,
        trace=trace,
        fleet=fleet,
        backend=backend or _backend.BACKEND,
    )
