"""Server-side aggregation of the global estimate ``w``.

The server keeps the freshest ``(q, zeta, k)`` per client and sets ``w``
to the exact minimizer of ``sum_l sigma_l/2 ||w - q_l||^2 + zeta_l.(w - q_l)``,
with ``sigma_l = d sqrt(k_l + 1)`` recomputed from the reported index.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .client import ClientOutbox
from .errors import NotReadyError

log = logging.getLogger(__name__)


@dataclass
class ClientSnapshot:
    q: np.ndarray
    zeta: np.ndarray
    sigma_xi: float
    k_l_w: int
    last_global_round_seen: int


@dataclass(frozen=True)
class ServerBroadcast:
    k_w: int
    w: np.ndarray


@dataclass
class ServerState:
    n: int
    L: int
    d: float
    w: np.ndarray = None
    snapshots: list = None
    k_w: int = 0
    stale_dropped: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.w is None:
            self.w = np.zeros(self.n)
        if self.snapshots is None:
            self.snapshots = [None] * self.L

    @property
    def ready(self) -> bool:
        return all(s is not None for s in self.snapshots)

    def broadcast(self) -> ServerBroadcast:
        return ServerBroadcast(k_w=self.k_w, w=self.w.copy())


def ingest(server: ServerState, client_id: int, msg: ClientOutbox) -> bool:
    """Store ``msg`` if it is newer than the stored snapshot.

    Returns ``False`` (and counts a staleness event) for stale or duplicate
    messages.
    """
    with server._lock:
        cur = server.snapshots[client_id]
        if cur is not None and msg.k_l <= cur.k_l_w:
            server.stale_dropped += 1
            log.debug("dropped stale message from client %d (k=%d <= %d)",
                      client_id, msg.k_l, cur.k_l_w)
            return False
        expected = server.d * math.sqrt(msg.k_l)
        if not math.isclose(msg.sigma_xi, expected, rel_tol=1e-9):
            log.warning("client %d reported sigma_xi=%g, schedule gives %g",
                        client_id, msg.sigma_xi, expected)
        server.snapshots[client_id] = ClientSnapshot(
            q=np.array(msg.q, dtype=float),
            zeta=np.array(msg.zeta, dtype=float),
            sigma_xi=float(msg.sigma_xi),
            k_l_w=int(msg.k_l),
            last_global_round_seen=server.k_w,
        )
        return True


def update_w(server: ServerState) -> np.ndarray:
    with server._lock:
        missing = [i for i, s in enumerate(server.snapshots) if s is None]
        if missing:
            raise NotReadyError(f"clients {missing} have not reported yet")
        num = np.zeros(server.n)
        den = 0.0
        for snap in server.snapshots:
            sigma = server.d * math.sqrt(snap.k_l_w + 1)
            num += sigma * snap.q - snap.zeta
            den += sigma
        server.w = num / den
        server.k_w += 1
        return server.w.copy()
