"""Pure-Python schedule executor.

Drives :mod:`fsmdm.client` and :mod:`fsmdm.server` event by event.  It has
the same signature and array contract as ``fsmdm._kernels.execute`` and is
used when the compiled extension is unavailable (or forced with
``FSMDM_PURE_PYTHON=1``).
"""

from __future__ import annotations

import math

import numpy as np

from .client import ClientState, local_iteration, schedule_at
from .errors import PreconditionError
from .model import Hyperparams
from .server import ClientSnapshot, ServerState, ingest, update_w

OK, DIVERGED, NOT_READY, PRECONDITION = 0, 1, 2, 3


def execute(events, anchors, ranges, c, d, alpha, beta, omega,
            X, Z, G, Q, PSI, XI, ZETA, K,
            SQ, SZETA, SK, W, kw0,
            w_seen, rec_x, rec_z, rec_g, rec_q, rec_zeta, rec_w, record):
    L, n = X.shape
    params = Hyperparams(c=c, d=d, alpha=alpha, beta=beta, omega=omega)
    states = []
    for i in range(L):
        st = ClientState(anchor=anchors[i], range=float(ranges[i]), params=params, client_id=i,
                         x=X[i], z=Z[i], g=G[i], q=Q[i], psi=PSI[i], xi=XI[i], zeta=ZETA[i],
                         k=int(K[i]))
        if st.k > 0:
            st.schedule = schedule_at(st.k, params)
        states.append(st)
    server = ServerState(n=n, L=L, d=d, w=np.array(W, dtype=float), k_w=int(kw0))
    for i in range(L):
        if SK[i] >= 0:
            server.snapshots[i] = ClientSnapshot(
                q=SQ[i].copy(), zeta=SZETA[i].copy(),
                sigma_xi=d * math.sqrt(SK[i]) if SK[i] > 0 else 0.0,
                k_l_w=int(SK[i]), last_global_round_seen=server.k_w)

    status, where = OK, -1
    rnd = 0
    for idx in range(len(events)):
        ev = int(events[idx])
        if ev >= 0:
            st = states[ev]
            w_seen[idx] = server.k_w
            try:
                msg = local_iteration(st, server.w)
            except PreconditionError:
                status, where = PRECONDITION, idx
                break
            if not st.is_finite():
                status, where = DIVERGED, idx
                break
            ingest(server, ev, msg)
        else:
            w_seen[idx] = -1
            if not server.ready:
                status, where = NOT_READY, idx
                break
            update_w(server)
            if not np.all(np.isfinite(server.w)):
                status, where = DIVERGED, idx
                break
            if record:
                for i, st in enumerate(states):
                    rec_x[rnd, i] = st.x
                    rec_z[rnd, i] = st.z
                    rec_g[rnd, i] = st.g
                    rec_q[rnd, i] = st.q
                    rec_zeta[rnd, i] = st.zeta
                rec_w[rnd] = server.w
            rnd += 1

    for i, st in enumerate(states):
        X[i], Z[i], G[i], Q[i] = st.x, st.z, st.g, st.q
        PSI[i], XI[i], ZETA[i] = st.psi, st.xi, st.zeta
        K[i] = st.k
        snap = server.snapshots[i]
        if snap is not None:
            SQ[i], SZETA[i], SK[i] = snap.q, snap.zeta, snap.k_l_w
    W[:] = server.w
    return status, where, server.k_w
