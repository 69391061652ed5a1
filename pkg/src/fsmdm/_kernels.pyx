# cython: language_level=3
"""Compiled schedule executor.

Same contract as ``fsmdm._pyexec.execute``: runs an event schedule
(client id >= 0 for a local iteration, -1 for a server round) over the
struct-of-arrays fleet state in place.
"""

import numpy as np

from libc.math cimport sqrt, isfinite

cdef int OK = 0
cdef int DIVERGED = 1
cdef int NOT_READY = 2
cdef int PRECONDITION = 3


cdef int _client_step(
    Py_ssize_t i, const double[:, :] anchors, const double[:] ranges,
    double c, double d, double alpha, double beta, double omega,
    double[:, :] X, double[:, :] Z, double[:, :] G, double[:, :] Q,
    double[:, :] PSI, double[:, :] XI, double[:, :] ZETA, long long[:] K,
    double[:] W, double[:] buf,
) noexcept nogil:
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t j
    cdef long long k = K[i] + 1
    K[i] = k
    cdef double sq = sqrt(<double>k)
    cdef double sp = c * sq
    cdef double sx = d * sq
    cdef double mp = alpha / sq
    cdef double mh = beta / sq
    cdef double ups = sp + sx
    cdef double lam = 1.0 / ups
    cdef double r, scale, step, dr, u, v, e, mid, lam2, bound
    cdef int finite = 1

    # x: prox of 2 max(0, ||x - a|| - d) at p with step 1/ups
    for j in range(n):
        buf[j] = -(PSI[i, j] + XI[i, j] - sp * Z[i, j] - sx * G[i, j]) / ups
    for j in range(n):
        buf[n + j] = buf[j] - anchors[i, j]
    r = 0.0
    for j in range(n):
        r += buf[n + j] * buf[n + j]
    r = sqrt(r)
    dr = ranges[i]
    if r <= dr:
        for j in range(n):
            X[i, j] = buf[j]
    elif r <= dr + 2.0 * lam:
        scale = dr / r
        for j in range(n):
            X[i, j] = anchors[i, j] + scale * buf[n + j]
    else:
        scale = 2.0 * lam / r
        for j in range(n):
            X[i, j] = buf[j] - scale * buf[n + j]

    # z: prox of -e_phi centred at x + psi / sigma_psi
    step = 1.0 / sp
    if not step < mp:
        return PRECONDITION
    for j in range(n):
        buf[n + j] = (X[i, j] + PSI[i, j] / sp) - anchors[i, j]
    r = 0.0
    for j in range(n):
        r += buf[n + j] * buf[n + j]
    r = sqrt(r)
    if r <= mp - step:
        scale = mp / (mp - step)
    else:
        scale = (r + step) / r
    for j in range(n):
        Z[i, j] = anchors[i, j] + scale * buf[n + j]

    for j in range(n):
        PSI[i, j] = PSI[i, j] + sp * (X[i, j] - Z[i, j])

    # (g, q) against the current w, then xi / zeta ascent
    lam2 = 2.0 * omega / sx
    bound = mh + lam2
    for j in range(n):
        u = X[i, j] + XI[i, j] / sx
        v = W[j] + ZETA[i, j] / sx
        e = v - u
        if e <= bound and e >= -bound:
            e = e * (mh / (mh + lam2))
        elif e > 0:
            e = e - lam2
        else:
            e = e + lam2
        mid = (u + v) / 2.0
        G[i, j] = mid - e / 2.0
        Q[i, j] = mid + e / 2.0
    for j in range(n):
        XI[i, j] = XI[i, j] + sx * (X[i, j] - G[i, j])
        ZETA[i, j] = ZETA[i, j] + sx * (W[j] - Q[i, j])
        if not (isfinite(X[i, j]) and isfinite(Z[i, j]) and isfinite(G[i, j])
                and isfinite(Q[i, j]) and isfinite(PSI[i, j]) and isfinite(XI[i, j])
                and isfinite(ZETA[i, j])):
            finite = 0
    return OK if finite else DIVERGED


def execute(const long long[:] events, const double[:, :] anchors, const double[:] ranges,
            double c, double d, double alpha, double beta, double omega,
            double[:, :] X, double[:, :] Z, double[:, :] G, double[:, :] Q,
            double[:, :] PSI, double[:, :] XI, double[:, :] ZETA, long long[:] K,
            double[:, :] SQ, double[:, :] SZETA, long long[:] SK, double[:] W,
            long long kw0,
            long long[:] w_seen,
            double[:, :, :] rec_x, double[:, :, :] rec_z, double[:, :, :] rec_g,
            double[:, :, :] rec_q, double[:, :, :] rec_zeta, double[:, :] rec_w,
            bint record):
    cdef Py_ssize_t L = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t E = events.shape[0]
    cdef Py_ssize_t idx, i, j
    cdef long long ev
    cdef long long kw = kw0
    cdef Py_ssize_t rnd = 0
    cdef int status = OK
    cdef Py_ssize_t where = -1
    cdef double sigma, den
    cdef int ready
    cdef double[:] buf = np.zeros(2 * n)
    cdef double[:] num = np.zeros(n)

    with nogil:
        for idx in range(E):
            ev = events[idx]
            if ev >= 0:
                w_seen[idx] = kw
                status = _client_step(ev, anchors, ranges, c, d, alpha, beta, omega,
                                      X, Z, G, Q, PSI, XI, ZETA, K, W, buf)
                if status != OK:
                    where = idx
                    break
                for j in range(n):
                    SQ[ev, j] = Q[ev, j]
                    SZETA[ev, j] = ZETA[ev, j]
                SK[ev] = K[ev]
            else:
                w_seen[idx] = -1
                ready = 1
                for i in range(L):
                    if SK[i] < 0:
                        ready = 0
                if not ready:
                    status = NOT_READY
                    where = idx
                    break
                for j in range(n):
                    num[j] = 0.0
                den = 0.0
                for i in range(L):
                    sigma = d * sqrt(<double>(SK[i] + 1))
                    for j in range(n):
                        num[j] += sigma * SQ[i, j] - SZETA[i, j]
                    den += sigma
                for j in range(n):
                    W[j] = num[j] / den
                    if not isfinite(W[j]):
                        status = DIVERGED
                kw += 1
                if status != OK:
                    where = idx
                    break
                if record:
                    for i in range(L):
                        for j in range(n):
                            rec_x[rnd, i, j] = X[i, j]
                            rec_z[rnd, i, j] = Z[i, j]
                            rec_g[rnd, i, j] = G[i, j]
                            rec_q[rnd, i, j] = Q[i, j]
                            rec_zeta[rnd, i, j] = ZETA[i, j]
                    for j in range(n):
                        rec_w[rnd, j] = W[j]
                rnd += 1
    return status, where, kw
