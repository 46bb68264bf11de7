"""Jitted Dormand-Prince 8(5,3) stepper for matrix Schroedinger equations.

Integrates ``dY/dt = -i H(t) Y`` for an ``n x m`` complex ``Y``. Two forms
of ``H`` are compiled in:

* ``MODE_INTERACTION``: ``H_jk = A_jk exp(i D_jk t^2)`` over a sparse list
  of nonzero pairs, ``D_jk = (b_j - b_k) / 2``.
* ``MODE_LINEAR``: ``H = t P + Q`` with dense complex ``P``, ``Q``.

Step size is capped at ``0.2 / (rate * |t| + 1)``.
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dc

MODE_INTERACTION = 0
MODE_LINEAR = 1

STATUS_OK = 0
STATUS_UNDERFLOW = 1

_NS = _dc.N_STAGES
TABLEAU_A = np.ascontiguousarray(_dc.A[:_NS, :_NS], dtype=np.float64)
TABLEAU_B = np.ascontiguousarray(_dc.B, dtype=np.float64)
TABLEAU_C = np.ascontiguousarray(_dc.C[:_NS], dtype=np.float64)
ERR_E3 = np.ascontiguousarray(_dc.E3, dtype=np.float64)
ERR_E5 = np.ascontiguousarray(_dc.E5, dtype=np.float64)


@njit(cache=True)
def _rhs(mode, t, Y, P, Q, rows, cols, out):
    n, m = Y.shape
    out[:, :] = 0.0
    if mode == MODE_INTERACTION:
        t2 = t * t
        for e in range(rows.shape[0]):
            j = rows[e]
            k = cols[e]
            h = -1j * P[j, k] * np.exp(1j * Q[j, k].real * t2)
            for c in range(m):
                out[j, c] += h * Y[k, c]
    else:
        for j in range(n):
            for k in range(n):
                h = -1j * (t * P[j, k] + Q[j, k])
                if h != 0.0:
                    for c in range(m):
                        out[j, c] += h * Y[k, c]


@njit(cache=True)
def integrate(mode, t0, t1, Y0, P, Q, rows, cols, rtol, atol, rate, h_min_frac,
              A, B, C, E3, E5):
    """Advance ``Y0`` from ``t0`` to ``t1``.

    Returns ``(Y, t_reached, n_accepted, n_rejected, status)``.
    """
    ns = B.shape[0]
    n, m = Y0.shape
    K = np.empty((ns + 1, n, m), dtype=np.complex128)
    Y = Y0.copy()
    Yn = np.empty_like(Y)
    tmp = np.empty_like(Y)
    t = t0
    span = t1 - t0
    h_min = h_min_frac * span
    h = min(0.01 * span, 0.02 / (rate * abs(t) + 1.0))
    _rhs(mode, t, Y, P, Q, rows, cols, K[0])
    accepted = 0
    rejected = 0
    while t < t1:
        cap = 0.2 / (rate * abs(t) + 1.0)
        if h > cap:
            h = cap
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True
        if h < h_min and not last:
            return Y, t, accepted, rejected, STATUS_UNDERFLOW
        for s in range(1, ns):
            tmp[:, :] = Y
            for q in range(s):
                a = A[s, q]
                if a != 0.0:
                    for i in range(n):
                        for c in range(m):
                            tmp[i, c] += h * a * K[q, i, c]
            _rhs(mode, t + C[s] * h, tmp, P, Q, rows, cols, K[s])
        Yn[:, :] = Y
        for q in range(ns):
            b = B[q]
            if b != 0.0:
                for i in range(n):
                    for c in range(m):
                        Yn[i, c] += h * b * K[q, i, c]
        _rhs(mode, t + h, Yn, P, Q, rows, cols, K[ns])

        err5 = 0.0
        err3 = 0.0
        for i in range(n):
            for c in range(m):
                scale = atol + rtol * max(abs(Y[i, c]), abs(Yn[i, c]))
                e5 = 0j
                e3 = 0j
                for q in range(ns + 1):
                    e5 += E5[q] * K[q, i, c]
                    e3 += E3[q] * K[q, i, c]
                err5 += (abs(e5) / scale) ** 2
                err3 += (abs(e3) / scale) ** 2
        if err5 == 0.0 and err3 == 0.0:
            err = 0.0
        else:
            err = h * err5 / np.sqrt((err5 + 0.01 * err3) * n * m)

        if err <= 1.0:
            t = t1 if last else t + h
            Y[:, :] = Yn
            K[0] = K[ns]
            accepted += 1
            if err == 0.0:
                h *= 10.0
            else:
                h *= min(10.0, 0.9 * err ** (-1.0 / 8.0))
        else:
            rejected += 1
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
            if h < h_min:
                return Y, t, accepted, rejected, STATUS_UNDERFLOW
    return Y, t, accepted, rejected, STATUS_OK
