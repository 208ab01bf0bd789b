"""Compiled fixed-step integration kernels for long oscillatory segments.

Used only when the coefficient provides batched evaluation and the step cap
forces thousands of steps; the embedded error estimate is still computed for
every step, so accuracy control is identical to the adaptive path (the
driver halves the step globally until the worst step passes its budget).
Everything degrades gracefully to the pure-python integrator when numba is
not installed.
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    AVAILABLE = False

# Dormand-Prince tableau (row 6 = 5th-order combination, FSAL)
_A_BT = np.zeros((7, 7))
_A_BT[1, 0] = 1 / 5
_A_BT[2, :2] = (3 / 40, 9 / 40)
_A_BT[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A_BT[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A_BT[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A_BT[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E_BT = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])
_C_BT = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])

_WINDOW = 65536

if AVAILABLE:

    @numba.njit(cache=True)
    def _rk_mat(A_st, h, Y0, tol_unit):  # pragma: no cover - compiled
        n = A_st.shape[0]
        m = Y0.shape[0]
        out = np.empty((n + 1, m, m), dtype=np.complex128)
        K = np.empty((7, m, m), dtype=np.complex128)
        Ytmp = np.empty((m, m), dtype=np.complex128)
        out[0] = Y0
        for r in range(m):
            for c in range(m):
                acc = 0j
                for q in range(m):
                    acc += A_st[0, 0, r, q] * Y0[q, c]
                K[0, r, c] = acc
        max_ratio = 0.0
        for i in range(n):
            ynorm = 0.0
            for r in range(m):
                for c in range(m):
                    ynorm += abs(out[i, r, c])
            for j in range(1, 7):
                for r in range(m):
                    for c in range(m):
                        acc = out[i, r, c]
                        for l in range(j):
                            a = _A_BT[j, l]
                            if a != 0.0:
                                acc += h * a * K[l, r, c]
                        Ytmp[r, c] = acc
                for r in range(m):
                    for c in range(m):
                        acc = 0j
                        for q in range(m):
                            acc += A_st[i, j, r, q] * Ytmp[q, c]
                        K[j, r, c] = acc
            out[i + 1] = Ytmp  # stage-7 argument is the 5th-order solution
            err = 0.0
            for r in range(m):
                for c in range(m):
                    e = 0j
                    for j in range(7):
                        ee = _E_BT[j]
                        if ee != 0.0:
                            e += ee * K[j, r, c]
                    err += abs(h * e)
            budget = tol_unit * h * (1.0 + ynorm)
            ratio = err / budget if budget > 0 else 1e300
            if ratio > max_ratio:
                max_ratio = ratio
            for r in range(m):
                for c in range(m):
                    K[0, r, c] = K[6, r, c]
            if max_ratio > 4.0:
                return out, max_ratio
        return out, max_ratio

    @numba.njit(cache=True)
    def _rk_vec(A_st, f_st, h, x0, tol_unit):  # pragma: no cover - compiled
        n = A_st.shape[0]
        m = x0.shape[0]
        out = np.empty((n + 1, m), dtype=np.complex128)
        K = np.empty((7, m), dtype=np.complex128)
        xtmp = np.empty(m, dtype=np.complex128)
        out[0] = x0
        for r in range(m):
            acc = f_st[0, 0, r]
            for q in range(m):
                acc += A_st[0, 0, r, q] * x0[q]
            K[0, r] = acc
        max_ratio = 0.0
        for i in range(n):
            ynorm = 0.0
            for r in range(m):
                ynorm += abs(out[i, r])
            for j in range(1, 7):
                for r in range(m):
                    acc = out[i, r]
                    for l in range(j):
                        a = _A_BT[j, l]
                        if a != 0.0:
                            acc += h * a * K[l, r]
                    xtmp[r] = acc
                for r in range(m):
                    acc = f_st[i, j, r]
                    for q in range(m):
                        acc += A_st[i, j, r, q] * xtmp[q]
                    K[j, r] = acc
            out[i + 1] = xtmp
            err = 0.0
            for r in range(m):
                e = 0j
                for j in range(7):
                    ee = _E_BT[j]
                    if ee != 0.0:
                        e += ee * K[j, r]
                err += abs(h * e)
            budget = tol_unit * h * (1.0 + ynorm)
            ratio = err / budget if budget > 0 else 1e300
            if ratio > max_ratio:
                max_ratio = ratio
            for r in range(m):
                K[0, r] = K[6, r]
            if max_ratio > 4.0:
                return out, max_ratio
        return out, max_ratio


def run_fixed(kind, A, f, lo, y0, n, h, tol_unit):
    """Integrate n fixed steps of size h from lo; returns (ts, values, max_ratio).

    Work proceeds in windows so the precomputed stage coefficients stay
    small; on the first window whose worst step exceeds its error budget the
    run aborts (the caller halves h and retries).
    """
    m = y0.shape[0]
    node_ts = lo + h * np.arange(n + 1)
    node_ts[-1] = lo + n * h
    vals = np.empty((n + 1,) + y0.shape, dtype=np.complex128)
    vals[0] = y0
    y = y0
    max_ratio = 0.0
    i0 = 0
    while i0 < n:
        w = min(_WINDOW, n - i0)
        st = lo + h * (np.arange(i0, i0 + w)[:, None] + _C_BT[None, :])
        A_st = A.eval_many(st.ravel()).reshape(w, 7, m, m)
        if kind == "mat":
            out, mr = _rk_mat(A_st, h, y, tol_unit)
        else:
            f_st = f.eval_many(st.ravel()).reshape(w, 7, m)
            out, mr = _rk_vec(A_st, f_st, h, y, tol_unit)
        max_ratio = max(max_ratio, float(mr))
        if max_ratio > 1.0:
            return node_ts, vals, max_ratio
        vals[i0 + 1 : i0 + w + 1] = out[1:]
        y = vals[i0 + w]
        i0 += w
    return node_ts, vals, max_ratio
