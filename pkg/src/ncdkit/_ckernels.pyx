# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: edit distances over code points and the SMO loop.

Same semantics and floating-point operation order as ``_pykernels``.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY

cnp.import_array()

BACKEND = "cython"

ctypedef cnp.uint32_t u32


def codes(str s):
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


cdef Py_ssize_t _lev(const u32[::1] a, const u32[::1] b, Py_ssize_t *row) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j, diag, up, best, sub
    if n == 0:
        return m
    if m == 0:
        return n
    for j in range(m + 1):
        row[j] = j
    for i in range(1, n + 1):
        diag = row[0]
        row[0] = i
        for j in range(1, m + 1):
            up = row[j]
            sub = diag + (0 if a[i - 1] == b[j - 1] else 1)
            best = up + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            if sub < best:
                best = sub
            row[j] = best
            diag = up
    return row[m]


cdef Py_ssize_t _ham(const u32[::1] a, const u32[::1] b) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], k, short = n if n < m else m
    cdef Py_ssize_t d = (n - m) if n > m else (m - n)
    for k in range(short):
        if a[k] != b[k]:
            d += 1
    return d


def levenshtein(str a, str b):
    cdef const u32[::1] ca = codes(a)
    cdef const u32[::1] cb = codes(b)
    cdef Py_ssize_t *row = <Py_ssize_t *> malloc((cb.shape[0] + 1) * sizeof(Py_ssize_t))
    if row == NULL:
        raise MemoryError()
    try:
        return _lev(ca, cb, row)
    finally:
        free(row)


def hamming(str a, str b):
    return _ham(codes(a), codes(b))


def _as_codes(seq):
    return [codes(s) for s in seq]


def levenshtein_pairs(xs, ys, rows, cols):
    """Distances for index pairs ``(xs[rows[k]], ys[cols[k]])``; inputs are strings."""
    cx = _as_codes(xs)
    cy = cx if ys is xs else _as_codes(ys)
    cdef cnp.int64_t[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] c = np.ascontiguousarray(cols, dtype=np.int64)
    out = np.empty(r.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t k, width = 1
    for a in cy:
        if a.shape[0] + 1 > width:
            width = a.shape[0] + 1
    cdef Py_ssize_t *row = <Py_ssize_t *> malloc(width * sizeof(Py_ssize_t))
    if row == NULL:
        raise MemoryError()
    cdef const u32[::1] a_, b_
    try:
        for k in range(r.shape[0]):
            a_ = cx[r[k]]
            b_ = cy[c[k]]
            with nogil:
                o[k] = _lev(a_, b_, row)
    finally:
        free(row)
    return out


def hamming_pairs(xs, ys, rows, cols):
    cx = _as_codes(xs)
    cy = cx if ys is xs else _as_codes(ys)
    cdef cnp.int64_t[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] c = np.ascontiguousarray(cols, dtype=np.int64)
    out = np.empty(r.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t k
    for k in range(r.shape[0]):
        o[k] = _ham(cx[r[k]], cy[c[k]])
    return out


cdef void _update_pair(double[::1] alpha, const double[::1] G, const double[:, ::1] Q,
                       const double[::1] QD, const double[::1] y, Py_ssize_t i, Py_ssize_t j,
                       double C, double tau) noexcept nogil:
    cdef double quad, delta, diff, total
    if y[i] != y[j]:
        quad = QD[i] + QD[j] + 2.0 * Q[i, j]
        if quad <= 0:
            quad = tau
        delta = (-G[i] - G[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        else:
            if alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
        if diff > 0:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = C - diff
        else:
            if alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
    else:
        quad = QD[i] + QD[j] - 2.0 * Q[i, j]
        if quad <= 0:
            quad = tau
        delta = (G[i] - G[j]) / quad
        total = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if total > C:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = total - C
        else:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
        if total > C:
            if alpha[j] > C:
                alpha[j] = C
                alpha[i] = total - C
        else:
            if alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total


def smo(Q, y, double C, double eps=1e-3, Py_ssize_t max_iter=100_000, double tau=1e-12,
        bint trace=False):
    """Second-order working-set SMO for min 0.5 a'Qa - e'a, 0 <= a <= C, y'a = 0."""
    cdef const double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yy.shape[0], t, i, j, it = 0
    alpha_arr = np.zeros(n)
    G_arr = -np.ones(n)
    QD_arr = np.ascontiguousarray(np.diag(np.asarray(q)), dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr
    cdef const double[::1] QD = QD_arr
    cdef double gmax, gmax2, v, b, a, obj, obj_min, dai, daj, old_ai, old_aj
    cdef bint up, low, converged = False
    hist = [0.0] if trace else None
    while it < max_iter:
        with nogil:
            gmax = -INFINITY
            gmax2 = -INFINITY
            i = -1
            for t in range(n):
                up = (yy[t] > 0 and alpha[t] < C) or (yy[t] < 0 and alpha[t] > 0)
                if up:
                    v = -yy[t] * G[t]
                    if v > gmax or i == -1:
                        gmax = v
                        i = t
            j = -1
            obj_min = INFINITY
            if i != -1:
                for t in range(n):
                    low = (yy[t] > 0 and alpha[t] > 0) or (yy[t] < 0 and alpha[t] < C)
                    if not low:
                        continue
                    v = yy[t] * G[t]
                    if v > gmax2:
                        gmax2 = v
                    b = gmax + yy[t] * G[t]
                    if b > 0:
                        a = QD[i] + QD[t] - 2.0 * (yy[i] * yy[t]) * q[i, t]
                        if a <= 0:
                            a = tau
                        obj = -(b * b) / a
                        if obj < obj_min:
                            obj_min = obj
                            j = t
        if i == -1 or gmax2 == -INFINITY:
            converged = True
            break
        if gmax + gmax2 < eps:
            converged = True
            break
        if j == -1:
            converged = True
            break
        with nogil:
            old_ai = alpha[i]
            old_aj = alpha[j]
            _update_pair(alpha, G, q, QD, yy, i, j, C, tau)
            dai = alpha[i] - old_ai
            daj = alpha[j] - old_aj
            for t in range(n):
                G[t] += q[i, t] * dai + q[j, t] * daj
        it += 1
        if trace:
            hist.append(0.5 * float(alpha_arr @ (G_arr - 1.0)))
    return alpha_arr, G_arr, it, converged, hist
