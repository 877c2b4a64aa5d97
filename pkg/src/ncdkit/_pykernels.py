"""Pure-Python/numpy versions of the hot kernels.

Mirrors ``_ckernels.pyx`` operation for operation so both backends return
bit-identical results.
"""

import numpy as np

BACKEND = "python"


def codes(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def hamming(a: str, b: str) -> int:
    n = min(len(a), len(b))
    return sum(1 for k in range(n) if a[k] != b[k]) + abs(len(a) - len(b))


def _pairs(fn, xs, ys, rows, cols):
    out = np.empty(len(rows), dtype=np.float64)
    for k in range(len(rows)):
        out[k] = fn(xs[rows[k]], ys[cols[k]])
    return out


def levenshtein_pairs(xs, ys, rows, cols):
    """Distances for index pairs ``(xs[rows[k]], ys[cols[k]])``; inputs are strings."""
    return _pairs(levenshtein, xs, ys, rows, cols)


def hamming_pairs(xs, ys, rows, cols):
    return _pairs(hamming, xs, ys, rows, cols)


def smo(Q, y, C, eps=1e-3, max_iter=100_000, tau=1e-12, trace=False):
    """Second-order working-set SMO for min 0.5 a'Qa - e'a, 0 <= a <= C, y'a = 0.

    ``Q`` is the label-signed Gram matrix ``y_i y_j K_ij``.  Returns
    ``(alpha, grad, iterations, converged, objective_trace)``.
    """
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)
    QD = np.diag(Q).copy()
    hist = [0.0] if trace else None
    converged = False
    it = 0
    while it < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        cand = np.where(up, -y * G, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmax2 = np.max(np.where(low, y * G, -np.inf))
        if gmax + gmax2 < eps:
            converged = True
            break
        b = gmax + y * G
        # K_ii + K_tt - 2 K_it written with the signed matrix
        a = QD[i] + QD - 2.0 * (y[i] * y) * Q[i]
        a = np.where(a <= 0, tau, a)
        obj = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        old_ai, old_aj = alpha[i], alpha[j]
        _update_pair(alpha, G, Q, QD, y, i, j, C, tau)
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        G += Q[i] * dai + Q[j] * daj
        it += 1
        if trace:
            hist.append(0.5 * float(alpha @ (G - 1.0)))
    return alpha, G, it, converged, hist


def _update_pair(alpha, G, Q, QD, y, i, j, C, tau):
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
