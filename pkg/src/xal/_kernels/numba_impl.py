"""Numba-compiled twins of the kernels in ``numpy_impl``.

Same signatures, same semantics; loops instead of vectorization. No
fastmath so both backends agree to float rounding.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = {"cache": True, "nogil": True}


@njit(**_JIT)
def logistic_gd(X, y, l2, step, tol, max_epochs):
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    losses = np.empty(max_epochs + 1)
    gw = np.empty(d)
    n_updates = 0
    for epoch in range(max_epochs + 1):
        loss = 0.0
        gb = 0.0
        for j in range(d):
            gw[j] = 0.0
        for i in range(n):
            z = b
            for j in range(d):
                z += X[i, j] * w[j]
            if z >= 0.0:
                p = 1.0 / (1.0 + np.exp(-z))
                sp = z + np.log1p(np.exp(-z))
            else:
                ez = np.exp(z)
                p = ez / (1.0 + ez)
                sp = np.log1p(ez)
            loss += sp - y[i] * z
            r = p - y[i]
            for j in range(d):
                gw[j] += X[i, j] * r
            gb += r
        loss /= n
        ww = 0.0
        for j in range(d):
            ww += w[j] * w[j]
        loss += 0.5 * l2 * ww
        losses[epoch] = loss
        gb /= n
        gsq = gb * gb
        for j in range(d):
            gw[j] = gw[j] / n + l2 * w[j]
            gsq += gw[j] * gw[j]
        if np.sqrt(gsq) < tol or epoch == max_epochs:
            n_updates = epoch
            break
        for j in range(d):
            w[j] -= step * gw[j]
        b -= step * gb
    return w, b, losses[: n_updates + 1].copy(), n_updates


@njit(**_JIT)
def best_stump(X, sort_idx, w, y):
    n, d = X.shape
    w_total = 0.0
    wp_total = 0.0
    for i in range(n):
        w_total += w[i]
        if y[i] > 0:
            wp_total += w[i]
    wm_total = w_total - wp_total
    best_err = np.inf
    best_j = -1
    best_thr = 0.0
    best_sign = 1.0
    for j in range(d):
        wp_le = 0.0
        wm_le = 0.0
        for pos in range(n - 1):
            i = sort_idx[j, pos]
            if y[i] > 0:
                wp_le += w[i]
            else:
                wm_le += w[i]
            v = X[i, j]
            v_next = X[sort_idx[j, pos + 1], j]
            if v >= v_next:
                continue
            err_plus = wm_le + (wp_total - wp_le)
            err_minus = wp_le + (wm_total - wm_le)
            if err_plus < best_err - 1e-15:
                best_err = err_plus
                best_j = j
                best_thr = 0.5 * (v + v_next)
                best_sign = 1.0
            if err_minus < best_err - 1e-15:
                best_err = err_minus
                best_j = j
                best_thr = 0.5 * (v + v_next)
                best_sign = -1.0
    return best_j, best_thr, best_sign, best_err


@njit(**_JIT)
def lloyd(X, centroids, max_iter, tol):
    n, dim = X.shape
    k = centroids.shape[0]
    centroids = centroids.copy()
    history = np.empty(max_iter)
    assign = np.zeros(n, dtype=np.int64)
    mindist = np.empty(n)
    counts = np.zeros(k, dtype=np.int64)
    prev = np.inf
    it = 0
    for it in range(max_iter):
        cost = 0.0
        for c in range(k):
            counts[c] = 0
        for i in range(n):
            best = np.inf
            arg = 0
            for c in range(k):
                d2 = 0.0
                for t in range(dim):
                    diff = X[i, t] - centroids[c, t]
                    d2 += diff * diff
                if d2 < best:
                    best = d2
                    arg = c
            assign[i] = arg
            mindist[i] = best
            counts[arg] += 1
            cost += best
        history[it] = cost
        for c in range(k):
            if counts[c] == 0:
                far = 0
                fd = -1.0
                for i in range(n):
                    if mindist[i] > fd:
                        fd = mindist[i]
                        far = i
                counts[assign[far]] -= 1
                assign[far] = c
                counts[c] = 1
                mindist[far] = 0.0
                for t in range(dim):
                    centroids[c, t] = X[far, t]
        if prev < np.inf and abs(prev - cost) <= tol * max(prev, 1e-300):
            break
        prev = cost
        for c in range(k):
            for t in range(dim):
                centroids[c, t] = 0.0
        for i in range(n):
            c = assign[i]
            for t in range(dim):
                centroids[c, t] += X[i, t]
        for c in range(k):
            for t in range(dim):
                centroids[c, t] /= counts[c]
    return centroids, assign, history[: it + 1].copy(), it + 1


@njit(**_JIT)
def _xlogx(c):
    if c > 0.0:
        return c * np.log(c)
    return 0.0


@njit(**_JIT)
def _block_entropy(n, ones):
    return _xlogx(n) - _xlogx(ones) - _xlogx(n - ones)


@njit(**_JIT)
def best_cut(values, targets):
    n = values.shape[0]
    if n < 2:
        return -1.0, 0.0
    total_ones = 0.0
    for i in range(n):
        total_ones += targets[i]
    parent = _block_entropy(float(n), total_ones)
    best_delta = -1.0
    best_cut_val = 0.0
    found = False
    ones_le = 0.0
    for pos in range(n - 1):
        ones_le += targets[pos]
        if values[pos] >= values[pos + 1]:
            continue
        nl = float(pos + 1)
        delta = (
            parent
            - _block_entropy(nl, ones_le)
            - _block_entropy(n - nl, total_ones - ones_le)
        )
        if (not found) or delta > best_delta + 1e-15:
            best_delta = delta
            best_cut_val = 0.5 * (values[pos] + values[pos + 1])
            found = True
    if not found:
        return -1.0, 0.0
    return best_delta, best_cut_val
