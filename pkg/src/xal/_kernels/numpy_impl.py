"""Pure-numpy reference implementations of the hot kernels.

Every function here has a numba twin in ``numba_impl`` with the same
signature and semantics; the active backend is picked in ``__init__``.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z):
    # log(1 + e^z), stable for large |z|
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def logistic_gd(X, y, l2, step, tol, max_epochs):
    """Full-batch gradient descent on L2-regularized mean logistic loss.

    X is (n, d) float64, y is (n,) float64 in {0, 1}. The bias is not
    penalized. Stops when the euclidean norm of the full gradient drops
    below ``tol``. Returns (w, b, losses, n_updates) where ``losses``
    holds the loss before each update plus the final loss.
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    losses = np.empty(max_epochs + 1)
    n_updates = 0
    for epoch in range(max_epochs + 1):
        z = X @ w + b
        p = _sigmoid(z)
        loss = np.mean(_softplus(z) - y * z) + 0.5 * l2 * float(w @ w)
        losses[epoch] = loss
        r = p - y
        gw = X.T @ r / n + l2 * w
        gb = float(np.mean(r))
        gnorm = np.sqrt(float(gw @ gw) + gb * gb)
        if gnorm < tol or epoch == max_epochs:
            n_updates = epoch
            break
        w = w - step * gw
        b = b - step * gb
    return w, b, losses[: n_updates + 1].copy(), n_updates


def best_stump(X, sort_idx, w, y):
    """Weighted search for the best depth-1 threshold stump.

    X is (n, d); sort_idx is (d, n) with precomputed per-column argsorts;
    w are nonnegative sample weights; y is (n,) float64 in {-1, +1}.
    Candidate thresholds are midpoints between consecutive distinct
    values. Both leaf polarities are scored; ties keep the first
    candidate in (column, threshold, +polarity-first) order.

    Returns (feature, threshold, left_sign, err); feature is -1 when no
    column admits a split.
    """
    n, d = X.shape
    w_total = float(np.sum(w))
    wp_total = float(np.sum(w[y > 0]))
    wm_total = w_total - wp_total
    best_err = np.inf
    best_j = -1
    best_thr = 0.0
    best_sign = 1.0
    for j in range(d):
        order = sort_idx[j]
        vals = X[order, j]
        wj = w[order]
        yj = y[order]
        wp_le = np.cumsum(np.where(yj > 0, wj, 0.0))
        wm_le = np.cumsum(np.where(yj > 0, 0.0, wj))
        boundary = vals[:-1] < vals[1:]
        if not np.any(boundary):
            continue
        idx = np.nonzero(boundary)[0]
        # left leaf predicts +1: mistakes are negatives on the left plus
        # positives on the right
        err_plus = wm_le[idx] + (wp_total - wp_le[idx])
        err_minus = wp_le[idx] + (wm_total - wm_le[idx])
        both = np.stack([err_plus, err_minus], axis=1).ravel()
        k = int(np.argmin(both))
        err = float(both[k])
        if err < best_err - 1e-15:
            best_err = err
            pos = idx[k // 2]
            best_thr = 0.5 * (vals[pos] + vals[pos + 1])
            best_sign = 1.0 if k % 2 == 0 else -1.0
            best_j = j
    return best_j, best_thr, best_sign, best_err


def lloyd(X, centroids, max_iter, tol):
    """Lloyd's k-means iteration from given initial centroids.

    Per iteration: assign to nearest centroid (ties to the lowest id),
    record the assignment cost, reseed any empty cluster at the point
    farthest from its own centroid, then update means. Stops when the
    relative cost change is below ``tol`` or after ``max_iter``
    iterations. Returned assignment is nearest-centroid consistent with
    the returned centroids.

    Returns (centroids, assign, cost_history, n_iter).
    """
    n = X.shape[0]
    k = centroids.shape[0]
    centroids = centroids.copy()
    history = np.empty(max_iter)
    assign = np.zeros(n, dtype=np.int64)
    prev = np.inf
    it = 0
    for it in range(max_iter):
        d2 = _sq_dists(X, centroids)
        assign = np.argmin(d2, axis=1)
        mindist = d2[np.arange(n), assign]
        history[it] = float(np.sum(mindist))
        counts = np.bincount(assign, minlength=k)
        for c in range(k):
            if counts[c] == 0:
                far = int(np.argmax(mindist))
                centroids[c] = X[far]
                assign[far] = c
                mindist[far] = 0.0
                counts = np.bincount(assign, minlength=k)
        cost = history[it]
        if prev < np.inf and abs(prev - cost) <= tol * max(prev, 1e-300):
            break
        prev = cost
        for c in range(k):
            mask = assign == c
            centroids[c] = X[mask].mean(axis=0)
    return centroids, assign, history[: it + 1].copy(), it + 1


def _sq_dists(A, B):
    d2 = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def best_cut(values, targets):
    """Best single entropy cut for a sorted value block.

    ``values`` ascending, ``targets`` the matching binary labels.
    Scores every midpoint between consecutive distinct values by the
    unnormalized entropy reduction n*H(parent) - nl*H(l) - nr*H(r)
    (natural log); ties keep the lowest cut. Returns (delta, cut), with
    delta = -1.0 when the block admits no cut.
    """
    n = values.shape[0]
    if n < 2:
        return -1.0, 0.0
    ones = np.cumsum(targets)
    total_ones = ones[-1]
    parent = _block_entropy(n, total_ones)
    boundary = values[:-1] < values[1:]
    if not np.any(boundary):
        return -1.0, 0.0
    idx = np.nonzero(boundary)[0]
    nl = idx + 1.0
    ol = ones[idx]
    left = _block_entropy(nl, ol)
    right = _block_entropy(n - nl, total_ones - ol)
    delta = parent - left - right
    k = int(np.argmax(delta))
    cut = 0.5 * (values[idx[k]] + values[idx[k] + 1])
    return float(delta[k]), cut


def _block_entropy(n, ones):
    # n * H(block) = n ln n - ones ln ones - zeros ln zeros
    zeros = n - ones
    return _xlogx(n) - _xlogx(ones) - _xlogx(zeros)


def _xlogx(c):
    c = np.asarray(c, dtype=np.float64)
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = c[pos] * np.log(c[pos])
    return out if out.ndim else float(out)
