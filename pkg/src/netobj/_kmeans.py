"""Seeded k-means (k-means++ init, Lloyd iterations) compiled with numba.

Randomness is passed in as a uniform array so results depend only on the
caller's generator, never on numba's internal RNG state.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _sqdist(x, c):
    s = 0.0
    for t in range(x.shape[0]):
        d = x[t] - c[t]
        s += d * d
    return s


@njit(cache=True, nogil=True)
def _plusplus(X, k, u):
    n, d = X.shape
    centers = np.empty((k, d))
    first = min(int(u[0] * n), n - 1)
    centers[0] = X[first]
    closest = np.empty(n)
    for i in range(n):
        closest[i] = _sqdist(X[i], centers[0])
    for j in range(1, k):
        total = closest.sum()
        pick = n - 1
        if total > 0.0:
            target = u[j] * total
            acc = 0.0
            for i in range(n):
                acc += closest[i]
                if acc >= target and closest[i] > 0.0:
                    pick = i
                    break
        else:
            pick = min(int(u[j] * n), n - 1)
        centers[j] = X[pick]
        for i in range(n):
            dd = _sqdist(X[i], centers[j])
            if dd < closest[i]:
                closest[i] = dd
    return centers


@njit(cache=True, nogil=True)
def _lloyd(X, centers, max_iter):
    n, d = X.shape
    k = centers.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    dist = np.empty(n)
    counts = np.zeros(k, dtype=np.int64)
    for it in range(max_iter):
        changed = False
        for i in range(n):
            best = 0
            bd = _sqdist(X[i], centers[0])
            for j in range(1, k):
                dd = _sqdist(X[i], centers[j])
                if dd < bd:
                    bd = dd
                    best = j
            if labels[i] != best:
                labels[i] = best
                changed = True
            dist[i] = bd
        if not changed and it > 0:
            break
        centers[:, :] = 0.0
        counts[:] = 0
        for i in range(n):
            counts[labels[i]] += 1
            for t in range(d):
                centers[labels[i], t] += X[i, t]
        for j in range(k):
            if counts[j] > 0:
                for t in range(d):
                    centers[j, t] /= counts[j]
            else:
                # reseed an empty cluster at the worst-fit point
                far = 0
                for i in range(1, n):
                    if dist[i] > dist[far]:
                        far = i
                centers[j] = X[far]
                dist[far] = 0.0
    inertia = 0.0
    for i in range(n):
        best = 0
        bd = _sqdist(X[i], centers[0])
        for j in range(1, k):
            dd = _sqdist(X[i], centers[j])
            if dd < bd:
                bd = dd
                best = j
        labels[i] = best
        inertia += bd
    return labels, inertia


@njit(cache=True, nogil=True)
def kmeans_best(X, k, uniforms, max_iter):
    """Best-inertia labels over ``uniforms.shape[0]`` seeded restarts.

    ``uniforms`` has shape (restarts, k) with entries in [0, 1).
    """
    best_labels = np.zeros(X.shape[0], dtype=np.int64)
    best_inertia = np.inf
    for r in range(uniforms.shape[0]):
        centers = _plusplus(X, k, uniforms[r])
        labels, inertia = _lloyd(X, centers, max_iter)
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels, best_inertia


@njit(cache=True, nogil=True)
def _term(s, size, lam):
    e = size * (size - 1) // 2
    if e <= 0 or s <= 0.0:
        return 0.0
    return s * e ** (-lam)


@njit(cache=True, nogil=True)
def refine_partition(A, labels, k, lam, max_moves):
    """Best-improvement single-node moves on sum_k S_k * E_k^-lam.

    ``A`` is the dense symmetric weight matrix, ``labels`` 0-based with all
    k clusters nonempty. No move may empty a cluster, so K is preserved.
    """
    n = A.shape[0]
    lab = labels.copy()
    conn = np.zeros((n, k))
    for v in range(n):
        for u in range(n):
            conn[v, lab[u]] += A[v, u]
    size = np.zeros(k, dtype=np.int64)
    within = np.zeros(k)
    for v in range(n):
        size[lab[v]] += 1
        within[lab[v]] += 0.5 * conn[v, lab[v]]
    total = 0.0
    for c in range(k):
        total += _term(within[c], size[c], lam)
    for _ in range(max_moves):
        best = 1e-12 * max(total, 1e-300)
        bv, bb = -1, -1
        for v in range(n):
            a = lab[v]
            if size[a] <= 1:
                continue
            ta_old = _term(within[a], size[a], lam)
            ta_new = _term(within[a] - conn[v, a], size[a] - 1, lam)
            for b in range(k):
                if b == a:
                    continue
                gain = (ta_new - ta_old + _term(within[b] + conn[v, b], size[b] + 1, lam)
                        - _term(within[b], size[b], lam))
                if gain > best:
                    best = gain
                    bv, bb = v, b
        if bv < 0:
            break
        a = lab[bv]
        within[a] -= conn[bv, a]
        within[bb] += conn[bv, bb]
        size[a] -= 1
        size[bb] += 1
        lab[bv] = bb
        total += best
        for u in range(n):
            conn[u, a] -= A[u, bv]
            conn[u, bb] += A[u, bv]
    return lab
