"""Compiled inner loops for DTW and k-nearest-neighbour counting.

All kernels take precomputed distance matrices so that permutation
baselines can reuse them: permuting the realizations of one variable is
the same as permuting the rows and columns of its distance matrix.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dtw_pair(x, y):
    n = x.shape[0]
    m = y.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    prev[0] = abs(x[0] - y[0])
    for j in range(1, m):
        prev[j] = abs(x[0] - y[j]) + prev[j - 1]
    for i in range(1, n):
        cur[0] = abs(x[i] - y[0]) + prev[0]
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(x[i] - y[j]) + best
        prev, cur = cur, prev
    return prev[m - 1]


@njit(cache=True, nogil=True)
def dtw_matrix(X):
    n = X.shape[0]
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            d = dtw_pair(X[a], X[b])
            out[a, b] = d
            out[b, a] = d
    return out


@njit(cache=True, nogil=True)
def dtw_cross(X, Y):
    out = np.empty((X.shape[0], Y.shape[0]))
    for a in range(X.shape[0]):
        for b in range(Y.shape[0]):
            out[a, b] = dtw_pair(X[a], Y[b])
    return out


@njit(cache=True, nogil=True)
def _count_below(sorted_row, r):
    # number of entries strictly below r (binary search, left side)
    lo = 0
    hi = sorted_row.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if sorted_row[mid] < r:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def joint_knn_counts(Dp, order_p, sorted_p, Dq, sorted_q, perms, k):
    """Neighbour counts for the two-series estimator.

    For each permutation ``perm`` the q-variable of sample n is taken from
    sample ``perm[n]``. Rows of Dp are scanned in increasing distance so the
    scan stops once the p-distance alone exceeds the current k-th joint
    distance. Returns (xi, nu_p, nu_q), each shaped (n_perm, N); counts are
    strict and exclude the sample itself.
    """
    n_perm = perms.shape[0]
    N = Dp.shape[0]
    xi = np.empty((n_perm, N))
    nu_p = np.empty((n_perm, N), dtype=np.int64)
    nu_q = np.empty((n_perm, N), dtype=np.int64)
    best = np.empty(k)
    for p in range(n_perm):
        perm = perms[p]
        for n in range(N):
            for t in range(k):
                best[t] = np.inf
            pn = perm[n]
            row_order = order_p[n]
            for t in range(N):
                m = row_order[t]
                if m == n:
                    continue
                d = Dp[n, m]
                if d >= best[k - 1]:
                    break
                e = Dq[pn, perm[m]]
                if e > d:
                    d = e
                if d < best[k - 1]:
                    s = k - 1
                    while s > 0 and best[s - 1] > d:
                        best[s] = best[s - 1]
                        s -= 1
                    best[s] = d
            r = best[k - 1]
            xi[p, n] = r
            self_hit = 1 if r > 0.0 else 0
            nu_p[p, n] = _count_below(sorted_p[n], r) - self_hit
            nu_q[p, n] = _count_below(sorted_q[pn], r) - self_hit
    return xi, nu_p, nu_q


@njit(cache=True, nogil=True)
def class_knn_counts(order, sorted_d, D, labels_batch, k):
    """Neighbour counts for the series-versus-class estimator.

    ``labels_batch`` has one label vector per row. For sample n, d(n) is the
    distance to its k-th nearest neighbour carrying the same label; the
    returned count is the number of other samples, any label, strictly
    closer than d(n).
    """
    n_perm = labels_batch.shape[0]
    N = D.shape[0]
    dk = np.empty((n_perm, N))
    nu = np.empty((n_perm, N), dtype=np.int64)
    for p in range(n_perm):
        labels = labels_batch[p]
        for n in range(N):
            c = labels[n]
            seen = 0
            r = np.inf
            row_order = order[n]
            for t in range(N):
                m = row_order[t]
                if m == n:
                    continue
                if labels[m] == c:
                    seen += 1
                    if seen == k:
                        r = D[n, m]
                        break
            dk[p, n] = r
            self_hit = 1 if r > 0.0 else 0
            nu[p, n] = _count_below(sorted_d[n], r) - self_hit
    return dk, nu
