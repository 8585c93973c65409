"""Slow, independent reference implementations used only by the tests."""
import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np


def ranksum_exact_bruteforce(x, y):
    """Two-sided exact rank-sum p by listing every assignment of ranks to x."""
    pooled = np.concatenate([x, y])
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(pooled.size)
    sp = pooled[order]
    i = 0
    while i < sp.size:
        j = i
        while j + 1 < sp.size and sp[j + 1] == sp[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    n1, N = len(x), len(pooled)
    mean = Fraction(n1 * (N + 1), 2)
    obs = abs(Fraction(ranks[:n1].sum()).limit_denominator(4) - mean)
    hits = total = 0
    for combo in itertools.combinations(range(N), n1):
        s = Fraction(ranks[list(combo)].sum()).limit_denominator(4)
        total += 1
        hits += abs(s - mean) >= obs
    return hits / total


def binomial_tail_fraction(trials, p, m):
    """P(X >= m) in exact rational arithmetic (p given as a decimal string or Fraction)."""
    p = Fraction(p)
    return sum(math.comb(trials, k) * p ** k * (1 - p) ** (trials - k) for k in range(m, trials + 1))


def chi2_even_df_logsf(x, df):
    """-log P(chi2_df >= x) for even df via the Poisson-sum identity, in high precision."""
    k = df // 2
    with mpmath.workdps(60):
        h = mpmath.mpf(x) / 2
        s = mpmath.fsum(h ** i / mpmath.factorial(i) for i in range(k))
        return float(-(-h + mpmath.log(s)))


def set_partitions(n, kmax):
    """Every partition of range(n) into at most kmax blocks, as label arrays."""
    def grow(prefix, k):
        if len(prefix) == n:
            yield np.array(prefix)
            return
        for lab in range(min(k + 1, kmax)):
            yield from grow(prefix + [lab], max(k, lab + 1))
    yield from grow([0], 1)


def criterion_bruteforce(A, labels, lam):
    total = 0.0
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        e = idx.size * (idx.size - 1) // 2
        s = A[np.ix_(idx, idx)].sum() / 2
        if e > 0 and s > 0:
            total += s * e ** (-lam)
    return total
