"""Per-edge two-sample tests and the -log(p) weight matrix."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import InvalidArgumentError
from .graphcore import ConnectomeDataset, EdgeIndex, n_edges

METHODS = ("wilcoxon", "welch-t")
P_FLOOR = 1e-300
# smallest p a test reports; keeps every p in (0, 1]
P_MIN = sys.float_info.min
EXACT_MAX_TOTAL = 20


@dataclass(frozen=True)
class EdgeTestResult:
    p_values: np.ndarray
    signs: np.ndarray
    method: str

    def __post_init__(self):
        p = np.asarray(self.p_values, dtype=float)
        if p.ndim != 1 or np.any(~(p > 0)) or np.any(p > 1):
            raise InvalidArgumentError("p-values must lie in (0, 1]")
        s = np.asarray(self.signs, dtype=np.int8)
        if s.shape != p.shape:
            raise InvalidArgumentError("signs and p-values differ in length")
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown test method {self.method!r}")
        object.__setattr__(self, "p_values", p)
        object.__setattr__(self, "signs", s)


@dataclass(frozen=True)
class WeightMatrix:
    """Edge evidence w = -log(p), stored once per unordered node pair."""

    n: int
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.shape != (n_edges(self.n),):
            raise InvalidArgumentError(
                f"weight vector must have length {n_edges(self.n)}, got {w.shape}")
        if not np.isfinite(w).all() or np.any(w < 0):
            raise InvalidArgumentError("weights must be finite and nonnegative")
        object.__setattr__(self, "w", w)

    def dense(self) -> np.ndarray:
        return EdgeIndex(self.n).to_matrix(self.w)


def fisher_z(r):
    """Fisher's Z transform 0.5*log((1+r)/(1-r)); accepts scalars or arrays."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(np.abs(arr) < 1)):
        raise InvalidArgumentError("Fisher z needs |r| < 1")
    out = np.arctanh(arr)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- rank sum


@lru_cache(maxsize=256)
def _exact_ranksum_tail(doubled_ranks: tuple, n1: int):
    """Null distribution of twice the rank sum of an n1-subset.

    Returns (sorted absolute deviations from the mean, matching upper-tail
    probabilities). Counts every C(N, n1) assignment via subset-sum DP on
    the doubled (integer) mid-ranks.
    """
    total = sum(doubled_ranks)
    # counts[k][s]: number of k-subsets with doubled rank sum s
    counts = [dict() for _ in range(n1 + 1)]
    counts[0][0] = 1
    for r in doubled_ranks:
        for k in range(min(n1, len(doubled_ranks)), 0, -1):
            prev = counts[k - 1]
            cur = counts[k]
            for s, c in prev.items():
                cur[s + r] = cur.get(s + r, 0) + c
    dist = counts[n1]
    n_all = math.comb(len(doubled_ranks), n1)
    # 2 * mean rank sum, scaled by N to stay integral
    big_n = len(doubled_ranks)
    sums = np.array(sorted(dist), dtype=np.int64)
    probs = np.array([dist[s] for s in sums], dtype=float) / n_all
    dev = np.abs(big_n * sums - n1 * total)
    order = np.argsort(-dev, kind="stable")
    dev_sorted = dev[order]
    tail = np.cumsum(probs[order])
    # tail[i] = P(dev >= dev_sorted[i]) once equal deviations are merged
    for i in range(len(dev_sorted) - 2, -1, -1):
        if dev_sorted[i] == dev_sorted[i + 1]:
            tail[i] = tail[i + 1]
    return dev_sorted[::-1].copy(), tail[::-1].copy()


def _exact_pvalue(doubled_ranks: tuple, n1: int, doubled_sum: int) -> float:
    devs, tail = _exact_ranksum_tail(doubled_ranks, n1)
    big_n = len(doubled_ranks)
    obs = abs(big_n * doubled_sum - n1 * sum(doubled_ranks))
    i = int(np.searchsorted(devs, obs, side="left"))
    return float(min(1.0, tail[i]))


def _normal_ranksum_p(rank_sum, n1, n2, tie_term):
    big_n = n1 + n2
    mu = n1 * (big_n + 1) / 2.0
    var = n1 * n2 / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    var = np.where(var > 1e-12 * n1 * n2, var, 0.0)
    dev = np.maximum(np.abs(rank_sum - mu) - 0.5, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(var > 0, dev / np.sqrt(np.where(var > 0, var, 1.0)), 0.0)
    p = np.minimum(1.0, 2.0 * special.ndtr(-z))
    return np.where(var > 0, p, 1.0)


def _tie_term(ranks_min, ranks_max, axis=0):
    # sum over tie groups of t^3 - t == sum over elements of t^2 - 1
    t = ranks_max - ranks_min + 1
    return (t * t - 1).sum(axis=axis)


def wilcoxon_rank_sum(x, y, exact=None) -> float:
    """Two-sided Wilcoxon rank-sum p-value with mid-ranks for ties.

    Exact enumeration when len(x) + len(y) <= 20, otherwise the normal
    approximation with tie-corrected variance and continuity correction.
    ``exact`` forces one branch (used to cross-check them).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise InvalidArgumentError("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    n1, n2 = x.size, y.size
    if exact is None:
        exact = n1 + n2 <= EXACT_MAX_TOTAL
    ranks = rankdata(pooled)
    if exact:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = _exact_pvalue(tuple(sorted(doubled.tolist())), n1, int(doubled[:n1].sum()))
    else:
        tie = _tie_term(rankdata(pooled, "min"), rankdata(pooled, "max"))
        p = float(_normal_ranksum_p(ranks[:n1].sum(), n1, n2, tie))
    return max(p, P_MIN)


# ----------------------------------------------------------------- welch


def _welch_p(m1, v1, n1, m0, v0, n0):
    a, b = v1 / n1, v0 / n0
    se2 = a + b
    diff = m1 - m0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.abs(diff) / np.sqrt(se2)
        df = se2 ** 2 / (a * a / (n1 - 1) + b * b / (n0 - 1))
        p = 2.0 * special.stdtr(df, -t)
    degenerate = ~(se2 > 0)
    p = np.where(degenerate, np.where(diff == 0, 1.0, P_MIN), p)
    return np.clip(p, P_MIN, 1.0)


def welch_t(x, y) -> float:
    """Two-sided Welch t-test p-value (Satterthwaite degrees of freedom).

    When both samples have zero variance the p-value is 1 for equal means and
    the smallest positive double otherwise.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size < 2 or y.size < 2:
        raise InvalidArgumentError("Welch t needs at least 2 observations per sample")
    return float(_welch_p(x.mean(), x.var(ddof=1), x.size,
                          y.mean(), y.var(ddof=1), y.size))


# ---------------------------------------------------------- edgewise tests


class EdgeTester:
    """Edgewise two-sample tests for fixed data under varying group labels.

    Label-independent work (ranks, tie terms) is done once so that
    permutation loops only pay for the label-dependent sums.
    """

    def __init__(self, data, method: str = "wilcoxon"):
        if method not in METHODS:
            raise InvalidArgumentError(f"unknown test method {method!r}")
        self.method = method
        self.data = np.asarray(data, dtype=float)
        n_sub = self.data.shape[0]
        if method == "wilcoxon":
            self.ranks = rankdata(self.data, axis=0)
            if n_sub > EXACT_MAX_TOTAL:
                self.tie = _tie_term(rankdata(self.data, "min", axis=0),
                                     rankdata(self.data, "max", axis=0))
            else:
                self.doubled = np.rint(2 * self.ranks).astype(np.int64)
                self.patterns = [tuple(col) for col in np.sort(self.doubled, axis=0).T.tolist()]

    def pvalues(self, labels) -> np.ndarray:
        labels = np.asarray(labels)
        case = labels == 1
        n1 = int(case.sum())
        n0 = labels.size - n1
        if n1 == 0 or n0 == 0:
            raise InvalidArgumentError("both groups must be nonempty")
        if self.method == "wilcoxon":
            if labels.size > EXACT_MAX_TOTAL:
                rsum = self.ranks[case].sum(axis=0)
                p = _normal_ranksum_p(rsum, n1, n0, self.tie)
            else:
                dsum = self.doubled[case].sum(axis=0)
                p = np.array([_exact_pvalue(pat, n1, int(s))
                              for pat, s in zip(self.patterns, dsum)])
        else:
            if n1 < 2 or n0 < 2:
                raise InvalidArgumentError("Welch t needs at least 2 subjects per group")
            x1, x0 = self.data[case], self.data[~case]
            m1, m0 = x1.mean(axis=0), x0.mean(axis=0)
            v1, v0 = x1.var(axis=0, ddof=1), x0.var(axis=0, ddof=1)
            p = _welch_p(m1, v1, n1, m0, v0, n0)
        return np.clip(p, P_MIN, 1.0)

    def run(self, labels, signs: bool = True) -> EdgeTestResult:
        labels = np.asarray(labels)
        p = self.pvalues(labels)
        if signs:
            case = labels == 1
            d = np.median(self.data[case], axis=0) - np.median(self.data[~case], axis=0)
            s = np.sign(d).astype(np.int8)
        else:
            s = np.zeros(p.size, dtype=np.int8)
        return EdgeTestResult(p, s, self.method)


def edgewise_tests(dataset: ConnectomeDataset, method: str = "wilcoxon") -> EdgeTestResult:
    """One p-value and one sign (median case - median control) per edge."""
    return EdgeTester(dataset.data, method).run(dataset.labels)


def weights_from_pvalues(result, n: int | None = None) -> WeightMatrix:
    """w = -log(max(p, 1e-300)).

    ``result`` may be an :class:`EdgeTestResult` or a bare p-value vector;
    ``n`` is inferred from the vector length when omitted.
    """
    p = result.p_values if isinstance(result, EdgeTestResult) else np.asarray(result, float)
    if n is None:
        n = int(round((1 + math.sqrt(1 + 8 * p.size)) / 2))
    w = -np.log(np.maximum(p, P_FLOOR))
    return WeightMatrix(n, np.maximum(w, 0.0))
