"""Network-object test statistics and Monte Carlo inference.

Two null generators are provided. Group-label permutation (GLP) reshuffles
subjects' labels and reruns the whole pipeline; graph-edge permutation (GEP)
shuffles the observed edge weights over edge positions, after an aSPU
omnibus gate on "any edge differs". In both, each iteration stores the
maximum statistic over all re-detected subnetworks, so the observed
subnetworks are judged against a max-statistic null, which adjusts for
multiplicity and for the data-driven choice of subnetworks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._seeding import GEP, GLP, SPU, parallel_map, stream
from .detect import DetectConfig, DetectionResult, select_k
from .edgestats import EdgeTester, EdgeTestResult, WeightMatrix, weights_from_pvalues
from .errors import InvalidArgumentError
from .graphcore import ConnectomeDataset, Subnetwork, topology_metrics

logger = logging.getLogger(__name__)

STATISTICS = ("fisher_chernoff", "scan")
# log-scale stand-in for a scan value of exactly 0 (indicator false); finite
# so that null distributions stay finite and order comparisons still work
LOG_ZERO = -np.finfo(float).max


@dataclass(frozen=True)
class InferConfig:
    num_permutations: int = 1000
    alpha: float = 0.05
    statistic: str = "fisher_chernoff"
    p0: float = 0.05
    omnibus_gammas: tuple = (1, 2, 3, 4, 5, 6, 7, 8, math.inf)
    omnibus_B: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_permutations < 19:
            raise InvalidArgumentError("num_permutations must be >= 19")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        if not (0.0 < self.p0 < 1.0):
            raise InvalidArgumentError("p0 must lie in (0, 1)")
        if self.statistic not in STATISTICS:
            raise InvalidArgumentError(f"statistic must be one of {STATISTICS}")
        object.__setattr__(self, "omnibus_gammas", tuple(self.omnibus_gammas))


@dataclass(frozen=True)
class NullDistribution:
    """Per-iteration maxima of the subnetwork statistic.

    Fisher maxima are >= 0. Scan maxima are stored on the log scale (the
    raw values underflow for graphs of realistic size), with
    :data:`LOG_ZERO` standing for 0.
    """

    values: np.ndarray
    kind: str = "fisher_chernoff"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InvalidArgumentError("null distribution must be a nonempty vector")
        if not np.isfinite(v).all():
            raise InvalidArgumentError("null values must be finite")
        if self.kind not in STATISTICS:
            raise InvalidArgumentError(f"unknown statistic kind {self.kind!r}")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    def critical_value(self, alpha: float) -> float:
        """Order statistic that an observed value must exceed to be in the top alpha."""
        k = self.M + 1 - math.floor(alpha * (self.M + 1))
        k = min(max(k, 1), self.M)
        return float(np.sort(self.values)[k - 1])


@dataclass(frozen=True)
class InferenceReport:
    method: str
    subnetworks: list
    null: Optional[NullDistribution]
    significant: list
    alpha: float
    gate_p: Optional[float] = None
    gate_passed: bool = True
    detection: Optional[DetectionResult] = field(default=None, compare=False)
    tests: Optional[EdgeTestResult] = field(default=None, compare=False)

    @property
    def critical_value(self) -> Optional[float]:
        return None if self.null is None else self.null.critical_value(self.alpha)

    def significant_edges(self) -> np.ndarray:
        if not self.significant:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([np.asarray(s.edges, dtype=np.int64)
                                         for s in self.significant]))


# ------------------------------------------------------------- statistics


def fisher_chernoff_stat(p_values) -> float:
    """|E| (x - 1 - log x) with x the mean of -log p over the subnetwork's edges.

    This is the Chernoff lower bound on -log of the Fisher combination tail
    P(chi2_{2|E|} >= -2 sum log p). Returns 0 when x < 1: under the uniform
    null E[-log p] = 1, and evidence below it is not scored.
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise InvalidArgumentError("statistic needs at least one edge")
    if np.any(~(p > 0)) or np.any(p > 1):
        raise InvalidArgumentError("p-values must lie in (0, 1]")
    return _chernoff_from_weights(-np.log(p))


def _chernoff_from_weights(w) -> float:
    x = float(np.mean(w))
    if x <= 1.0:
        return 0.0
    return float(len(w) * (x - 1.0 - math.log(x)))


def _xlogy(a: int, b: int) -> float:
    return 0.0 if a == 0 else a * math.log(a / b)


def log_scan_stat(subnetwork_edges, p_values, p0: float) -> float:
    """Log of :func:`scan_stat`; :data:`LOG_ZERO` when the indicator fails."""
    p = np.asarray(p_values, dtype=float)
    inside = np.zeros(p.size, dtype=bool)
    inside[np.asarray(list(subnetwork_edges), dtype=np.int64)] = True
    n_in = int(inside.sum())
    n_out = p.size - n_in
    if n_in == 0:
        raise InvalidArgumentError("subnetwork has no edges")
    if n_out == 0:
        raise InvalidArgumentError("subnetwork covers every edge; no outside rate")
    supra = p < p0
    k_in = int(supra[inside].sum())
    k_out = int(supra[~inside].sum())
    if not (k_in * n_out > k_out * n_in):
        return LOG_ZERO
    return _xlogy(k_in, n_in) + _xlogy(k_out, n_out)


def scan_stat(subnetwork_edges, p_values, p0: float = 0.05) -> float:
    """(k_in/N_in)^k_in (k_out/N_out)^k_out when k_in/N_in > k_out/N_out, else 0.

    Suprathreshold means p < p0; 0^0 is taken as 1.
    """
    v = log_scan_stat(subnetwork_edges, p_values, p0)
    return 0.0 if v == LOG_ZERO else math.exp(v)


def subnetwork_statistic(sub: Subnetwork, p_values, config: InferConfig) -> float:
    """The configured statistic on the scale used for ranking (log for scan).

    A subnetwork spanning every edge has no outside rate and scores
    :data:`LOG_ZERO` under scan.
    """
    if config.statistic == "fisher_chernoff":
        w = -np.log(np.maximum(np.asarray(p_values)[list(sub.edges)], 1e-300))
        return _chernoff_from_weights(w)
    if len(sub.edges) >= len(p_values):
        return LOG_ZERO
    return log_scan_stat(sub.edges, p_values, config.p0)


def _max_statistic(detection: DetectionResult, p_values, config: InferConfig) -> float:
    empty = 0.0 if config.statistic == "fisher_chernoff" else LOG_ZERO
    return max((subnetwork_statistic(s, p_values, config) for s in detection.subnetworks),
               default=empty)


def permutation_pvalue(T0: float, null: NullDistribution) -> float:
    """(1 + #{T_m >= T0}) / (M + 1)."""
    return (1 + int(np.count_nonzero(null.values >= T0))) / (null.M + 1)


def _finish(method, detection, tests, p_values, null, infer_cfg, n, gate_p=None):
    subs = []
    for s in detection.subnetworks:
        T0 = subnetwork_statistic(s, p_values, infer_cfg)
        metrics = dict(s.metrics) or topology_metrics(s.nodes, p_values, n, infer_cfg.p0)
        subs.append(replace(s, statistic=float(T0), metrics=metrics,
                            p_value=permutation_pvalue(T0, null)))
    sig = [s for s in subs if s.p_value <= infer_cfg.alpha]
    return InferenceReport(method, subs, null, sig, infer_cfg.alpha, gate_p=gate_p,
                           gate_passed=True, detection=detection, tests=tests)


# -------------------------------------------------------------------- GLP


def glp_test(dataset: ConnectomeDataset, detect_cfg: DetectConfig = DetectConfig(),
             infer_cfg: InferConfig = InferConfig(), test_method: str = "wilcoxon") -> InferenceReport:
    """Group-label permutation test of the detected subnetworks.

    Each iteration permutes the labels, recomputes the edgewise tests and
    weights, reruns the full K search and stores the maximum statistic.
    """
    n0, n1 = dataset.group_sizes
    if n0 < 2 or n1 < 2:
        raise InvalidArgumentError("GLP needs at least 2 subjects per group")
    tester = EdgeTester(dataset.data, test_method)
    observed = tester.run(dataset.labels)
    detection = select_k(weights_from_pvalues(observed, dataset.n), detect_cfg)

    def one(m):
        labels = stream(infer_cfg.seed, GLP, m).permutation(dataset.labels)
        p = tester.pvalues(labels)
        det = select_k(weights_from_pvalues(p, dataset.n), detect_cfg)
        return _max_statistic(det, p, infer_cfg)

    values = parallel_map(one, range(infer_cfg.num_permutations))
    null = NullDistribution(np.array(values), infer_cfg.statistic)
    return _finish("glp", detection, observed, observed.p_values, null, infer_cfg, dataset.n)


# ------------------------------------------------------------------- aSPU


def _group_scores(X, case_mask):
    """Standardized mean differences (case - control) for each row of masks.

    ``case_mask`` has shape (B, S); returns (B, E). Edges with zero
    standard error score 0.
    """
    case = case_mask.astype(float)
    ctrl = 1.0 - case
    n1 = case.sum(axis=1, keepdims=True)
    n0 = ctrl.sum(axis=1, keepdims=True)
    X2 = X * X
    m1 = case @ X / n1
    m0 = ctrl @ X / n0
    v1 = np.maximum(case @ X2 / n1 - m1 * m1, 0.0) * n1 / np.maximum(n1 - 1, 1)
    v0 = np.maximum(ctrl @ X2 / n0 - m0 * m0, 0.0) * n0 / np.maximum(n0 - 1, 1)
    se = np.sqrt(v1 / n1 + v0 / n0)
    diff = m1 - m0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(se > 1e-12 * (np.abs(m1) + np.abs(m0) + 1), diff / se, 0.0)
    return u


def _spu(u, gammas):
    out = np.empty((u.shape[0], len(gammas)))
    for j, g in enumerate(gammas):
        if math.isinf(g):
            out[:, j] = np.abs(u).max(axis=1)
        else:
            out[:, j] = np.abs((u ** int(g)).sum(axis=1))
    return out


def spu_omnibus(dataset: ConnectomeDataset, infer_cfg: InferConfig = InferConfig()) -> float:
    """Adaptive sum-of-powered-score p-value for "some edge differs".

    SPU(g) = |sum_j U_j^g| over standardized group differences U_j, and
    SPU(inf) = max_j |U_j|. One set of B label permutations gives a p-value
    per g and, reused, the null of the minimum p over g.
    """
    B = infer_cfg.omnibus_B
    if B < 19:
        raise InvalidArgumentError("omnibus_B must be >= 19")
    X = dataset.data
    rng = stream(infer_cfg.seed, SPU)
    obs_mask = (dataset.labels == 1)[None, :]
    gammas = infer_cfg.omnibus_gammas
    obs = _spu(_group_scores(X, obs_mask), gammas)[0]
    perm = np.empty((B, len(gammas)))
    chunk = max(1, int(2e7 // max(X.size, 1)))
    for start in range(0, B, chunk):
        stop = min(B, start + chunk)
        masks = np.stack([rng.permutation(dataset.labels) == 1 for _ in range(start, stop)])
        perm[start:stop] = _spu(_group_scores(X, masks), gammas)
    # p_g of the observed data, and of each permuted set against the others
    p_obs = (1 + (perm >= obs[None, :] * (1 - 1e-12)).sum(axis=0)) / (B + 1)
    ranks = np.empty_like(perm)
    for j in range(perm.shape[1]):
        col = perm[:, j]
        srt = np.sort(col)
        ranks[:, j] = B - np.searchsorted(srt, col, side="left")
    p_perm = ranks / B
    a_obs = p_obs.min()
    a_perm = p_perm.min(axis=1)
    return float((1 + np.count_nonzero(a_perm <= a_obs)) / (B + 1))


# -------------------------------------------------------------------- GEP


def edge_permute(W: WeightMatrix, seed) -> WeightMatrix:
    """Uniformly random rearrangement of the weights over edge positions."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return WeightMatrix(W.n, rng.permutation(W.w))


def gep_test(dataset: ConnectomeDataset, detect_cfg: DetectConfig = DetectConfig(),
             infer_cfg: InferConfig = InferConfig(), test_method: str = "wilcoxon",
             gate: bool = True) -> InferenceReport:
    """Graph-edge permutation test, gated by :func:`spu_omnibus`.

    When the gate is not significant at ``alpha`` an empty report with
    ``gate_passed=False`` is returned.
    """
    observed = EdgeTester(dataset.data, test_method).run(dataset.labels)
    gate_p = spu_omnibus(dataset, infer_cfg) if gate else None
    if gate and gate_p > infer_cfg.alpha:
        return InferenceReport("gep", [], None, [], infer_cfg.alpha, gate_p=gate_p,
                               gate_passed=False, tests=observed)
    W = weights_from_pvalues(observed, dataset.n)
    detection = select_k(W, detect_cfg)

    def one(m):
        Wm = edge_permute(W, stream(infer_cfg.seed, GEP, m))
        det = select_k(Wm, detect_cfg)
        return _max_statistic(det, np.exp(-Wm.w), infer_cfg)

    values = parallel_map(one, range(infer_cfg.num_permutations))
    null = NullDistribution(np.array(values), infer_cfg.statistic)
    return _finish("gep", detection, observed, observed.p_values, null, infer_cfg,
                   dataset.n, gate_p=gate_p)
