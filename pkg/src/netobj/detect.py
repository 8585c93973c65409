"""Subnetwork extraction: spectral RatioCut partitions scored by the
penalized objective sum_k (sum w in G_k) * |E_k|^(-lambda0), with a grid
search over the number of clusters K.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from ._kmeans import kmeans_best, refine_partition
from ._seeding import stream
from .edgestats import EdgeTestResult, WeightMatrix, edgewise_tests, weights_from_pvalues
from .errors import InvalidArgumentError, NumericalError
from .graphcore import ConnectomeDataset, EdgeIndex, Partition, Subnetwork, topology_metrics

logger = logging.getLogger(__name__)

ZERO_EIGENVALUE = 1e-10
KMEANS_MAX_ITER = 100
EMBEDDINGS = ("association", "laplacian")


@dataclass(frozen=True)
class DetectConfig:
    """Tuning knobs of the detector.

    ``k_range`` is an inclusive (low, high) pair; ``None`` means
    ``(1, min(n - 1, 30))`` resolved against the graph at hand.
    """

    lambda0: float = 0.5
    k_range: Optional[tuple] = None
    min_cluster_nodes: int = 3
    kmeans_restarts: int = 20
    seed: int = 0
    embedding: str = "association"
    refine: bool = True

    def __post_init__(self):
        if not (0.0 < self.lambda0 < 1.0):
            raise InvalidArgumentError("lambda0 must lie in (0, 1)")
        if self.embedding not in EMBEDDINGS:
            raise InvalidArgumentError(f"embedding must be one of {EMBEDDINGS}")
        if self.kmeans_restarts < 1:
            raise InvalidArgumentError("kmeans_restarts must be >= 1")
        if self.k_range is not None:
            lo, hi = (int(v) for v in self.k_range)
            object.__setattr__(self, "k_range", (lo, hi))

    def resolve_k_range(self, n: int) -> tuple[int, int]:
        if self.k_range is None:
            return 1, max(1, min(n - 1, 30))
        lo, hi = self.k_range
        if lo > hi:
            raise InvalidArgumentError(f"empty k_range {self.k_range}")
        if lo < 1 or hi > n:
            raise InvalidArgumentError(f"k_range {self.k_range} outside 1..{n}")
        return lo, hi


@dataclass(frozen=True)
class DetectionResult:
    partition: Partition
    k_selected: int
    subnetworks: list
    per_cluster_quality: np.ndarray
    objective: float
    criterion_by_k: dict = field(default_factory=dict, compare=False)


def _cluster_sums(w: np.ndarray, n: int, labels: np.ndarray):
    """Within-cluster weight sums and edge counts for 0-based labels."""
    r, c = EdgeIndex(n).pairs
    k = int(labels.max()) + 1
    lr = labels[r]
    same = lr == labels[c]
    sums = np.bincount(lr[same], weights=w[same], minlength=k)
    sizes = np.bincount(labels, minlength=k)
    return sums, sizes * (sizes - 1) // 2, sizes


def _criterion_terms(sums, edges, lambda0):
    ok = (edges > 0) & (sums > 0)
    terms = np.zeros_like(sums)
    terms[ok] = np.exp(np.log(sums[ok]) - lambda0 * np.log(edges[ok]))
    return terms


def objective_value(W: WeightMatrix, partition: Partition, lambda0: float) -> float:
    """Sum over clusters of exp(log sum w - lambda0 log |E_k|).

    Clusters without edges or with zero weight contribute 0.
    """
    if partition.n != W.n:
        raise InvalidArgumentError("partition and weight matrix disagree on n")
    sums, edges, _ = _cluster_sums(W.w, W.n, partition.assignment - 1)
    return float(_criterion_terms(sums, edges, lambda0).sum())


def _spectral_embedding(W: WeightMatrix, kmax: int, kind: str = "association") -> np.ndarray:
    """Rows of the first ``kmax`` spectral coordinates of the weight graph.

    ``"laplacian"``: eigenvectors of L = D - W, smallest eigenvalue first;
    the zero eigenspace is replaced by normalized connected-component
    indicators so disconnected blocks embed deterministically.

    ``"association"``: eigenvectors of d*I - W for a constant degree d,
    i.e. the top eigenvectors of W. This is the relaxation of
    max sum_k W(V_k, V_k) / |V_k|, which coincides with the RatioCut
    relaxation whenever all node degrees are equal. Unlike D - W it is not
    pulled toward isolating single low-degree nodes of a dense background.
    """
    n = W.n
    scale = W.w.max() if W.w.size and W.w.max() > 0 else 1.0
    A = W.dense() / scale
    M = np.diag(A.sum(axis=1)) - A if kind == "laplacian" else -A
    try:
        vals, vecs = scipy.linalg.eigh(M, subset_by_index=[0, kmax - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigen-solver failed on {n}x{n} {kind} matrix (max weight {scale:g}): {exc}") from exc
    if kind == "laplacian":
        zero = int((vals < ZERO_EIGENVALUE).sum())
        if zero > 1:
            ncomp, comp = connected_components(A > 0, directed=False)
            if zero == min(ncomp, kmax):
                # components in order of their smallest node
                _, first = np.unique(comp, return_index=True)
                order = np.argsort(first)
                for j, cid in enumerate(order[:zero]):
                    ind = (comp == cid).astype(float)
                    vecs[:, j] = ind / np.sqrt(ind.sum())
    return np.ascontiguousarray(vecs)


def _partition_from_embedding(emb: np.ndarray, K: int, config: DetectConfig) -> np.ndarray:
    n = emb.shape[0]
    if K == 1:
        return np.zeros(n, dtype=np.int64)
    u = stream(config.seed, 0x4B4D, K).random((config.kmeans_restarts, K))
    X = np.ascontiguousarray(emb[:, :K])
    labels, _ = kmeans_best(X, K, u, KMEANS_MAX_ITER)
    return Partition.from_labels(labels).assignment - 1


def ratio_cut_partition(W: WeightMatrix, K: int, config: DetectConfig = DetectConfig()) -> Partition:
    """Spectral partition: k-means with seeded restarts on K spectral coordinates."""
    if not (1 <= K <= W.n):
        raise InvalidArgumentError(f"K must lie in 1..{W.n}, got {K}")
    if K == 1:
        return Partition(np.ones(W.n, dtype=np.int64))
    emb = _spectral_embedding(W, K, config.embedding)
    return Partition(_partition_from_embedding(emb, K, config) + 1)


def select_k(W: WeightMatrix, config: DetectConfig = DetectConfig()) -> DetectionResult:
    """Grid search over K maximizing the penalized objective.

    Each spectral partition is polished by single-node moves that increase
    the objective (``config.refine``) before it is scored. Ties (within a relative 1e-12) go to the smaller K. Clusters smaller than
    ``min_cluster_nodes`` or carrying no weight stay in the partition but are
    not reported as subnetworks.
    """
    lo, hi = config.resolve_k_range(W.n)
    emb = _spectral_embedding(W, hi, config.embedding) if hi > 1 else None
    best = None
    by_k = {}
    dense = W.dense() if config.refine else None
    for K in range(lo, hi + 1):
        if K == 1:
            labels = np.zeros(W.n, dtype=np.int64)
        else:
            labels = _partition_from_embedding(emb, K, config)
            if config.refine:
                k_found = int(labels.max()) + 1
                labels = refine_partition(dense, labels, k_found, config.lambda0, 10 * W.n)
                labels = Partition.from_labels(labels).assignment - 1
        sums, edges, sizes = _cluster_sums(W.w, W.n, labels)
        crit = float(_criterion_terms(sums, edges, config.lambda0).sum())
        by_k[K] = crit
        if best is None or crit > best[0] * (1 + 1e-12):
            best = (crit, K, labels, sums, edges, sizes)
    crit, K, labels, sums, edges, sizes = best
    partition = Partition(labels + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        quality = np.where(edges > 0, sums / np.maximum(edges, 1), 0.0)
    subnetworks = []
    for cid, nodes in enumerate(partition.clusters()):
        if nodes.size >= config.min_cluster_nodes and quality[cid] > 0:
            subnetworks.append(Subnetwork.from_nodes(nodes, W.n))
    return DetectionResult(partition, K, subnetworks, quality, crit, by_k)


def extract_subnetworks(dataset: ConnectomeDataset, test_method: str = "wilcoxon",
                        config: DetectConfig = DetectConfig(), p0: float = 0.05,
                        tests: EdgeTestResult | None = None) -> DetectionResult:
    """Edgewise tests, weights and K search, with topology metrics attached."""
    if tests is None:
        tests = edgewise_tests(dataset, test_method)
    result = select_k(weights_from_pvalues(tests, dataset.n), config)
    subs = [Subnetwork(s.nodes, s.edges, s.topology,
                       metrics=topology_metrics(s.nodes, tests.p_values, dataset.n, p0))
            for s in result.subnetworks]
    return DetectionResult(result.partition, result.k_selected, subs,
                           result.per_cluster_quality, result.objective,
                           result.criterion_by_k)
