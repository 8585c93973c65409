"""Edge indexing over the complete graph, subnetwork objects and graph metrics.

Node ids are 1-based, edge ids are 0-based positions in the row-major upper
triangle, i.e. ``(1,2), (1,3), ..., (1,n), (2,3), ..., (n-1,n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError


def n_edges(n: int) -> int:
    return n * (n - 1) // 2


def pack_edge(i: int, j: int, n: int) -> int:
    """Linear id of the edge between nodes ``i < j`` (1-based) of an n-node graph."""
    if not (1 <= i < j <= n):
        raise InvalidArgumentError(f"need 1 <= i < j <= n, got i={i}, j={j}, n={n}")
    return (i - 1) * (2 * n - i) // 2 + (j - i - 1)


def unpack_edge(idx: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`pack_edge`."""
    total = n_edges(n)
    if not (0 <= idx < total):
        raise InvalidArgumentError(f"edge id {idx} outside 0..{total - 1}")
    # first row i with (i-1)(2n-i)/2 <= idx
    i = 1
    start = 0
    while start + (n - i) <= idx:
        start += n - i
        i += 1
    return i, i + 1 + (idx - start)


@dataclass(frozen=True)
class EdgeIndex:
    """Bijection between node pairs and linear edge ids for a complete graph."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError(f"node count must be >= 2, got {self.n}")

    @property
    def n_edges(self) -> int:
        return n_edges(self.n)

    @cached_property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based (row, col) arrays in edge-id order."""
        r, c = np.triu_indices(self.n, k=1)
        r.flags.writeable = False
        c.flags.writeable = False
        return r, c

    def pack(self, i: int, j: int) -> int:
        return pack_edge(i, j, self.n)

    def unpack(self, idx: int) -> tuple[int, int]:
        r, c = self.pairs
        if not (0 <= idx < self.n_edges):
            raise InvalidArgumentError(f"edge id {idx} outside 0..{self.n_edges - 1}")
        return int(r[idx]) + 1, int(c[idx]) + 1

    def to_matrix(self, values, diagonal: float = 0.0) -> np.ndarray:
        """Symmetric n x n matrix from an edge vector."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_edges,):
            raise InvalidArgumentError(
                f"edge vector must have length {self.n_edges}, got {values.shape}")
        r, c = self.pairs
        out = np.full((self.n, self.n), 0.0)
        out[r, c] = values
        out[c, r] = values
        np.fill_diagonal(out, diagonal)
        return out

    def from_matrix(self, matrix) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (self.n, self.n):
            raise InvalidArgumentError(
                f"matrix must be {self.n}x{self.n}, got {matrix.shape}")
        r, c = self.pairs
        return matrix[r, c].copy()


def induced_edges(nodes: Iterable[int], n: int) -> np.ndarray:
    """Sorted edge ids of the clique induced by ``nodes`` (1-based)."""
    nodes = np.unique(np.asarray(list(nodes), dtype=np.int64))
    if nodes.size and (nodes[0] < 1 or nodes[-1] > n):
        raise InvalidArgumentError(f"node ids must lie in 1..{n}")
    if nodes.size < 2:
        return np.empty(0, dtype=np.int64)
    a, b = np.triu_indices(nodes.size, k=1)
    i, j = nodes[a], nodes[b]
    return np.sort((i - 1) * (2 * n - i) // 2 + (j - i - 1))


@dataclass(frozen=True)
class ConnectomeDataset:
    """Edge-vectorized connectivity for S subjects with binary group labels.

    ``labels`` uses 1 for cases and 0 for controls. ``data`` has shape
    (S, n(n-1)/2) in :class:`EdgeIndex` order.
    """

    n: int
    subject_ids: tuple
    labels: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        data = np.asarray(self.data, dtype=float)
        if self.n < 2:
            raise InvalidArgumentError("node count must be >= 2")
        if data.ndim != 2 or data.shape[1] != n_edges(self.n):
            raise InvalidArgumentError(
                f"data must have shape (S, {n_edges(self.n)}), got {data.shape}")
        if labels.shape != (data.shape[0],):
            raise InvalidArgumentError("one label per subject required")
        if len(self.subject_ids) != data.shape[0]:
            raise InvalidArgumentError("one subject id per subject required")
        if not np.isin(labels, (0, 1)).all():
            raise InvalidArgumentError("group labels must be 0 or 1")
        if not (labels == 0).any() or not (labels == 1).any():
            raise InvalidArgumentError("both groups must be nonempty")
        if not np.isfinite(data).all():
            raise InvalidArgumentError("connectivity values must be finite")
        labels.flags.writeable = False
        data.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))

    @property
    def n_subjects(self) -> int:
        return self.data.shape[0]

    @property
    def n_edges(self) -> int:
        return self.data.shape[1]

    @property
    def group_sizes(self) -> tuple[int, int]:
        """(controls, cases)."""
        return int((self.labels == 0).sum()), int((self.labels == 1).sum())

    def with_labels(self, labels) -> "ConnectomeDataset":
        return ConnectomeDataset(self.n, self.subject_ids, labels, self.data)

    def relabel_nodes(self, perm) -> "ConnectomeDataset":
        """Dataset whose node ``perm[v-1]`` carries what node ``v`` carried.

        ``perm`` is a 1-based permutation of 1..n.
        """
        perm = np.asarray(perm, dtype=np.int64) - 1
        if sorted(perm.tolist()) != list(range(self.n)):
            raise InvalidArgumentError("perm must be a permutation of 1..n")
        idx = EdgeIndex(self.n)
        r, c = idx.pairs
        a, b = perm[r], perm[c]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        target = lo * (2 * self.n - lo - 1) // 2 + (hi - lo - 1)
        out = np.empty_like(self.data)
        out[:, target] = self.data
        return ConnectomeDataset(self.n, self.subject_ids, self.labels, out)


TOPOLOGIES = ("clique-induced", "custom")


@dataclass(frozen=True)
class Subnetwork:
    """A network object: node set, edge set, topology tag and test results."""

    nodes: tuple
    edges: tuple
    topology: str = "clique-induced"
    metrics: dict = field(default_factory=dict, compare=False)
    statistic: Optional[float] = None
    p_value: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(int(v) for v in self.nodes)))
        object.__setattr__(self, "edges", tuple(sorted(int(e) for e in self.edges)))
        if self.topology not in TOPOLOGIES:
            raise InvalidArgumentError(f"unknown topology {self.topology!r}")
        if self.p_value is not None and not (0.0 <= self.p_value <= 1.0):
            raise InvalidArgumentError("p_value must lie in [0, 1]")
        k = len(self.nodes)
        if self.topology == "clique-induced" and len(self.edges) != k * (k - 1) // 2:
            raise InvalidArgumentError("clique-induced subnetwork needs all node pairs")

    @classmethod
    def from_nodes(cls, nodes: Iterable[int], n: int, **kw) -> "Subnetwork":
        nodes = tuple(sorted(int(v) for v in nodes))
        return cls(nodes, tuple(induced_edges(nodes, n).tolist()), **kw)

    def check_endpoints(self, n: int) -> None:
        """Raise if an edge has an endpoint outside the node set."""
        members = set(self.nodes)
        idx = EdgeIndex(n)
        for e in self.edges:
            i, j = idx.unpack(e)
            if i not in members or j not in members:
                raise InvalidArgumentError(f"edge {e}=({i},{j}) leaves the node set")


@dataclass(frozen=True)
class Partition:
    """Assignment of nodes 1..n to clusters 1..K (stored 0-based by node)."""

    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1 or a.size == 0:
            raise InvalidArgumentError("assignment must be a nonempty vector")
        k = int(a.max())
        if a.min() < 1 or set(np.unique(a).tolist()) != set(range(1, k + 1)):
            raise InvalidArgumentError("cluster ids must be exactly 1..K")
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    @property
    def K(self) -> int:
        return int(self.assignment.max())

    @property
    def n(self) -> int:
        return self.assignment.size

    def clusters(self) -> list[np.ndarray]:
        """1-based node ids of each cluster, in cluster-id order."""
        return [np.flatnonzero(self.assignment == k) + 1 for k in range(1, self.K + 1)]

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Renumber arbitrary labels to 1..K by order of first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return cls(order[inverse] + 1)


def rich_club_coefficient(adjacency, k: int) -> float:
    """Edge density among nodes of degree greater than ``k``.

    Returns 1.0 when fewer than two nodes survive the degree cut.
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError("adjacency must be square")
    if not np.array_equal(a, a.T):
        raise InvalidArgumentError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise InvalidArgumentError("adjacency must have a zero diagonal")
    if k < 0:
        raise InvalidArgumentError("degree threshold must be >= 0")
    b = (a != 0)
    deg = b.sum(axis=1)
    rich = deg > k
    m = int(rich.sum())
    if m <= 1:
        return 1.0
    e = int(b[np.ix_(rich, rich)].sum()) // 2
    return 2.0 * e / (m * (m - 1))


def rich_club_profile(adjacency) -> list[float]:
    """phi(k) for k = 0 .. max degree - 1."""
    deg = (np.asarray(adjacency) != 0).sum(axis=1)
    top = int(deg.max()) if deg.size else 0
    return [rich_club_coefficient(adjacency, k) for k in range(max(top, 1))]


def _logsumexp(values: Sequence[float]) -> float:
    hi = max(values)
    if hi == -math.inf:
        return -math.inf
    return hi + math.log(math.fsum(math.exp(v - hi) for v in values))


def binomial_tail(trials: int, p: float, m: int) -> float:
    """Exact P(X >= m) for X ~ Binomial(trials, p), summed in log space."""
    if not (0.0 <= p <= 1.0):
        raise InvalidArgumentError("p must lie in [0, 1]")
    if not (0 <= m <= trials):
        raise InvalidArgumentError("need 0 <= m <= trials")
    if m == 0:
        return 1.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    lp, lq = math.log(p), math.log1p(-p)
    lf = math.lgamma(trials + 1)
    terms = [lf - math.lgamma(x + 1) - math.lgamma(trials - x + 1) + x * lp + (trials - x) * lq
             for x in range(m, trials + 1)]
    return min(1.0, math.exp(_logsumexp(terms)))


def positive_agreement(set_a: Iterable[int], set_b: Iterable[int]) -> float:
    """Dice-style agreement 2|A & B| / (|A| + |B|); 0 when both are empty."""
    a, b = set(set_a), set(set_b)
    if not a and not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def topology_metrics(nodes: Sequence[int], p_values, n: int, p0: float = 0.05) -> dict:
    """Descriptive metrics of a clique-induced subnetwork.

    ``suprathreshold_density`` is the fraction of its edges with p < p0 and
    ``rich_club`` the rich-club profile of the suprathreshold graph restricted
    to the subnetwork's nodes.
    """
    nodes = np.asarray(sorted(nodes), dtype=np.int64)
    edges = induced_edges(nodes, n)
    p = np.asarray(p_values, dtype=float)
    if edges.size == 0:
        return {"suprathreshold_density": 0.0, "rich_club": [1.0]}
    supra = p[edges] < p0
    sub = np.zeros((nodes.size, nodes.size), dtype=np.int8)
    a, b = np.triu_indices(nodes.size, k=1)
    sub[a, b] = supra
    sub[b, a] = supra
    return {
        "suprathreshold_density": float(supra.mean()),
        "rich_club": rich_club_profile(sub),
    }
