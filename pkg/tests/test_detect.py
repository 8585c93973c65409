import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import stats

from netobj.detect import (DetectConfig, extract_subnetworks, objective_value,
                           ratio_cut_partition, select_k)
from netobj.edgestats import WeightMatrix
from netobj.errors import InvalidArgumentError
from netobj.graphcore import ConnectomeDataset, EdgeIndex, Partition, induced_edges, n_edges
from netobj.sim import SimConfig, generate_dataset

from oracles import criterion_bruteforce, set_partitions


def _planted_weights(n=100, k=20, seed=0, hot=30.0):
    rng = np.random.default_rng(seed)
    w = rng.exponential(size=n_edges(n))
    nodes = np.sort(rng.choice(n, k, replace=False) + 1)
    w[induced_edges(nodes, n)] += hot
    return WeightMatrix(n, w), nodes


def test_objective_closed_forms():
    n, w = 6, 2.5
    W = WeightMatrix(n, np.full(n_edges(n), w))
    e = n_edges(n)
    assert objective_value(W, Partition(np.ones(n, int)), 0.5) == pytest.approx(w * np.sqrt(e))
    assert objective_value(W, Partition(np.arange(1, n + 1)), 0.5) == 0.0
    rng = np.random.default_rng(1)
    W = WeightMatrix(n, rng.random(e))
    assert objective_value(W, Partition(np.ones(n, int)), 0.3) == pytest.approx(W.w.sum() * e ** -0.3)


def test_objective_matches_bruteforce_and_is_relabel_invariant():
    rng = np.random.default_rng(2)
    n = 7
    W = WeightMatrix(n, rng.exponential(size=n_edges(n)))
    A = W.dense()
    labels = rng.integers(0, 3, n)
    part = Partition.from_labels(labels)
    ref = criterion_bruteforce(A, part.assignment, 0.5)
    assert objective_value(W, part, 0.5) == pytest.approx(ref, rel=1e-12)
    perm = rng.permutation(n)
    A2 = A[np.ix_(perm, perm)]
    W2 = WeightMatrix(n, EdgeIndex(n).from_matrix(A2))
    part2 = Partition.from_labels(part.assignment[perm])
    assert objective_value(W2, part2, 0.5) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("embedding", ["association", "laplacian"])
def test_two_blocks_recovered(embedding):
    n = 8
    A = np.zeros((n, n))
    A[:4, :4] = 1
    A[4:, 4:] = 1
    np.fill_diagonal(A, 0)
    W = WeightMatrix(n, EdgeIndex(n).from_matrix(A))
    part = ratio_cut_partition(W, 2, DetectConfig(embedding=embedding))
    assert part.assignment.tolist() == [1, 1, 1, 1, 2, 2, 2, 2]
    # brute force over all 2-partitions: the blocks minimize RatioCut
    best = None
    for labels in set_partitions(n, 2):
        if labels.max() != 1:
            continue
        a = labels == 0
        cut = A[np.ix_(a, ~a)].sum()
        rc = cut / a.sum() + cut / (~a).sum()
        if best is None or rc < best[0] - 1e-12:
            best = (rc, labels)
    assert_array_equal(best[1] + 1, part.assignment)


def test_zero_weights_give_valid_partition():
    W = WeightMatrix(6, np.zeros(15))
    for K in (1, 3, 6):
        assert ratio_cut_partition(W, K).n == 6
    det = select_k(W)
    assert det.subnetworks == []


@pytest.mark.parametrize("embedding", ["association", "laplacian"])
def test_planted_clique_isolated_at_k2(embedding):
    W, nodes = _planted_weights()
    part = ratio_cut_partition(W, 2, DetectConfig(embedding=embedding))
    clusters = [set(c.tolist()) for c in part.clusters()]
    if embedding == "association":
        assert set(nodes.tolist()) in clusters
    else:
        # the clique stays together under the Laplacian relaxation
        assert any(set(nodes.tolist()) <= c for c in clusters)


@pytest.mark.parametrize("k_range", [None, (1, 10)])
def test_select_k_recovers_hot_clique(k_range):
    for seed in range(3):
        W, nodes = _planted_weights(seed=seed)
        det = select_k(W, DetectConfig(k_range=k_range))
        assert det.k_selected >= 2
        found = [s for s in det.subnetworks if s.nodes == tuple(nodes.tolist())]
        assert len(found) == 1
        others = set().union(*(set(s.nodes) for s in det.subnetworks if s not in found))
        assert not others & set(nodes.tolist())


def test_subnetworks_are_disjoint_and_big_enough():
    W, _ = _planted_weights(seed=4)
    det = select_k(W, DetectConfig(min_cluster_nodes=4))
    seen = set()
    for s in det.subnetworks:
        assert len(s.nodes) >= 4
        assert not seen & set(s.nodes)
        seen |= set(s.nodes)
    assert (det.per_cluster_quality >= 0).all()
    assert det.objective == pytest.approx(objective_value(W, det.partition, 0.5), rel=1e-12)


def test_ties_go_to_smaller_k():
    # a single edge: every K >= 2 that keeps the edge together scores the same
    n = 5
    w = np.zeros(n_edges(n))
    w[0] = 3.0
    det = select_k(WeightMatrix(n, w), DetectConfig(k_range=(1, 4)))
    assert det.criterion_by_k[1] < max(det.criterion_by_k.values())
    best = max(det.criterion_by_k.values())
    assert det.k_selected == min(k for k, v in det.criterion_by_k.items()
                                 if v >= best * (1 - 1e-12))


def test_k_range_validation():
    W = WeightMatrix(5, np.ones(10))
    with pytest.raises(InvalidArgumentError):
        select_k(W, DetectConfig(k_range=(4, 2)))
    with pytest.raises(InvalidArgumentError):
        select_k(W, DetectConfig(k_range=(1, 9)))
    with pytest.raises(InvalidArgumentError):
        DetectConfig(lambda0=1.0)


def test_scaling_weights():
    W, _ = _planted_weights(n=40, k=8, seed=5, hot=5.0)
    a = select_k(W, DetectConfig(k_range=(1, 10)))
    b = select_k(WeightMatrix(W.n, 3.7 * W.w), DetectConfig(k_range=(1, 10)))
    assert b.objective == pytest.approx(3.7 * a.objective, rel=1e-9)
    assert b.k_selected == a.k_selected
    assert_array_equal(a.partition.assignment, b.partition.assignment)


def test_deterministic():
    W, _ = _planted_weights(n=50, k=10, seed=6, hot=4.0)
    cfg = DetectConfig(seed=11)
    a, b = select_k(W, cfg), select_k(W, cfg)
    assert_array_equal(a.partition.assignment, b.partition.assignment)
    assert a.criterion_by_k == b.criterion_by_k


def test_identical_groups_detect_nothing():
    rng = np.random.default_rng(0)
    half = rng.normal(size=(20, n_edges(12)))
    ds = ConnectomeDataset(12, [str(i) for i in range(40)], np.r_[np.zeros(20, int), np.ones(20, int)],
                           np.vstack([half, half]))
    assert extract_subnetworks(ds).subnetworks == []


def test_planted_dataset_recovered_exactly():
    ds, truth = generate_dataset(SimConfig(sigma=0.5, group_sizes=(60, 60)), 0)
    det = extract_subnetworks(ds)
    hits = [s for s in det.subnetworks if set(s.edges) == set(truth.tolist())]
    assert len(hits) == 1
    assert hits[0].metrics["suprathreshold_density"] > 0.9


def test_larger_lambda_gives_denser_subnetworks():
    hi, lo = [], []
    for r in range(10):
        ds, _ = generate_dataset(SimConfig(sigma=1.0, group_sizes=(30, 30), seed=3), r)
        for lam, out in ((0.7, hi), (0.4, lo)):
            det = extract_subnetworks(ds, config=DetectConfig(lambda0=lam, k_range=(1, 10)))
            q = [det.per_cluster_quality[det.partition.assignment[s.nodes[0] - 1] - 1]
                 for s in det.subnetworks]
            out.append(np.mean(q) if q else 0.0)
    assert np.mean(hi) >= np.mean(lo)


@pytest.mark.xfail(strict=True, reason="a maximizer of the penalized objective selects clusters "
                   "heavier than average, so null subnetworks are not representative of the mean")
def test_null_subnetwork_quality_matches_mean_weight():
    qualities, means = [], []
    for s in range(10):
        rng = np.random.default_rng(s)
        W = WeightMatrix(60, rng.exponential(size=n_edges(60)))
        det = select_k(W, DetectConfig(k_range=(1, 10)))
        qualities += [W.w[list(x.edges)].mean() for x in det.subnetworks]
        means.append(W.w.mean())
    assert stats.ttest_1samp(qualities, np.mean(means)).pvalue > 0.05
