import numpy as np
import pytest
from scipy import stats
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from netobj.errors import InvalidArgumentError
from netobj.graphcore import (ConnectomeDataset, EdgeIndex, Partition, Subnetwork,
                              binomial_tail, induced_edges, n_edges, pack_edge,
                              positive_agreement, rich_club_coefficient, rich_club_profile,
                              topology_metrics, unpack_edge)

from oracles import binomial_tail_fraction


def test_pack_small_table():
    got = [pack_edge(i, j, 4) for i, j in [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]]
    assert got == [0, 1, 2, 3, 4, 5]


def test_edge_count_90_nodes():
    assert n_edges(90) == 4005
    assert EdgeIndex(90).n_edges == 4005


@pytest.mark.parametrize("i,j,n", [(3, 2, 4), (2, 2, 4), (0, 1, 4), (1, 5, 4)])
def test_pack_rejects_bad_pairs(i, j, n):
    with pytest.raises(InvalidArgumentError):
        pack_edge(i, j, n)


def test_pack_unpack_exhaustive_up_to_200():
    for n in range(2, 201):
        r, c = EdgeIndex(n).pairs
        i, j = r + 1, c + 1
        ids = (i - 1) * (2 * n - i) // 2 + (j - i - 1)
        assert_array_equal(ids, np.arange(n_edges(n)))
    # scalar paths on a few sizes
    for n in (2, 3, 17, 50):
        for e in range(n_edges(n)):
            assert pack_edge(*unpack_edge(e, n), n) == e
            assert EdgeIndex(n).unpack(e) == unpack_edge(e, n)


def test_unpack_out_of_range():
    with pytest.raises(InvalidArgumentError):
        unpack_edge(6, 4)


def test_matrix_round_trip():
    idx = EdgeIndex(6)
    v = np.arange(15.0)
    m = idx.to_matrix(v)
    assert_array_equal(m, m.T)
    assert_array_equal(idx.from_matrix(m), v)
    assert m[0, 2] == pack_edge(1, 3, 6)


def test_induced_edges():
    assert induced_edges({1, 2, 3}, 4).tolist() == [0, 1, 3]
    assert induced_edges({5}, 10).size == 0
    assert induced_edges(range(1, 21), 100).size == 190


def test_rich_club_examples():
    k5 = np.ones((5, 5)) - np.eye(5)
    assert rich_club_coefficient(k5, 3) == 1.0
    assert rich_club_coefficient(np.zeros((6, 6)), 0) == 1.0
    star = np.zeros((5, 5))
    star[0, 1:] = star[1:, 0] = 1
    assert rich_club_coefficient(star, 1) == 1.0
    with pytest.raises(InvalidArgumentError):
        rich_club_coefficient(np.triu(k5), 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 12), st.integers(0, 10_000), st.integers(0, 6))
def test_rich_club_is_density_of_rich_subgraph(n, seed, k):
    rng = np.random.default_rng(seed)
    a = np.triu(rng.random((n, n)) < 0.4, 1)
    a = (a | a.T).astype(int)
    deg = a.sum(axis=1)
    rich = np.flatnonzero(deg > k)
    if rich.size <= 1:
        expected = 1.0
    else:
        expected = a[np.ix_(rich, rich)].sum() / (rich.size * (rich.size - 1))
    assert rich_club_coefficient(a, k) == pytest.approx(expected, abs=0, rel=1e-15)


def test_rich_club_profile_length():
    k5 = np.ones((5, 5)) - np.eye(5)
    assert rich_club_profile(k5) == [1.0] * 4


def test_binomial_tail_examples():
    assert binomial_tail(10, 0.1, 5) == pytest.approx(1.635e-3, abs=1e-6)
    # exact value; the often-quoted 6e-10 is not a Binomial(45, 0.1) tail at 23
    assert binomial_tail(45, 0.1, 23) == pytest.approx(stats.binom.sf(22, 45, 0.1), rel=1e-12)
    assert binomial_tail(45, 0.1, 23) == pytest.approx(4.50904e-12, rel=1e-5)
    assert binomial_tail(10, 0.1, 0) == 1.0


def test_binomial_tail_matches_rational_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        trials = int(rng.integers(1, 51))
        m = int(rng.integers(0, trials + 1))
        p = ["0.01", "0.05", "0.1", "0.3", "0.5", "0.77", "0.99"][int(rng.integers(7))]
        exact = float(binomial_tail_fraction(trials, p, m))
        got = binomial_tail(trials, float(p), m)
        if exact == 0.0:
            assert got < 1e-300
        else:
            assert abs(got - exact) / exact < 1e-12


def test_positive_agreement():
    assert positive_agreement({1, 2}, {1, 2}) == 1.0
    assert positive_agreement({1}, {2}) == 0.0
    assert positive_agreement(set(), set()) == 0.0
    a = set(range(40))
    b = set(range(34, 86))
    assert positive_agreement(a, b) == pytest.approx(12 / 92)


def test_dataset_validation():
    data = np.zeros((4, 3))
    ds = ConnectomeDataset(3, "abcd", [0, 0, 1, 1], data)
    assert ds.group_sizes == (2, 2)
    with pytest.raises(InvalidArgumentError):
        ConnectomeDataset(3, "abcd", [0, 0, 0, 0], data)
    with pytest.raises(InvalidArgumentError):
        ConnectomeDataset(3, "abcd", [0, 0, 1, 1], np.zeros((4, 4)))
    bad = data.copy()
    bad[0, 0] = np.nan
    with pytest.raises(InvalidArgumentError):
        ConnectomeDataset(3, "abcd", [0, 0, 1, 1], bad)
    with pytest.raises(ValueError):
        ds.data[0, 0] = 1.0


def test_relabel_nodes_moves_edges():
    n = 5
    idx = EdgeIndex(n)
    data = np.arange(10.0)[None, :].repeat(2, axis=0)
    ds = ConnectomeDataset(n, ["a", "b"], [0, 1], data)
    perm = [3, 1, 5, 2, 4]
    out = ds.relabel_nodes(perm)
    m_old, m_new = idx.to_matrix(data[0]), idx.to_matrix(out.data[0])
    for i in range(n):
        for j in range(n):
            assert m_new[perm[i] - 1, perm[j] - 1] == m_old[i, j]


def test_subnetwork_invariants():
    s = Subnetwork.from_nodes([4, 2, 7], 8)
    assert s.nodes == (2, 4, 7)
    assert len(s.edges) == 3
    s.check_endpoints(8)
    with pytest.raises(InvalidArgumentError):
        Subnetwork((1, 2, 3), (0,))
    custom = Subnetwork((1, 2), (pack_edge(1, 3, 5),), topology="custom")
    with pytest.raises(InvalidArgumentError):
        custom.check_endpoints(5)


def test_partition():
    p = Partition.from_labels([5, 5, 2, 9, 2])
    assert p.assignment.tolist() == [1, 1, 2, 3, 2]
    assert p.K == 3
    assert [c.tolist() for c in p.clusters()] == [[1, 2], [3, 5], [4]]
    with pytest.raises(InvalidArgumentError):
        Partition(np.array([1, 3]))


def test_topology_metrics():
    n = 6
    p = np.full(n_edges(n), 0.5)
    p[induced_edges([1, 2, 3], n)] = 0.01
    m = topology_metrics([1, 2, 3, 4], p, n, 0.05)
    assert m["suprathreshold_density"] == pytest.approx(0.5)
    assert_allclose(m["rich_club"], [1.0, 1.0])
