"""Edgewise multiple-testing baselines and the network-based statistic."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import statsmodels.api as sm
from scipy import special, stats
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._seeding import NBS, parallel_map, stream
from .errors import InvalidArgumentError, NumericalError
from .graphcore import ConnectomeDataset, EdgeIndex, Subnetwork

logger = logging.getLogger(__name__)

LFDR_NULLS = ("theoretical", "empirical-central-matching")


@dataclass(frozen=True)
class RejectionSet:
    rejected: np.ndarray
    method: str
    threshold: float
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rejected", np.unique(np.asarray(self.rejected, dtype=np.int64)))

    def __len__(self):
        return self.rejected.size


def _check_p(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=float).ravel()
    if np.any(~(p > 0)) or np.any(p > 1):
        raise InvalidArgumentError("p-values must lie in (0, 1]")
    return p


# ------------------------------------------------------------------- FDR


def bh_fdr(p_values, q: float = 0.2) -> RejectionSet:
    """Benjamini-Hochberg step-up at level ``q``."""
    if not (0.0 < q < 1.0):
        raise InvalidArgumentError("q must lie in (0, 1)")
    p = _check_p(p_values)
    m = p.size
    order = np.argsort(p, kind="stable")
    ok = np.flatnonzero(p[order] <= q * np.arange(1, m + 1) / m)
    k = ok[-1] + 1 if ok.size else 0
    return RejectionSet(order[:k], "bh-fdr", q)


def storey_pi0(p_values, lam: float = 0.5) -> float:
    p = _check_p(p_values)
    return float(min(1.0, np.count_nonzero(p > lam) / ((1.0 - lam) * p.size)))


def storey_qvalues(p_values) -> np.ndarray:
    """Storey q-values with the fixed lambda = 0.5 estimate of pi0."""
    p = _check_p(p_values)
    m = p.size
    pi0 = storey_pi0(p)
    order = np.argsort(p, kind="stable")
    raw = pi0 * m * p[order] / np.arange(1, m + 1)
    q = np.minimum.accumulate(raw[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(q, 1.0)
    return out


def storey_reject(p_values, q: float = 0.2) -> RejectionSet:
    qv = storey_qvalues(p_values)
    return RejectionSet(np.flatnonzero(qv <= q), "storey", q)


# ------------------------------------------------------------- local fdr


@dataclass(frozen=True)
class LfdrConfig:
    bins: int = 120
    poly_degree: int = 7
    null: str = "theoretical"
    cutoff: float = 0.2

    def __post_init__(self):
        if self.bins < 20:
            raise InvalidArgumentError("bins must be >= 20")
        if self.poly_degree < 2:
            raise InvalidArgumentError("poly_degree must be >= 2")
        if self.null not in LFDR_NULLS:
            raise InvalidArgumentError(f"null must be one of {LFDR_NULLS}")
        if not (0.0 < self.cutoff <= 1.0):
            raise InvalidArgumentError("cutoff must lie in (0, 1]")


@dataclass(frozen=True)
class LfdrResult:
    fdr: np.ndarray
    rejections: RejectionSet
    pi0: float
    null_mean: float = 0.0
    null_sd: float = 1.0


def _lindsey_fit(z, bins, degree):
    """Marginal density of z from a Poisson regression of histogram counts."""
    counts, edges = np.histogram(z, bins=bins)
    if np.count_nonzero(counts) <= 1:
        raise NumericalError("degenerate histogram: all z-values fall in one bin")
    mids = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    lo, hi = edges[0], edges[-1]

    def basis(x):
        u = 2.0 * (np.asarray(x) - lo) / (hi - lo) - 1.0
        return np.polynomial.legendre.legvander(u, degree)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = sm.GLM(counts, basis(mids), family=sm.families.Poisson()).fit()
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Poisson density fit failed: {exc}") from exc
    beta = np.asarray(fit.params)
    if not np.isfinite(beta).all():
        raise NumericalError("Poisson density fit did not converge")
    scale = z.size * width

    def density(x):
        return np.exp(basis(x) @ beta) / scale

    return density, mids


def _central_matching(density, mids, z):
    """Normal null fitted to the log-density's curvature near its peak."""
    centre = np.median(z)
    sel = np.abs(mids - centre) <= 1.5
    if sel.sum() < 3:
        raise NumericalError("too few central bins for central matching")
    x = mids[sel]
    c2, c1, c0 = np.polyfit(x, np.log(density(x)), 2)
    if c2 >= 0:
        raise NumericalError("log density is not concave near the centre")
    sd = np.sqrt(-0.5 / c2)
    mean = c1 * sd * sd
    pi0 = np.exp(c0 + 0.5 * mean * mean / (sd * sd)) * np.sqrt(2 * np.pi) * sd
    return float(mean), float(sd), float(min(1.0, pi0))


def local_fdr(p_values, cfg: LfdrConfig = LfdrConfig()) -> LfdrResult:
    """Local false discovery rates on the one-sided z-scale z = Phi^-1(1 - p).

    f is estimated by Lindsey's method; f0 is N(0, 1) (``theoretical``) or a
    normal fitted by central matching. Under the theoretical null pi0 is the
    ratio of observed to expected counts in |z| <= 1, capped at 1. Only the
    upper tail (small p) can be rejected: fdr is 1 for z at or below the null
    mean, which keeps spikes of p = 1 from discrete tests out of the
    rejection set.
    """
    p = _check_p(p_values)
    if p.size < 200:
        logger.warning("local fdr with only %d p-values; estimates are unstable below 200", p.size)
    # -Phi^-1(p) == Phi^-1(1 - p) without losing tiny p to rounding
    z = -special.ndtri(np.clip(p, 1e-300, np.nextafter(1.0, 0.0)))
    density, mids = _lindsey_fit(z, cfg.bins, cfg.poly_degree)
    if cfg.null == "theoretical":
        mean, sd = 0.0, 1.0
        expected = stats.norm.cdf(1.0) - stats.norm.cdf(-1.0)
        pi0 = float(min(1.0, np.count_nonzero(np.abs(z) <= 1.0) / (expected * z.size)))
    else:
        mean, sd, pi0 = _central_matching(density, mids, z)
    f = density(z)
    f0 = stats.norm.pdf(z, loc=mean, scale=sd)
    with np.errstate(divide="ignore", invalid="ignore"):
        fdr = np.where(f > 0, pi0 * f0 / f, 1.0)
    fdr = np.clip(np.nan_to_num(fdr, nan=1.0), 0.0, 1.0)
    fdr[z <= mean] = 1.0
    rej = RejectionSet(np.flatnonzero(fdr <= cfg.cutoff), "local-fdr", cfg.cutoff,
                       {"pi0": pi0, "null": cfg.null})
    return LfdrResult(fdr, rej, pi0, mean, sd)


# -------------------------------------------------------------------- NBS


@dataclass(frozen=True)
class NBSResult:
    components: list
    tau: float
    null: np.ndarray
    alpha: float = 0.05

    @property
    def significant(self) -> list:
        return [c for c in self.components if c.p_value <= self.alpha]

    def significant_edges(self) -> np.ndarray:
        sig = self.significant
        if not sig:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([np.asarray(c.edges, dtype=np.int64) for c in sig]))


def _pooled_t(data, case):
    x1, x0 = data[case], data[~case]
    n1, n0 = x1.shape[0], x0.shape[0]
    ss = x1.var(axis=0, ddof=0) * n1 + x0.var(axis=0, ddof=0) * n0
    sp2 = ss / (n1 + n0 - 2)
    diff = x1.mean(axis=0) - x0.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = diff / np.sqrt(sp2 * (1.0 / n1 + 1.0 / n0))
    return np.where(sp2 > 0, t, np.where(diff == 0, 0.0, np.sign(diff) * np.inf))


def _components(supra, n):
    """Edge sets of the connected components with at least one edge."""
    r, c = EdgeIndex(n).pairs
    ids = np.flatnonzero(supra)
    if ids.size == 0:
        return []
    g = coo_matrix((np.ones(ids.size), (r[ids], c[ids])), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    comp_of_edge = lab[r[ids]]
    return [ids[comp_of_edge == k] for k in np.unique(comp_of_edge)]


def _max_extent(supra, n):
    return max((e.size for e in _components(supra, n)), default=0)


def nbs(dataset: ConnectomeDataset, tau: float = 3.0, M: int = 1000, seed: int = 0,
        alpha: float = 0.05) -> NBSResult:
    """Network-based statistic: components of the |t| >= tau graph, sized by
    edge count, with family-wise p-values from the permutation maximum."""
    if not tau > 0:
        raise InvalidArgumentError("tau must be > 0")
    if M < 19:
        raise InvalidArgumentError("M must be >= 19")
    n0, n1 = dataset.group_sizes
    if n0 < 2 or n1 < 2:
        raise InvalidArgumentError("NBS needs at least 2 subjects per group")
    data, n = dataset.data, dataset.n
    obs = _components(np.abs(_pooled_t(data, dataset.labels == 1)) >= tau, n)

    def one(m):
        labels = stream(seed, NBS, m).permutation(dataset.labels)
        return _max_extent(np.abs(_pooled_t(data, labels == 1)) >= tau, n)

    null = np.array(parallel_map(one, range(M)), dtype=float)
    r, c = EdgeIndex(n).pairs
    comps = []
    for edges in sorted(obs, key=lambda e: (-e.size, e[0])):
        nodes = np.unique(np.concatenate([r[edges], c[edges]])) + 1
        p = (1 + np.count_nonzero(null >= edges.size)) / (M + 1)
        comps.append(Subnetwork(nodes, edges, topology="custom", statistic=float(edges.size),
                                p_value=p))
    return NBSResult(comps, tau, null, alpha)
