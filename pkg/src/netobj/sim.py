"""Synthetic case-control connectomes with a latent planted subnetwork, and
the benchmark harnesses built on them."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from ._seeding import SIM, derive_seed, stream
from .baselines import LfdrConfig, bh_fdr, local_fdr, nbs, storey_reject
from .detect import DetectConfig
from .edgestats import EdgeTester
from .errors import InvalidArgumentError
from .graphcore import ConnectomeDataset, induced_edges, n_edges
from .infer import InferConfig, gep_test, glp_test
from .io import atomic_write

logger = logging.getLogger(__name__)

METHODS = ("glp", "gep", "fdr", "storey", "lfdr", "nbs")
NETWORK_METHODS = ("glp", "gep", "nbs")
# a significant subnetwork counts as a hit when at least this share of its
# edges are planted edges
HIT_FRACTION = 0.5


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    planted_nodes: int = 20
    theta: float = 1.0
    sigma: float = 0.5
    rho_cs: float = 0.3
    group_sizes: tuple = (60, 60)
    replicates: int = 100
    mu1: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.rho_cs < 1.0):
            raise InvalidArgumentError("rho_cs must lie in [0, 1)")
        if not (2 <= self.planted_nodes <= self.n):
            raise InvalidArgumentError("planted_nodes must lie in 2..n")
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be > 0")
        n0, n1 = (int(v) for v in self.group_sizes)
        if n0 < 1 or n1 < 1:
            raise InvalidArgumentError("both groups need at least one subject")
        object.__setattr__(self, "group_sizes", (n0, n1))

    @property
    def n_planted_edges(self) -> int:
        return n_edges(self.planted_nodes)


def generate_dataset(cfg: SimConfig, replicate: int = 0):
    """One simulated dataset and the edge ids of its planted subnetwork.

    Every edge is N(mu1, sigma^2) and independent, except the planted
    clique's edges, which share a one-factor compound-symmetry correlation
    rho_cs and are shifted by +theta in controls. The planted nodes are a
    uniformly random node subset, which is the same as shuffling node
    labels after planting on nodes 1..k.
    """
    rng = stream(cfg.seed, SIM, replicate)
    n0, n1 = cfg.group_sizes
    S = n0 + n1
    m = n_edges(cfg.n)
    nodes = np.sort(rng.choice(cfg.n, cfg.planted_nodes, replace=False) + 1)
    truth = induced_edges(nodes, cfg.n)
    data = rng.standard_normal((S, m))
    common = rng.standard_normal((S, 1))
    data[:, truth] = (math.sqrt(cfg.rho_cs) * common
                      + math.sqrt(1.0 - cfg.rho_cs) * data[:, truth])
    data = cfg.mu1 + cfg.sigma * data
    labels = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)]
    data[np.ix_(labels == 0, truth)] += cfg.theta
    ids = [f"ctrl{i + 1:03d}" for i in range(n0)] + [f"case{i + 1:03d}" for i in range(n1)]
    return ConnectomeDataset(cfg.n, ids, labels, data), truth


def score_discovery(discovered, truth, total: int | None = None) -> tuple[int, int]:
    """(false positives, false negatives) of a discovered edge set."""
    d = set(int(e) for e in discovered)
    t = set(int(e) for e in truth)
    if total is not None and any(not (0 <= e < total) for e in d | t):
        raise InvalidArgumentError(f"edge ids must lie in 0..{total - 1}")
    return len(d - t), len(t - d)


def score_networks(subnetworks, truth) -> tuple[int, int]:
    """(network FP count, network FN indicator) for significant subnetworks.

    A subnetwork is a hit when at least half of its edges are planted; every
    other significant subnetwork is a false positive. FN is 1 when planted
    edges exist and no subnetwork is a hit.
    """
    t = set(int(e) for e in truth)
    hits = fp = 0
    for s in subnetworks:
        share = len(t.intersection(s.edges)) / max(len(s.edges), 1)
        if share >= HIT_FRACTION:
            hits += 1
        else:
            fp += 1
    return fp, int(bool(t) and hits == 0)


@dataclass(frozen=True)
class MethodSettings:
    detect: DetectConfig = DetectConfig()
    infer: InferConfig = InferConfig(num_permutations=199)
    test_method: str = "wilcoxon"
    fdr_q: float = 0.2
    lfdr: LfdrConfig = LfdrConfig()
    nbs_tau: float = 3.0


@dataclass
class ReplicateScore:
    method: str
    edge_fp: int
    edge_fn: int
    network_fp: int | None = None
    network_fn: int | None = None


def analyze_replicate(dataset: ConnectomeDataset, truth, method: str,
                      settings: MethodSettings, seed: int) -> ReplicateScore:
    """Run one method on one dataset and score it against the truth."""
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; choose from {METHODS}")
    total = dataset.n_edges
    if method in ("glp", "gep"):
        cfg = replace(settings.infer, seed=seed)
        run = glp_test if method == "glp" else gep_test
        rep = run(dataset, replace(settings.detect, seed=seed), cfg, settings.test_method)
        fp, fn = score_discovery(rep.significant_edges(), truth, total)
        nfp, nfn = score_networks(rep.significant, truth)
        return ReplicateScore(method, fp, fn, nfp, nfn)
    if method == "nbs":
        res = nbs(dataset, settings.nbs_tau, settings.infer.num_permutations, seed,
                  settings.infer.alpha)
        fp, fn = score_discovery(res.significant_edges(), truth, total)
        nfp, nfn = score_networks(res.significant, truth)
        return ReplicateScore(method, fp, fn, nfp, nfn)
    p = EdgeTester(dataset.data, settings.test_method).pvalues(dataset.labels)
    if method == "fdr":
        rej = bh_fdr(p, settings.fdr_q)
    elif method == "storey":
        rej = storey_reject(p, settings.fdr_q)
    else:
        rej = local_fdr(p, settings.lfdr).rejections
    fp, fn = score_discovery(rej.rejected, truth, total)
    return ReplicateScore(method, fp, fn)


def _mean_sd(values):
    if not values or any(v is None for v in values):
        return None, None
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


@dataclass
class ScoreRow:
    method: str
    group_sizes: tuple
    sigma: float
    theta: float
    replicates: int
    edge_fp: tuple
    edge_fn: tuple
    network_fp: tuple
    network_fn: tuple
    per_replicate: list = field(default_factory=list, repr=False)


def run_cell(cfg: SimConfig, method: str, settings: MethodSettings = MethodSettings()) -> ScoreRow:
    """All replicates of one (configuration, method) cell."""
    scores = []
    for r in range(cfg.replicates):
        dataset, truth = generate_dataset(cfg, r)
        try:
            scores.append(analyze_replicate(dataset, truth, method, settings,
                                            derive_seed(cfg.seed, SIM, r)))
        except Exception as exc:
            raise RuntimeError(
                f"replicate {r} of {method} at sizes={cfg.group_sizes} sigma={cfg.sigma} "
                f"theta={cfg.theta} failed: {exc}") from exc
    return ScoreRow(
        method, cfg.group_sizes, cfg.sigma, cfg.theta, cfg.replicates,
        _mean_sd([s.edge_fp for s in scores]), _mean_sd([s.edge_fn for s in scores]),
        _mean_sd([s.network_fp for s in scores]), _mean_sd([s.network_fn for s in scores]),
        scores)


def run_table1(grid: Sequence[SimConfig], methods: Sequence[str] = ("glp", "gep", "fdr", "lfdr"),
               settings: MethodSettings = MethodSettings()) -> list[ScoreRow]:
    rows = []
    for cfg in grid:
        for method in methods:
            logger.info("cell sizes=%s sigma=%g method=%s", cfg.group_sizes, cfg.sigma, method)
            rows.append(run_cell(cfg, method, settings))
    return rows


def table1_grid(theta: float = 1.0, replicates: int = 100, seed: int = 0,
                sizes=((30, 30), (60, 60)), sigmas=(0.5, 1.0, 2.0)) -> list[SimConfig]:
    return [SimConfig(theta=theta, sigma=s, group_sizes=g, replicates=replicates, seed=seed)
            for g in sizes for s in sigmas]


def rows_to_records(rows: Sequence[ScoreRow]) -> list[dict]:
    out = []
    for r in rows:
        rec = {"method": r.method, "controls": r.group_sizes[0], "cases": r.group_sizes[1],
               "sigma": r.sigma, "theta": r.theta, "replicates": r.replicates}
        for key in ("edge_fp", "edge_fn", "network_fp", "network_fn"):
            mean, sd = getattr(r, key)
            rec[f"{key}_mean"] = mean
            rec[f"{key}_sd"] = sd
        out.append(rec)
    return out


def write_table(rows: Sequence[ScoreRow], csv_path=None, json_path=None) -> list[dict]:
    """Table records, optionally written as CSV and JSON."""
    records = rows_to_records(rows)
    if csv_path is not None and records:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(records)
        atomic_write(csv_path, buf.getvalue())
    if json_path is not None:
        atomic_write(json_path, json.dumps(records, indent=2) + "\n")
    return records


@dataclass
class Type1Result:
    method: str
    iterations: int
    rate: float
    min_pvalues: np.ndarray


def type1_experiment(cfg: SimConfig, iterations: int, methods: Sequence[str] = ("glp", "gep"),
                     settings: MethodSettings = MethodSettings()) -> dict:
    """Network-level false-positive rate under theta = 0.

    Returns per-method rate of iterations with at least one significant
    subnetwork, plus each iteration's smallest subnetwork p-value (1 when
    nothing was detected or the GEP gate failed).
    """
    if iterations < 1:
        raise InvalidArgumentError("iterations must be >= 1")
    if cfg.theta != 0:
        raise InvalidArgumentError("type-I experiment needs theta = 0")
    out = {}
    for method in methods:
        if method not in ("glp", "gep"):
            raise InvalidArgumentError(f"type-I experiment supports glp and gep, not {method!r}")
        hits = 0
        min_p = np.ones(iterations)
        for it in range(iterations):
            dataset, _ = generate_dataset(cfg, it)
            seed = derive_seed(cfg.seed, SIM, it)
            run = glp_test if method == "glp" else gep_test
            rep = run(dataset, replace(settings.detect, seed=seed),
                      replace(settings.infer, seed=seed), settings.test_method)
            if rep.subnetworks:
                min_p[it] = min(s.p_value for s in rep.subnetworks)
            hits += bool(rep.significant)
        out[method] = Type1Result(method, iterations, hits / iterations, min_p)
    return out


def config_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["group_sizes"] = list(cfg.group_sizes)
    return d
