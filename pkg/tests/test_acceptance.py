"""End-to-end acceptance checks, each printing one PASS/FAIL line.

The heavy simulation checks search K in 1..10 during detection (the planted
structure never needs more) so the whole module runs in well under an hour
on one core.
"""
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from netobj.detect import DetectConfig, select_k
from netobj.edgestats import WeightMatrix, wilcoxon_rank_sum
from netobj.graphcore import binomial_tail
from netobj.infer import InferConfig, fisher_chernoff_stat
from netobj.sim import MethodSettings, SimConfig, run_cell, type1_experiment

from oracles import chi2_even_df_logsf, criterion_bruteforce, set_partitions

pytestmark = pytest.mark.acceptance

HEAVY = MethodSettings(detect=DetectConfig(k_range=(1, 10)),
                       infer=InferConfig(num_permutations=199, alpha=0.05))


def _report(capsys, ok, label, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")


@pytest.mark.parametrize("method", ["glp", "gep"])
def test_planted_subnetwork_recovery(capsys, method):
    cfg = SimConfig(n=100, planted_nodes=20, group_sizes=(60, 60), sigma=0.5, theta=1.0,
                    replicates=20, seed=0)
    row = run_cell(cfg, method, HEAVY)
    net_clean = sum(s.network_fp == 0 and s.network_fn == 0 for s in row.per_replicate)
    edge_clean = sum(s.edge_fn == 0 for s in row.per_replicate)
    ok = net_clean >= 19 and edge_clean >= 18
    _report(capsys, ok, f"planted recovery ({method})",
            f"network FP=FN=0 in {net_clean}/20 (need 19), edge FN=0 in {edge_clean}/20 (need 18); "
            f"mean edge FP {row.edge_fp[0]:.2f}")
    assert ok


@pytest.fixture(scope="module")
def null_runs():
    cfg = SimConfig(n=100, planted_nodes=20, group_sizes=(60, 60), sigma=0.5, theta=0.0, seed=1)
    return type1_experiment(cfg, 200, ("glp", "gep"), HEAVY)


@pytest.mark.parametrize("method", ["glp", "gep"])
def test_type1_rate(capsys, null_runs, method):
    res = null_runs[method]
    ok = res.rate <= 0.08
    _report(capsys, ok, f"type-I rate ({method})",
            f"{res.rate:.3f} over {res.iterations} null datasets (limit 0.08)")
    assert ok


def test_glp_pvalues_super_uniform(capsys, null_runs):
    p = null_runs["glp"].min_pvalues
    ecdf = float(np.mean(p <= 0.05))
    limit = 0.05 + 2 * math.sqrt(0.05 * 0.95 / p.size)
    ok = ecdf <= limit
    _report(capsys, ok, "GLP null p-values super-uniform",
            f"ECDF(0.05) = {ecdf:.3f} over {p.size} (limit {limit:.4f})")
    assert ok


def test_fdr_versus_local_fdr_ordering(capsys):
    settings = MethodSettings(fdr_q=0.2)
    lines, ok = [], True
    for sigma in (0.5, 1.0, 2.0):
        cfg = SimConfig(n=100, planted_nodes=20, group_sizes=(30, 30), sigma=sigma, theta=1.0,
                        replicates=50, seed=2)
        bh, lf = run_cell(cfg, "fdr", settings), run_cell(cfg, "lfdr", settings)
        cell = bh.edge_fp[0] > lf.edge_fp[0] and bh.edge_fn[0] < lf.edge_fn[0]
        ok &= cell
        lines.append(f"sigma={sigma}: FP {bh.edge_fp[0]:.2f}>{lf.edge_fp[0]:.2f}, "
                     f"FN {bh.edge_fn[0]:.2f}<{lf.edge_fn[0]:.2f} {'ok' if cell else 'violated'}")
    _report(capsys, ok, "BH-FDR versus local fdr", "; ".join(lines))
    assert ok


def test_chernoff_lower_bound(capsys):
    rng = np.random.default_rng(4)
    worst, count = -np.inf, 0
    while count < 1000:
        size = int(rng.integers(1, 60))
        p = rng.random(size) ** rng.uniform(0.5, 6.0)
        p = np.maximum(p, 1e-300)
        logs = -np.log(p)
        if logs.mean() <= 1:
            continue
        count += 1
        exact = chi2_even_df_logsf(2 * logs.sum(), 2 * size)
        worst = max(worst, fisher_chernoff_stat(p) - exact)
    ok = worst <= 1e-9
    _report(capsys, ok, "Chernoff bound below exact Fisher tail",
            f"largest excess {worst:.3e} over 1000 vectors (slack 1e-9)")
    assert ok


def test_binomial_tail_values(capsys):
    a = binomial_tail(10, 0.1, 5)
    b = binomial_tail(45, 0.1, 23)
    ok_a = abs(a - 1.635e-3) <= 1e-6
    ok_b = 6e-10 / 2 <= b <= 6e-10 * 2
    _report(capsys, ok_a and ok_b, "binomial tail values",
            f"B(10,0.1)>=5: {a:.6e} ({'ok' if ok_a else 'off'}); "
            f"B(45,0.1)>=23: {b:.4e} vs 6e-10 within x2 ({'ok' if ok_b else 'off'})")
    assert ok_a and ok_b


def test_detection_near_exhaustive_optimum(capsys):
    ratios = []
    partitions = list(set_partitions(8, 3))
    for t in range(30):
        rng = np.random.default_rng(100 + t)
        W = WeightMatrix(8, rng.exponential(size=28))
        A = W.dense()
        best = max(criterion_bruteforce(A, lab, 0.5) for lab in partitions)
        det = select_k(W, DetectConfig(k_range=(1, 3)))
        ratios.append(det.objective / best)
    worst = min(ratios)
    ok = worst >= 0.9
    _report(capsys, ok, "detection vs exhaustive search",
            f"worst ratio {worst:.3f} over 30 matrices (need 0.9)")
    assert ok


def test_rank_sum_normal_vs_exact(capsys):
    rng = np.random.default_rng(5)
    bad = {}
    for n1 in range(1, 12):
        for n2 in range(1, 13 - n1):
            worst = 0.0
            for _ in range(1000):
                x, y = rng.normal(size=n1), rng.normal(size=n2)
                exact = stats.mannwhitneyu(x, y, alternative="two-sided", method="exact").pvalue
                worst = max(worst, abs(wilcoxon_rank_sum(x, y, exact=False) - exact))
            if worst > 0.03:
                bad[(n1, n2)] = worst
    ok = not bad
    detail = "all pairs within 0.03" if ok else (
        f"{len(bad)} size pairs exceed 0.03, worst {max(bad.values()):.3f} at "
        f"{max(bad, key=bad.get)}; failing pairs {sorted(bad)}")
    _report(capsys, ok, "normal vs exact rank-sum", detail)
    assert ok


def _cli(args, threads, out):
    env = dict(os.environ, NETOBJ_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "netobj.cli", *args, "--out-dir", str(out)],
                   check=True, env=env, capture_output=True)
    doc = json.loads((out / "results.json").read_text())
    doc.pop("created")
    return json.dumps(doc, sort_keys=True)


def test_thread_count_does_not_change_results(capsys, tmp_path):
    sim = tmp_path / "sim"
    _cli(["simulate", "--n", "40", "--planted", "10", "--controls", "25", "--cases", "25",
          "--seed", "11"], 1, sim)
    manifest = str(sim / "manifest.json")
    commands = {
        "detect": ["detect", "--manifest", manifest, "--seed", "11"],
        "test-glp": ["test", "--manifest", manifest, "--perm", "glp", "--M", "49", "--kmax", "8",
                     "--seed", "11"],
        "test-gep": ["test", "--manifest", manifest, "--perm", "gep", "--M", "49", "--kmax", "8",
                     "--omnibus-B", "199", "--seed", "11"],
        "nbs": ["baseline", "--manifest", manifest, "--baseline", "nbs", "--M", "99", "--seed", "11"],
    }
    differing = [name for name, args in commands.items()
                 if len({_cli(args, t, tmp_path / f"{name}-{t}") for t in (1, 2, 4)}) != 1]
    ok = not differing
    _report(capsys, ok, "determinism across NETOBJ_THREADS",
            "identical JSON for 1, 2 and 4 threads" if ok else f"differs: {differing}")
    assert ok
