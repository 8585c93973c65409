"""Command-line entry point: ``netobj <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .baselines import LfdrConfig, bh_fdr, local_fdr, nbs, storey_qvalues, storey_reject
from .detect import DetectConfig, select_k
from .edgestats import EdgeTester, weights_from_pvalues
from .errors import InvalidArgumentError, LoadError, NumericalError
from .graphcore import topology_metrics
from .infer import InferConfig, gep_test, glp_test
from .io import atomic_write, load_dataset, write_dataset
from .report import (ResultDocument, _jsonable, edges_csv, heatmap_svg, node_order,
                     subnetwork_record)
from .sim import (MethodSettings, SimConfig, config_dict, generate_dataset, run_table1,
                  type1_experiment, write_table)

logger = logging.getLogger("netobj")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
STATISTIC_FLAGS = {"fisher": "fisher_chernoff", "scan": "scan"}


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _sizes(text):
    try:
        out = []
        for part in text.split(";"):
            a, b = part.lower().split("v")
            out.append((int(a), int(b)))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes look like '30v30;60v60', got {text!r}") from None


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netobj", description="Network-object inference for "
                                "case-control connectivity data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, data=True):
        if data:
            sp.add_argument("--manifest", required=True, help="JSON manifest of subject matrices")
            sp.add_argument("--fisher-z", action="store_true", help="Fisher z-transform inputs")
            sp.add_argument("--method", choices=("wilcoxon", "welch-t"), default="wilcoxon")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", required=True, help="directory for result files")

    def detection(sp):
        sp.add_argument("--lambda0", type=float, default=0.5)
        sp.add_argument("--kmax", type=_positive_int, default=None,
                        help="largest K searched (default min(n-1, 30))")
        sp.add_argument("--p0", type=float, default=0.05)
        sp.add_argument("--min-nodes", type=_positive_int, default=3)
        sp.add_argument("--emit-heatmap", action="store_true")

    def inference(sp):
        sp.add_argument("--perm", choices=("glp", "gep"), default="glp")
        sp.add_argument("--statistic", choices=tuple(STATISTIC_FLAGS), default="fisher")
        sp.add_argument("--M", type=_positive_int, default=1000, help="permutations")
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--omnibus-B", type=_positive_int, default=1000)

    sp = sub.add_parser("edge-tests", help="edgewise two-sample tests")
    common(sp)
    sp.add_argument("--emit-heatmap", action="store_true")

    sp = sub.add_parser("detect", help="detect subnetworks")
    common(sp)
    detection(sp)

    sp = sub.add_parser("test", help="detect and test subnetworks by permutation")
    common(sp)
    detection(sp)
    inference(sp)

    sp = sub.add_parser("baseline", help="edgewise or NBS baselines")
    common(sp)
    sp.add_argument("--baseline", choices=("fdr", "storey", "lfdr", "nbs"), default="fdr")
    sp.add_argument("--q", type=float, default=0.2)
    sp.add_argument("--lfdr-cutoff", type=float, default=0.2)
    sp.add_argument("--lfdr-null", choices=("theoretical", "empirical-central-matching"),
                    default="theoretical")
    sp.add_argument("--tau", type=float, default=3.0)
    sp.add_argument("--M", type=_positive_int, default=1000)
    sp.add_argument("--alpha", type=float, default=0.05)

    def simulation(sp):
        sp.add_argument("--n", type=_positive_int, default=100)
        sp.add_argument("--planted", type=_positive_int, default=20)
        sp.add_argument("--theta", type=float, default=1.0)
        sp.add_argument("--rho", type=float, default=0.3)
        sp.add_argument("--mu1", type=float, default=0.0)

    sp = sub.add_parser("simulate", help="write a simulated dataset")
    common(sp, data=False)
    simulation(sp)
    sp.add_argument("--sigma", type=float, default=0.5)
    sp.add_argument("--controls", type=_positive_int, default=60)
    sp.add_argument("--cases", type=_positive_int, default=60)
    sp.add_argument("--replicate", type=int, default=0)

    def bench(sp):
        sp.add_argument("--method", choices=("wilcoxon", "welch-t"), default="wilcoxon")
        sp.add_argument("--M", type=_positive_int, default=199)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--kmax", type=_positive_int, default=None)
        sp.add_argument("--lambda0", type=float, default=0.5)
        sp.add_argument("--omnibus-B", type=_positive_int, default=1000)

    sp = sub.add_parser("bench-table1", help="simulation comparison of all methods")
    common(sp, data=False)
    simulation(sp)
    bench(sp)
    sp.add_argument("--sizes", type=_sizes, default=[(30, 30), (60, 60)])
    sp.add_argument("--sigmas", type=_floats, default=[0.5, 1.0, 2.0])
    sp.add_argument("--replicates", type=_positive_int, default=100)
    sp.add_argument("--methods", default="glp,gep,fdr,lfdr,nbs")
    sp.add_argument("--q", type=float, default=0.2)
    sp.add_argument("--tau", type=float, default=3.0)

    sp = sub.add_parser("type1", help="network-level false-positive rate under no effect")
    common(sp, data=False)
    simulation(sp)
    bench(sp)
    sp.add_argument("--sigma", type=float, default=0.5)
    sp.add_argument("--controls", type=_positive_int, default=60)
    sp.add_argument("--cases", type=_positive_int, default=60)
    sp.add_argument("--iterations", type=_positive_int, default=200)
    sp.add_argument("--methods", default="glp,gep")
    sp.set_defaults(theta=0.0)
    return p


# ------------------------------------------------------------------ helpers


def _detect_cfg(args, n) -> DetectConfig:
    k_range = None if args.kmax is None else (1, min(args.kmax, n))
    try:
        return DetectConfig(lambda0=args.lambda0, k_range=k_range,
                            min_cluster_nodes=getattr(args, "min_nodes", 3), seed=args.seed)
    except InvalidArgumentError as exc:
        raise UsageError(f"--lambda0/--kmax: {exc}") from exc


def _infer_cfg(args) -> InferConfig:
    try:
        return InferConfig(num_permutations=args.M, alpha=args.alpha,
                           statistic=STATISTIC_FLAGS.get(getattr(args, "statistic", "fisher")),
                           p0=getattr(args, "p0", 0.05), omnibus_B=args.omnibus_B, seed=args.seed)
    except InvalidArgumentError as exc:
        raise UsageError(f"--M/--alpha/--p0/--omnibus-B: {exc}") from exc


def _config(args) -> dict:
    skip = {"command", "verbose", "out_dir", "manifest"}
    return _jsonable({k: v for k, v in sorted(vars(args).items()) if k not in skip})


def _edge_summary(tests) -> dict:
    p = tests.p_values
    return {"method": tests.method, "n_edges": int(p.size), "min_p": float(p.min()),
            "n_below_0.05": int((p < 0.05).sum()), "n_below_0.001": int((p < 0.001).sum())}


def _write_edge_outputs(out, dataset, tests, subnetworks, args, names):
    w = weights_from_pvalues(tests, dataset.n).w
    atomic_write(out / "edges.csv", edges_csv(tests.p_values, tests.signs, w, subnetworks, dataset.n))
    order = node_order(dataset.n, subnetworks)
    if getattr(args, "emit_heatmap", False):
        atomic_write(out / "heatmap.svg", heatmap_svg(tests.p_values, dataset.n, order, labels=names))
    return order


def _load(args):
    path = Path(args.manifest)
    return load_dataset(path, apply_fisher_z=args.fisher_z)


def _doc(args, **kw) -> ResultDocument:
    return ResultDocument(command=args.command, config=_config(args), seed=args.seed,
                          version=__version__, **kw)


def _finish(out: Path, doc: ResultDocument) -> None:
    atomic_write(out / "results.json", doc.to_json())
    logger.info("wrote %s", out / "results.json")


# ----------------------------------------------------------------- commands


def cmd_edge_tests(args, out):
    ds, names = _load(args)
    tests = EdgeTester(ds.data, args.method).run(ds.labels)
    order = _write_edge_outputs(out, ds, tests, [], args, names)
    _finish(out, _doc(args, edge_tests=_edge_summary(tests), node_order=order))


def _detection_record(det, tests, n, p0):
    subs = [replace(s, metrics=topology_metrics(s.nodes, tests.p_values, n, p0))
            for s in det.subnetworks]
    rec = {"k_selected": det.k_selected, "objective": det.objective,
           "criterion_by_k": {str(k): v for k, v in det.criterion_by_k.items()},
           "assignment": det.partition.assignment.tolist(),
           "per_cluster_quality": det.per_cluster_quality.tolist(),
           "subnetworks": [subnetwork_record(s, tests.signs) for s in subs]}
    return _jsonable(rec), subs


def cmd_detect(args, out):
    ds, names = _load(args)
    tests = EdgeTester(ds.data, args.method).run(ds.labels)
    det = select_k(weights_from_pvalues(tests, ds.n), _detect_cfg(args, ds.n))
    rec, subs = _detection_record(det, tests, ds.n, args.p0)
    order = _write_edge_outputs(out, ds, tests, subs, args, names)
    _finish(out, _doc(args, edge_tests=_edge_summary(tests), detection=rec, node_order=order))


def cmd_test(args, out):
    ds, names = _load(args)
    dcfg, icfg = _detect_cfg(args, ds.n), _infer_cfg(args)
    run = glp_test if args.perm == "glp" else gep_test
    rep = run(ds, dcfg, icfg, args.method)
    tests = rep.tests
    sig_ids = {id(s) for s in rep.significant}
    inference = {
        "method": rep.method, "statistic": icfg.statistic, "alpha": icfg.alpha,
        "num_permutations": icfg.num_permutations,
        "gate_p": rep.gate_p, "gate_passed": rep.gate_passed,
        "critical_value": rep.critical_value,
        "null": None if rep.null is None else rep.null.values.tolist(),
        "subnetworks": [subnetwork_record(s, tests.signs, id(s) in sig_ids)
                        for s in rep.subnetworks],
        "n_significant": len(rep.significant),
    }
    detection = None
    if rep.detection is not None:
        detection, _ = _detection_record(rep.detection, tests, ds.n, icfg.p0)
    shown = rep.significant or rep.subnetworks
    order = _write_edge_outputs(out, ds, tests, shown, args, names)
    _finish(out, _doc(args, edge_tests=_edge_summary(tests), detection=detection,
                      inference=_jsonable(inference), node_order=order))


def cmd_baseline(args, out):
    ds, names = _load(args)
    tests = EdgeTester(ds.data, args.method).run(ds.labels)
    p = tests.p_values
    try:
        if args.baseline == "fdr":
            rej = bh_fdr(p, args.q)
            res = {"rejected": rej.rejected.tolist(), "q": args.q}
        elif args.baseline == "storey":
            rej = storey_reject(p, args.q)
            res = {"rejected": rej.rejected.tolist(), "q": args.q,
                   "qvalues": storey_qvalues(p).tolist()}
        elif args.baseline == "lfdr":
            lf = local_fdr(p, LfdrConfig(cutoff=args.lfdr_cutoff, null=args.lfdr_null))
            res = {"rejected": lf.rejections.rejected.tolist(), "cutoff": args.lfdr_cutoff,
                   "pi0": lf.pi0, "null_mean": lf.null_mean, "null_sd": lf.null_sd,
                   "fdr": lf.fdr.tolist()}
        else:
            nb = nbs(ds, args.tau, args.M, args.seed, args.alpha)
            res = {"tau": args.tau, "M": args.M,
                   "components": [subnetwork_record(c, tests.signs, c.p_value <= args.alpha)
                                  for c in nb.components]}
    except InvalidArgumentError as exc:
        raise UsageError(f"--q/--tau/--M/--lfdr-cutoff: {exc}") from exc
    order = _write_edge_outputs(out, ds, tests, [], args, names)
    _finish(out, _doc(args, edge_tests=_edge_summary(tests),
                      baselines=_jsonable({args.baseline: res}), node_order=order))


def _sim_cfg(args, **kw) -> SimConfig:
    try:
        return SimConfig(n=args.n, planted_nodes=args.planted, theta=args.theta, rho_cs=args.rho,
                         mu1=args.mu1, seed=args.seed, **kw)
    except InvalidArgumentError as exc:
        raise UsageError(f"simulation flags: {exc}") from exc


def cmd_simulate(args, out):
    cfg = _sim_cfg(args, sigma=args.sigma, group_sizes=(args.controls, args.cases))
    ds, truth = generate_dataset(cfg, args.replicate)
    write_dataset(out, ds)
    atomic_write(out / "truth.json", json.dumps(
        {"planted_edges": truth.tolist(), "config": config_dict(cfg),
         "replicate": args.replicate}, indent=2) + "\n")
    _finish(out, _doc(args, extra={"planted_edges": truth.tolist(), "manifest": "manifest.json"}))


def _settings(args, n) -> MethodSettings:
    return MethodSettings(detect=_detect_cfg(args, n), infer=_infer_cfg(args),
                          test_method=args.method, fdr_q=getattr(args, "q", 0.2),
                          nbs_tau=getattr(args, "tau", 3.0))


def cmd_bench_table1(args, out):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    grid = [_sim_cfg(args, sigma=s, group_sizes=g, replicates=args.replicates)
            for g in args.sizes for s in args.sigmas]
    rows = run_table1(grid, methods, _settings(args, args.n))
    records = write_table(rows, out / "table1.csv", out / "table1.json")
    _finish(out, _doc(args, extra={"table1": _jsonable(records)}))


def cmd_type1(args, out):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.theta != 0:
        raise UsageError("--theta must be 0 for the type-I experiment")
    cfg = _sim_cfg(args, sigma=args.sigma, group_sizes=(args.controls, args.cases))
    res = type1_experiment(cfg, args.iterations, methods, _settings(args, args.n))
    extra = {m: {"iterations": r.iterations, "rate": r.rate, "min_pvalues": r.min_pvalues.tolist()}
             for m, r in res.items()}
    _finish(out, _doc(args, extra=_jsonable({"type1": extra})))


COMMANDS = {"edge-tests": cmd_edge_tests, "detect": cmd_detect, "test": cmd_test,
            "baseline": cmd_baseline, "simulate": cmd_simulate,
            "bench-table1": cmd_bench_table1, "type1": cmd_type1}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        parser.print_usage(sys.stderr)
        print(f"netobj: error: --out-dir {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"netobj: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadError, InvalidArgumentError, NumericalError) as exc:
        print(f"netobj: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
