"""Command-line harness: ``goblin {prepare,run,verify,report,cluster}``.

Exit codes: 0 success, 1 validation error, 2 runtime failure,
3 verification failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data, experiment, graph as graphs, report, verify

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("goblin")


class ValidationError(Exception):
    pass


def cmd_prepare(args):
    src, out = Path(args.input), Path(args.out)
    if not src.is_dir():
        raise ValidationError(f"input directory {src} does not exist")
    params = {"kind": args.kind, "pca_dim": args.pca_dim, "min_tag_count": args.min_tag_count,
              "largest_component": not args.keep_all_components}
    files = data.input_files(src, args.kind)
    key = data.inputs_hash(files, params)
    meta_path = out / "meta.json"
    artifacts = ["graph.tsv", "features.npz", "positives.tsv", "stats.txt", "users.tsv"]
    if meta_path.exists() and all((out / a).exists() for a in artifacts):
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("input_key") == key:
            print(f"cache hit: {out} is up to date")
            return EXIT_OK

    ds = data.load_hetrec(src, args.kind, pca_dim=args.pca_dim,
                          min_tag_count=args.min_tag_count,
                          largest_component=not args.keep_all_components)
    out.mkdir(parents=True, exist_ok=True)
    feature_key = f"{key}:features"
    data.save_feature_cache(out / "features.npz", ds.interactions.features, feature_key)
    graphs.write_graph(ds.graph, out / "graph.tsv")
    lines = ["user\titem"] + [f"{u}\t{i}" for u, p in enumerate(ds.interactions.positives)
                              for i in p]
    experiment.atomic_write(out / "positives.tsv", "\n".join(lines) + "\n")
    experiment.atomic_write(out / "users.tsv", "index\tuser_id\n" + "".join(
        f"{k}\t{u}\n" for k, u in enumerate(ds.user_ids)))
    stats_text = data.format_stats(ds.stats)
    experiment.atomic_write(out / "stats.txt", stats_text)
    meta = {"input_key": key, "feature_key": feature_key, "params": params,
            "stats": ds.stats}
    experiment.atomic_write(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(stats_text, end="")
    return EXIT_OK


RUN_OVERRIDES = {
    "dataset": str, "prepared_dir": str, "clique_count": str, "clique_size": str, "d": str,
    "graph_noise": str, "payoff_noise": str, "algorithms": str, "macro_m": str,
    "block_m": str, "policy": str, "alphas": str, "sigma": str, "delta": str,
    "norm_bound": str, "rounds": str, "set_size": str, "seeds": str, "workers": str,
}


def cmd_run(args):
    overrides = {k: getattr(args, k) for k in RUN_OVERRIDES}
    try:
        cfg = experiment.load_config(args.config, overrides)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    out = args.out or os.environ.get(experiment.OUTPUT_ENV) or cfg.output_dir
    rows = experiment.run_experiment(cfg, out_dir=out)
    best = experiment.best_variants(rows)
    print(f"{len(rows)} runs written to {out}")
    for (cell, algo), (variant, mean) in sorted(best.items()):
        print(f"{cell:>16}  {algo:<14} best {variant:<28} mean final normalized reward {mean:10.3f}")
    return EXIT_OK


def cmd_verify(args):
    failed = False
    for rep, secs in verify.run_verification(fault=args.inject_fault):
        print(f"[{'PASS' if rep.passed else 'FAIL'}] {rep.name}: {rep.checked} checks "
              f"in {secs:.2f}s")
        for f in rep.failures[:20]:
            print(f"    failure: {f}")
        if len(rep.failures) > 20:
            print(f"    ... {len(rep.failures) - 20} more")
        failed |= not rep.passed
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_report(args):
    src = Path(args.results)
    if not src.is_dir():
        raise ValidationError(f"results directory {src} does not exist")
    try:
        written = report.build_report(src, args.out)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    for p in written:
        print(p)
    return EXIT_OK


def cmd_cluster(args):
    g = graphs.read_graph(args.graph)
    if not 1 <= args.m <= g.n:
        raise ValidationError(f"m must lie in [1, {g.n}]")
    p = graphs.spectral_cluster(g, args.m, seed=args.seed)
    graphs.write_partition(p, args.out)
    sizes = np.bincount(p.assignment)
    print(f"{p.m} clusters, sizes {sizes.min()}..{sizes.max()} -> {args.out}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="goblin", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest a HetRec-style dataset")
    p.add_argument("--kind", choices=sorted(data.HETREC_LAYOUTS), required=True)
    p.add_argument("--input", required=True, help="directory with the .dat files")
    p.add_argument("--out", required=True)
    p.add_argument("--pca-dim", type=int, default=25)
    p.add_argument("--min-tag-count", type=int, default=None,
                   help="default: 10 for delicious, 1 for lastfm")
    p.add_argument("--keep-all-components", action="store_true")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("run", help="run an experiment sweep")
    p.add_argument("--config", help="INI file; flags override its values")
    p.add_argument("--out")
    for key in RUN_OVERRIDES:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--inject-fault", action="store_true",
                   help="corrupt the sharing transform to prove failures are caught")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="aggregate result CSVs into tables and SVG charts")
    p.add_argument("results")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("cluster", help="write a spectral partition file for a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surfaced as runtime failure code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
