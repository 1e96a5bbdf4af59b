"""Command-line interface: camsel <command> [--config FILE] [flags].

Every command writes its artifacts under --out (with a manifest.json) and
prints a one-line summary on success.  Failures exit nonzero after printing
a machine-readable JSON error to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from importlib import resources
from pathlib import Path

from . import cam, evaluate, pipeline, scenario, selection, similarity
from .tensorio import read_mask_pgm, write_map_pgm, write_tensor

TABLE1_PAIRS = "table1_pairs.csv"
TABLE1_SUMMARY = "table1_summary.csv"


def fixture_path(name: str) -> Path:
    return Path(resources.files("camsel").joinpath("data", name))


def _load_config(args) -> pipeline.PipelineConfig:
    if getattr(args, "config", None):
        config = pipeline.PipelineConfig.from_json(args.config)
    else:
        config = pipeline.PipelineConfig()
    return config.with_overrides(
        seed=getattr(args, "seed", None),
        threshold=getattr(args, "threshold", None),
        selection_mode=getattr(args, "mode", None),
        cluster_k=getattr(args, "k", None),
        layer_mode=getattr(args, "layer_mode", None),
        output_dir=getattr(args, "out", None),
    )


def _out_dir(config: pipeline.PipelineConfig) -> Path:
    if not config.output_dir:
        raise ValueError("an output directory is required (--out or config.output_dir)")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_build_sim(args) -> int:
    config = _load_config(args)
    log_path = args.log or config.probability_log
    if not log_path:
        raise ValueError("a probability log is required (--log or config.probability_log)")
    records = similarity.read_probability_log(log_path)
    names = config.class_names or None
    n = len(names) if names else records[0].probs.size
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", similarity.EmptyClassWarning)
        sim = similarity.build_similarity(records, n, names)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(config)
    similarity.write_similarity_csv(sim, out / "similarity.csv")
    pipeline.write_manifest(
        out, "build-sim", config.to_dict(), {"probability_log": str(log_path)},
        ["similarity.csv", "manifest.json"],
    )
    print(f"build-sim n={sim.n} records={len(records)} out={out / 'similarity.csv'}")
    return 0


def cmd_cluster(args) -> int:
    sim = similarity.read_similarity_csv(args.sim)
    clustering = selection.cluster_classes(
        similarity.symmetrize(sim), args.n, args.min_size, args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    selection.write_clustering_json(clustering, out / "clusters.json", args.seed, sim.class_names)
    pipeline.write_manifest(
        out, "cluster",
        {"n": args.n, "min_size": args.min_size, "seed": args.seed, "sim": str(args.sim)},
        {"similarity": str(args.sim)},
        ["clusters.json", "manifest.json"],
    )
    sizes = [len(clustering.members(j)) for j in range(clustering.n_clusters)]
    print(f"cluster N={args.n} min_size={args.min_size} seed={args.seed} sizes={sizes}")
    return 0


def _resolve_class(token: str, names) -> int:
    if token in names:
        return list(names).index(token)
    index = int(token)
    if not 0 <= index < len(names):
        raise IndexError(f"class index {index} out of range for n={len(names)}")
    return index


def cmd_select(args) -> int:
    config = _load_config(args)
    sim = similarity.read_similarity_csv(args.sim)
    target = _resolve_class(args.target, sim.class_names)
    clustering = None
    if config.selection_mode == "cluster":
        if not args.clusters:
            raise ValueError("cluster mode requires --clusters")
        clustering, _, _ = selection.read_clustering_json(args.clusters)
    if not config.class_names:
        config = config.with_overrides(class_names=list(sim.class_names))
    rset = pipeline.select_representatives(config, sim, clustering, target)
    out = _out_dir(config)
    name = sim.class_names[target]
    selection.write_selection_json(rset, out / f"selection_{name}.json", sim.class_names)
    pipeline.write_manifest(
        out, "select", config.to_dict(),
        {"similarity": str(args.sim), "clusters": str(args.clusters) if args.clusters else None},
        [f"selection_{name}.json", "manifest.json"],
    )
    members = ", ".join(sim.class_names[m] for m in rset.members)
    print(f"select target={name} mode={config.selection_mode} members=[{members}]")
    return 0


def cmd_cam(args) -> int:
    pair = cam.read_pair_dump(args.dumps, args.image, args.target, args.comparison)
    pmap = cam.generate_pair_map(pair, mode=args.layer_mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.image}__{args.target}_vs_{args.comparison}"
    write_tensor(cam.map_to_tensor(pmap), out / f"{stem}.camt")
    write_map_pgm(pmap, out / f"{stem}.pgm")
    pipeline.write_manifest(
        out, "cam",
        {"image": args.image, "target": args.target, "comparison": args.comparison,
         "layer_mode": args.layer_mode, "dumps": str(args.dumps)},
        {"dump_dir": str(args.dumps)},
        [f"{stem}.camt", f"{stem}.pgm", "manifest.json"],
    )
    print(f"cam {stem} layers={len(pair.layers)} size={pmap.height}x{pmap.width}")
    return 0


def cmd_fuse(args) -> int:
    maps = [cam.read_map(p) for p in args.maps]
    fused = cam.fuse_classes(maps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(cam.map_to_tensor(fused), out / f"{args.name}.camt")
    write_map_pgm(fused, out / f"{args.name}.pgm")
    pipeline.write_manifest(
        out, "fuse", {"maps": [str(p) for p in args.maps], "name": args.name},
        {"maps": [str(p) for p in args.maps]},
        [f"{args.name}.camt", f"{args.name}.pgm", "manifest.json"],
    )
    print(f"fuse maps={len(maps)} out={out / (args.name + '.camt')}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    records = similarity.read_probability_log(args.log or config.probability_log)
    names = config.class_names or [
        f"class_{i}" for i in range(records[0].probs.size)
    ]
    class_of = {rec.image_id: rec.true_class for rec in records}
    maps_dir = Path(args.maps)
    maps = {}
    for path in sorted(maps_dir.glob("*.camt")):
        maps[path.stem] = cam.read_map(path)
    if not maps:
        raise FileNotFoundError(f"{maps_dir}: no .camt maps found")
    gts = {}
    gt_dir = Path(args.gt or config.groundtruth_dir)
    for image_id in maps:
        gts[image_id] = read_mask_pgm(gt_dir / f"{image_id}.pgm")
    report = evaluate.miou_per_class(maps, gts, class_of, config.threshold, names)
    out = _out_dir(config)
    evaluate.write_report_csv(report, out / "report.csv")
    evaluate.write_report_json(report, out / "report.json")
    pipeline.write_manifest(
        out, "eval", config.to_dict(),
        {"maps": str(maps_dir), "groundtruth_dir": str(gt_dir)},
        ["report.csv", "report.json", "manifest.json"],
    )
    print(f"eval images={len(maps)} classes={len(report.per_class)} miou={report.average:.4f}")
    return 0


def cmd_table1(args) -> int:
    matrix_path = Path(args.matrix) if args.matrix else fixture_path(TABLE1_PAIRS)
    pm = evaluate.read_pair_matrix_csv(matrix_path)
    if args.top == 1:
        report = evaluate.top1_report(pm)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            evaluate.write_report_csv(report, out / "top1_report.csv")
            evaluate.write_report_json(report, out / "top1_report.json")
            pipeline.write_manifest(
                out, "table1", {"matrix": str(matrix_path), "top": 1},
                {"matrix": str(matrix_path)},
                ["top1_report.csv", "top1_report.json", "manifest.json"],
            )
        print(f"top1 avg {report.average:.4f}")
        return 0
    lines = []
    for target in range(pm.n):
        chosen = evaluate.topk_select_from_matrix(pm, target, args.top)
        lines.append((pm.class_names[target], [pm.class_names[r] for r in chosen]))
    for name, chosen in lines:
        print(f"top{args.top} {name}: {', '.join(chosen)}")
    print(f"top{args.top} selections for {pm.n} classes")
    return 0


def cmd_synth(args) -> int:
    spec = scenario.scenario_from_json(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = scenario.generate_scenario(spec, args.seed, out)
    config = pipeline.PipelineConfig(
        class_names=list(spec.class_names),
        num_clusters=args.clusters,
        min_cluster_size=args.min_size,
        cluster_k=args.k,
        selection_mode=args.mode,
        threshold=args.threshold,
        seed=args.seed,
        probability_log=str(out / "probs.csv"),
        dump_dir=str(out / "dumps"),
        groundtruth_dir=str(out / "gt"),
        output_dir=str(out / "results"),
        layer_mode=args.layer_mode,
    )
    pipeline.write_config_json(config, out / "config.json")
    pipeline.write_manifest(
        out, "synth", config.to_dict(), {"scenario": str(args.scenario)},
        ["probs.csv", "config.json", "manifest.json"],
    )
    print(
        f"synth classes={summary['classes']} images={summary['images']} "
        f"pair_dumps={summary['pair_dumps']} out={out}"
    )
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    report = pipeline.run_pipeline(config)
    print(
        f"run mode={config.selection_mode} classes={len(report['per_class'])} "
        f"avg_fused_miou={report['average_fused_miou']:.4f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camsel",
        description="Representative-class selection and multi-layer CAM fusion toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, out_required=False):
        if config:
            p.add_argument("--config", help="pipeline config JSON; flags override it")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("build-sim", help="build the class-similarity matrix from a probability log")
    add_common(p)
    p.add_argument("--log", help="probability log CSV")
    p.set_defaults(func=cmd_build_sim)

    p = sub.add_parser("cluster", help="cluster classes on a symmetrized similarity matrix")
    p.add_argument("--sim", required=True, help="similarity matrix CSV")
    p.add_argument("--n", type=int, default=4, help="number of clusters")
    p.add_argument("--min-size", dest="min_size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("select", help="select representative classes for one target")
    add_common(p)
    p.add_argument("--sim", required=True, help="similarity matrix CSV")
    p.add_argument("--clusters", help="clusters.json (cluster mode)")
    p.add_argument("--target", required=True, help="target class name or index")
    p.add_argument("--mode", choices=pipeline.SELECTION_MODES, default=None)
    p.add_argument("--k", type=int, default=None, help="per-cluster rank k'")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("cam", help="generate one pair's activation map from dumps")
    p.add_argument("--dumps", required=True, help="pair dump root directory")
    p.add_argument("--image", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--comparison", type=int, required=True)
    p.add_argument("--layer-mode", dest="layer_mode", choices=pipeline.LAYER_MODES, default="multi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cam)

    p = sub.add_parser("fuse", help="fuse per-pair maps across representative classes")
    p.add_argument("--maps", nargs="+", required=True, help="CAMT map files")
    p.add_argument("--name", default="fused")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="score fused maps against groundtruth masks")
    add_common(p)
    p.add_argument("--maps", required=True, help="directory of .camt maps")
    p.add_argument("--gt", help="groundtruth mask directory")
    p.add_argument("--log", help="probability log CSV (provides image classes)")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("table1", help="Top-k analysis of a pairwise mIoU matrix")
    p.add_argument("--matrix", help="pair matrix CSV (default: packaged fixture)")
    p.add_argument("--top", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("synth", help="generate a synthetic scenario (log, dumps, masks, config)")
    p.add_argument("--scenario", required=True, help="scenario JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--min-size", dest="min_size", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=pipeline.SELECTION_MODES, default="cluster")
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--layer-mode", dest="layer_mode", choices=pipeline.LAYER_MODES, default="multi")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="full pipeline: selection, maps, fusion, evaluation")
    add_common(p)
    p.add_argument("--mode", choices=pipeline.SELECTION_MODES, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--layer-mode", dest="layer_mode", choices=pipeline.LAYER_MODES, default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, IndexError, OSError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
