"""Command-line front-end: ``polkern <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, evaluate, io, reference, simulate, svm
from . import classify as cl
from . import distances as dist
from . import hermitian as hm
from ._backend import NAME as BACKEND
from .errors import PolkernError
from .wishart import WishartModel

log = logging.getLogger("polkern")


# --------------------------------------------------------------------------
# argument helpers


def parse_grid(text):
    """``"1,10,100"`` or ``"start:stop:step"`` (stop inclusive) -> tuple of floats."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def _kind(args):
    return dist.DistanceKind.parse(args.kind, getattr(args, "beta", None))


def _add_kind(p, default="bhattacharyya"):
    p.add_argument("--kind", default=default, help="B, K, R, H, C or a family name (default %(default)s)")
    p.add_argument("--beta", type=float, default=None, help="Renyi order in (0, 1) (default 0.9)")


def _add_scene_inputs(p, labels=True):
    p.add_argument("--raster", required=True, type=Path, help="covariance raster (.pcov)")
    p.add_argument("--seg", required=True, type=Path, help="segmentation (.pseg)")
    if labels:
        p.add_argument("--labels", required=True, type=Path, help="labels CSV")


def _add_grid(p):
    p.add_argument("--penalty-grid", type=parse_grid, default=svm.DEFAULT_PENALTIES, help="C values, list or a:b:step")
    p.add_argument("--gamma-grid", type=parse_grid, default=svm.DEFAULT_GAMMAS, help="gamma values, list or a:b:step")


def _load_scene(args):
    raster = io.read_raster(args.raster)
    seg = io.read_segmentation(args.seg)
    data = io.read_labels(args.labels) if getattr(args, "labels", None) else None
    return raster, seg, data


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def _write_rows(path, rows):
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        out.writeheader()
        out.writerows(rows)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    phantom = simulate.PhantomSpec.full_scale(args.seed) if args.full_scale else simulate.PhantomSpec(args.block_size, args.segments, args.seed)
    trained = 11 if args.full_scale and args.trained_per_block is None else (args.trained_per_block or 4)
    pert = simulate.PerturbationSpec(args.theta, args.looks, trained)
    classes = reference.class_matrices()
    built = simulate.build_phantom(phantom)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(args.images):
        scene = simulate.simulate_scene(phantom, classes, pert, simulate.image_rng(args.seed, i), phantom=built)
        d = out / f"scene_{i:03d}" if args.images > 1 else out
        d.mkdir(parents=True, exist_ok=True)
        io.write_raster(d / "raster.pcov", scene.raster)
        io.write_segmentation(d / "segmentation.pseg", scene.seg)
        for name, data in scene.labels.items():
            io.write_labels(d / f"labels_{name}.csv", data)
        manifest = simulate.scene_manifest(phantom, pert, args.seed, classes, i)
        manifest["true_sigma"] = hm.pack(scene.sigmas).tolist()
        manifest["block_of_region"] = scene.block_of_region.tolist()
        io.write_json(d / "manifest.json", manifest)
        written.append(str(d))
        log.info("scene %d written to %s", i, d)
    print(f"wrote {len(written)} scene(s) under {out}")
    return 0


def _class_models_for(args):
    """(names, list of WishartModel) from the bundled data, a manifest, or a scene."""
    if args.raster is not None:
        raster = io.read_raster(args.raster)
        seg = io.read_segmentation(args.seg)
        data = io.read_labels(args.labels)
        models = cl.estimate_class_models(raster, seg, data)
        looks = args.looks if args.looks is not None else raster.looks
        return [str(c) for c in models], [WishartModel(m.sigma, looks) for m in models.values()]
    if args.classes in (None, "reference"):
        mats = reference.class_matrices()
    else:
        entries = io.read_json(args.classes)["classes"]
        mats = {name: hm.HermitianMatrix.from_packed(v) for name, v in entries.items()}
    looks = args.looks if args.looks is not None else 9
    return list(mats), [WishartModel(m, looks) for m in mats.values()]


def cmd_distances(args):
    t0 = time.perf_counter()
    report = {}
    if args.calibrate:
        best, results = reference.hellinger_calibration(tuple(args.candidates))
        args.looks = best
        args.kind = "hellinger"
        report["calibration"] = {
            "candidates": list(args.candidates),
            "max_abs_deviation": {str(n): dev for n, (_, dev) in results.items()},
            "selected_looks": best,
        }
    kind = _kind(args)
    names, models = _class_models_for(args)
    table = dist.distance_matrix(kind, models, ids=names)
    report.update({"kind": str(kind), "looks": float(models[0].looks), "names": names, "matrix": table.tolist()})
    report["seconds"] = time.perf_counter() - t0
    if args.json:
        io.write_json(args.json, report)
    if args.csv:
        _write_table(args.csv, [""] + names, [[n] + [repr(float(v)) for v in row] for n, row in zip(names, table)])
    if not args.json and not args.csv:
        width = max(len(n) for n in names)
        print(f"{kind} distances, looks = {models[0].looks:g}")
        print(" " * width + "".join(f"{n:>10}" for n in names))
        for n, row in zip(names, table):
            print(f"{n:<{width}}" + "".join(f"{v:10.4f}" for v in row))
        if "calibration" in report:
            c = report["calibration"]
            print("calibration max |deviation|:", c["max_abs_deviation"], "selected N =", c["selected_looks"])
    return 0


def _training_regions(raster, seg, data):
    regions = cl.estimate_region_models(raster, seg)
    return regions, cl._training_set(regions, data)


def cmd_train(args):
    raster, seg, data = _load_scene(args)
    kind = _kind(args)
    regions, train = _training_regions(raster, seg, data)
    cache = svm.DistanceCache(kind, train)
    if args.gamma is not None and args.penalty is not None:
        model = svm.train_multiclass(cache.gram(args.gamma), train.labels, args.strategy, args.penalty)
    else:
        out = cl.svm_classify(
            raster, seg, data, kind, args.strategy, svm.ParameterGrid(args.penalty_grid, args.gamma_grid),
            tune_on_test=args.tune_on_test, seed=args.seed, regions=regions,
        )
        model = out.model
    log.info("trained %d binary SVM(s) (%s)", len(model.binary_models), model.strategy)
    svm.save_model(args.out, model, training=train)
    print(f"model written to {args.out} (C={model.penalty:g}, gamma={model.context.gamma:g})")
    return 0


def _map_report(cmap, data, exclude=()):
    cm, unassigned = evaluate.region_confusion(cmap, data, exclude)
    k, var = evaluate.kappa(cm)
    return {
        "regions_evaluated": cm.total + unassigned,
        "unassigned": unassigned,
        "accuracy": cl.region_accuracy(cmap, data, exclude),
        "kappa": k,
        "kappa_variance": var,
        "classes": list(cm.classes),
        "confusion": cm.counts.tolist(),
    }


def cmd_classify(args):
    raster, seg, data = _load_scene(args)
    kind = _kind(args)
    t0 = time.perf_counter()
    report = {"method": args.method, "kind": str(kind), "backend": BACKEND}
    exclude = ()
    if args.method == "msdc":
        regions = cl.estimate_region_models(raster, seg)
        cmap = cl.msdc_classify(regions, cl.estimate_class_models(raster, seg, data, regions), kind)
    elif args.model is not None:
        import json

        with open(args.model) as fh:
            blob = json.load(fh)
        model = svm.model_from_dict(blob)
        training = svm.training_from_dict(blob)
        if training is None or model.context is None:
            raise PolkernError("model file lacks training regions or kernel context")
        regions = cl.estimate_region_models(raster, seg)
        train_set = set(int(i) for i in training.ids)
        queries = np.array([r for r in range(len(regions.ids)) if r not in train_set and not regions.degenerate[r]])
        classes = np.full(len(regions.ids), -1, dtype=np.int64)
        if queries.size:
            rows = svm.kernel_rows(model.context, training, regions.region_models(queries))
            classes[queries] = svm.predict(model, rows)
        status = [cl.STATUS_DEGENERATE if d else cl.STATUS_OK for d in regions.degenerate]
        cmap = cl.ClassificationMap(classes, status)
        report["strategy"] = model.strategy
    else:
        grid = svm.ParameterGrid(args.penalty_grid, args.gamma_grid)
        out = cl.svm_classify(
            raster, seg, data, kind, args.strategy, grid,
            tune_on_test=args.tune_on_test, validation_fraction=args.validation_fraction, seed=args.seed,
        )
        cmap = out.map
        if not args.tune_on_test:
            exclude = out.selection_ids
        log.info("trained %d binary SVM(s) (%s)", len(out.model.binary_models), args.strategy)
        report.update(
            strategy=args.strategy,
            penalty=out.penalty,
            gamma=out.gamma,
            tau=out.model.context.tau,
            selection_score=out.score,
            selection_regions=out.selection_ids.tolist(),
            invalid_cells=[list(c) for c in out.invalid_cells],
            gram_min_eigenvalue=out.min_eigenvalue,
            tune_on_test=bool(args.tune_on_test),
        )
    report["seconds"] = time.perf_counter() - t0
    report["status_counts"] = {s: cmap.status.count(s) for s in sorted(set(cmap.status))}
    if len(data.ids(cl.TEST)):
        report.update(_map_report(cmap, data, exclude))
    io.write_map(args.out, cmap)
    if args.report:
        io.write_json(args.report, report)
    if args.render:
        io.render_map(args.render, cmap, seg)
    acc = report.get("accuracy")
    print(f"map written to {args.out}" + (f"; test accuracy {acc:.4f}" if acc is not None else ""))
    return 0


def cmd_evaluate(args):
    data = io.read_labels(args.labels)
    seg = io.read_segmentation(args.seg) if args.seg else None
    maps = {str(p): io.read_map(p) for p in args.map}
    exclude = tuple(int(v) for v in args.exclude.split(",")) if args.exclude else ()
    out = {"maps": {}}
    kappas = {}
    for name, cmap in maps.items():
        if args.pixels:
            if seg is None:
                raise PolkernError("--pixels needs --seg")
            cm, unassigned = evaluate.pixel_confusion(cmap, seg, data, exclude)
        else:
            cm, unassigned = evaluate.region_confusion(cmap, data, exclude)
        k, var = evaluate.kappa(cm)
        kappas[name] = (k, var)
        out["maps"][name] = {
            "overall_accuracy": evaluate.overall_accuracy(cm),
            "kappa": k,
            "kappa_variance": var,
            "unassigned": unassigned,
            "unit": "pixels" if args.pixels else "regions",
            "classes": list(cm.classes),
            "confusion": cm.counts.tolist(),
        }
    if len(maps) > 1 and all(v > 0 for _, v in kappas.values()):
        out["kappa_comparison"] = evaluate.kappa_report(kappas).to_dict()
    if args.out:
        io.write_json(args.out, out)
    for name, m in out["maps"].items():
        print(f"{name}: accuracy {m['overall_accuracy']:.4f}  kappa {m['kappa']:.4f} (var {m['kappa_variance']:.3e})")
    return 0


def cmd_grid_search(args):
    raster, seg, data = _load_scene(args)
    kind = _kind(args)
    grid = svm.ParameterGrid(args.penalty_grid, args.gamma_grid)
    out = cl.svm_classify(
        raster, seg, data, kind, args.strategy, grid,
        tune_on_test=args.tune_on_test, validation_fraction=args.validation_fraction, seed=args.seed,
    )
    report = {
        "kind": str(kind),
        "strategy": args.strategy,
        "best": {"penalty": out.penalty, "gamma": out.gamma, "score": out.score},
        "invalid_cells": [list(c) for c in out.invalid_cells],
        "selection_regions": out.selection_ids.tolist(),
    }
    if args.out:
        io.write_json(args.out, report)
    print(f"best C={out.penalty:g} gamma={out.gamma:g} selection accuracy {out.score:.4f}")
    return 0


def _method_list(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok == "msdc":
            out.append(simulate.Method("msdc"))
        elif tok in ("svm-oaa", "svm-oao"):
            out.append(simulate.Method("svm", tok.split("-")[1]))
        else:
            raise argparse.ArgumentTypeError(f"unknown method {tok!r}")
    return tuple(out)


def _kind_list(text):
    return tuple(dist.DistanceKind.parse(t) for t in text.split(",") if t.strip())


def cmd_experiment(args):
    phantom = simulate.PhantomSpec.full_scale(args.seed) if args.full_scale else simulate.PhantomSpec(args.block_size, args.segments, args.seed)
    trained = 11 if args.full_scale and args.trained_per_block is None else (args.trained_per_block or 4)
    cfg = simulate.ExperimentConfig(
        phantom=phantom,
        perturbation=simulate.PerturbationSpec(args.theta, args.looks, trained),
        methods=args.methods,
        kinds=args.kinds,
        scenarios=tuple(args.scenarios.split(",")),
        grid=svm.ParameterGrid(args.penalty_grid, args.gamma_grid),
        tune_on_test=args.tune_on_test,
        seed=args.seed,
        workers=args.workers,
    )
    t0 = time.perf_counter()
    rows = simulate.run_experiment(args.images, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "runs.csv", rows)
    summary = simulate.summarize(rows)
    _write_rows(out / "summary.csv", summary)
    report = {"images": args.images, "seed": args.seed, "backend": BACKEND, "summary": summary, "comparisons": {}}
    for scenario in cfg.scenarios:
        vectors = {f"{m}:{k}": v for (m, k), v in simulate.accuracy_vectors(rows, scenario).items()}
        report["comparisons"][scenario] = evaluate.accuracy_report(vectors, paired=args.paired).to_dict()
    report["seconds"] = time.perf_counter() - t0
    io.write_json(out / "report.json", report)
    for s in summary:
        print(f"{s['scenario']:<12} {s['method']:<8} {s['distance']}  mean {s['mean_accuracy']:.4f}  "
              f"min {s['min_accuracy']:.4f}  max {s['max_accuracy']:.4f}  {s['mean_seconds']:.2f}s")
    return 0


def cmd_benchmark(args):
    rows = bench.run(args.regions, args.svm_size, args.repeat, args.seed)
    for r in rows:
        print(f"{r['task']:<16} n={r['size']:<5} {r['backend']:<7} {r['seconds'] * 1e3:9.2f} ms")
    for task, s in bench.speedups(rows).items():
        print(f"{task:<16} speedup x{s:.1f}")
    if args.out:
        io.write_json(args.out, {"rows": rows, "speedups": bench.speedups(rows)})
    return 0


# --------------------------------------------------------------------------
# parser


def _add_sim_specs(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=simulate.DEFAULT_THETA)
    p.add_argument("--looks", type=int, default=9)
    p.add_argument("--block-size", type=int, default=128)
    p.add_argument("--segments", type=int, default=16)
    p.add_argument("--trained-per-block", type=int, default=None, help="default 4, or 11 with --full-scale")
    p.add_argument("--full-scale", action="store_true", help="512-pixel blocks with 44 segments and 11 trained")


def _add_svm_options(p):
    p.add_argument("--strategy", choices=(svm.OAA, svm.OAO), default=svm.OAO)
    _add_grid(p)
    p.add_argument("--tune-on-test", action="store_true", help="tune (C, gamma) on the test regions themselves")
    p.add_argument("--validation-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="polkern", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write simulated scenes")
    _add_sim_specs(p)
    p.add_argument("--images", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distances", parents=[common], help="pairwise distances between class models")
    _add_kind(p, "hellinger")
    p.add_argument("--looks", type=float, default=None)
    p.add_argument("--classes", default=None, help="'reference' (default) or a manifest JSON with packed classes")
    p.add_argument("--raster", type=Path, default=None)
    p.add_argument("--seg", type=Path, default=None)
    p.add_argument("--labels", type=Path, default=None)
    p.add_argument("--calibrate", action="store_true", help="pick looks that best fit the published Hellinger table")
    p.add_argument("--candidates", type=int, nargs="+", default=list(reference.CALIBRATION_LOOKS))
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--json", type=Path, default=None)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("train", parents=[common], help="train an SVM and save it")
    _add_scene_inputs(p)
    _add_kind(p)
    _add_svm_options(p)
    p.add_argument("--penalty", type=float, default=None, help="fixed C (with --gamma skips the grid)")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common], help="classify regions (msdc or svm)")
    _add_scene_inputs(p)
    _add_kind(p)
    p.add_argument("--method", choices=("msdc", "svm"), default="msdc")
    _add_svm_options(p)
    p.add_argument("--model", type=Path, default=None, help="saved SVM model (skips training)")
    p.add_argument("--out", required=True, type=Path, help="map CSV")
    p.add_argument("--report", type=Path, default=None)
    p.add_argument("--render", type=Path, default=None, help="palette PNG (needs Pillow)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", parents=[common], help="accuracy and kappa of one or more maps")
    p.add_argument("--map", required=True, nargs="+", type=Path)
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--seg", type=Path, default=None)
    p.add_argument("--pixels", action="store_true", help="pixel counts on a 1-in-3 grid instead of regions")
    p.add_argument("--exclude", default=None, help="region ids to leave out, comma separated")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid-search", parents=[common], help="report the selected (C, gamma)")
    _add_scene_inputs(p)
    _add_kind(p)
    _add_svm_options(p)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("experiment", parents=[common], help="Monte-Carlo accuracy and timing experiment")
    _add_sim_specs(p)
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--methods", type=_method_list, default=simulate.DEFAULT_METHODS)
    p.add_argument("--kinds", type=_kind_list, default=dist.ALL_KINDS)
    p.add_argument("--scenarios", default=f"{simulate.SIX_CLASS},{simulate.THREE_CLASS}")
    _add_grid(p)
    p.add_argument("--tune-on-test", action="store_true")
    p.add_argument("--paired", action="store_true", help="paired t-tests over images")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("benchmark", parents=[common], help="compiled core vs numpy fallback")
    p.add_argument("--regions", type=int, default=300)
    p.add_argument("--svm-size", type=int, default=200)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PolkernError, OSError, ValueError) as exc:
        print(f"polkern {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
