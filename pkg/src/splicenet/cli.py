"""``splicenet`` command line.

Exit codes: 0 success, 1 usage error, 2 data/format/I-O error, 3 runtime or
training error. Diagnostics go to stderr as one line.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import imaging
from .errors import ArgumentError, DataError, FormatError, SchemaError, TrainingError
from .model_io import atomic_write, load_model, save_model

log = logging.getLogger("splicenet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- configuration

PIPELINE_FLAGS = {
    "patch_size": int, "stride": int, "tamper_threshold": float, "k_random": int, "filter_seed": int,
    "variance_fraction": float, "max_components": int, "val_fraction": float, "augment_copies": int,
}
TRAIN_FLAGS = {"lr": float, "batch_size": int, "max_epochs": int, "patience": int, "pairs_per_epoch": int,
               "margin": float}
SYNTH_FLAGS = {"n_authentic": int, "n_tampered": int, "size": int, "copymove_fraction": float}


def _add_pipeline_flags(p):
    g = p.add_argument_group("pipeline overrides")
    for name, typ in {**PIPELINE_FLAGS, **TRAIN_FLAGS}.items():
        g.add_argument("--" + name.replace("_", "-"), type=typ, dest=name, default=None)
    g.add_argument("--groups", default=None, help="comma-separated subset of noise,spatial,frequency")


def _common(p, seed_required=False, dataset=False):
    p.add_argument("--config", type=Path, help="JSON run configuration; flags override it")
    p.add_argument("--seed", type=int, default=None, help="random seed" + (" (required)" if seed_required else ""))
    p.add_argument("--threads", type=int, default=None, help="worker processes for feature extraction")
    p.add_argument("-v", "--verbose", action="store_true")
    if dataset:
        p.add_argument("--dataset", type=Path, default=None, help="dataset directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="splicenet", description="Hybrid spatial/frequency splicing detector")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic forgery dataset")
    _common(p, seed_required=True)
    p.add_argument("--out", type=Path, required=True)
    for name, typ in SYNTH_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), type=typ, dest=name, default=None)
    p.add_argument("--donor-quality", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--target-quality", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--base-images", type=Path, nargs="*", default=None)

    p = sub.add_parser("features", help="extract patch features to an SPLF1 file")
    _common(p, dataset=True)
    _add_pipeline_flags(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="fit a model bundle on a whole dataset")
    _common(p, seed_required=True, dataset=True)
    _add_pipeline_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output SPLM1 model file")

    p = sub.add_parser("eval", help="k-fold cross-validation -> report.json")
    _common(p, seed_required=True, dataset=True)
    _add_pipeline_flags(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--method", choices=("siamese", "ela", "statistical"), default="siamese")
    p.add_argument("--ela-quality", type=int, default=90)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("ablate", help="cross-validate each feature-group subset")
    _common(p, seed_required=True, dataset=True)
    _add_pipeline_flags(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("score", help="score one image with a trained model")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--heatmap", type=Path, default=None, help="write a patch-score heatmap PNG")

    p = sub.add_parser("compare", help="McNemar test between two models or two eval reports")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--models", type=Path, nargs=2, metavar=("A", "B"))
    g.add_argument("--reports", type=Path, nargs=2, metavar=("A", "B"))
    p.add_argument("--dataset", type=Path, default=None, help="dataset scored by --models")
    p.add_argument("--out", type=Path, default=None, help="write the result JSON here too")
    return ap


def _load_config(args) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    try:
        cfg = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.config}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise FormatError(f"{args.config}: top level must be an object")
    return cfg


def _seed(args, cfg) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise UsageError("an explicit --seed (or \"seed\" in --config) is required")
    return int(seed)


def _pipeline_config(args, cfg: dict, seed: int):
    from .pipeline import PipelineConfig
    from .siamese import TrainConfig

    base = dict(cfg.get("pipeline", {}))
    train = dict(base.pop("train", {}))
    for name in PIPELINE_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    for name in TRAIN_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            train[name] = v
    if getattr(args, "groups", None):
        base["groups"] = [g.strip() for g in args.groups.split(",") if g.strip()]
    train["seed"] = seed
    pc = PipelineConfig.from_dict(base)
    return replace(pc, train=TrainConfig(**train))


def _dataset(args, cfg):
    path = args.dataset if args.dataset is not None else cfg.get("dataset")
    if path is None:
        raise UsageError("--dataset (or \"dataset\" in --config) is required")
    return imaging.load_dataset(path)


def _threads(args, cfg) -> int:
    t = getattr(args, "threads", None)
    if t is None:
        t = cfg.get("threads")
    return max(1, int(t)) if t is not None else (os.cpu_count() or 1)


def _k(args, cfg) -> int:
    k = args.k if args.k is not None else cfg.get("k", 5)
    return int(k)


def _write_json(path: Path, obj) -> None:
    atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n").encode())


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    from .synthgen import SynthConfig, generate_dataset

    cfg = _load_config(args)
    seed = _seed(args, cfg)
    d = dict(cfg.get("synth", {}))
    for name in SYNTH_FLAGS:
        v = getattr(args, name)
        if v is not None:
            d[name] = v
    if args.donor_quality:
        d["donor_quality"] = args.donor_quality
    if args.target_quality:
        d["target_quality"] = args.target_quality
    if args.base_images is not None:
        d["base_images"] = [str(p) for p in args.base_images]
    d["seed"] = seed
    try:
        sc = SynthConfig.from_dict(d)
    except TypeError as exc:
        raise UsageError(f"bad synth configuration: {exc}") from exc
    manifest = generate_dataset(sc, args.out)
    print(json.dumps({"out": str(args.out), "items": len(manifest["items"]), "seed": seed}))
    return 0


def _extract(args, cfg, pc, records):
    from .pipeline import extract_features

    return extract_features(records, pc, _threads(args, cfg))


def cmd_features(args) -> int:
    from .featio import table_sidecar, write_features

    cfg = _load_config(args)
    pc = _pipeline_config(args, cfg, int(cfg.get("seed", 0) if args.seed is None else args.seed))
    records = _dataset(args, cfg)
    table = _extract(args, cfg, pc, records)
    side = table_sidecar(table)
    side["extraction"] = pc.extraction_dict()
    side["dataset_fingerprint"] = imaging.dataset_fingerprint(records)
    write_features(args.out, table.features, side)
    print(json.dumps({"out": str(args.out), "rows": int(table.features.shape[0]),
                      "dim": int(table.features.shape[1])}))
    return 0


def cmd_train(args) -> int:
    from .pipeline import fit_bundle, validation_split

    cfg = _load_config(args)
    seed = _seed(args, cfg)
    pc = _pipeline_config(args, cfg, seed)
    records = _dataset(args, cfg)
    table = _extract(args, cfg, pc, records)
    fit, val = validation_split(table.image_label, np.arange(table.n_images), pc.val_fraction, seed)
    meta = {"config": pc.to_dict(), "seed": seed, "dataset_fingerprint": imaging.dataset_fingerprint(records)}
    res = fit_bundle(table, fit, val, pc, meta)
    save_model(res.bundle, args.out)
    print(json.dumps({"out": str(args.out), "tau": res.bundle.tau, "best_epoch": res.best_epoch,
                      "pca_dim": res.bundle.fusion.pca.d_out}))
    return 0


def _write_report(out: Path, report, name="report.json"):
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / name, report.to_json(include_timings=False).encode())
    _write_json(out / name.replace("report", "timings"), {"folds": report.timings_ms})


def cmd_eval(args) -> int:
    from .baselines import baseline_ela, baseline_statistical
    from .evaluation import run_cv

    cfg = _load_config(args)
    seed = _seed(args, cfg)
    pc = _pipeline_config(args, cfg, seed)
    records = _dataset(args, cfg)
    k = _k(args, cfg)
    fp = imaging.dataset_fingerprint(records)
    if args.method == "ela":
        report = baseline_ela(records, pc, args.ela_quality, k, seed, fp)
    else:
        table = _extract(args, cfg, pc, records)
        if args.method == "statistical":
            report = baseline_statistical(table, pc, k, seed, fp)
        else:
            report = run_cv(table, pc, k, seed, fp)
    _write_report(args.out, report)
    agg = report.aggregate
    print(json.dumps({"method": report.method, "auc": agg["auc"]["mean"], "accuracy": agg["accuracy"]["mean"],
                      "report": str(args.out / "report.json")}))
    return 0


def cmd_ablate(args) -> int:
    from .evaluation import run_ablation

    cfg = _load_config(args)
    seed = _seed(args, cfg)
    pc = _pipeline_config(args, cfg, seed)
    records = _dataset(args, cfg)
    table = _extract(args, cfg, pc, records)
    rows = run_ablation(table, pc, k=_k(args, cfg), seed=seed, fingerprint=imaging.dataset_fingerprint(records))
    args.out.mkdir(parents=True, exist_ok=True)
    doc = [{"groups": r["groups"], **r["report"].to_dict(include_timings=False)} for r in rows]
    _write_json(args.out / "ablation.json", doc)
    summary = [{"groups": r["groups"], "auc": r["report"].mean("auc"), "accuracy": r["report"].mean("accuracy")}
               for r in rows]
    print(json.dumps(summary))
    return 0


def cmd_score(args) -> int:
    from .heatmap import emit_heatmap
    from .pipeline import score_single

    bundle = load_model(args.model)
    img = imaging.load_image(args.image)
    score, patches, pscores = score_single(bundle, img, args.image.name)
    verdict = "tampered" if score >= bundle.tau else "authentic"
    out = {"image": str(args.image), "score": score, "tau": bundle.tau, "verdict": verdict}
    if args.heatmap is not None:
        emit_heatmap(img.shape[:2], patches, pscores, args.heatmap)
        out["heatmap"] = str(args.heatmap)
    print(json.dumps(out))
    return 0


def cmd_compare(args) -> int:
    from .evaluation import EvalReport, mcnemar_test
    from .pipeline import PipelineConfig, extract_features, score_images

    if args.reports:
        reps = [EvalReport.from_dict(json.loads(p.read_text())) for p in args.reports]
        pa = {p["image_id"]: p for p in reps[0].predictions}
        pb = {p["image_id"]: p for p in reps[1].predictions}
        ids = sorted(set(pa) & set(pb))
        if not ids:
            raise DataError("the two reports share no images")
        labels = [pa[i]["label"] for i in ids]
        a = [pa[i]["pred"] for i in ids]
        b = [pb[i]["pred"] for i in ids]
        names = [reps[0].method, reps[1].method]
    else:
        if args.dataset is None:
            raise UsageError("--models needs --dataset")
        records = imaging.load_dataset(args.dataset)
        preds = []
        labels = None
        for path in args.models:
            bundle = load_model(path)
            ext = bundle.meta.get("extraction", {})
            sc = bundle.meta.get("scoring", {})
            pc = PipelineConfig(**{k: v for k, v in ext.items() if k != "augment_copies"},
                                score_max_pairs=sc.get("max_pairs", 2000),
                                score_percentile=sc.get("percentile", 95.0))
            table = extract_features(records, pc, _threads(args, {}))
            s = score_images(bundle, table, range(table.n_images), pc)
            preds.append((s >= bundle.tau).astype(int))
            labels = table.image_label
        a, b = preds
        ids = [r.image_id for r in records]
        names = [str(p) for p in args.models]
    stat, p, nb, nc = mcnemar_test(a, b, labels)
    acc_a = float(np.mean(np.asarray(a) == np.asarray(labels)))
    acc_b = float(np.mean(np.asarray(b) == np.asarray(labels)))
    out = {"a": names[0], "b": names[1], "n": len(ids), "accuracy_a": acc_a, "accuracy_b": acc_b,
           "b_only_a_correct": nb, "c_only_b_correct": nc, "statistic": stat, "p_value": p,
           "test": "chi2_cc" if nb + nc >= 25 else "exact_binomial"}
    if args.out is not None:
        _write_json(args.out, out)
    print(json.dumps(out))
    return 0


COMMANDS = {"synth": cmd_synth, "features": cmd_features, "train": cmd_train, "eval": cmd_eval,
            "ablate": cmd_ablate, "score": cmd_score, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"splicenet: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"splicenet: error: {exc}", file=sys.stderr)
        return 1
    except (ArgumentError, SchemaError) as exc:
        print(f"splicenet: invalid argument: {exc}", file=sys.stderr)
        return 1
    except (DataError, FormatError, OSError) as exc:
        print(f"splicenet: data error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"splicenet: training failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"splicenet: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
