"""Metrics, image-grouped stratified cross-validation, ablations and McNemar's test."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_predictions(cls, pred, labels) -> "ConfusionMatrix":
        pred = np.asarray(pred).astype(bool)
        labels = np.asarray(labels).astype(bool)
        return cls(int(np.sum(pred & labels)), int(np.sum(pred & ~labels)),
                   int(np.sum(~pred & labels)), int(np.sum(~pred & ~labels)))

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def metrics(cm: ConfusionMatrix):
    """(accuracy, precision, recall, F1); zero denominators give 0."""
    n = cm.tp + cm.fp + cm.fn + cm.tn
    if n <= 0:
        raise ArgumentError("empty confusion matrix")
    acc = (cm.tp + cm.tn) / n
    prec = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    rec = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f1


def midranks(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    xs = x[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midranks; label 1 is the positive class."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes")
    r = midranks(scores)
    u = r[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(scores, labels) -> list[dict]:
    """ROC operating points, one per distinct threshold (score >= thr is positive)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    n_pos = max(1, int(np.sum(labels == 1)))
    n_neg = max(1, int(np.sum(labels == 0)))
    pts = [{"fpr": 0.0, "tpr": 0.0, "thr": None}]  # nothing flagged
    for thr in np.unique(scores)[::-1]:
        pred = scores >= thr
        pts.append({"fpr": float(np.sum(pred & (labels == 0)) / n_neg),
                    "tpr": float(np.sum(pred & (labels == 1)) / n_pos), "thr": float(thr)})
    return pts


def stratified_group_kfold(image_labels, image_ids, k: int, seed: int) -> np.ndarray:
    """Fold index per image; classes are dealt round-robin after a seeded shuffle.

    Images are ordered by id before shuffling, so the assignment does not
    depend on input order. Patches inherit their image's fold.
    """
    labels = np.asarray(image_labels)
    ids = list(image_ids)
    if k < 2:
        raise ArgumentError("k must be >= 2")
    if len(ids) != len(labels):
        raise ArgumentError("labels and ids differ in length")
    folds = np.full(len(ids), -1, dtype=np.int64)
    rng = np.random.default_rng([seed, 11])
    offset = 0
    for cls in np.unique(labels):
        members = sorted(np.flatnonzero(labels == cls), key=lambda i: ids[i])
        if len(members) < k:
            raise DataError(f"class {cls} has {len(members)} images, fewer than k={k}")
        members = np.array(members)[rng.permutation(len(members))]
        for pos, img in enumerate(members):
            folds[img] = (offset + pos) % k
        offset = (offset + len(members)) % k
    return folds


def mcnemar_test(pred_a, pred_b, labels):
    """McNemar on discordant pairs; exact binomial below 25 discordant, else
    continuity-corrected chi-square. Returns (statistic, p_value, b, c)."""
    pred_a, pred_b, labels = (np.asarray(v).astype(int) for v in (pred_a, pred_b, labels))
    if not len(pred_a) == len(pred_b) == len(labels) or len(labels) == 0:
        raise ArgumentError("prediction vectors must be equally long and non-empty")
    a_ok = pred_a == labels
    b_ok = pred_b == labels
    b = int(np.sum(a_ok & ~b_ok))
    c = int(np.sum(~a_ok & b_ok))
    n = b + c
    if n == 0:
        return 0.0, 1.0, b, c
    if n >= 25:
        stat = (abs(b - c) - 1) ** 2 / n
        return float(stat), float(math.erfc(math.sqrt(stat / 2.0))), b, c
    tail = sum(math.comb(n, i) for i in range(min(b, c) + 1)) / 2 ** n
    return float(min(b, c)), float(min(1.0, 2.0 * tail)), b, c


# ---------------------------------------------------------------- reports

METRIC_KEYS = ("accuracy", "precision", "recall", "f1", "auc")


@dataclass
class EvalReport:
    config: dict
    seed: int
    k: int
    folds: list[dict] = field(default_factory=list)
    predictions: list[dict] = field(default_factory=list)
    timings_ms: list[dict] = field(default_factory=list)
    method: str = "siamese"
    dataset_fingerprint: str = ""

    @property
    def aggregate(self) -> dict:
        out = {}
        for key in METRIC_KEYS:
            vals = np.array([f[key] for f in self.folds], dtype=np.float64)
            out[key] = {"mean": float(vals.mean()), "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0}
        return out

    @property
    def roc(self) -> list[dict]:
        scores = [p["score"] for p in self.predictions]
        labels = [p["label"] for p in self.predictions]
        return roc_points(scores, labels)

    def mean(self, key: str) -> float:
        return self.aggregate[key]["mean"]

    def to_dict(self, include_timings: bool = True) -> dict:
        folds = []
        for f, t in zip(self.folds, self.timings_ms or [{}] * len(self.folds)):
            d = dict(f)
            if include_timings:
                d["timings_ms"] = t
            folds.append(d)
        return {
            "method": self.method,
            "config": self.config,
            "seed": self.seed,
            "k": self.k,
            "dataset_fingerprint": self.dataset_fingerprint,
            "folds": folds,
            "aggregate": self.aggregate,
            "roc": self.roc,
            "predictions": self.predictions,
        }

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        folds, timings = [], []
        for f in d["folds"]:
            f = dict(f)
            timings.append(f.pop("timings_ms", {}))
            folds.append(f)
        return cls(d["config"], d["seed"], d["k"], folds, d["predictions"], timings, d.get("method", "siamese"),
                   d.get("dataset_fingerprint", ""))


def fold_entry(fold: int, scores, labels, tau: float, extra: dict | None = None) -> dict:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    cm = ConfusionMatrix.from_predictions(scores >= tau, labels)
    acc, prec, rec, f1 = metrics(cm)
    entry = {"fold": fold, "accuracy": acc, "precision": prec, "recall": rec, "f1": f1,
             "auc": roc_auc(scores, labels), "confusion": cm.to_dict(), "tau": float(tau),
             "n_test_images": int(len(labels))}
    entry.update(extra or {})
    return entry


# ---------------------------------------------------------------- cross-validation

def run_cv_generic(table, method, k: int, seed: int, val_fraction: float, config_echo: dict,
                   method_name: str, fingerprint: str = "", fitted_sink: list | None = None) -> EvalReport:
    """Shared CV loop. ``method(table, fit_images, val_images)`` returns an object
    with ``tau``, ``score(images)``, ``extra`` (dict) and ``timings_ms``."""
    from .pipeline import validation_split

    folds = stratified_group_kfold(table.image_label, table.image_ids, k, seed)
    for c in (0, 1):
        if not np.any(table.image_label == c):
            raise DataError("cross-validation needs authentic and tampered images")
    report = EvalReport(config_echo, seed, k, method=method_name, dataset_fingerprint=fingerprint)
    preds = []
    for f in range(k):
        test = np.flatnonzero(folds == f)
        train_imgs = np.flatnonzero(folds != f)
        fit_imgs, val_imgs = validation_split(table.image_label, train_imgs, val_fraction, seed + f)
        fitted = method(table, fit_imgs, val_imgs)
        if fitted_sink is not None:
            fitted_sink.append(fitted)
        t0 = time.perf_counter()
        scores = fitted.score(test)
        timings = dict(fitted.timings_ms)
        timings["score"] = (time.perf_counter() - t0) * 1e3
        labels = table.image_label[test]
        entry = fold_entry(f, scores, labels, fitted.tau,
                           {"n_train_images": int(len(fit_imgs)), "n_val_images": int(len(val_imgs)),
                            **fitted.extra})
        report.folds.append(entry)
        report.timings_ms.append(timings)
        for i, s in zip(test, scores):
            preds.append({"image_id": table.image_ids[i], "fold": f, "label": int(table.image_label[i]),
                          "score": float(s), "pred": int(s >= fitted.tau)})
    report.predictions = sorted(preds, key=lambda p: p["image_id"])
    return report


class SiameseFitted:
    def __init__(self, table, fit_imgs, val_imgs, cfg):
        from .pipeline import fit_bundle

        self.table = table
        self.cfg = cfg
        res = fit_bundle(table, fit_imgs, val_imgs, cfg)
        self.bundle = res.bundle
        self.tau = res.bundle.tau
        self.timings_ms = res.timings_ms
        self.extra = {"n_features_selected": res.n_selected, "pca_dim": res.bundle.fusion.pca.d_out,
                      "best_epoch": res.best_epoch, "epochs_run": len(res.history)}

    def score(self, images):
        from .pipeline import score_images

        return score_images(self.bundle, self.table, images, self.cfg)


def run_cv(table, cfg, k: int = 5, seed: int = 0, fingerprint: str = "", fitted_sink=None) -> EvalReport:
    """Image-level k-fold evaluation of the Siamese pipeline.

    Per fold the selection mask, standardiser, PCA and network are fitted on
    the training images only; the threshold is calibrated on a stratified
    ``val_fraction`` of them and the held-out fold is scored once.
    """
    from .pipeline import require_masks

    require_masks(table, np.arange(table.n_images))
    return run_cv_generic(table, lambda t, fi, vi: SiameseFitted(t, fi, vi, cfg), k, seed, cfg.val_fraction,
                          cfg.to_dict(), "siamese", fingerprint, fitted_sink)


ABLATION_GROUPS = (
    ("noise", "spatial", "frequency"),
    ("spatial",),
    ("frequency",),
    ("noise",),
    ("spatial", "frequency"),
)


def run_ablation(table, cfg, groups_list=ABLATION_GROUPS, k: int = 5, seed: int = 0, fingerprint: str = ""):
    """One CV run per feature-group set, all on identical folds."""
    from dataclasses import replace

    rows = []
    for groups in groups_list:
        rep = run_cv(table, replace(cfg, groups=tuple(groups)), k, seed, fingerprint)
        rows.append({"groups": list(groups), "report": rep})
    return rows
