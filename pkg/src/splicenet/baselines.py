"""Reference detectors evaluated under the same CV protocol: error level
analysis features and spatial statistics, each with logistic regression."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import imaging
from .errors import ArgumentError
from .evaluation import run_cv_generic
from .pipeline import LABEL_CODE, FeatureTable, PipelineConfig, require_masks
from .siamese import calibrate_threshold
from .synthgen import jpeg_roundtrip


@dataclass
class LogisticModel:
    mean: np.ndarray
    std: np.ndarray
    w: np.ndarray
    b: float
    losses: list

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        z = ((np.asarray(x) - self.mean) / self.std) @ self.w + self.b
        return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logloss(z, y):
    return np.mean(np.logaddexp(0.0, z) - y * z)


def fit_logistic(x: np.ndarray, y: np.ndarray, l2: float = 1e-3, iters: int = 500) -> LogisticModel:
    """L2-regularised logistic regression by full-batch gradient descent.

    Features are standardised first. The step is 1/L for the smoothness
    constant L of the objective, so the loss never increases.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y) or len(x) < 2:
        raise ArgumentError("logistic regression needs a 2-D matrix with matching labels")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    xs = (x - mean) / std
    n = len(xs)
    xa = np.hstack([xs, np.ones((n, 1))])
    lips = 0.25 * np.linalg.norm(xa, 2) ** 2 / n + l2
    step = 1.0 / lips
    theta = np.zeros(xa.shape[1])
    reg = np.ones_like(theta)
    reg[-1] = 0.0  # bias is not penalised
    losses = []
    for _ in range(iters):
        z = xa @ theta
        losses.append(float(_logloss(z, y) + 0.5 * l2 * np.sum(reg * theta ** 2)))
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        grad = xa.T @ (p - y) / n + l2 * reg * theta
        theta = theta - step * grad
    z = xa @ theta
    losses.append(float(_logloss(z, y) + 0.5 * l2 * np.sum(reg * theta ** 2)))
    return LogisticModel(mean, std, theta[:-1], float(theta[-1]), losses)


ELA_STATS = ("mean", "std", "p95")


def ela_residual(img: np.ndarray, quality: int = 90) -> np.ndarray:
    """|image - JPEG round trip at ``quality``| per pixel and channel."""
    return np.abs(img - jpeg_roundtrip(img, quality))


def ela_patch_features(residual_patch: np.ndarray) -> np.ndarray:
    """(mean, std, 95th percentile) of the residual per channel; 1-channel input is repeated to 3."""
    if residual_patch.shape[2] == 1:
        residual_patch = np.repeat(residual_patch, 3, axis=2)
    out = []
    for c in range(3):
        r = residual_patch[:, :, c]
        out += [r.mean(), r.std(), np.percentile(r, 95)]
    return np.array(out)


def extract_ela_table(records, cfg: PipelineConfig, quality: int = 90) -> FeatureTable:
    """ELA features on the same patch grid and labels as the main pipeline.

    The residual is computed once on the whole image (keeping the image's own
    8x8 grid) and then cut into patches.
    """
    feats, image_of, labels, xs, ys, sizes, has_mask = [], [], [], [], [], [], []
    for i, rec in enumerate(records):
        img = imaging.load_image(rec.path)
        res = ela_residual(img, quality)
        patches = imaging.extract_patches(res, cfg.patch_size, cfg.stride, rec.image_id)
        if rec.label == imaging.AUTHENTIC:
            patches = imaging.label_patches(patches, None, cfg.tamper_threshold)
            codes = [LABEL_CODE[p.label] for p in patches]
        elif rec.mask_path is not None:
            patches = imaging.label_patches(patches, imaging.load_mask(rec.mask_path), cfg.tamper_threshold)
            codes = [LABEL_CODE[p.label] for p in patches]
        else:
            codes = [-1] * len(patches)
        feats += [ela_patch_features(p.pixels) for p in patches]
        image_of += [i] * len(patches)
        labels += codes
        xs += [p.x0 for p in patches]
        ys += [p.y0 for p in patches]
        sizes.append(img.shape[:2])
        has_mask.append(rec.label == imaging.AUTHENTIC or rec.mask_path is not None)
    n = len(labels)
    return FeatureTable(None, np.array(feats).reshape(n, 9), np.array(image_of, dtype=np.int64),
                        np.array(labels, dtype=np.int8), np.array(xs), np.array(ys), np.zeros(n, dtype=bool),
                        [r.image_id for r in records],
                        np.array([LABEL_CODE[r.label] for r in records], dtype=np.int8),
                        np.array(sizes).reshape(-1, 2), np.array(has_mask, dtype=bool))


class LogisticFitted:
    """Patch-level logistic regression; image score = mean patch probability."""

    def __init__(self, table: FeatureTable, fit_imgs, val_imgs, columns, l2=1e-3, iters=500):
        t0 = time.perf_counter()
        self.table = table
        self.columns = columns
        rows = table.rows(fit_imgs, labeled_only=True)
        self.model = fit_logistic(table.features[rows][:, columns], table.patch_label[rows], l2, iters)
        self.train_accuracy = float(np.mean(
            (self.model.predict_proba(table.features[rows][:, columns]) >= 0.5) == table.patch_label[rows]))
        fit_ms = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        self.tau = calibrate_threshold(self.score(val_imgs), table.image_label[np.asarray(val_imgs)])
        self.timings_ms = {"fit": fit_ms, "calibrate": (time.perf_counter() - t0) * 1e3}
        self.extra = {"n_features_selected": int(np.size(np.arange(table.features.shape[1])[columns])),
                      "patch_train_accuracy": self.train_accuracy}

    def score(self, images):
        out = []
        for i in images:
            rows = self.table.image_rows(i)
            out.append(float(np.mean(self.model.predict_proba(self.table.features[rows][:, self.columns]))))
        return np.array(out)


def baseline_ela(records, cfg: PipelineConfig, quality: int = 90, k: int = 5, seed: int = 0,
                 fingerprint: str = "", table: FeatureTable | None = None):
    """ELA residual statistics + logistic regression under the CV protocol of ``run_cv``."""
    table = table if table is not None else extract_ela_table(records, cfg, quality)
    require_masks(table, np.arange(table.n_images))
    echo = {**cfg.to_dict(), "ela_quality": quality}
    return run_cv_generic(table, lambda t, fi, vi: LogisticFitted(t, fi, vi, slice(None)), k, seed,
                          cfg.val_fraction, echo, "ela", fingerprint)


def baseline_statistical(table: FeatureTable, cfg: PipelineConfig, k: int = 5, seed: int = 0, fingerprint: str = ""):
    """Spatial features only + logistic regression under the CV protocol of ``run_cv``."""
    require_masks(table, np.arange(table.n_images))
    cols = table.schema.group_slice("spatial")
    return run_cv_generic(table, lambda t, fi, vi: LogisticFitted(t, fi, vi, cols), k, seed,
                          cfg.val_fraction, cfg.to_dict(), "statistical", fingerprint)
