"""Patch-level feature extraction and the fit/score path of the Siamese detector."""
from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import imaging
from .errors import DataError
from .freqfeat import frequency_features
from .fusion import GROUPS, FeatureSchema, ablation_mask, fit_fusion
from .model_io import ModelBundle
from .noisefeat import FilterBank, feature_names, init_filter_bank, noise_features
from .siamese import TrainConfig, calibrate_threshold, image_score, patch_scores, train
from .spatialfeat import spatial_features

log = logging.getLogger(__name__)

LABEL_CODE = {imaging.AUTHENTIC: 0, imaging.TAMPERED: 1, imaging.UNLABELED: -1}


@dataclass
class PipelineConfig:
    patch_size: int = 64
    stride: int = 32
    tamper_threshold: float = 0.10
    k_random: int = 5
    filter_seed: int = 0
    min_variance: float = 1e-8
    variance_fraction: float = 0.95
    max_components: int = 64
    groups: tuple[str, ...] = GROUPS
    val_fraction: float = 0.10
    augment_copies: int = 0
    augment: imaging.AugmentConfig = field(default_factory=imaging.AugmentConfig)
    score_max_pairs: int = 2000
    score_percentile: float = 95.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = list(self.groups)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        if "augment" in d:
            d["augment"] = imaging.AugmentConfig(**d["augment"])
        if "groups" in d:
            d["groups"] = tuple(d["groups"])
        return cls(**d)

    def extraction_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("patch_size", "stride", "tamper_threshold", "k_random",
                                               "filter_seed", "augment_copies")}


def make_schema(bank: FilterBank) -> FeatureSchema:
    return FeatureSchema.build(feature_names(bank))


def patch_vector(pixels: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Fused noise + spatial + frequency descriptor of one patch (schema order)."""
    gray = imaging.gray2d(pixels)
    return np.concatenate([noise_features(gray, bank), spatial_features(pixels, gray), frequency_features(gray)])


@dataclass
class FeatureTable:
    """Patch features of a whole dataset plus their provenance.

    ``patch_label`` is 0 (authentic), 1 (tampered) or -1 (unlabeled);
    ``augmented`` rows are training-only copies.
    """

    schema: FeatureSchema
    features: np.ndarray
    image_of: np.ndarray
    patch_label: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    augmented: np.ndarray
    image_ids: list[str]
    image_label: np.ndarray
    image_size: np.ndarray
    has_mask: np.ndarray

    @property
    def n_images(self) -> int:
        return len(self.image_ids)

    def rows(self, images, labeled_only=False, include_augmented=False) -> np.ndarray:
        sel = np.isin(self.image_of, np.asarray(images))
        if not include_augmented:
            sel &= ~self.augmented
        if labeled_only:
            sel &= self.patch_label >= 0
        return np.flatnonzero(sel)

    def image_rows(self, i: int) -> np.ndarray:
        return np.flatnonzero((self.image_of == i) & ~self.augmented)


def _image_seed(image_id: str) -> int:
    return int.from_bytes(hashlib.sha256(image_id.encode()).digest()[:8], "little")


def _extract_one(args):
    record, cfg, bank = args
    img = imaging.load_image(record.path)
    if record.label == imaging.AUTHENTIC:
        mask = None
    elif record.mask_path is not None:
        mask = imaging.load_mask(record.mask_path)
    else:
        mask = "missing"
    patches = imaging.extract_patches(img, cfg.patch_size, cfg.stride, record.image_id)
    if isinstance(mask, str):
        labels = [-1] * len(patches)
    else:
        patches = imaging.label_patches(patches, mask, cfg.tamper_threshold)
        labels = [LABEL_CODE[p.label] for p in patches]
    feats = [patch_vector(p.pixels, bank) for p in patches]
    aug = []
    if cfg.augment_copies:
        rng = np.random.default_rng(_image_seed(record.image_id))
        for p, lab in zip(patches, labels):
            if lab < 0:
                continue
            for _ in range(cfg.augment_copies):
                q = imaging.augment(p, cfg.augment, rng)
                aug.append((patch_vector(q.pixels, bank), lab, p.x0, p.y0))
    return (np.array(feats), labels, [p.x0 for p in patches], [p.y0 for p in patches], aug,
            img.shape[:2], not isinstance(mask, str))


def extract_features(records: list[imaging.ImageRecord], cfg: PipelineConfig, threads: int = 1) -> FeatureTable:
    """Extract every patch of every image.

    Images are processed in image-id order, so the table (and everything
    fitted from it) is independent of the input order and of ``threads``.
    """
    records = sorted(records, key=lambda r: r.image_id)
    bank = init_filter_bank(cfg.k_random, cfg.filter_seed)
    schema = make_schema(bank)
    jobs = [(r, cfg, bank) for r in records]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_extract_one, jobs, chunksize=4))
    else:
        results = [_extract_one(j) for j in jobs]
    feats, image_of, labels, xs, ys, augm = [], [], [], [], [], []
    sizes, has_mask = [], []
    for i, (f, lab, x0, y0, aug, size, hm) in enumerate(results):
        feats.append(f)
        image_of += [i] * len(lab)
        labels += lab
        xs += x0
        ys += y0
        augm += [False] * len(lab)
        for vec, l2, ax, ay in aug:
            feats.append(vec[None])
            image_of.append(i)
            labels.append(l2)
            xs.append(ax)
            ys.append(ay)
            augm.append(True)
        sizes.append(size)
        has_mask.append(hm)
    return FeatureTable(
        schema=schema,
        features=np.concatenate(feats) if feats else np.zeros((0, schema.total_dim)),
        image_of=np.array(image_of, dtype=np.int64),
        patch_label=np.array(labels, dtype=np.int8),
        x0=np.array(xs, dtype=np.int64),
        y0=np.array(ys, dtype=np.int64),
        augmented=np.array(augm, dtype=bool),
        image_ids=[r.image_id for r in records],
        image_label=np.array([LABEL_CODE[r.label] for r in records], dtype=np.int8),
        image_size=np.array(sizes, dtype=np.int64).reshape(-1, 2),
        has_mask=np.array(has_mask, dtype=bool),
    )


def require_masks(table: FeatureTable, images) -> None:
    images = np.asarray(images)
    missing = [table.image_ids[i] for i in images if table.image_label[i] == 1 and not table.has_mask[i]]
    if missing:
        raise DataError(
            f"{len(missing)} tampered image(s) have no ground-truth mask (e.g. {missing[0]}); "
            "patch-level training needs masks: add masks/<stem>.png next to tampered/"
        )


def score_images(bundle: ModelBundle, table: FeatureTable, images, cfg: PipelineConfig) -> np.ndarray:
    out = []
    for i in images:
        z = bundle.fusion.transform(table.features[table.image_rows(i)])
        rng = np.random.default_rng(_image_seed(table.image_ids[i]))
        out.append(image_score(bundle.net, z, rng, cfg.score_max_pairs, cfg.score_percentile))
    return np.array(out)


@dataclass
class FitResult:
    bundle: ModelBundle
    history: list
    best_epoch: int
    timings_ms: dict
    n_selected: int


def fit_bundle(table: FeatureTable, fit_images, val_images, cfg: PipelineConfig, meta: dict | None = None) -> FitResult:
    """Fit select -> standardise -> PCA -> Siamese net on ``fit_images`` and
    calibrate the threshold on ``val_images``. Nothing else is read."""
    require_masks(table, np.concatenate([fit_images, val_images]))
    timings = {}
    t0 = time.perf_counter()
    fit_rows = table.rows(fit_images, labeled_only=True, include_augmented=True)
    val_rows = table.rows(val_images, labeled_only=True)
    if len(fit_rows) < 2:
        raise DataError("not enough labelled training patches")
    group_mask = ablation_mask(table.schema, cfg.groups)
    fusion = fit_fusion(table.features[fit_rows], group_mask, cfg.min_variance, cfg.variance_fraction,
                        cfg.max_components)
    z_fit = fusion.transform(table.features[fit_rows])
    z_val = fusion.transform(table.features[val_rows])
    timings["fusion"] = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    result = train(z_fit, table.patch_label[fit_rows], z_val, table.patch_label[val_rows], cfg.train)
    timings["train"] = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    bank = init_filter_bank(cfg.k_random, cfg.filter_seed)
    meta = dict(meta or {})
    meta.setdefault("extraction", cfg.extraction_dict())
    meta.setdefault("scoring", {"max_pairs": cfg.score_max_pairs, "percentile": cfg.score_percentile})
    bundle = ModelBundle(table.schema, bank, fusion, result.net, 0.0, meta)
    val_scores = score_images(bundle, table, val_images, cfg)
    bundle.tau = calibrate_threshold(val_scores, table.image_label[np.asarray(val_images)])
    timings["calibrate"] = (time.perf_counter() - t0) * 1e3
    return FitResult(bundle, result.history, result.best_epoch, timings, int(fusion.mask.sum()))


def validation_split(labels: np.ndarray, images, fraction: float, seed: int):
    """Stratified split of ``images`` into (fit, val); at least one val image per class."""
    images = np.asarray(images)
    rng = np.random.default_rng([seed, 7])
    fit, val = [], []
    for cls in (0, 1):
        members = np.sort(images[labels[images] == cls])
        if len(members) < 2:
            raise DataError("each class needs at least 2 training images for a validation split")
        members = members[rng.permutation(len(members))]
        n_val = min(len(members) - 1, max(1, int(round(fraction * len(members)))))
        val += list(members[:n_val])
        fit += list(members[n_val:])
    return np.array(sorted(fit)), np.array(sorted(val))


def score_single(bundle: ModelBundle, img: np.ndarray, image_id: str = "image"):
    """Score one in-memory image with a bundle. Returns (score, patches, per-patch scores)."""
    ext = bundle.meta.get("extraction", {})
    sc = bundle.meta.get("scoring", {})
    patches = imaging.extract_patches(img, ext.get("patch_size", 64), ext.get("stride", 32), image_id)
    feats = np.array([patch_vector(p.pixels, bundle.bank) for p in patches])
    z = bundle.fusion.transform(feats)
    rng = np.random.default_rng(_image_seed(image_id))
    score = image_score(bundle.net, z, rng, sc.get("max_pairs", 2000), sc.get("percentile", 95.0))
    return score, patches, patch_scores(bundle.net, z)
