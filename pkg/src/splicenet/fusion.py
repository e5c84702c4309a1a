"""Feature schema, variance-based selection, standardisation and PCA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, SchemaError
from .freqfeat import FREQUENCY_NAMES
from .spatialfeat import SPATIAL_NAMES

GROUPS = ("noise", "spatial", "frequency")
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    groups: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise SchemaError("feature names must be unique")
        if len(self.names) != len(self.groups):
            raise SchemaError("names and groups differ in length")
        bad = set(self.groups) - set(GROUPS)
        if bad:
            raise SchemaError(f"unknown feature groups {sorted(bad)}")

    @property
    def total_dim(self) -> int:
        return len(self.names)

    def group_size(self, group: str) -> int:
        return self.groups.count(group)

    def group_slice(self, group: str) -> slice:
        idx = [i for i, g in enumerate(self.groups) if g == group]
        return slice(idx[0], idx[-1] + 1) if idx else slice(0, 0)

    @classmethod
    def build(cls, noise_names) -> "FeatureSchema":
        names = tuple(noise_names) + tuple(SPATIAL_NAMES) + tuple(FREQUENCY_NAMES)
        groups = ("noise",) * len(noise_names) + ("spatial",) * len(SPATIAL_NAMES) + \
            ("frequency",) * len(FREQUENCY_NAMES)
        return cls(names, groups)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "groups": list(self.groups)}

    @classmethod
    def from_dict(cls, d) -> "FeatureSchema":
        return cls(tuple(d["names"]), tuple(d["groups"]))


def concat_features(noise, spatial, frequency, schema: FeatureSchema) -> np.ndarray:
    parts = {"noise": noise, "spatial": spatial, "frequency": frequency}
    for g, v in parts.items():
        if len(v) != schema.group_size(g):
            raise SchemaError(f"{g} sub-vector has length {len(v)}, schema expects {schema.group_size(g)}")
    return np.concatenate([np.asarray(noise, float), np.asarray(spatial, float), np.asarray(frequency, float)])


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def fit_standardizer(train: np.ndarray) -> StandardizationStats:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ArgumentError("standardisation needs at least 2 training rows")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return StandardizationStats(mean, std)


def apply_standardizer(stats: StandardizationStats, x: np.ndarray) -> np.ndarray:
    return stats.apply(x)


def select_features(train: np.ndarray, min_variance: float = 1e-8) -> np.ndarray:
    """Boolean keep-mask: False for columns whose raw variance is below ``min_variance``."""
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ArgumentError("feature selection needs at least 2 training rows")
    return train.var(axis=0) >= min_variance


def ablation_mask(schema: FeatureSchema, enabled_groups) -> np.ndarray:
    enabled = set(enabled_groups)
    if not enabled:
        raise ArgumentError("at least one feature group must be enabled")
    bad = enabled - set(GROUPS)
    if bad:
        raise ArgumentError(f"unknown feature groups {sorted(bad)}")
    return np.array([g in enabled for g in schema.groups])


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d_in,)
    components: np.ndarray  # (d_out, d_in), orthonormal rows
    explained_variance: np.ndarray  # (d_out,), descending
    variance_fraction: float  # of total variance retained

    @property
    def d_in(self) -> int:
        return self.components.shape[1]

    @property
    def d_out(self) -> int:
        return self.components.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.mean) @ self.components.T


def fit_pca(x: np.ndarray, variance_fraction: float = 0.95, max_components: int = 64) -> PcaModel:
    """PCA via eigendecomposition of the sample covariance (divisor n-1).

    Keeps the fewest leading components whose cumulative variance reaches
    ``variance_fraction``, capped by ``max_components`` and the numerical
    rank. Each component is signed so its largest-magnitude entry is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ArgumentError("PCA needs at least 2 rows")
    if not 0.0 < variance_fraction <= 1.0:
        raise ArgumentError("variance_fraction must be in (0, 1]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    if total <= 0.0:
        rank = 1
        k = 1
    else:
        rank = max(1, int(np.count_nonzero(evals > evals[0] * 1e-12)))
        cum = np.cumsum(evals) / total
        k = int(np.searchsorted(cum, variance_fraction - 1e-12) + 1)
    k = max(1, min(k, max_components, rank))
    comps = evecs[:, :k].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    kept = float(evals[:k].sum() / total) if total > 0 else 1.0
    return PcaModel(mean, comps, evals[:k].copy(), kept)


def apply_pca(model: PcaModel, x: np.ndarray) -> np.ndarray:
    return model.apply(x)


@dataclass(frozen=True)
class FusionModel:
    """Fitted select -> standardise -> PCA chain."""

    mask: np.ndarray
    stats: StandardizationStats
    pca: PcaModel

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.pca.apply(self.stats.apply(x[..., self.mask]))


def fit_fusion(train: np.ndarray, group_mask: np.ndarray | None = None, min_variance: float = 1e-8,
               variance_fraction: float = 0.95, max_components: int = 64) -> FusionModel:
    mask = select_features(train, min_variance)
    if group_mask is not None:
        mask &= group_mask
    if not mask.any():
        raise ArgumentError("no features survive selection")
    sub = np.asarray(train, dtype=np.float64)[:, mask]
    stats = fit_standardizer(sub)
    pca = fit_pca(stats.apply(sub), variance_fraction, max_components)
    return FusionModel(mask, stats, pca)
