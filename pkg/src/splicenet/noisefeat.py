"""High-pass noise residuals: a fixed 3x3 filter bank, instance normalisation,
tanh squashing and moment pooling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._stats import shape_stats
from .errors import ArgumentError

LAPLACIAN = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
NORM_EPS = 1e-6
STATS_PER_MAP = ("mean_abs", "std", "skew", "kurt")


@dataclass(frozen=True)
class FilterBank:
    kernels: np.ndarray  # (K, 3, 3)
    names: tuple[str, ...]
    seed: int

    def __len__(self):
        return len(self.names)


def init_filter_bank(k_random: int = 5, seed: int = 0) -> FilterBank:
    """Laplacian, Sobel-X, Sobel-Y plus ``k_random`` zero-sum, unit-norm random kernels."""
    if k_random < 0:
        raise ArgumentError("k_random must be >= 0")
    rng = np.random.default_rng(seed)
    ks = [LAPLACIAN, SOBEL_X, SOBEL_Y]
    for _ in range(k_random):
        k = rng.standard_normal((3, 3))
        k -= k.mean()
        ks.append(k / np.linalg.norm(k))
    names = ("laplacian", "sobel_x", "sobel_y") + tuple(f"random{i}" for i in range(k_random))
    bank = np.stack(ks)
    bank.setflags(write=False)
    return FilterBank(bank, names, seed)


def apply_filters(gray: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Same-size convolution (reflect padding) with every kernel, then
    per-map (x - mean) / (std + 1e-6) and tanh. Returns (K, H, W)."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or min(gray.shape) < 3:
        raise ArgumentError(f"noise filtering needs a 2-D image of at least 3x3, got {gray.shape}")
    if np.ptp(gray) == 0.0:  # zero-sum kernels: a flat image has no response at all
        return np.zeros((len(bank),) + gray.shape)
    padded = np.pad(gray - gray.mean(), 1, mode="reflect")
    flipped = bank.kernels[:, ::-1, ::-1]
    maps = kernels.correlate3x3_valid(padded, flipped)
    mu = maps.mean(axis=(1, 2), keepdims=True)
    sd = maps.std(axis=(1, 2), keepdims=True)
    return np.tanh((maps - mu) / (sd + NORM_EPS))


def noise_statistics(maps: np.ndarray) -> np.ndarray:
    """Per map: mean |x|, std, skewness, excess kurtosis (length 4K)."""
    maps = np.asarray(maps, dtype=np.float64)
    if maps.size == 0:
        raise ArgumentError("empty noise maps")
    _, mean_abs, sd, sk, ku = shape_stats(kernels.row_moments(maps.reshape(maps.shape[0], -1)))
    return np.column_stack([mean_abs, sd, sk, ku]).ravel()


def feature_names(bank: FilterBank) -> list[str]:
    return [f"noise.{n}.{s}" for n in bank.names for s in STATS_PER_MAP]


def noise_features(gray: np.ndarray, bank: FilterBank) -> np.ndarray:
    return noise_statistics(apply_filters(gray, bank))
