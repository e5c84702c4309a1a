"""Spatial descriptors: uniform LBP, edge/gradient statistics, colour
correlations, a fast noise-sigma estimate and block-variance statistics."""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ArgumentError
from .imaging import gray2d

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
IMMERKAER = np.array([[1, -2, 1], [-2, 4, -2], [1, -2, 1]], dtype=np.float64)
EDGE_REL_THRESHOLD = 0.2
ORIENTATION_BINS = 8


def _transitions(code: int) -> int:
    bits = [(code >> i) & 1 for i in range(8)]
    return sum(bits[i] != bits[(i + 1) % 8] for i in range(8))


def _uniform_lut() -> np.ndarray:
    lut = np.full(256, 58, dtype=np.intp)
    uniform = [c for c in range(256) if _transitions(c) <= 2]
    assert len(uniform) == 58
    for i, c in enumerate(uniform):
        lut[c] = i
    return lut


# code -> bin; uniform codes in ascending order take bins 0..57, the rest share bin 58
UNIFORM_LUT = _uniform_lut()


def _check(gray, min_side=3):
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or min(gray.shape) < min_side:
        raise ArgumentError(f"need a 2-D image of at least {min_side}x{min_side}, got {gray.shape}")
    return gray


def lbp_histogram(gray: np.ndarray) -> np.ndarray:
    """59-bin uniform LBP (P=8, R=1, neighbour >= centre), border pixels excluded."""
    gray = _check(gray)
    codes = kernels.lbp_codes(gray)
    hist = np.bincount(UNIFORM_LUT[codes.ravel()], minlength=59).astype(np.float64)
    return hist / codes.size


def sobel_gradients(gray: np.ndarray):
    """Interior (valid) x/y derivatives; positive gx means intensity rising to the right."""
    g = kernels.correlate3x3_valid(_check(gray), np.stack([SOBEL_X, SOBEL_Y]))
    return g[0], g[1]


def edge_and_gradient_stats(gray: np.ndarray) -> np.ndarray:
    """``(edge density, mean |g| on edges, std |g| on edges,
    mean |g|, std |g|, orientation entropy)``.

    Edge pixels have magnitude above 0.2 of the patch maximum. Orientation is
    an 8-bin, magnitude-weighted histogram of atan2(gy, gx); entropy in nats.
    """
    gray = _check(gray)
    if np.ptp(gray) == 0.0:  # flat input; avoid classifying rounding residue as edges
        return np.zeros(6)
    gx, gy = sobel_gradients(gray)
    mag = np.hypot(gx, gy)
    mmax = mag.max()
    if mmax <= 0.0:
        return np.zeros(6)
    edges = mag > EDGE_REL_THRESHOLD * mmax
    em = mag[edges]
    # axis-aligned gradients sit on a bin boundary; drop rounding residue so they bin stably
    tiny = 1e-9 * mmax
    theta = np.arctan2(np.where(np.abs(gy) <= tiny, 0.0, gy), np.where(np.abs(gx) <= tiny, 0.0, gx))
    bins = np.floor((theta + np.pi) / (2 * np.pi / ORIENTATION_BINS)).astype(int) % ORIENTATION_BINS
    hist = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=ORIENTATION_BINS)
    p = hist[hist > 0] / hist.sum()
    entropy = float(-(p * np.log(p)).sum())
    return np.array([edges.mean(), em.mean(), em.std(), mag.mean(), mag.std(), max(entropy, 0.0)])


def _pearson(a, b, tiny=1e-24):
    a = a - a.mean()
    b = b - b.mean()
    saa, sbb = (a * a).sum(), (b * b).sum()
    if saa <= tiny * a.size or sbb <= tiny * b.size:
        return 0.0
    return float(np.clip((a * b).sum() / np.sqrt(saa * sbb), -1.0, 1.0))


def color_correlations(img: np.ndarray) -> np.ndarray:
    """Pearson (R,G), (R,B), (G,B); zeros for single-channel input."""
    if img.ndim == 2 or img.shape[2] == 1:
        return np.zeros(3)
    r, g, b = (img[:, :, c].ravel().astype(np.float64) for c in range(3))
    return np.array([_pearson(r, g), _pearson(r, b), _pearson(g, b)])


def noise_variance_estimate(gray: np.ndarray) -> float:
    """Immerkaer's fast noise sigma."""
    gray = _check(gray)
    h, w = gray.shape
    resp = kernels.correlate3x3_valid(gray, IMMERKAER)[0]
    return float(np.sqrt(np.pi / 2.0) * np.abs(resp).sum() / (6.0 * (w - 2) * (h - 2)))


def block_variance_stats(gray: np.ndarray, block: int = 8) -> np.ndarray:
    """Mean, std and coefficient of variation of non-overlapping block variances.

    Partial blocks at the right/bottom border are ignored.
    """
    gray = _check(gray, block)
    h, w = gray.shape
    hb, wb = h // block, w // block
    blocks = gray[:hb * block, :wb * block].reshape(hb, block, wb, block)
    v = blocks.var(axis=(1, 3)).ravel()
    mean = v.mean()
    std = v.std()
    return np.array([mean, std, std / mean if mean > 0 else 0.0])


SPATIAL_NAMES = (
    [f"spatial.lbp{i:02d}" for i in range(59)]
    + ["spatial.edge_density", "spatial.edge_mag_mean", "spatial.edge_mag_std"]
    + ["spatial.grad_mean", "spatial.grad_std", "spatial.grad_entropy"]
    + ["spatial.corr_rg", "spatial.corr_rb", "spatial.corr_gb"]
    + ["spatial.noise_sigma"]
    + ["spatial.blockvar_mean", "spatial.blockvar_std", "spatial.blockvar_cv"]
)


def spatial_features(img: np.ndarray, gray: np.ndarray | None = None) -> np.ndarray:
    """All 72 spatial features of an (H, W, C) patch, in ``SPATIAL_NAMES`` order."""
    if gray is None:
        gray = gray2d(img)
    return np.concatenate([
        lbp_histogram(gray),
        edge_and_gradient_stats(gray),
        color_correlations(img),
        [noise_variance_estimate(gray)],
        block_variance_stats(gray),
    ])
