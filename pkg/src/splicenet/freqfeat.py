"""Frequency-domain descriptors: block-DCT statistics, JPEG blockiness, FFT
periodicity, Haar sub-band statistics and radial power-spectrum features."""
from __future__ import annotations

import numpy as np

from ._stats import moments
from .errors import ArgumentError
from .transforms import ZIGZAG, block_dct, haar_dwt, hann2d

# zig-zag index ranges: DC, low, mid, high
DCT_BANDS = ((0, 0), (1, 9), (10, 35), (36, 63))
_BAND_OF = np.zeros((8, 8), dtype=int)
for _b, (_lo, _hi) in enumerate(DCT_BANDS):
    _BAND_OF[(ZIGZAG >= _lo) & (ZIGZAG <= _hi)] = _b
MIN_PEAK_RADIUS = 2.0


def _check(gray, min_side):
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or min(gray.shape) < min_side:
        raise ArgumentError(f"need a 2-D image of at least {min_side}x{min_side}, got {gray.shape}")
    return gray


def dct_statistics(blocks: np.ndarray) -> np.ndarray:
    """Energy fractions (DC, low, mid, high) plus pooled AC std and excess kurtosis."""
    blocks = np.asarray(blocks).reshape(-1, 8, 8)
    if blocks.shape[0] == 0:
        raise ArgumentError("no DCT blocks")
    energy = (blocks ** 2).sum(axis=0)
    band = np.bincount(_BAND_OF.ravel(), weights=energy.ravel(), minlength=4)
    total = band.sum()
    fractions = band / total if total > 0 else np.array([1.0, 0.0, 0.0, 0.0])
    ac = blocks.reshape(-1, 64)[:, 1:]
    _, sd, _, ku = moments(ac)
    return np.concatenate([fractions, [sd, ku]])


def blockiness(gray: np.ndarray) -> float:
    """Mean |neighbour difference| across 8-aligned boundaries over the mean
    across all other neighbour pairs (1.0 when the latter is zero)."""
    gray = _check(gray, 16)
    dx = np.abs(np.diff(gray, axis=1))  # pair (x, x+1) at column x
    dy = np.abs(np.diff(gray, axis=0))
    bx = (np.arange(dx.shape[1]) % 8) == 7
    by = (np.arange(dy.shape[0]) % 8) == 7
    b_sum = dx[:, bx].sum() + dy[by].sum()
    b_n = dx[:, bx].size + dy[by].size
    n_sum = dx[:, ~bx].sum() + dy[~by].sum()
    n_n = dx[:, ~bx].size + dy[~by].size
    denom = n_sum / n_n
    if denom <= 0.0:
        return 1.0
    return float((b_sum / b_n) / denom)


def _radius_grid(h, w):
    ky = np.fft.fftfreq(h) * h
    kx = np.fft.fftfreq(w) * w
    return np.hypot(ky[:, None], kx[None, :])


def windowed_spectrum(gray: np.ndarray) -> np.ndarray:
    """Complex 2-D FFT of the mean-removed, Hann-windowed image."""
    h, w = gray.shape
    return np.fft.fft2((gray - gray.mean()) * hann2d(h, w))


def fft_periodicity(gray: np.ndarray, spectrum: np.ndarray | None = None) -> np.ndarray:
    """``(peak / median magnitude, peak frequency in cycles/pixel)`` over bins with radius >= 2.

    A spectrum with no energy outside the excluded disc gives ``(1.0, 0.0)``.
    """
    gray = _check(gray, 16)
    h, w = gray.shape
    mag = np.abs(windowed_spectrum(gray) if spectrum is None else spectrum)
    r = _radius_grid(h, w)
    keep = r >= MIN_PEAK_RADIUS
    vals = mag[keep]
    peak_i = int(np.argmax(vals))
    peak = vals[peak_i]
    scale = max(np.abs(gray).max(), 1e-300) * h * w
    if peak <= 1e-12 * scale:
        return np.array([1.0, 0.0])
    med = np.median(vals)
    ratio = peak / max(med, 1e-12 * peak)
    # cycles per pixel: equals radius / min(H, W) on square input, stays <= sqrt(1/2) otherwise
    fr = np.hypot(np.fft.fftfreq(h)[:, None], np.fft.fftfreq(w)[None, :])
    return np.array([ratio, fr[keep][peak_i]])


def wavelet_features(gray: np.ndarray, levels: int = 2) -> np.ndarray:
    """Mean |c| and std of LH, HL, HH at each Haar level (level 1 first)."""
    details, _ = haar_dwt(gray, levels)
    out = []
    for bands in details:
        for c in bands:
            out += [np.abs(c).mean(), c.std()]
    return np.array(out)


def psd_features(gray: np.ndarray, spectrum: np.ndarray | None = None) -> np.ndarray:
    """``(log-log slope, band fraction low, mid, high)`` of the radially averaged periodogram.

    Radii are rounded to integers and restricted to [1, min(H, W)/2); the
    slope is fitted over [2, rmax]; bands are radial thirds of [1, rmax].
    """
    gray = _check(gray, 16)
    h, w = gray.shape
    spec = windowed_spectrum(gray) if spectrum is None else spectrum
    power = (np.abs(spec) ** 2 / (h * w)).ravel()
    rint = np.rint(_radius_grid(h, w)).astype(int).ravel()
    rmax = min(h, w) // 2 - 1 if min(h, w) % 2 == 0 else min(h, w) // 2
    sel = (rint >= 1) & (rint <= rmax)
    sums = np.bincount(rint[sel], weights=power[sel], minlength=rmax + 1)
    counts = np.bincount(rint[sel], minlength=rmax + 1)
    radii = np.arange(2, rmax + 1)
    avg = sums[radii] / counts[radii]
    if np.all(avg > 0):
        slope = float(np.polyfit(np.log(radii), np.log(avg), 1)[0])
    else:
        slope = 0.0
    r_all = np.arange(rmax + 1)
    thirds = (r_all >= 1) & (r_all < rmax / 3), (r_all >= rmax / 3) & (r_all < 2 * rmax / 3), (r_all >= 2 * rmax / 3)
    band = np.array([sums[t].sum() for t in thirds])
    total = band.sum()
    fractions = band / total if total > 0 else np.zeros(3)
    return np.concatenate([[slope], fractions])


FREQUENCY_NAMES = (
    ["freq.dct_dc", "freq.dct_low", "freq.dct_mid", "freq.dct_high", "freq.dct_ac_std", "freq.dct_ac_kurt"]
    + ["freq.blockiness"]
    + ["freq.period_ratio", "freq.period_radius"]
    + [f"freq.haar{lv}_{band}_{s}" for lv in (1, 2) for band in ("lh", "hl", "hh") for s in ("mean_abs", "std")]
    + ["freq.psd_slope", "freq.psd_low", "freq.psd_mid", "freq.psd_high"]
)


def frequency_features(gray: np.ndarray) -> np.ndarray:
    """All 25 frequency features, in ``FREQUENCY_NAMES`` order."""
    gray = _check(gray, 16)
    spectrum = windowed_spectrum(gray)
    return np.concatenate([
        dct_statistics(block_dct(gray)),
        [blockiness(gray)],
        fft_periodicity(gray, spectrum),
        wavelet_features(gray),
        psd_features(gray, spectrum),
    ])
