"""Pure-numpy reference kernels.

These define the semantics; ``_ckernels.pyx`` must agree with them to
floating-point rounding (integers exactly).
"""
import numpy as np

# circular neighbour order used for LBP bit positions: TL, T, TR, R, BR, B, BL, L
LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def correlate3x3_valid(img, kernels):
    """Valid-mode 3x3 cross-correlation of a 2-D image with a stack of kernels.

    Returns an array of shape (K, H-2, W-2).
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64).reshape(-1, 3, 3)
    h, w = img.shape
    out = np.zeros((kernels.shape[0], h - 2, w - 2))
    for dy in range(3):
        for dx in range(3):
            win = img[dy:dy + h - 2, dx:dx + w - 2]
            out += kernels[:, dy, dx][:, None, None] * win[None]
    return out


def lbp_codes(img):
    """8-neighbour, radius-1 LBP codes of interior pixels (uint8, shape (H-2, W-2))."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    center = img[1:h - 1, 1:w - 1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for bit, (dy, dx) in enumerate(LBP_OFFSETS):
        nb = img[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes |= (nb >= center).astype(np.uint8) << bit
    return codes


def row_moments(x):
    """Per row of a 2-D array: (mean, mean |x|, m2, m3, m4) with central moments m_k.

    Two-pass (mean first), population normalisation. Returns shape (R, 5).
    """
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=1)
    d = x - mu[:, None]
    d2 = d * d
    out = np.empty((x.shape[0], 5))
    out[:, 0] = mu
    out[:, 1] = np.abs(x).mean(axis=1)
    out[:, 2] = d2.mean(axis=1)
    out[:, 3] = (d2 * d).mean(axis=1)
    out[:, 4] = (d2 * d2).mean(axis=1)
    return out
