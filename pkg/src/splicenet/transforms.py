"""Orthonormal transforms shared by the JPEG codec and the frequency features."""
import numpy as np

from .errors import ArgumentError

BLOCK = 8


def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal DCT-II basis, rows indexed by frequency."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos((2 * x + 1) * k * np.pi / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


DCT8 = dct_matrix(BLOCK)


def _zigzag(n: int = BLOCK) -> np.ndarray:
    order = sorted(
        ((y, x) for y in range(n) for x in range(n)),
        key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1]),
    )
    zz = np.empty((n, n), dtype=int)
    for i, (y, x) in enumerate(order):
        zz[y, x] = i
    return zz


# ZIGZAG[y, x] = position of coefficient (y, x) in the JPEG zig-zag scan
ZIGZAG = _zigzag()


def pad_to_blocks(arr: np.ndarray, block: int = BLOCK) -> np.ndarray:
    h, w = arr.shape
    ph, pw = (-h) % block, (-w) % block
    if ph or pw:
        arr = np.pad(arr, ((0, ph), (0, pw)), mode="edge")
    return arr


def to_blocks(arr: np.ndarray, block: int = BLOCK) -> np.ndarray:
    h, w = arr.shape
    return arr.reshape(h // block, block, w // block, block).swapaxes(1, 2)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    by, bx, b, _ = blocks.shape
    return blocks.swapaxes(1, 2).reshape(by * b, bx * b)


def block_dct(gray: np.ndarray) -> np.ndarray:
    """8x8 orthonormal DCT-II of every block, shape (rows, cols, 8, 8).

    Input smaller than one block is rejected; other sizes are padded to a
    multiple of 8 by edge replication.
    """
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or min(gray.shape) < BLOCK:
        raise ArgumentError(f"block DCT needs a 2-D array of at least 8x8, got {gray.shape}")
    return DCT8 @ to_blocks(pad_to_blocks(gray)) @ DCT8.T


def block_idct(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`block_dct` (returns the padded image)."""
    return from_blocks(DCT8.T @ coeffs @ DCT8)


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (its DFT is confined to bins 0 and +-1)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def hann2d(h: int, w: int) -> np.ndarray:
    return np.outer(hann(h), hann(w))


def haar_level(arr: np.ndarray):
    """One orthonormal 2-D Haar step.

    Returns ``(LL, LH, HL, HH)``. The first letter is the filter applied along
    rows (vertical direction), the second along columns (horizontal
    direction): LH responds to vertical edges, HL to horizontal edges.
    Odd dimensions lose their last row/column.
    """
    h, w = arr.shape
    a = arr[: h - h % 2, : w - w % 2]
    s = 1.0 / np.sqrt(2.0)
    lo_y = (a[0::2] + a[1::2]) * s
    hi_y = (a[0::2] - a[1::2]) * s
    ll = (lo_y[:, 0::2] + lo_y[:, 1::2]) * s
    lh = (lo_y[:, 0::2] - lo_y[:, 1::2]) * s
    hl = (hi_y[:, 0::2] + hi_y[:, 1::2]) * s
    hh = (hi_y[:, 0::2] - hi_y[:, 1::2]) * s
    return ll, lh, hl, hh


def haar_dwt(arr: np.ndarray, levels: int = 2):
    """Multi-level Haar decomposition: list of (LH, HL, HH) per level plus the final LL."""
    arr = np.asarray(arr, dtype=np.float64)
    if min(arr.shape) < 2 ** levels:
        raise ArgumentError(f"{levels}-level Haar needs at least {2 ** levels} pixels per side")
    details = []
    for _ in range(levels):
        arr, lh, hl, hh = haar_level(arr)
        details.append((lh, hl, hh))
    return details, arr
