"""Image I/O, colour conversion, sliding-window patches, mask labelling and augmentation.

Images are float64 numpy arrays of shape (H, W, C) with C in {1, 3} and
values in [0, 1]. Masks are boolean arrays of shape (H, W), True = tampered.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ArgumentError, DataError, FormatError

SUPPORTED_FORMATS = ("PNG", "JPEG", "PPM", "TIFF")  # TIFF: CASIA 2.0 ships some tampered images as .tif
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".ppm", ".tif", ".tiff")
LUMA = np.array([0.299, 0.587, 0.114])

AUTHENTIC, TAMPERED, UNLABELED = "authentic", "tampered", "unlabeled"


@dataclass(frozen=True)
class Patch:
    source_id: str
    x0: int
    y0: int
    size: int
    pixels: np.ndarray
    source_size: tuple[int, int]  # (height, width) of the parent image
    label: str = UNLABELED
    tamper_fraction: float = 0.0


def load_image(path) -> np.ndarray:
    """Read a PNG, JPEG, binary PPM or TIFF into an (H, W, C) float array in [0, 1].

    8-bit samples map to v/255 and 16-bit samples to v/65535. Alpha is dropped
    and palette images are expanded to RGB.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise FormatError(f"{path}: unsupported image format {fmt!r}")
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
                return np.clip(arr, 0.0, 1.0)[:, :, None]
            if mode in ("L", "1", "LA"):
                arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
                return arr[:, :, None]
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            return arr
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a recognised image file") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(img: np.ndarray, path) -> None:
    """Write an image (H, W[, C]) or boolean mask as an 8-bit PNG."""
    arr = np.asarray(img)
    if arr.dtype == bool:
        data = arr.astype(np.uint8) * 255
    else:
        data = to_uint8(arr)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    Image.fromarray(data).save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    """Read a ground-truth mask; any nonzero sample marks a tampered pixel."""
    img = load_image(path)
    return np.any(img > 0, axis=2)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma. Single-channel input is returned unchanged."""
    if img.ndim == 2:
        return img[:, :, None]
    if img.shape[2] == 1:
        return img
    if img.shape[2] != 3:
        raise ArgumentError(f"expected 1 or 3 channels, got {img.shape[2]}")
    return (img @ LUMA)[:, :, None]


def gray2d(img: np.ndarray) -> np.ndarray:
    """Luma as a plain (H, W) array."""
    return to_grayscale(img)[:, :, 0]


def window_starts(length: int, size: int, stride: int) -> list[int]:
    starts = list(range(0, length - size + 1, stride))
    if starts[-1] + size < length:
        starts.append(length - size)
    return starts


def extract_patches(img: np.ndarray, size: int = 64, stride: int = 32, source_id: str = "") -> list[Patch]:
    """Square sliding windows in row-major order, edge-anchored so every pixel is covered."""
    h, w = img.shape[:2]
    if stride < 1 or stride > size:
        raise ArgumentError("stride must be in [1, size] so that windows cover the image")
    if size < 1 or size > min(h, w):
        raise ArgumentError(f"patch size {size} does not fit a {w}x{h} image")
    img = img if img.ndim == 3 else img[:, :, None]
    return [
        Patch(source_id, x0, y0, size, img[y0:y0 + size, x0:x0 + size], (h, w))
        for y0 in window_starts(h, size, stride)
        for x0 in window_starts(w, size, stride)
    ]


def label_patches(patches: list[Patch], mask: np.ndarray | None, tamper_threshold: float = 0.10) -> list[Patch]:
    """Attach labels from a ground-truth mask.

    ``mask=None`` means the source image is authentic (all-zero mask).
    Patches with 0 < fraction < threshold become ``unlabeled``.
    """
    out = []
    for p in patches:
        if mask is None:
            frac = 0.0
        else:
            if mask.shape != p.source_size:
                raise ArgumentError(f"mask shape {mask.shape} does not match image shape {p.source_size}")
            window = mask[p.y0:p.y0 + p.size, p.x0:p.x0 + p.size]
            frac = float(np.count_nonzero(window)) / (p.size * p.size)
        if frac == 0.0:
            label = AUTHENTIC
        elif frac >= tamper_threshold:
            label = TAMPERED
        else:
            label = UNLABELED
        out.append(replace(p, label=label, tamper_fraction=frac))
    return out


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with pixel-centre alignment and edge clamping."""
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w = img.shape[:2]

    def axis(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return out[:, :, 0] if squeeze else out


@dataclass(frozen=True)
class AugmentConfig:
    p_flip: float = 0.5
    p_crop: float = 0.5
    min_crop: float = 0.75
    p_color: float = 0.5
    brightness: float = 0.1
    contrast: float = 0.1


def augment(patch: Patch, config: AugmentConfig, rng: np.random.Generator) -> Patch:
    """Randomly flip, crop-and-rescale and colour-jitter a patch.

    Every random draw happens regardless of which transforms fire, so a given
    seed always consumes the generator identically.
    """
    if patch.size < 16:
        raise ArgumentError("augmentation needs patches of at least 16 pixels")
    px = patch.pixels
    u_flip, u_crop, u_color = rng.random(3)
    frac = rng.uniform(config.min_crop, 1.0)
    ox, oy = rng.random(2)
    shift = rng.uniform(-config.brightness, config.brightness)
    scale = rng.uniform(1.0 - config.contrast, 1.0 + config.contrast)

    if u_flip < config.p_flip:
        px = px[:, ::-1]
    if u_crop < config.p_crop:
        n = patch.size
        c = max(1, int(round(frac * n)))
        x = int(ox * (n - c + 1)) if c < n else 0
        y = int(oy * (n - c + 1)) if c < n else 0
        px = resize_bilinear(px[y:y + c, x:x + c], n, n)
    if u_color < config.p_color:
        mean = px.mean()
        px = np.clip((px - mean) * scale + mean + shift, 0.0, 1.0)
    return replace(patch, pixels=np.ascontiguousarray(px))


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: Path
    label: str  # authentic | tampered
    mask_path: Path | None = None


def _images_in(directory: Path) -> list[Path]:
    return sorted(p for p in directory.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _mask_index(paths: list[Path]) -> dict[str, Path]:
    index = {}
    for p in paths:
        stem = p.stem
        index.setdefault(stem, p)
        if stem.endswith("_gt"):
            index.setdefault(stem[:-3], p)
    return index


def load_dataset(root) -> list[ImageRecord]:
    """Index a dataset directory.

    Two layouts are understood: ``authentic/`` + ``tampered/`` (+ optional
    ``masks/``), or CASIA-style trees where file names starting with ``Au_``
    are authentic and ``Tp_`` tampered. A mask shares its tampered image's
    stem (a ``_gt`` suffix is also accepted). Records are sorted by id.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    mask_dir = root / "masks"
    masks = _mask_index(_images_in(mask_dir)) if mask_dir.is_dir() else {}
    records = []
    if (root / "authentic").is_dir() or (root / "tampered").is_dir():
        for label, sub in ((AUTHENTIC, "authentic"), (TAMPERED, "tampered")):
            d = root / sub
            if not d.is_dir():
                continue
            for p in _images_in(d):
                m = masks.get(p.stem) if label == TAMPERED else None
                records.append(ImageRecord(p.relative_to(root).as_posix(), p, label, m))
    else:
        files = [p for p in _images_in(root) if mask_dir not in p.parents]
        gt = {k: v for k, v in _mask_index([p for p in files if p.stem.endswith("_gt")]).items()}
        masks = {**gt, **masks}
        for p in files:
            name = p.name
            if name.startswith("Au_"):
                records.append(ImageRecord(p.relative_to(root).as_posix(), p, AUTHENTIC))
            elif name.startswith("Tp_") and not p.stem.endswith("_gt"):
                records.append(ImageRecord(p.relative_to(root).as_posix(), p, TAMPERED, masks.get(p.stem)))
    if not records:
        raise DataError(f"{root}: no authentic/tampered images found")
    return sorted(records, key=lambda r: r.image_id)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_fingerprint(records: list[ImageRecord]) -> str:
    """SHA-256 over the sorted per-file hashes (images and masks)."""
    hashes = []
    for r in records:
        hashes.append(file_sha256(r.path))
        if r.mask_path is not None:
            hashes.append(file_sha256(r.mask_path))
    return hashlib.sha256("\n".join(sorted(hashes)).encode()).hexdigest()

