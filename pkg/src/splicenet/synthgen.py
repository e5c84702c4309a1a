"""Synthetic splicing / copy-move forgeries with ground-truth masks.

Includes a pixel-domain JPEG round trip (block DCT + quantisation, no entropy
coding) used to plant compression-history mismatches and by the ELA baseline.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .errors import ArgumentError
from .transforms import block_dct, block_idct, pad_to_blocks, to_blocks

# Annex K luminance quantisation table, natural (row-major) order.
LUMA_QTABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)


def quant_table(quality: int) -> np.ndarray:
    """libjpeg-style quality scaling of the luminance table."""
    if not 1 <= quality <= 100:
        raise ArgumentError(f"JPEG quality must be in [1, 100], got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.maximum(1, (LUMA_QTABLE * scale + 50) // 100).astype(np.float64)


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Compress and decompress through 8x8 DCT quantisation at ``quality``.

    The luminance table is used for every channel (no chroma subsampling).
    Output keeps the input shape and is clamped to [0, 1]; it is not rounded
    to 8 bits.
    """
    q = quant_table(quality)
    img = np.asarray(img, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w, c = img.shape
    out = np.empty_like(img)
    for ch in range(c):
        coeffs = block_dct(img[:, :, ch] * 255.0 - 128.0)
        coeffs = np.rint(coeffs / q) * q
        rec = block_idct(coeffs)[:h, :w]
        out[:, :, ch] = (rec + 128.0) / 255.0
    np.clip(out, 0.0, 1.0, out=out)
    return out[:, :, 0] if squeeze else out


# ---------------------------------------------------------------- procedural textures

def _value_noise(rng: np.random.Generator, h: int, w: int, octaves: int, base: int, persistence: float) -> np.ndarray:
    field_ = np.zeros((h, w))
    amp, total = 1.0, 0.0
    for o in range(octaves):
        cells = base * 2 ** o
        grid = rng.random((cells + 1, cells + 1))
        field_ += amp * imaging.resize_bilinear(grid, h, w)
        total += amp
        amp *= persistence
    return field_ / total


def procedural_image(rng: np.random.Generator, size: int = 256) -> np.ndarray:
    """Seeded RGB scene: multi-octave value noise, a colour gradient, a few
    flat-ish shapes and per-image Gaussian sensor noise."""
    h = w = size
    octaves = int(rng.integers(3, 7))
    base = int(rng.integers(2, 6))
    persistence = rng.uniform(0.35, 0.7)
    lum = _value_noise(rng, h, w, octaves, base, persistence)
    yy, xx = np.mgrid[0:h, 0:w] / size
    angle = rng.uniform(0, 2 * np.pi)
    grad = np.cos(angle) * xx + np.sin(angle) * yy
    tint = rng.uniform(0.3, 1.0, size=3)
    img = np.empty((h, w, 3))
    for ch in range(3):
        detail = _value_noise(rng, h, w, 2, base * 2, 0.5)
        img[:, :, ch] = 0.55 * lum * tint[ch] + 0.25 * grad * rng.uniform(0.2, 1.0) + 0.2 * detail
    for _ in range(int(rng.integers(2, 6))):
        cy, cx = rng.uniform(0, size, 2)
        ry, rx = rng.uniform(size / 16, size / 4, 2)
        inside = ((yy * size - cy) / ry) ** 2 + ((xx * size - cx) / rx) ** 2 <= 1.0
        colour = rng.uniform(0.0, 1.0, 3)
        shade = 0.85 + 0.15 * lum[..., None]
        img[inside] = (colour * shade)[inside]
    img -= img.min()
    img /= max(img.max(), 1e-12)
    img = 0.05 + 0.9 * img
    sigma = rng.uniform(0.004, 0.03)
    img += rng.normal(0.0, sigma, img.shape)
    return np.clip(img, 0.0, 1.0)


# ---------------------------------------------------------------- forgeries

@dataclass(frozen=True)
class SpliceSpec:
    donor_rect: tuple[int, int, int, int]  # x, y, w, h in the donor
    paste_xy: tuple[int, int]  # top-left in the target
    blend_width: int = 0
    donor_quality: int = 70
    target_quality: int = 95


@dataclass(frozen=True)
class CopyMoveSpec:
    source_rect: tuple[int, int, int, int]
    dest_xy: tuple[int, int]
    transform: str = "none"  # none | hflip | rotate90 | scale
    scale: float = 1.0


def _check_rect(rect, shape, what):
    x, y, w, h = rect
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > shape[1] or y + h > shape[0]:
        raise ArgumentError(f"{what} {rect} lies outside a {shape[1]}x{shape[0]} image")


def feather(h: int, w: int, blend_width: int) -> np.ndarray:
    """Alpha ramp rising linearly over ``blend_width`` pixels from each border."""
    def ramp(n):
        d = np.minimum(np.arange(1, n + 1), np.arange(n, 0, -1)).astype(np.float64)
        return np.minimum(1.0, d / (blend_width + 1))
    return np.minimum(ramp(h)[:, None], ramp(w)[None, :])


def make_splice(target: np.ndarray, donor: np.ndarray, spec: SpliceSpec, rng=None):
    """Paste a donor region (compressed at ``donor_quality``) into the target,
    then compress the composite at ``target_quality``.

    Returns ``(image, mask)``; the mask marks pixels whose paste alpha > 0.5.
    """
    x, y, w, h = spec.donor_rect
    px, py = spec.paste_xy
    _check_rect(spec.donor_rect, donor.shape, "donor region")
    _check_rect((px, py, w, h), target.shape, "paste region")
    if spec.blend_width < 0 or (spec.blend_width and 2 * spec.blend_width >= min(w, h)):
        raise ArgumentError("blend_width must satisfy 0 <= blend_width < min(w, h) / 2")
    if donor.shape[2] != target.shape[2]:
        raise ArgumentError("donor and target must have the same channel count")
    region = jpeg_roundtrip(donor, spec.donor_quality)[y:y + h, x:x + w]
    alpha = feather(h, w, spec.blend_width)[:, :, None]
    composite = target.copy()
    dst = composite[py:py + h, px:px + w]
    composite[py:py + h, px:px + w] = alpha * region + (1.0 - alpha) * dst
    mask = np.zeros(target.shape[:2], dtype=bool)
    mask[py:py + h, px:px + w] = alpha[:, :, 0] > 0.5
    return jpeg_roundtrip(composite, spec.target_quality), mask


def _transform_region(region: np.ndarray, spec: CopyMoveSpec) -> np.ndarray:
    if spec.transform == "none":
        return region
    if spec.transform == "hflip":
        return region[:, ::-1]
    if spec.transform == "rotate90":
        return np.rot90(region)
    if spec.transform == "scale":
        if not 0.5 <= spec.scale <= 2.0:
            raise ArgumentError(f"scale must be in [0.5, 2], got {spec.scale}")
        h, w = region.shape[:2]
        return imaging.resize_bilinear(region, max(1, round(h * spec.scale)), max(1, round(w * spec.scale)))
    raise ArgumentError(f"unknown copy-move transform {spec.transform!r}")


def make_copy_move(img: np.ndarray, spec: CopyMoveSpec, rng=None):
    """Duplicate a (possibly transformed) region within one image.

    Returns ``(image, mask)`` with the mask covering the destination.
    """
    _check_rect(spec.source_rect, img.shape, "source region")
    x, y, w, h = spec.source_rect
    region = _transform_region(img[y:y + h, x:x + w].copy(), spec)
    rh, rw = region.shape[:2]
    dx, dy = spec.dest_xy
    _check_rect((dx, dy, rw, rh), img.shape, "destination region")
    out = img.copy()
    out[dy:dy + rh, dx:dx + rw] = region
    mask = np.zeros(img.shape[:2], dtype=bool)
    mask[dy:dy + rh, dx:dx + rw] = True
    return out, mask


# ---------------------------------------------------------------- dataset generation

@dataclass
class SynthConfig:
    n_authentic: int = 100
    n_tampered: int = 100
    size: int = 256
    seed: int = 42
    donor_quality: tuple[int, int] = (70, 70)
    target_quality: tuple[int, int] = (95, 95)
    region_size: tuple[int, int] = (48, 112)
    blend_width: tuple[int, int] = (0, 4)
    copymove_fraction: float = 0.0
    base_images: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        for key in ("donor_quality", "target_quality", "region_size", "blend_width"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _base_image(rng, cfg: SynthConfig, bases: list[np.ndarray]) -> np.ndarray:
    if not bases:
        return procedural_image(rng, cfg.size)
    src = bases[int(rng.integers(len(bases)))]
    if src.shape[2] == 1:
        src = np.repeat(src, 3, axis=2)
    h, w = src.shape[:2]
    if min(h, w) < cfg.size:
        src = imaging.resize_bilinear(src, max(cfg.size, h), max(cfg.size, w))
        h, w = src.shape[:2]
    y = int(rng.integers(h - cfg.size + 1))
    x = int(rng.integers(w - cfg.size + 1))
    return src[y:y + cfg.size, x:x + cfg.size].copy()


def _randint(rng, lo_hi):
    lo, hi = lo_hi
    return int(rng.integers(lo, hi + 1))


def _tampered_item(rng, cfg: SynthConfig, bases):
    target = _base_image(rng, cfg, bases)
    tq = _randint(rng, cfg.target_quality)
    w = _randint(rng, cfg.region_size)
    h = _randint(rng, cfg.region_size)
    n = cfg.size
    if rng.random() < cfg.copymove_fraction:
        transform = ["none", "hflip", "rotate90", "scale"][int(rng.integers(4))]
        scale = float(np.round(rng.uniform(0.75, 1.25), 3)) if transform == "scale" else 1.0
        sx, sy = int(rng.integers(n - w + 1)), int(rng.integers(n - h + 1))
        ow, oh = (h, w) if transform == "rotate90" else (w, h)
        if transform == "scale":
            ow, oh = max(1, round(w * scale)), max(1, round(h * scale))
        dx, dy = int(rng.integers(n - ow + 1)), int(rng.integers(n - oh + 1))
        spec = CopyMoveSpec((sx, sy, w, h), (dx, dy), transform, scale)
        img, mask = make_copy_move(jpeg_roundtrip(target, tq), spec, rng)
        return jpeg_roundtrip(img, tq), mask, "copymove", {**asdict(spec), "quality": tq}
    donor = _base_image(rng, cfg, bases)
    bw = min(_randint(rng, cfg.blend_width), (min(w, h) - 1) // 2)
    spec = SpliceSpec(
        (int(rng.integers(n - w + 1)), int(rng.integers(n - h + 1)), w, h),
        (int(rng.integers(n - w + 1)), int(rng.integers(n - h + 1))),
        bw, _randint(rng, cfg.donor_quality), tq,
    )
    img, mask = make_splice(target, donor, spec, rng)
    return img, mask, "splice", asdict(spec)


def generate_dataset(cfg: SynthConfig, out_dir) -> dict:
    """Write ``authentic/``, ``tampered/``, ``masks/`` and ``manifest.json``.

    Every item draws from its own child of ``SeedSequence(cfg.seed)``, so the
    whole directory is reproducible bit-for-bit from the manifest.
    """
    if cfg.n_authentic < 0 or cfg.n_tampered < 0:
        raise ArgumentError("image counts must be non-negative")
    out = Path(out_dir)
    for sub in ("authentic", "tampered", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    bases = [imaging.load_image(p) for p in cfg.base_images]
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_authentic + cfg.n_tampered)
    items = []
    for i in range(cfg.n_authentic):
        rng = np.random.default_rng(children[i])
        q = _randint(rng, cfg.target_quality)
        img = jpeg_roundtrip(_base_image(rng, cfg, bases), q)
        name = f"authentic/Au_{i:04d}.png"
        imaging.save_png(img, out / name)
        items.append({"file": name, "kind": "authentic", "item_seed_index": i, "quality": q, "mask": None})
    for j in range(cfg.n_tampered):
        idx = cfg.n_authentic + j
        rng = np.random.default_rng(children[idx])
        img, mask, kind, spec = _tampered_item(rng, cfg, bases)
        name = f"tampered/Tp_{j:04d}.png"
        mask_name = f"masks/Tp_{j:04d}.png"
        imaging.save_png(img, out / name)
        imaging.save_png(mask, out / mask_name)
        items.append({"file": name, "kind": kind, "item_seed_index": idx, "spec": spec, "mask": mask_name})
    cfg_dict = asdict(cfg)
    manifest = {"seed": cfg.seed, "config": cfg_dict, "items": items}
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.replace(out / "manifest.json")
    return manifest
