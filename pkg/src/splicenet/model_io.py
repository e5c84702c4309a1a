"""``SPLM1`` model bundle: everything needed to score an image, in one file.

Layout (all integers and floats little-endian)::

    b"SPLM1"  u16 version (=1)
    repeated sections, in this fixed order:
        4-byte ASCII tag, u64 payload length, payload
        "SCHM"  JSON {"names": [...], "groups": [...]}
        "FBNK"  u32 K, i64 seed, f64[K*9] kernels (row-major 3x3)
        "MASK"  u32 n, u8[n] selection mask (after group ablation)
        "STDZ"  u32 n, f64[n] mean, f64[n] std
        "PCA "  u32 d_out, u32 d_in, f64 variance_fraction,
                f64[d_in] mean, f64[d_out*d_in] components, f64[d_out] explained variance
        "NET "  u32 L, u32[L+1] dims, then per layer f64[fan_in*fan_out] weights
                (row-major, shape fan_in x fan_out) followed by f64[fan_out] bias
        "TAU "  f64 decision threshold
        "META"  JSON (sorted keys): extraction settings, config echo, dataset fingerprint
    b"END " u32 CRC-32 of every preceding byte
"""
from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .fusion import FeatureSchema, FusionModel, PcaModel, StandardizationStats
from .noisefeat import FilterBank
from .siamese import EmbeddingNet

MAGIC = b"SPLM1"
VERSION = 1
SECTION_ORDER = (b"SCHM", b"FBNK", b"MASK", b"STDZ", b"PCA ", b"NET ", b"TAU ", b"META")


@dataclass
class ModelBundle:
    schema: FeatureSchema
    bank: FilterBank
    fusion: FusionModel
    net: EmbeddingNet
    tau: float
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Check the dimension chain schema -> mask -> standardiser -> PCA -> network."""
        problems = []
        k = len(self.bank)
        if self.schema.group_size("noise") != 4 * k:
            problems.append(f"schema has {self.schema.group_size('noise')} noise features for a {k}-kernel bank")
        mask = self.fusion.mask
        if len(mask) != self.schema.total_dim:
            problems.append(f"mask length {len(mask)} != schema dim {self.schema.total_dim}")
        n_sel = int(np.count_nonzero(mask))
        if len(self.fusion.stats.mean) != n_sel or len(self.fusion.stats.std) != n_sel:
            problems.append(f"standardiser length {len(self.fusion.stats.mean)} != selected {n_sel}")
        if self.fusion.pca.d_in != n_sel or len(self.fusion.pca.mean) != n_sel:
            problems.append(f"PCA input dim {self.fusion.pca.d_in} != selected {n_sel}")
        if self.net.d_in != self.fusion.pca.d_out:
            problems.append(f"network input {self.net.d_in} != PCA output {self.fusion.pca.d_out}")
        if not np.isfinite(self.tau):
            problems.append("threshold is not finite")
        if problems:
            raise FormatError("inconsistent model bundle: " + "; ".join(problems))


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def to_bytes(bundle: ModelBundle) -> bytes:
    bundle.validate()
    f = bundle.fusion
    net = bundle.net
    sections = {
        b"SCHM": _json(bundle.schema.to_dict()),
        b"FBNK": struct.pack("<Iq", len(bundle.bank), int(bundle.bank.seed)) + _f64(bundle.bank.kernels),
        b"MASK": struct.pack("<I", len(f.mask)) + np.asarray(f.mask, dtype=np.uint8).tobytes(),
        b"STDZ": struct.pack("<I", len(f.stats.mean)) + _f64(f.stats.mean) + _f64(f.stats.std),
        b"PCA ": struct.pack("<IId", f.pca.d_out, f.pca.d_in, float(f.pca.variance_fraction))
        + _f64(f.pca.mean) + _f64(f.pca.components) + _f64(f.pca.explained_variance),
        b"NET ": struct.pack("<I", len(net.weights)) + struct.pack(f"<{len(net.dims)}I", *net.dims)
        + b"".join(_f64(w) + _f64(b) for w, b in zip(net.weights, net.biases)),
        b"TAU ": struct.pack("<d", float(bundle.tau)),
        b"META": _json(bundle.meta),
    }
    out = bytearray(MAGIC + struct.pack("<H", VERSION))
    for tag in SECTION_ORDER:
        payload = sections[tag]
        out += tag + struct.pack("<Q", len(payload)) + payload
    out += b"END "
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError("model file is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f64(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)

    def done(self):
        if self.pos != len(self.data):
            raise FormatError("section has trailing bytes")


def from_bytes(data: bytes) -> ModelBundle:
    if len(data) < len(MAGIC) + 2 + 8 or data[:len(MAGIC)] != MAGIC:
        raise FormatError("not an SPLM1 model file")
    if data[-8:-4] != b"END ":
        raise FormatError("model file is truncated")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise FormatError("model file checksum mismatch")
    r = _Reader(data[:-8])
    r.take(len(MAGIC))
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise FormatError(f"unsupported SPLM1 version {version}")
    sec = {}
    for tag in SECTION_ORDER:
        got = r.take(4)
        if got != tag:
            raise FormatError(f"expected section {tag!r}, found {got!r}")
        (n,) = r.unpack("<Q")
        sec[tag] = _Reader(r.take(n))
    r.done()
    try:
        schema = FeatureSchema.from_dict(json.loads(sec[b"SCHM"].take(len(sec[b"SCHM"].data))))
        s = sec[b"FBNK"]
        k, seed = s.unpack("<Iq")
        kernels = s.f64(9 * k).reshape(k, 3, 3)
        kernels.setflags(write=False)
        names = ("laplacian", "sobel_x", "sobel_y") + tuple(f"random{i}" for i in range(k - 3))
        bank = FilterBank(kernels, names, seed)
        s.done()
        s = sec[b"MASK"]
        (n,) = s.unpack("<I")
        mask = np.frombuffer(s.take(n), dtype=np.uint8).astype(bool)
        s.done()
        s = sec[b"STDZ"]
        (n,) = s.unpack("<I")
        stats = StandardizationStats(s.f64(n), s.f64(n))
        s.done()
        s = sec[b"PCA "]
        d_out, d_in, vf = s.unpack("<IId")
        pca = PcaModel(s.f64(d_in), s.f64(d_out * d_in).reshape(d_out, d_in), s.f64(d_out), vf)
        s.done()
        s = sec[b"NET "]
        (L,) = s.unpack("<I")
        dims = s.unpack(f"<{L + 1}I")
        weights, biases = [], []
        for fi, fo in zip(dims[:-1], dims[1:]):
            weights.append(s.f64(fi * fo).reshape(fi, fo))
            biases.append(s.f64(fo))
        s.done()
        (tau,) = sec[b"TAU "].unpack("<d")
        meta = json.loads(sec[b"META"].take(len(sec[b"META"].data)))
    except (ValueError, KeyError, TypeError, struct.error) as exc:
        raise FormatError(f"malformed model section: {exc}") from exc
    bundle = ModelBundle(schema, bank, FusionModel(mask, stats, pca), EmbeddingNet(weights, biases), tau, meta)
    bundle.validate()
    return bundle


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_model(bundle: ModelBundle, path) -> None:
    atomic_write(path, to_bytes(bundle))


def load_model(path) -> ModelBundle:
    return from_bytes(Path(path).read_bytes())
