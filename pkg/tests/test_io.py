import numpy as np
import pytest
from dataclasses import replace

from PIL import Image

from splicenet import featio, heatmap, model_io
from splicenet.errors import ArgumentError, FormatError
from splicenet.imaging import extract_patches
from splicenet.siamese import init_net


def test_model_roundtrip_byte_identical(tmp_path, small_fit):
    b = small_fit.bundle
    p = tmp_path / "m.splm"
    model_io.save_model(b, p)
    first = p.read_bytes()
    assert first.startswith(b"SPLM1")
    loaded = model_io.load_model(p)
    model_io.save_model(loaded, tmp_path / "m2.splm")
    assert (tmp_path / "m2.splm").read_bytes() == first
    assert loaded.tau == b.tau and loaded.meta == b.meta
    x = np.random.default_rng(0).standard_normal((3, b.schema.total_dim))
    assert loaded.fusion.transform(x).tobytes() == b.fusion.transform(x).tobytes()


def test_truncated_and_corrupt(tmp_path, small_fit):
    data = model_io.to_bytes(small_fit.bundle)
    for cut in (3, 10, len(data) // 2, len(data) - 1):
        with pytest.raises(FormatError):
            model_io.from_bytes(data[:cut])
    flipped = bytearray(data)
    flipped[len(data) // 3] ^= 0xFF
    with pytest.raises(FormatError):
        model_io.from_bytes(bytes(flipped))
    with pytest.raises(FormatError):
        model_io.from_bytes(b"XXXXX" + data[5:])
    with pytest.raises(FormatError):
        model_io.from_bytes(data + b"\0")


def test_inconsistent_bundle_rejected(tmp_path, small_fit):
    b = small_fit.bundle
    bad = replace(b, net=init_net(b.fusion.pca.d_out + 1, 0))
    with pytest.raises(FormatError):
        model_io.save_model(bad, tmp_path / "bad.splm")
    assert not (tmp_path / "bad.splm").exists()


def test_feature_file_roundtrip(tmp_path):
    m = np.random.default_rng(1).standard_normal((7, 5))
    featio.write_features(tmp_path / "f.splf", m, {"k": [1, 2]})
    got, side = featio.read_features(tmp_path / "f.splf")
    np.testing.assert_array_equal(got, m.astype(np.float32))
    assert side == {"k": [1, 2]}
    raw = (tmp_path / "f.splf").read_bytes()
    assert len(raw) == 5 + 2 + 8 + 4 + 7 * 5 * 4
    (tmp_path / "g.splf").write_bytes(raw[:-2])
    with pytest.raises(FormatError):
        featio.read_features(tmp_path / "g.splf")


def test_colormap_monotone():
    cm = heatmap.colormap().astype(int)
    assert cm.shape == (256, 3)
    assert np.all(np.diff(cm, axis=0) >= 0)
    assert cm[0].tolist() == [0, 0, 0] and cm[-1].tolist() == [255, 255, 255]


def test_heatmap_uniform_and_single_hot(tmp_path):
    img = np.zeros((96, 96, 3))
    ps = extract_patches(img, 32, 32)
    rgb = heatmap.emit_heatmap((96, 96), ps, [1.0] * len(ps), tmp_path / "h.png")
    assert np.all(rgb == heatmap.colormap()[128])
    scores = [0.0] * len(ps)
    scores[4] = 5.0
    heatmap.emit_heatmap((96, 96), ps, scores, tmp_path / "h2.png")
    field = heatmap.score_field((96, 96), ps, scores)
    hot = field == field.max()
    assert hot[32:64, 32:64].all() and hot.sum() == 32 * 32
    assert Image.open(tmp_path / "h2.png").size == (96, 96)
    with pytest.raises(ArgumentError):
        heatmap.score_field((4, 4), [], [])


def test_heatmap_overlap_fade():
    ps = extract_patches(np.zeros((64, 64, 1)), 32, 16)
    scores = [0.0] * len(ps)
    scores[0] = 1.0
    field = heatmap.score_field((64, 64), ps, scores)
    assert field[0, 0] == 1.0 and 0 < field[20, 20] < 1 and field[40, 40] == 0
