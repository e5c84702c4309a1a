import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from splicenet import imaging
from splicenet.errors import ArgumentError, DataError, FormatError
from splicenet.imaging import AugmentConfig, Patch, augment, extract_patches, label_patches, to_grayscale


def test_load_ppm_scaling(tmp_path):
    p = tmp_path / "x.ppm"
    p.write_bytes(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 0]))
    img = imaging.load_image(p)
    assert img.shape == (1, 2, 3)
    np.testing.assert_array_equal(img.ravel(), [1, 0, 0, 0, 0, 0])


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        imaging.load_image(tmp_path / "nope.png")


def test_load_16bit_png(tmp_path):
    arr = np.array([[0, 65535], [1000, 32768]], dtype=np.uint16)
    p = tmp_path / "g16.png"
    Image.fromarray(arr).save(p)
    img = imaging.load_image(p)
    np.testing.assert_allclose(img[:, :, 0], arr / 65535.0)


def test_load_jpeg_and_png_rgb(tmp_path):
    arr = (np.arange(48).reshape(4, 4, 3) * 5).astype(np.uint8)
    Image.fromarray(arr).save(tmp_path / "a.png")
    np.testing.assert_allclose(imaging.load_image(tmp_path / "a.png"), arr / 255.0)
    Image.fromarray(arr).save(tmp_path / "a.jpg", quality=95)
    assert imaging.load_image(tmp_path / "a.jpg").shape == (4, 4, 3)


def test_load_tiff(tmp_path):
    arr = (np.arange(48).reshape(4, 4, 3) * 5).astype(np.uint8)
    Image.fromarray(arr).save(tmp_path / "a.tif")
    np.testing.assert_allclose(imaging.load_image(tmp_path / "a.tif"), arr / 255.0)


def test_unsupported_format(tmp_path):
    Image.fromarray(np.zeros((4, 4), np.uint8)).save(tmp_path / "a.bmp")
    with pytest.raises(FormatError):
        imaging.load_image(tmp_path / "a.bmp")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(FormatError):
        imaging.load_image(tmp_path / "junk.png")


def test_grayscale_coefficients():
    px = np.array([[[1.0, 0, 0], [1.0, 1.0, 1.0]]])
    g = to_grayscale(px)
    assert g.shape == (1, 2, 1)
    assert g[0, 0, 0] == pytest.approx(0.299)
    assert g[0, 1, 0] == pytest.approx(1.0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_grayscale_idempotent_and_order_preserving(vals):
    g = np.array(vals).reshape(1, -1, 1)
    assert to_grayscale(g) is g
    rgb = np.repeat(g, 3, axis=2)
    out = to_grayscale(rgb)[0, :, 0]
    np.testing.assert_allclose(out, g[0, :, 0], atol=1e-12)
    order = np.argsort(g[0, :, 0], kind="stable")
    assert np.all(np.diff(out[order]) >= -1e-12)


def test_patch_grid_square():
    img = np.zeros((128, 128, 1))
    ps = extract_patches(img, 64, 32)
    assert len(ps) == 9
    assert sorted({(p.x0, p.y0) for p in ps}) == [(x, y) for x in (0, 32, 64) for y in (0, 32, 64)]


def test_patch_grid_edge_anchor():
    img = np.zeros((64, 100, 3))
    ps = extract_patches(img, 64, 32)
    assert [p.x0 for p in ps] == [0, 32, 36]
    assert all(p.pixels.shape == (64, 64, 3) for p in ps)


def test_patch_stride_gap_rejected():
    with pytest.raises(ArgumentError):
        extract_patches(np.zeros((64, 64, 1)), 16, 17)


def test_patch_too_large():
    with pytest.raises(ArgumentError):
        extract_patches(np.zeros((32, 32, 1)), 64, 32)


@settings(max_examples=60, deadline=None)
@given(st.integers(8, 80), st.integers(8, 80), st.integers(1, 40), st.integers(1, 40))
def test_patch_coverage(h, w, size, stride):
    size = min(size, h, w)
    stride = min(stride, size)
    cover = np.zeros((h, w), dtype=int)
    for p in extract_patches(np.zeros((h, w, 1)), size, stride):
        assert p.x0 + size <= w and p.y0 + size <= h
        cover[p.y0:p.y0 + size, p.x0:p.x0 + size] += 1
    assert cover.min() >= 1


def test_label_rules():
    img = np.zeros((64, 64, 1))
    mask = np.zeros((64, 64), dtype=bool)
    ps = extract_patches(img, 32, 32)
    mask[0:32, 0:32] = True              # patch (0,0): fraction 1
    mask[0:5, 32:42] = True              # patch (32,0): 50/1024 ~ 0.049
    lab = {(p.x0, p.y0): p for p in label_patches(ps, mask, 0.10)}
    assert lab[(0, 0)].label == "tampered" and lab[(0, 0)].tamper_fraction == 1.0
    assert lab[(32, 0)].label == "unlabeled"
    assert lab[(32, 0)].tamper_fraction == pytest.approx(50 / 1024)
    assert lab[(0, 32)].label == "authentic" and lab[(0, 32)].tamper_fraction == 0.0


def test_label_dimension_mismatch():
    ps = extract_patches(np.zeros((64, 64, 1)), 32, 32)
    with pytest.raises(ArgumentError):
        label_patches(ps, np.zeros((64, 65), dtype=bool))


def _patch(px):
    return Patch("x", 0, 0, px.shape[0], px, px.shape[:2])


def test_augment_identity_when_disabled(rng):
    px = rng.random((32, 32, 3))
    cfg = AugmentConfig(p_flip=0, p_crop=0, p_color=0)
    np.testing.assert_array_equal(augment(_patch(px), cfg, rng).pixels, px)


def test_augment_flip_only():
    px = np.zeros((16, 16, 1))
    px[:, 8:] = 1.0
    cfg = AugmentConfig(p_flip=1, p_crop=0, p_color=0)
    out = augment(_patch(px), cfg, np.random.default_rng(0)).pixels
    assert np.all(out[:, :8] == 1.0) and np.all(out[:, 8:] == 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(16, 40))
def test_augment_dims_range_determinism(seed, n):
    px = np.random.default_rng(seed).random((n, n, 3))
    cfg = AugmentConfig(p_flip=0.5, p_crop=0.9, p_color=0.9)
    a = augment(_patch(px), cfg, np.random.default_rng(seed)).pixels
    b = augment(_patch(px), cfg, np.random.default_rng(seed)).pixels
    assert a.shape == px.shape
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert a.tobytes() == b.tobytes()


def test_augment_rejects_tiny_patch(rng):
    with pytest.raises(ArgumentError):
        augment(_patch(rng.random((8, 8, 1))), AugmentConfig(), rng)


def test_resize_bilinear_constant_and_identity(rng):
    img = rng.random((10, 12, 3))
    np.testing.assert_allclose(imaging.resize_bilinear(img, 10, 12), img)
    np.testing.assert_allclose(imaging.resize_bilinear(np.full((5, 5), 0.3), 17, 9), 0.3)


def _write(path, arr):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def test_dataset_split_layout(tmp_path):
    a = np.zeros((8, 8, 3), np.uint8)
    _write(tmp_path / "authentic" / "b.png", a)
    _write(tmp_path / "authentic" / "a.png", a)
    _write(tmp_path / "tampered" / "t1.png", a)
    _write(tmp_path / "tampered" / "t2.png", a)
    _write(tmp_path / "masks" / "t1.png", np.zeros((8, 8), np.uint8))
    recs = imaging.load_dataset(tmp_path)
    assert [r.image_id for r in recs] == ["authentic/a.png", "authentic/b.png", "tampered/t1.png", "tampered/t2.png"]
    assert recs[2].mask_path is not None and recs[3].mask_path is None


def test_dataset_casia_layout(tmp_path):
    a = np.zeros((8, 8, 3), np.uint8)
    _write(tmp_path / "Au" / "Au_ani_0001.jpg", a)
    _write(tmp_path / "Tp" / "Tp_D_xx_0001.jpg", a)
    _write(tmp_path / "GT" / "Tp_D_xx_0001_gt.png", np.zeros((8, 8), np.uint8))
    _write(tmp_path / "Tp" / "Tp_S_yy_0002.tif", a)
    recs = imaging.load_dataset(tmp_path)
    labels = {r.image_id: (r.label, r.mask_path is not None) for r in recs}
    assert labels == {"Au/Au_ani_0001.jpg": ("authentic", False), "Tp/Tp_D_xx_0001.jpg": ("tampered", True),
                      "Tp/Tp_S_yy_0002.tif": ("tampered", False)}


def test_dataset_empty(tmp_path):
    with pytest.raises(DataError):
        imaging.load_dataset(tmp_path)
