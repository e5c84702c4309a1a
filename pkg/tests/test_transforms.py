import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dct2_direct
from splicenet import transforms
from splicenet.errors import ArgumentError


def test_dct_matrix_orthonormal():
    m = transforms.dct_matrix(8)
    np.testing.assert_allclose(m @ m.T, np.eye(8), atol=1e-14)


def test_zigzag_is_jpeg_scan():
    first = [(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (0, 3), (1, 2), (2, 1), (3, 0)]
    inv = {int(transforms.ZIGZAG[y, x]): (y, x) for y in range(8) for x in range(8)}
    assert [inv[i] for i in range(10)] == first
    assert inv[63] == (7, 7) and inv[62] == (7, 6)
    assert sorted(transforms.ZIGZAG.ravel()) == list(range(64))


def test_block_dct_constant():
    c = transforms.block_dct(np.full((8, 8), 0.3))
    assert c.shape == (1, 1, 8, 8)
    assert c[0, 0, 0, 0] == pytest.approx(2.4)
    ac = c[0, 0].ravel()[1:]
    assert np.abs(ac).max() < 1e-12


def test_block_dct_matches_direct(rng):
    for _ in range(3):
        b = rng.random((8, 8))
        np.testing.assert_allclose(transforms.block_dct(b)[0, 0], dct2_direct(b), atol=1e-9)


def test_block_dct_padding_and_shape(rng):
    img = rng.random((13, 20))
    c = transforms.block_dct(img)
    assert c.shape == (2, 3, 8, 8)
    rec = transforms.block_idct(c)
    np.testing.assert_allclose(rec[:13, :20], img, atol=1e-12)
    np.testing.assert_allclose(rec[13:, :20], np.repeat(img[-1:], 3, axis=0), atol=1e-12)


def test_block_dct_too_small():
    with pytest.raises(ArgumentError):
        transforms.block_dct(np.zeros((7, 30)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(8, 40), st.integers(8, 40))
def test_block_dct_parseval_and_roundtrip(seed, h, w):
    img = np.random.default_rng(seed).standard_normal((h, w))
    c = transforms.block_dct(img)
    padded = transforms.pad_to_blocks(img)
    np.testing.assert_allclose((c ** 2).sum(axis=(2, 3)), (transforms.to_blocks(padded) ** 2).sum(axis=(2, 3)),
                               rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(transforms.block_idct(c), padded, atol=1e-9)


def test_hann_periodic():
    w = transforms.hann(8)
    assert w[0] == 0.0 and w[4] == pytest.approx(1.0)
    spec = np.abs(np.fft.fft(w))
    assert np.all(spec[2:-1] < 1e-12)


def test_haar_level_orthonormal(rng):
    a = rng.standard_normal((6, 10))
    ll, lh, hl, hh = transforms.haar_level(a)
    assert ll.shape == (3, 5)
    energy = sum((b ** 2).sum() for b in (ll, lh, hl, hh))
    assert energy == pytest.approx((a ** 2).sum())


def test_haar_odd_truncation(rng):
    a = rng.standard_normal((7, 9))
    for x, y in zip(transforms.haar_level(a), transforms.haar_level(a[:6, :8])):
        np.testing.assert_array_equal(x, y)


def test_haar_too_small():
    with pytest.raises(ArgumentError):
        transforms.haar_dwt(np.zeros((3, 8)), levels=2)
