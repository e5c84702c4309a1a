import numpy as np
import pytest

from splicenet import _pykernels, kernels

try:
    from splicenet import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="Cython extension not built")


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
@pytest.mark.parametrize("shape", [(3, 3), (5, 9), (64, 64), (17, 31)])
def test_correlate_backends_agree(rng, shape):
    img = rng.random(shape)
    k = rng.standard_normal((4, 3, 3))
    np.testing.assert_allclose(_ckernels.correlate3x3_valid(img, k), _pykernels.correlate3x3_valid(img, k),
                               rtol=0, atol=1e-12)


@needs_ext
@pytest.mark.parametrize("shape", [(3, 3), (8, 8), (64, 64), (13, 40)])
def test_lbp_backends_agree(rng, shape):
    img = np.round(rng.random(shape) * 4) / 4  # many ties
    np.testing.assert_array_equal(_ckernels.lbp_codes(img), _pykernels.lbp_codes(img))


@needs_ext
def test_row_moments_backends_agree(rng):
    x = rng.standard_normal((6, 500)) ** 3
    np.testing.assert_allclose(_ckernels.row_moments(x), _pykernels.row_moments(x), rtol=1e-12, atol=1e-12)


def test_correlate_is_correlation_not_convolution():
    img = np.zeros((3, 3))
    img[0, 0] = 1.0
    k = np.arange(9.0).reshape(3, 3)
    assert kernels.correlate3x3_valid(img, k)[0, 0, 0] == 0.0  # k[0, 0] * 1
    img = np.zeros((3, 3))
    img[2, 2] = 1.0
    assert kernels.correlate3x3_valid(img, k)[0, 0, 0] == 8.0


def test_row_moments_two_pass_oracle(rng):
    x = rng.random((2, 50))
    got = kernels.row_moments(x)
    for row, g in zip(x, got):
        vals = [float(v) for v in row]
        mu = sum(vals) / len(vals)
        c = [v - mu for v in vals]
        want = [mu, sum(abs(v) for v in vals) / 50, sum(d ** 2 for d in c) / 50,
                sum(d ** 3 for d in c) / 50, sum(d ** 4 for d in c) / 50]
        np.testing.assert_allclose(g, want, rtol=1e-12, atol=1e-15)


def test_benchmark_script_runs(capsys):
    import runpy
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    mod = runpy.run_path(str(script), run_name="bench")
    assert mod["main"](["--repeat", "2", "--patch", "16"]) == 0
    out = capsys.readouterr().out
    for name in ("correlate3x3_valid", "lbp_codes", "row_moments", "patch_vector"):
        assert name in out
