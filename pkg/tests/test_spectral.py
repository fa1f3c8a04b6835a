import math

import numpy as np
import pytest

from eniqa.spectral import (LogGaborParams, apply_filter_bank, build_filter_bank, dft2,
                            frequency_grid, idft2, log_gabor_gain, quantize_minmax, resize_nn,
                            spectral_residual_saliency)


def direct_dft(x):
    """O(N^2) definition: X[u,v] = sum x[m,n] exp(-2 pi i (um/H + vn/W))."""
    h, w = x.shape
    m = np.arange(h)
    n = np.arange(w)
    Eh = np.exp(-2j * np.pi * np.outer(m, m) / h)
    Ew = np.exp(-2j * np.pi * np.outer(n, n) / w)
    out = np.zeros((h, w), complex)
    for u in range(h):
        for v in range(w):
            out[u, v] = np.sum(x * Eh[u][:, None] * Ew[v][None, :])
    return out


def test_dft_constant_and_impulse():
    c = np.full((6, 10), 3.5)
    X = dft2(c)
    assert abs(X[0, 0] - 3.5 * 60) < 1e-9
    X[0, 0] = 0
    assert np.abs(X).max() < 1e-9
    d = np.zeros((5, 7))
    d[0, 0] = 1
    np.testing.assert_allclose(dft2(d), np.ones((5, 7)), atol=1e-12)


@pytest.mark.parametrize("shape", [(12, 17), (16, 16), (7, 11), (1, 9)])
def test_dft_matches_direct_sum(rng, shape):
    x = rng.normal(size=shape)
    X = dft2(x)
    np.testing.assert_allclose(X, direct_dft(x), atol=1e-9)
    assert np.abs(idft2(X) - x).max() < 1e-9


def test_round_trip_256(rng):
    x = rng.uniform(0, 255, (256, 256))
    assert np.abs(idft2(dft2(x)).real - x).max() < 1e-9


def test_gain_examples():
    f0, th0, sr, st = 1 / 3, 0.3, 0.55, math.pi / 6
    assert log_gabor_gain(f0, th0, f0, th0, sr, st) == 1.0
    for th in (0.0, 1.0, -2.0):
        assert log_gabor_gain(0.0, th, f0, th0, sr, st) == 0.0
    d = st * math.sqrt(2 * math.log(2))
    assert abs(log_gabor_gain(f0, th0 + d, f0, th0, sr, st) - 0.5) <= 1e-12
    # angular wrap: theta0 + 2 pi is the same direction
    assert abs(log_gabor_gain(f0, th0 + 2 * math.pi, f0, th0, sr, st) - 1.0) <= 1e-12
    # one octave radial spread: exp(-(ln 2)^2 / (2 ln(0.55)^2))
    want = math.exp(-math.log(2) ** 2 / (2 * math.log(sr) ** 2))
    assert abs(log_gabor_gain(2 * f0, th0, f0, th0, sr, st) - want) <= 1e-12


def test_bank_contract_256():
    p = LogGaborParams()
    bank = build_filter_bank(256, 256, p)
    assert len(bank) == 8
    radius, theta = frequency_grid(256, 256)
    for idx, g in enumerate(bank):
        assert g[0, 0] == 0.0
        assert g.max() <= 1.0
        f0 = p.center_freqs[idx // 4]
        th0 = p.orientations[idx % 4]
        # nearest grid point to the nominal peak
        fx, fy = f0 * math.cos(th0), -f0 * math.sin(th0)
        j = int(round(fx * 256)) % 256
        i = int(round(fy * 256)) % 256
        assert g[i, j] >= 0.95
        assert 0.95 <= g.max() <= 1.0


def test_params_validation():
    with pytest.raises(ValueError):
        LogGaborParams(center_wavelengths=(3.0,))
    with pytest.raises(ValueError):
        LogGaborParams(center_wavelengths=(1.5, 6.0))
    with pytest.raises(ValueError):
        LogGaborParams(sigma_ratio=1.2)
    with pytest.raises(ValueError):
        LogGaborParams(orientations=(0, 1))


def test_constant_image_gives_zero_bands():
    bands = apply_filter_bank(np.full((40, 48), 123.0))
    assert len(bands) == 8
    for b in bands:
        assert b.magnitude.max() < 1e-6 * 255
        assert not b.quantized.any()


@pytest.mark.parametrize("f_index", [0, 1])
def test_grating_orientation_selectivity(f_index):
    p = LogGaborParams()
    f0 = p.center_freqs[f_index]
    yy, xx = np.mgrid[:128, :128].astype(float)
    for o, th in enumerate(p.orientations):
        # wave vector at angle th (y axis down, angles counter-clockwise)
        g = 128 + 100 * np.cos(2 * np.pi * f0 * (xx * math.cos(th) - yy * math.sin(th)))
        bands = apply_filter_bank(g, p)
        means = [bands[4 * f_index + k].magnitude.mean() for k in range(4)]
        assert int(np.argmax(means)) == o


def test_rotation_by_90_permutes_bands(rng):
    # odd square size keeps the frequency grid symmetric under rotation
    g = rng.uniform(0, 255, (65, 65))
    a = apply_filter_bank(g)
    b = apply_filter_bank(np.rot90(g))
    for f in range(2):
        for o in range(4):
            np.testing.assert_allclose(np.rot90(a[4 * f + o].magnitude),
                                       b[4 * f + (o + 2) % 4].magnitude, atol=1e-8)


def test_filtering_is_linear(rng):
    x = rng.normal(size=(30, 34))
    y = rng.normal(size=(30, 34))
    for g in build_filter_bank(34, 30):
        fx = idft2(dft2(x) * g)
        fy = idft2(dft2(y) * g)
        np.testing.assert_allclose(idft2(dft2(2 * x - 3 * y) * g), 2 * fx - 3 * fy, atol=1e-9)


def test_bands_have_valid_quantization(rng):
    for b in apply_filter_bank(rng.uniform(0, 255, (33, 50))):
        assert b.quantized.dtype == np.uint8 and b.quantized.shape == (33, 50)
        assert b.quantized.min() == 0 and b.quantized.max() == 255


def test_quantize_minmax():
    q = quantize_minmax(np.array([[1.0, 2.0], [3.0, 5.0]]))
    assert q.tolist() == [[0, 64], [128, 255]]
    assert not quantize_minmax(np.full((3, 3), 2.0)).any()


def test_saliency_shape_and_constant():
    for shape in [(48, 64), (37, 90), (100, 40)]:
        s = spectral_residual_saliency(np.full(shape, 80.0))
        assert s.shape == shape
        assert np.ptp(s) == 0


def test_saliency_bright_block():
    # Box widths that divide the 64-column working grid put exact zeros in
    # the spectrum, and log(0 + 1e-12) then swamps the residual. 112 columns
    # map the 8-pixel block to an odd width, which has no such nulls.
    g = np.full((84, 112), 60.0)
    g[28:36, 56:64] = 250
    small = resize_nn(g, 48, 64)
    assert np.abs(dft2(small)).min() > 1e-3
    s = spectral_residual_saliency(g)
    inside = np.zeros(g.shape, bool)
    inside[28:36, 56:64] = True
    assert s[inside].mean() > s[~inside].mean()
