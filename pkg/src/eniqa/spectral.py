"""Frequency-domain tools: DFT wrappers, the log-Gabor bank and SR saliency."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgio import round_half_away

__all__ = [
    "LogGaborParams",
    "SubBand",
    "dft2",
    "idft2",
    "frequency_grid",
    "log_gabor_gain",
    "build_filter_bank",
    "apply_filter_bank",
    "quantize_minmax",
    "spectral_residual_saliency",
    "resize_nn",
]

# magnitude ranges below this are treated as flat (pure round-off)
FLAT_RANGE = 1e-8

SR_WIDTH = 64
SR_BOX = 3
SR_SIGMA = 2.5
SR_RADIUS = 5
SR_EPS = 1e-12


@dataclass(frozen=True)
class LogGaborParams:
    """Log-Gabor bank settings.

    ``center_wavelengths`` are in pixels (center frequency = 1 / wavelength
    cycles/pixel), listed shortest first. ``sigma_ratio`` is sigma_r / f0
    and ``sigma_theta`` the angular spread in radians.
    """

    center_wavelengths: tuple = (3.0, 6.0)
    orientations: tuple = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
    sigma_ratio: float = 0.55
    sigma_theta: float = math.pi / 6

    def __post_init__(self):
        object.__setattr__(self, "center_wavelengths",
                           tuple(float(v) for v in self.center_wavelengths))
        object.__setattr__(self, "orientations", tuple(float(v) for v in self.orientations))
        if len(self.center_wavelengths) != 2:
            raise ValueError("exactly 2 center wavelengths are required")
        if len(self.orientations) != 4:
            raise ValueError("exactly 4 orientations are required")
        if any(wl < 2.0 for wl in self.center_wavelengths):
            raise ValueError("center wavelengths must be >= 2 pixels (f0 <= 0.5)")
        if not 0.0 < self.sigma_ratio < 1.0:
            raise ValueError("sigma_ratio must lie in (0, 1)")
        if not self.sigma_theta > 0.0:
            raise ValueError("sigma_theta must be positive")

    @property
    def center_freqs(self) -> tuple:
        return tuple(1.0 / wl for wl in self.center_wavelengths)


@dataclass(frozen=True)
class SubBand:
    freq_index: int
    orient_index: int
    magnitude: np.ndarray
    quantized: np.ndarray


def dft2(x) -> np.ndarray:
    """Unnormalized forward 2-D DFT (any size; numpy's pocketfft is mixed-radix)."""
    return np.fft.fft2(np.asarray(x, dtype=np.float64))


def idft2(spectrum) -> np.ndarray:
    """Inverse 2-D DFT, scaled by 1/(w*h). Returns the complex result."""
    return np.fft.ifft2(spectrum)


def frequency_grid(width: int, height: int):
    """Radial frequency (cycles/pixel) and angle on the unshifted DFT grid.

    Angles are measured counter-clockwise from the +x axis with the image
    y axis pointing down, so a vertical-stripe grating sits at 0 rad.
    """
    fx = np.fft.fftfreq(width)[None, :]
    fy = np.fft.fftfreq(height)[:, None]
    radius = np.hypot(fx, fy)
    theta = np.arctan2(-fy, fx)
    return radius, np.broadcast_to(theta, radius.shape)


def log_gabor_gain(f, theta, f0, theta0, sigma_ratio, sigma_theta):
    """Log-Gabor transfer function; exactly 0 at f = 0."""
    f = np.asarray(f, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    with np.errstate(divide="ignore"):
        lr = np.log(np.where(f > 0, f, 1.0) / f0)
    radial = np.exp(-(lr ** 2) / (2.0 * math.log(sigma_ratio) ** 2))
    radial = np.where(f > 0, radial, 0.0)
    d = theta - theta0
    dtheta = np.arctan2(np.sin(d), np.cos(d))
    angular = np.exp(-(dtheta ** 2) / (2.0 * sigma_theta ** 2))
    g = radial * angular
    return g if g.ndim else float(g)


@functools.lru_cache(maxsize=16)
def _bank_cached(width: int, height: int, params: LogGaborParams):
    radius, theta = frequency_grid(width, height)
    bank = []
    for f0 in params.center_freqs:
        for th0 in params.orientations:
            g = log_gabor_gain(radius, theta, f0, th0, params.sigma_ratio, params.sigma_theta)
            g.setflags(write=False)
            bank.append(g)
    return tuple(bank)


def build_filter_bank(width: int, height: int, params: LogGaborParams | None = None):
    """Eight gain maps, ordered frequency-major: f0[0] x 4 angles, then f0[1]."""
    return list(_bank_cached(int(width), int(height), params or LogGaborParams()))


def quantize_minmax(m) -> np.ndarray:
    """Min-max stretch to 0..255 with half-away rounding; flat maps become 0."""
    m = np.asarray(m, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    if hi - lo <= FLAT_RANGE:
        return np.zeros(m.shape, dtype=np.uint8)
    q = round_half_away(255.0 * (m - lo) / (hi - lo))
    return np.clip(q, 0, 255).astype(np.uint8)


def apply_filter_bank(gray, params: LogGaborParams | None = None) -> list:
    """Filter ``gray`` with the bank and return the eight :class:`SubBand` s."""
    g = np.asarray(gray, dtype=np.float64)
    h, w = g.shape
    spectrum = dft2(g)
    out = []
    for idx, gain in enumerate(build_filter_bank(w, h, params)):
        mag = np.abs(idft2(spectrum * gain))
        out.append(SubBand(idx // 4, idx % 4, mag, quantize_minmax(mag)))
    return out


def resize_nn(arr, out_h: int, out_w: int) -> np.ndarray:
    arr = np.asarray(arr)
    h, w = arr.shape[:2]
    rows = np.minimum((np.arange(out_h) * h) // out_h, h - 1)
    cols = np.minimum((np.arange(out_w) * w) // out_w, w - 1)
    return arr[rows[:, None], cols[None, :]]


def spectral_residual_saliency(gray) -> np.ndarray:
    """Spectral-residual saliency map at the input resolution.

    The image is brought to width 64, the log-amplitude spectrum has its
    3x3 local mean removed, and the squared inverse transform (with the
    original phase) is Gaussian smoothed and resized back. A constant
    image has no residual structure and yields an all-zero map.
    """
    g = np.asarray(gray, dtype=np.float64)
    h, w = g.shape
    sh = max(1, int(round_half_away(h * SR_WIDTH / w)))
    small = resize_nn(g, sh, SR_WIDTH)
    if np.ptp(small) == 0:
        return np.zeros((h, w))
    spectrum = dft2(small)
    log_amp = np.log(np.abs(spectrum) + SR_EPS)
    phase = np.angle(spectrum)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=SR_BOX, mode="nearest")
    sal = np.abs(idft2(np.exp(residual + 1j * phase))) ** 2
    sal = ndimage.gaussian_filter(sal, sigma=SR_SIGMA, mode="nearest", radius=SR_RADIUS)
    return np.maximum(resize_nn(sal, h, w), 0.0)
