"""Forward model of the imaging chain.

Covers the MTF-matched Gaussian blur bank, Wald-style degradation of a
high-resolution image to the observed low-resolution one, construction of
the per-band extended panchromatic image, and a seeded synthetic scene
generator so the whole pipeline can be exercised without satellite data.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor


@dataclass(frozen=True)
class BlurBank:
    """Per-band blur kernels modelling the multispectral sensor MTF.

    kernels is (count, N, N) with count 1 (shared) or one per band; every
    kernel is nonnegative, sums to 1 and is symmetric under 180-degree
    rotation. gnyq records the per-kernel gain at Nyquist used to build it
    (None for hand-supplied kernels).
    """

    kernels: np.ndarray
    r: int
    gnyq: tuple | None = None

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.float64)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[1] != k.shape[2] or k.shape[1] % 2 == 0:
            raise ValueError(f"kernels must be (count, N, N) with N odd, got {k.shape}")
        if np.any(k < 0):
            raise ValueError("blur kernels must be nonnegative")
        sums = k.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise ValueError(f"blur kernels must sum to 1, got sums {sums}")
        if not np.allclose(k, k[:, ::-1, ::-1], atol=1e-12, rtol=0.0):
            raise ValueError("blur kernels must be symmetric under 180-degree rotation")
        object.__setattr__(self, "kernels", np.ascontiguousarray(k))

    @property
    def size(self):
        return self.kernels.shape[1]


def mtf_gaussian_sigma(gnyq, r):
    """Spatial std of a Gaussian whose MTF has gain `gnyq` at the low-res Nyquist."""
    if not 0.0 < gnyq < 1.0:
        raise ValueError(f"gain at Nyquist must lie in (0, 1), got {gnyq}")
    return (r / math.pi) * math.sqrt(2.0 * math.log(1.0 / gnyq))


def mtf_kernel_bank(gnyq, r, n=41):
    """Truncated, renormalized isotropic Gaussian kernels matched to the MTF.

    gnyq: a single gain in (0, 1) shared by all bands, or one per band.
    n: odd kernel size, at least 4r + 1 so the Gaussian support is covered.
    """
    gains = tuple(np.atleast_1d(np.asarray(gnyq, dtype=np.float64)))
    if n % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {n}")
    if n < 4 * r + 1:
        raise ValueError(f"kernel size {n} too small for ratio {r}; need at least {4 * r + 1}")
    coords = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    d2 = coords[:, None] ** 2 + coords[None, :] ** 2
    kernels = []
    for g in gains:
        sigma = mtf_gaussian_sigma(float(g), r)
        k = np.exp(-d2 / (2.0 * sigma * sigma))
        kernels.append(k / k.sum())
    return BlurBank(np.stack(kernels), r=int(r), gnyq=tuple(float(g) for g in gains))


def degrade(x, bank, r=None, offset=0, noise_amp=0.0, rng=None):
    """Blur with the bank, then decimate: the low-resolution observation.

    noise_amp > 0 adds zero-mean Gaussian noise with that std (off by
    default; pass an rng for reproducibility).
    """
    r = bank.r if r is None else int(r)
    y = tensor.decimate(tensor.conv2d_same(x, bank.kernels), r, offset)
    if noise_amp > 0.0:
        rng = np.random.default_rng() if rng is None else rng
        y = y + noise_amp * rng.standard_normal(y.shape)
    return y


def extend_pan(p, y):
    """Replicate the PAN per band, matching each band's mean/std to the LRMS.

    Statistics use the population (1/N) convention and come from the raw
    low-resolution bands. The result is not clamped and may leave [0, 1].
    """
    p = tensor.as_tensor2(p, "pan")
    y = tensor.as_tensor3(y, "lrms")
    p_std = float(p.std())
    if p_std == 0.0:
        raise ValueError("constant PAN image: cannot match band statistics")
    p_centered = (p - p.mean()) / p_std
    band_std = y.std(axis=(0, 1))
    band_mean = y.mean(axis=(0, 1))
    return p_centered[:, :, None] * band_std[None, None, :] + band_mean[None, None, :]


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a deterministic synthetic scene."""

    seed: int
    height: int = 64
    width: int = 64
    bands: int = 4
    pan_weights: tuple | None = None
    texture_scales: tuple = (2.0, 6.0)
    rects: int = 8

    def resolved_weights(self):
        if self.pan_weights is None:
            return np.full(self.bands, 1.0 / self.bands)
        w = np.asarray(self.pan_weights, dtype=np.float64)
        if w.shape != (self.bands,) or np.any(w < 0):
            raise ValueError("pan_weights must be nonnegative with one entry per band")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("pan_weights must sum to 1")
        return w


def _gaussian_blur_field(field, scale):
    n = min(2 * int(math.ceil(3.0 * scale)) + 1, 2 * min(field.shape) + 1)
    coords = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    d2 = coords[:, None] ** 2 + coords[None, :] ** 2
    k = np.exp(-d2 / (2.0 * scale * scale))
    k /= k.sum()
    return tensor.conv2d_same(field[:, :, None], k)[:, :, 0]


def _rescale01(a):
    lo, hi = float(a.min()), float(a.max())
    if hi - lo < 1e-12:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def synth_scene(spec: SceneSpec):
    """Deterministic test scene: (ground-truth HRMS, PAN).

    The ground truth shares one spatial structure across bands (smooth
    multi-scale fields plus sharp rectangles), affinely recolored per band
    into [0.05, 0.95]. The PAN is the weighted band sum, contrast-stretched
    to the same range, which leaves a mild, non-constant mismatch between
    the PAN and any single band.
    """
    rng = np.random.default_rng(spec.seed)
    h, w, s = spec.height, spec.width, spec.bands

    structure = np.zeros((h, w), dtype=np.float64)
    for scale_px in spec.texture_scales:
        structure += _gaussian_blur_field(rng.standard_normal((h, w)), float(scale_px))
    structure = _rescale01(structure)

    boxes = np.zeros((h, w), dtype=np.float64)
    for _ in range(spec.rects):
        bh = int(rng.integers(max(2, h // 16), max(3, h // 3)))
        bw = int(rng.integers(max(2, w // 16), max(3, w // 3)))
        top = int(rng.integers(0, h - bh))
        left = int(rng.integers(0, w - bw))
        boxes[top : top + bh, left : left + bw] += float(rng.uniform(-1.0, 1.0))
    structure = _rescale01(structure + 0.6 * _rescale01(boxes))

    x_gt = np.empty((h, w, s), dtype=np.float64)
    for b in range(s):
        gain = float(rng.uniform(0.5, 1.0))
        bias = float(rng.uniform(0.0, 1.0 - gain))
        x_gt[:, :, b] = 0.05 + 0.9 * (gain * structure + bias)

    weights = spec.resolved_weights()
    pan = np.tensordot(x_gt, weights, axes=([2], [0]))
    pan = 0.05 + 0.9 * _rescale01(pan)
    return x_gt, pan
