"""Dense tensor conventions and the deterministic numerical kernels.

Images are plain numpy arrays: multiband tensors are band-last (H, W, S)
float arrays, single-band images are (H, W). All operations here are pure
functions; given finite inputs they produce finite outputs, which the test
suite asserts rather than every call re-scanning its result.

Convolution semantics used throughout: stride 1, output the same size as
the input, symmetric (edge-including) mirror padding, kernels applied
flipped (true convolution). The pad half-width must not exceed the image
extent, so the mirror is a single fold.
"""

import numpy as np

from . import _kernels

EPS_DIV = 1e-8

FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Raised when an operand has the wrong shape or an invalid size."""


def as_tensor3(x, name="tensor"):
    """Validate and return a band-last (H, W, S) float array."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeError(f"{name} must be 3-D (H, W, S), got shape {x.shape}")
    if x.dtype not in FLOAT_DTYPES:
        x = x.astype(np.float64)
    if min(x.shape) < 1:
        raise ShapeError(f"{name} has an empty axis: {x.shape}")
    return np.ascontiguousarray(x)


def as_tensor2(x, name="image"):
    """Validate and return an (H, W) float array."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"{name} must be 2-D (H, W), got shape {x.shape}")
    if x.dtype not in FLOAT_DTYPES:
        x = x.astype(np.float64)
    if min(x.shape) < 1:
        raise ShapeError(f"{name} has an empty axis: {x.shape}")
    return np.ascontiguousarray(x)


def _check_kernels(x, kernels):
    kernels = np.asarray(kernels)
    if kernels.ndim == 2:
        kernels = kernels[None]
    if kernels.ndim != 3 or kernels.shape[1] != kernels.shape[2]:
        raise ShapeError(f"kernels must be (N, N) or (count, N, N), got {kernels.shape}")
    n = kernels.shape[1]
    if n % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {n}")
    if kernels.shape[0] not in (1, x.shape[2]):
        raise ShapeError(
            f"kernel count must be 1 or match the {x.shape[2]} bands, got {kernels.shape[0]}"
        )
    if (n - 1) // 2 > min(x.shape[0], x.shape[1]):
        raise ShapeError(
            f"kernel {n}x{n} larger than the padded extent of a {x.shape[0]}x{x.shape[1]} image"
        )
    return np.ascontiguousarray(kernels.astype(x.dtype, copy=False))


def conv2d_same(x, kernels):
    """Per-band true convolution with mirror padding, same output size.

    kernels: a single (N, N) kernel shared by every band, or one kernel per
    band stacked as (S, N, N). N must be odd.
    """
    x = as_tensor3(x)
    kernels = _check_kernels(x, kernels)
    return _kernels.conv_bank(x, kernels)


def conv2d_same_adjoint(g, kernels):
    """Adjoint of conv2d_same with respect to the image argument."""
    g = as_tensor3(g)
    kernels = _check_kernels(g, kernels)
    return _kernels.conv_bank_adjoint(g, kernels)


def decimate(x, r, offset=0):
    """Keep every r-th sample per axis, starting at `offset`."""
    x = as_tensor3(x)
    r = int(r)
    if r < 1:
        raise ShapeError(f"decimation factor must be >= 1, got {r}")
    if not 0 <= offset < r:
        raise ShapeError(f"offset must lie in [0, {r}), got {offset}")
    h, w, _ = x.shape
    if h % r or w % r:
        raise ShapeError(f"image {h}x{w} not divisible by factor {r}")
    return np.ascontiguousarray(x[offset::r, offset::r, :])


def zero_insert(y, r, offset=0):
    """Adjoint of decimate: place samples on the fine grid, zeros elsewhere."""
    y = as_tensor3(y)
    r = int(r)
    if r < 1:
        raise ShapeError(f"factor must be >= 1, got {r}")
    if not 0 <= offset < r:
        raise ShapeError(f"offset must lie in [0, {r}), got {offset}")
    h, w, s = y.shape
    out = np.zeros((h * r, w * r, s), dtype=y.dtype)
    out[offset::r, offset::r, :] = y
    return out


# Catmull-Rom bicubic, a = -0.5. Low-res sample (i, j) sits at high-res
# coordinate (r*i + (r-1)/2, r*j + (r-1)/2).
_CUBIC_A = -0.5


def _cubic_kernel(t):
    t = np.abs(t)
    a = _CUBIC_A
    near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _cubic_taps(n_low, r):
    """Per high-res index: 4 reflected source indices and their weights."""
    hi = np.arange(n_low * r)
    s = (hi - (r - 1) / 2.0) / r
    i0 = np.floor(s).astype(np.int64)
    frac = s - i0
    offs = np.arange(-1, 3)
    idx = i0[:, None] + offs[None, :]
    wts = _cubic_kernel(frac[:, None] - offs[None, :])
    idx = np.where(idx < 0, -idx - 1, idx)
    idx = np.where(idx >= n_low, 2 * n_low - 1 - idx, idx)
    return idx, wts


def upsample(y, r):
    """Bicubic upsampling by an integer factor, mirror boundary."""
    y = as_tensor3(y)
    r = int(r)
    if r < 1:
        raise ShapeError(f"upsampling factor must be >= 1, got {r}")
    if r == 1:
        return y.copy()
    h, w, _ = y.shape
    if min(h, w) < 2:
        raise ShapeError(f"bicubic upsampling needs both axes >= 2, got {h}x{w}")
    ridx, rwts = _cubic_taps(h, r)
    tmp = np.einsum("it,itws->iws", rwts, y[ridx], optimize=True)
    cidx, cwts = _cubic_taps(w, r)
    out = np.einsum("jt,ijts->ijs", cwts, tmp[:, cidx], optimize=True)
    return np.ascontiguousarray(out.astype(y.dtype, copy=False))


def upsample_adjoint(g, r, h, w):
    """Adjoint of upsample, mapping a (h*r, w*r, S) gradient to (h, w, S)."""
    g = as_tensor3(g)
    r = int(r)
    if g.shape[:2] != (h * r, w * r):
        raise ShapeError(f"gradient {g.shape[:2]} does not match ({h * r}, {w * r})")
    if r == 1:
        return g.copy()
    cidx, cwts = _cubic_taps(w, r)
    tmp = np.zeros((g.shape[0], w, g.shape[2]), dtype=g.dtype)
    for t in range(4):
        np.add.at(tmp, (slice(None), cidx[:, t]), g * cwts[None, :, t, None])
    ridx, rwts = _cubic_taps(h, r)
    out = np.zeros((h, w, g.shape[2]), dtype=g.dtype)
    for t in range(4):
        np.add.at(out, ridx[:, t], tmp * rwts[:, t, None, None])
    return out


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")


def ew_add(x, y):
    _check_same_shape(x, y)
    return x + y


def ew_sub(x, y):
    _check_same_shape(x, y)
    return x - y


def ew_mul(x, y):
    _check_same_shape(x, y)
    return x * y


def ew_div_guarded(x, y):
    """Elementwise division with denominators pushed away from zero.

    Denominators with magnitude below EPS_DIV are replaced by +-EPS_DIV
    (sign of zero taken as positive).
    """
    _check_same_shape(x, y)
    guarded = np.where(np.abs(y) < EPS_DIV, np.where(y < 0, -EPS_DIV, EPS_DIV), y)
    return x / guarded


def scale(x, c):
    return x * float(c)


def frob_sq(x):
    """Sum of squared samples (the squared Frobenius norm)."""
    x = np.asarray(x)
    return float(np.sum(x * x))


def concat_bands(x, y):
    """Stack two band-last tensors along the band axis."""
    x, y = as_tensor3(x), as_tensor3(y)
    if x.shape[:2] != y.shape[:2]:
        raise ShapeError(f"spatial shape mismatch: {x.shape[:2]} vs {y.shape[:2]}")
    return np.concatenate([x, y], axis=2)
