"""Vectorized numpy implementations of the convolution kernels.

Fallback backend used when the compiled extension is unavailable (or when
forced via PSDIP_BACKEND=python). Semantics are identical to the compiled
core: true convolution (kernels flipped), symmetric mirror padding, single
reflection (pad never exceeds the image extent).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _reflect_indices(n, pad):
    # index map of the symmetric (edge-including) pad, one fold only
    idx = np.arange(-pad, n + pad)
    idx = np.where(idx < 0, -idx - 1, idx)
    idx = np.where(idx >= n, 2 * n - 1 - idx, idx)
    return idx


def _fold_symmetric(gpad, pad):
    """Adjoint of symmetric padding: accumulate padded borders back inside."""
    if pad == 0:
        return gpad.copy()
    hp, wp = gpad.shape[0], gpad.shape[1]
    h, w = hp - 2 * pad, wp - 2 * pad
    rows = _reflect_indices(h, pad)
    cols = _reflect_indices(w, pad)
    tmp = np.zeros((h,) + gpad.shape[1:], dtype=gpad.dtype)
    np.add.at(tmp, rows, gpad)
    out = np.zeros((h, w) + gpad.shape[2:], dtype=gpad.dtype)
    np.add.at(out, (slice(None), cols), tmp)
    return out


def conv_bank(x, kernels):
    """Per-band 2-D convolution, same size. x: (H,W,S), kernels: (kb,N,N)."""
    h, w, _ = x.shape
    n = kernels.shape[1]
    pad = (n - 1) // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)), mode="symmetric")
    kf = kernels[:, ::-1, ::-1]
    out = np.zeros_like(x)
    for u in range(n):
        for v in range(n):
            out += xp[u : u + h, v : v + w, :] * kf[:, u, v]
    return out


def conv_bank_adjoint(g, kernels):
    """Adjoint of conv_bank with respect to its image argument."""
    h, w, s = g.shape
    n = kernels.shape[1]
    pad = (n - 1) // 2
    kf = kernels[:, ::-1, ::-1]
    gpad = np.zeros((h + 2 * pad, w + 2 * pad, s), dtype=g.dtype)
    for u in range(n):
        for v in range(n):
            gpad[u : u + h, v : v + w, :] += g * kf[:, u, v]
    return _fold_symmetric(gpad, pad)


def conv_mix(x, w, b):
    """Channel-mixing 2-D convolution. x: (H,W,Cin), w: (k,k,Cin,Cout), b: (Cout,)."""
    h, wid, _ = x.shape
    k = w.shape[0]
    pad = (k - 1) // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)), mode="symmetric")
    win = sliding_window_view(xp, (k, k), axis=(0, 1))  # (H, W, Cin, k, k)
    wf = w[::-1, ::-1]
    out = np.tensordot(win, wf, axes=([3, 4, 2], [0, 1, 2]))
    out += b
    return np.ascontiguousarray(out)


def conv_mix_grads(x, w, g, need_x=True, need_w=True):
    """Gradients of conv_mix: returns (grad_x, grad_w, grad_b).

    g is the upstream gradient, shaped like the forward output. Entries not
    requested come back as None (grad_b is always computed; it is cheap).
    """
    h, wid, _ = x.shape
    k = w.shape[0]
    pad = (k - 1) // 2
    wf = w[::-1, ::-1]
    grad_b = g.sum(axis=(0, 1))

    grad_x = None
    if need_x:
        cin = x.shape[2]
        gpad = np.zeros((h + 2 * pad, wid + 2 * pad, cin), dtype=g.dtype)
        for u in range(k):
            for v in range(k):
                gpad[u : u + h, v : v + wid, :] += g @ wf[u, v].T
        grad_x = _fold_symmetric(gpad, pad)

    grad_w = None
    if need_w:
        xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)), mode="symmetric")
        win = sliding_window_view(xp, (k, k), axis=(0, 1))
        gwf = np.tensordot(win, g, axes=([0, 1], [0, 1]))  # (Cin, k, k, Cout)
        grad_w = np.ascontiguousarray(gwf.transpose(1, 2, 0, 3)[::-1, ::-1])

    return grad_x, grad_w, grad_b
