"""Backend selection for the convolution hot kernels.

The compiled Cython core is preferred when importable; the vectorized numpy
module is the fallback. PSDIP_BACKEND=python or =compiled forces the choice
(the latter raises if the extension is missing).
"""

import os

from . import _numpy

_choice = os.environ.get("PSDIP_BACKEND", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(f"PSDIP_BACKEND must be auto, compiled or python, got {_choice!r}")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise RuntimeError("PSDIP_BACKEND=compiled but the extension is not built")
if _impl is None:
    _impl = _numpy

BACKEND = "compiled" if _impl is not _numpy else "python"

conv_bank = _impl.conv_bank
conv_bank_adjoint = _impl.conv_bank_adjoint
conv_mix = _impl.conv_mix
conv_mix_grads = _impl.conv_mix_grads


def backend_name() -> str:
    return BACKEND
