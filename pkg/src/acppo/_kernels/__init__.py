"""Kernel backend selection.

The hot numerical kernels (discount scans, MLP forward/backward, Adam) exist
twice: a compiled Cython extension (``_native``) and a pure-numpy fallback
(``_numpy``). The backend is chosen once at import time:

  ACPPO_KERNELS=native   require the compiled extension (ImportError if absent)
  ACPPO_KERNELS=numpy    force the pure-python fallback
  unset / auto           use the extension when importable, else fall back

``acppo.cli bench`` compares the two backends on representative workloads.
"""

import os

from . import _numpy

_requested = os.environ.get("ACPPO_KERNELS", "auto").lower()

if _requested not in ("auto", "native", "numpy"):
    raise ValueError(
        f"ACPPO_KERNELS must be 'auto', 'native' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = _numpy
else:
    try:
        from . import _native as _impl
    except ImportError:
        if _requested == "native":
            raise
        _impl = _numpy

BACKEND = _impl.NAME

discount_scan = _impl.discount_scan
mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
adam_step = _impl.adam_step


def available_backends():
    """Names of the importable kernel backends."""
    names = ["numpy"]
    try:
        from . import _native  # noqa: F401

        names.append("native")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the backend module for ``name`` ('numpy' or 'native')."""
    if name == "numpy":
        return _numpy
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown kernel backend {name!r}")
