"""Backend selection for the hot kernels.

BEAMCOOL_BACKEND=numpy forces the pure-numpy path; BEAMCOOL_BACKEND=numba
requires numba. Default: numba when importable, else numpy. The two backends
share signatures, record layouts and noise streams; they differ only in
floating-point summation order.
"""

import os

from . import rng  # noqa: F401  (re-exported)

_FORCED = os.environ.get("BEAMCOOL_BACKEND", "").strip().lower()


def _load_numba():
    from . import numba_impl
    return numba_impl


def _load_numpy():
    from . import numpy_impl
    return numpy_impl


if _FORCED == "numpy":
    backend = _load_numpy()
elif _FORCED == "numba":
    backend = _load_numba()
elif _FORCED == "":
    try:
        backend = _load_numba()
    except ImportError:
        backend = _load_numpy()
else:
    raise RuntimeError(
        f"BEAMCOOL_BACKEND={_FORCED!r} not recognized (use numpy or numba)")


def backend_name():
    return backend.BACKEND_NAME


def get_backend(name=None):
    """Return a kernel module by name (None = the active default)."""
    if name is None:
        return backend
    if name == "numpy":
        return _load_numpy()
    if name == "numba":
        return _load_numba()
    raise ValueError(f"unknown backend {name!r}")
