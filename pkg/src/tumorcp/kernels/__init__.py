"""Hot kernels with a compiled core and a NumPy/SciPy fallback.

The compiled Cython extension is used when it was built at install time;
otherwise the engine transparently runs on the fallback. Force a backend
with ``TUMORCP_KERNELS=cython`` or ``TUMORCP_KERNELS=numpy``.

Both backends are bit-for-bit equivalent: the Gaussian kernels accumulate
per output element in identical tap order with float64 arithmetic, and
component labels are canonicalized downstream, so results never depend on
which backend served a call.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import _numpy as _np_impl

_cy_impl = None
_forced = os.environ.get("TUMORCP_KERNELS", "").strip().lower()
if _forced in ("", "cy", "cython"):
    try:
        from . import _core as _cy_impl  # type: ignore[no-redef]
    except ImportError:
        if _forced:
            raise
elif _forced in ("py", "numpy"):
    _cy_impl = None
else:
    raise ValueError(f"unknown TUMORCP_KERNELS value: {_forced!r}")

BACKEND = "cython" if _cy_impl is not None else "numpy"
AVAILABLE_BACKENDS = ("numpy",) + (("cython",) if _cy_impl is not None else ())


def _impl(backend):
    if backend is None:
        return _cy_impl if _cy_impl is not None else _np_impl
    if backend == "numpy":
        return _np_impl
    if backend == "cython":
        if _cy_impl is None:
            raise RuntimeError("cython kernel backend was not built")
        return _cy_impl
    raise ValueError(f"unknown kernel backend: {backend!r}")


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian, truncated at 4*sigma (radius = ceil(4*sigma))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = int(math.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _correlate_axis(arr: np.ndarray, weights: np.ndarray, axis: int, impl) -> np.ndarray:
    m = arr.shape[axis]
    radius = (len(weights) - 1) // 2
    moved = np.moveaxis(arr, axis, 0)
    pad = [(radius, radius)] + [(0, 0)] * (arr.ndim - 1)
    padded = np.pad(moved, pad, mode="reflect" if m > 1 else "edge")
    flat = np.ascontiguousarray(padded.reshape(padded.shape[0], -1))
    out = impl.correlate0(flat, np.ascontiguousarray(weights), m)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def gaussian_blur(arr: np.ndarray, sigma: float, backend: str | None = None) -> np.ndarray:
    """Separable Gaussian smoothing with reflect boundaries.

    Accepts any real-valued 3D array; returns float64.
    """
    impl = _impl(backend)
    weights = gaussian_kernel1d(sigma)
    out = np.ascontiguousarray(arr, dtype=np.float64)
    for axis in range(out.ndim):
        out = _correlate_axis(out, weights, axis, impl)
    return out


def label_components(fg: np.ndarray, backend: str | None = None):
    """Label 26-connected components of a boolean grid.

    Returns ``(labels, count)`` with int32 labels in 1..count and 0 for
    background. Label numbering is backend-specific; callers needing a
    canonical order must sort components themselves.
    """
    impl = _impl(backend)
    fg8 = np.ascontiguousarray(fg, dtype=np.uint8)
    return impl.label26(fg8)
