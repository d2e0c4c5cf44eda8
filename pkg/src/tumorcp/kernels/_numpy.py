"""NumPy/SciPy implementations of the hot kernels."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_STRUCT26 = np.ones((3, 3, 3), dtype=bool)


def correlate0(padded: np.ndarray, weights: np.ndarray, m: int) -> np.ndarray:
    """Correlate along axis 0 of an already padded 2D float64 array.

    ``padded`` has shape ``(m + len(weights) - 1, rest)``. Taps accumulate
    in ascending order, which the compiled backend mirrors exactly.
    """
    out = np.zeros((m, padded.shape[1]), dtype=np.float64)
    for k in range(len(weights)):
        out += weights[k] * padded[k : k + m]
    return out


def label26(fg: np.ndarray):
    """26-connectivity component labeling via scipy.ndimage."""
    labels, count = ndimage.label(fg, structure=_STRUCT26)
    return labels.astype(np.int32, copy=False), int(count)
