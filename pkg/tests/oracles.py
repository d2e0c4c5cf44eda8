"""Independent brute-force oracles used to freeze expected test values.

Everything here is deliberately naive and shares no code with the
implementation under test.
"""

import math
from collections import deque

import numpy as np

NEIGHBORS26 = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]


def flood_fill_components(fg):
    """BFS 26-connectivity component extraction.

    Returns a list of sorted voxel-coordinate lists, one per component,
    ordered by (size desc, first voxel).
    """
    fg = np.asarray(fg, dtype=bool)
    visited = np.zeros(fg.shape, dtype=bool)
    comps = []
    dims = fg.shape
    for seed in zip(*np.nonzero(fg)):
        if visited[seed]:
            continue
        comp = []
        q = deque([seed])
        visited[seed] = True
        while q:
            v = q.popleft()
            comp.append(tuple(int(c) for c in v))
            for d in NEIGHBORS26:
                w = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
                if all(0 <= w[a] < dims[a] for a in range(3)):
                    if fg[w] and not visited[w]:
                        visited[w] = True
                        q.append(w)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def is_connected_26(mask) -> bool:
    """True when all masked voxels form one 26-connected component."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return False
    return len(flood_fill_components(mask)) == 1


def paste_accounting(mask, location, dims):
    """Brute-force written/clipped voxel counts for a centered paste."""
    mask = np.asarray(mask, dtype=bool)
    ext = mask.shape
    lo = [location[a] - ext[a] // 2 for a in range(3)]
    written = clipped = 0
    written_coords = []
    for x in range(ext[0]):
        for y in range(ext[1]):
            for z in range(ext[2]):
                if not mask[x, y, z]:
                    continue
                t = (lo[0] + x, lo[1] + y, lo[2] + z)
                if all(0 <= t[a] < dims[a] for a in range(3)):
                    written += 1
                    written_coords.append(t)
                else:
                    clipped += 1
    return written, clipped, written_coords


def gaussian_center_weight(sigma: float) -> float:
    """Center tap of a normalized 1D Gaussian truncated at 4*sigma."""
    radius = math.ceil(4.0 * sigma)
    ks = [math.exp(-0.5 * (k / sigma) ** 2) for k in range(-radius, radius + 1)]
    return ks[radius] / sum(ks)


def masked_total_variation(values, mask) -> float:
    """Discrete 3D total variation over edges whose both ends are masked."""
    vals = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    tv = 0.0
    for axis in range(3):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[axis] = slice(1, None)
        b[axis] = slice(None, -1)
        both = mask[tuple(a)] & mask[tuple(b)]
        tv += float(np.abs(vals[tuple(a)] - vals[tuple(b)])[both].sum())
    return tv
