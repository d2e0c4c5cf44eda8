# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: separable correlation and 26-connectivity labeling."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def correlate0(double[:, ::1] padded, double[::1] weights, Py_ssize_t m):
    """Correlate along axis 0 of an already padded 2D float64 array.

    Accumulation order per output element matches the NumPy fallback
    (ascending tap index, float64), so both backends agree bit for bit.
    """
    cdef Py_ssize_t taps = weights.shape[0]
    cdef Py_ssize_t rest = padded.shape[1]
    out_arr = np.zeros((m, rest), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double wk
    for i in range(m):
        for k in range(taps):
            wk = weights[k]
            for j in range(rest):
                out[i, j] = out[i, j] + wk * padded[i + k, j]
    return out_arr


cdef inline cnp.int32_t _find(cnp.int32_t[::1] parent, cnp.int32_t x) nogil:
    cdef cnp.int32_t root = x
    while parent[root] != root:
        root = parent[root]
    # path compression
    cdef cnp.int32_t nxt
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def label26(cnp.uint8_t[:, :, ::1] fg):
    """Two-pass union-find labeling of 26-connected foreground components.

    Returns (labels int32 array, component count); labels are compacted in
    first-voxel scan order.
    """
    cdef Py_ssize_t nx = fg.shape[0]
    cdef Py_ssize_t ny = fg.shape[1]
    cdef Py_ssize_t nz = fg.shape[2]

    labels_arr = np.zeros((nx, ny, nz), dtype=np.int32)
    cdef cnp.int32_t[:, :, ::1] labels = labels_arr

    cdef Py_ssize_t nfg = 0
    cdef Py_ssize_t x, y, z
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if fg[x, y, z]:
                    nfg += 1
    if nfg == 0:
        return labels_arr, 0

    parent_arr = np.zeros(nfg + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] parent = parent_arr

    # backward half of the 26-neighborhood in (x, y, z) scan order
    cdef int offs[13][3]
    cdef int oi = 0
    cdef int dx, dy, dz
    for dx in range(-1, 1):
        for dy in range(-1, 2):
            for dz in range(-1, 2):
                if dx == 0 and (dy > 0 or (dy == 0 and dz >= 0)):
                    continue
                if dx == 0 and dy == 0 and dz == 0:
                    continue
                offs[oi][0] = dx
                offs[oi][1] = dy
                offs[oi][2] = dz
                oi += 1

    cdef cnp.int32_t next_label = 0
    cdef cnp.int32_t lab, root, nroot
    cdef Py_ssize_t px, py, pz
    cdef int k
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if not fg[x, y, z]:
                    continue
                lab = 0
                for k in range(13):
                    px = x + offs[k][0]
                    py = y + offs[k][1]
                    pz = z + offs[k][2]
                    if px < 0 or py < 0 or pz < 0 or py >= ny or pz >= nz:
                        continue
                    if labels[px, py, pz] == 0:
                        continue
                    nroot = _find(parent, labels[px, py, pz])
                    if lab == 0:
                        lab = nroot
                    elif nroot != lab:
                        if nroot < lab:
                            parent[lab] = nroot
                            lab = nroot
                        else:
                            parent[nroot] = lab
                if lab == 0:
                    next_label += 1
                    parent[next_label] = next_label
                    lab = next_label
                labels[x, y, z] = lab

    # compact roots to 1..count in first-voxel scan order
    remap_arr = np.zeros(next_label + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] remap = remap_arr
    cdef cnp.int32_t count = 0
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                lab = labels[x, y, z]
                if lab == 0:
                    continue
                root = _find(parent, lab)
                if remap[root] == 0:
                    count += 1
                    remap[root] = count
                labels[x, y, z] = remap[root]

    return labels_arr, int(count)
