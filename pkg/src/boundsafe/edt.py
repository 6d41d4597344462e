"""Exact Euclidean distance transform and 6-connected boundary extraction.

Distances are measured from each foreground voxel center to the nearest
background voxel center, in voxel units.  The transform runs three 1D
lower-envelope-of-parabolas passes on integer squared distances, so the
squared result is exact.
"""

import numba
import numpy as np

_INF = np.int64(1) << np.int64(50)


class NoBackgroundError(ValueError):
    pass


@numba.njit(cache=True)
def _envelope_1d(f, out, v, z):
    """Lower envelope of parabolas (q - p)² + f[p] over finite sites p."""
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq >= _INF:
            continue
        while k >= 0:
            p = v[k]
            # intersection abscissa of parabolas rooted at p and q
            s = ((fq + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
        else:
            p = v[k]
            s = ((fq + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
            k += 1
            v[k] = q
            z[k] = s
    if k < 0:
        for q in range(n):
            out[q] = _INF
        return
    j = 0
    for q in range(n):
        while j < k and z[j + 1] < q:
            j += 1
        p = v[j]
        out[q] = (q - p) * (q - p) + f[p]


@numba.njit(cache=True)
def _pass_last_axis(a):
    """Apply the 1D envelope along the last axis of a 2D (lines, n) array in place."""
    nlines, n = a.shape
    f = np.empty(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1, dtype=np.float64)
    for i in range(nlines):
        for q in range(n):
            f[q] = a[i, q]
        _envelope_1d(f, out, v, z)
        for q in range(n):
            a[i, q] = out[q]


def squared_edt(mask: np.ndarray) -> np.ndarray:
    """Exact squared distance (int64) from each voxel to the nearest background voxel."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 3 or min(m.shape) < 1:
        raise ValueError(f"mask must be a non-degenerate 3D array, got shape {m.shape}")
    if m.all():
        raise NoBackgroundError("no background reference: mask is all foreground")
    d = np.where(m, _INF, np.int64(0))
    for axis in range(3):
        moved = np.ascontiguousarray(np.moveaxis(d, axis, -1))
        flat = moved.reshape(-1, moved.shape[-1])
        _pass_last_axis(flat)
        d = np.moveaxis(flat.reshape(moved.shape), -1, axis)
    return np.ascontiguousarray(d)


def compute_edt(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance field; zero on background, >= 1 on foreground."""
    return np.sqrt(squared_edt(mask).astype(np.float64))


def signed_edt(mask: np.ndarray) -> np.ndarray:
    """Distance inside minus distance outside; positive in the foreground."""
    m = np.asarray(mask, dtype=bool)
    inside = compute_edt(m)
    outside = compute_edt(~m) if m.any() else np.zeros(m.shape)
    return inside - outside


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Foreground voxels with a face-adjacent background voxel inside the domain."""
    m = np.asarray(mask, dtype=bool)
    # out-of-domain neighbours count as foreground, so domain faces are not boundary
    padded = np.pad(m, 1, mode="constant", constant_values=True)
    interior = np.ones_like(m)
    c = (slice(1, -1),) * 3
    for axis in range(3):
        for step in (-1, 1):
            sl = list(c)
            sl[axis] = slice(1 + step, padded.shape[axis] - 1 + step)
            interior &= padded[tuple(sl)]
    return m & ~interior


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Coordinates (N, 3) of boundary voxels in C order."""
    return np.argwhere(boundary_mask(mask))
