"""Geometric primitives, random poses and center-inside voxelization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

KINDS = ("ellipsoid", "cuboid", "cylinder", "cone", "prism")

MAX_FIT_ATTEMPTS = 1000


class PrimitiveFitError(ValueError):
    pass


def _as_shape(shape: Sequence[int]) -> tuple[int, int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise ValueError(f"domain shape must be 3 positive ints, got {shape}")
    return shape


@dataclass(frozen=True)
class AffineTransform:
    """Rigid rotation plus per-axis scale plus translation.

    Points map as ``x_world = R @ (scale * x_local) + translation``.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        R.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "scale", tuple(float(s) for s in self.scale))
        object.__setattr__(self, "translation", tuple(float(t) for t in self.translation))
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        if min(self.scale) <= 0:
            raise ValueError(f"scale must be strictly positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls()

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return (points * np.asarray(self.scale)) @ self.rotation.T + np.asarray(self.translation)

    def inverse_apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return ((points - np.asarray(self.translation)) @ self.rotation) / np.asarray(self.scale)

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "scale": list(self.scale),
            "translation": list(self.translation),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AffineTransform":
        return cls(np.array(d["rotation"]), tuple(d["scale"]), tuple(d["translation"]))

    def __eq__(self, other):
        if not isinstance(other, AffineTransform):
            return NotImplemented
        return (
            np.array_equal(self.rotation, other.rotation)
            and self.scale == other.scale
            and self.translation == other.translation
        )

    __hash__ = None


@dataclass(frozen=True)
class Primitive:
    kind: str
    half_extents: tuple[float, float, float]
    pose: AffineTransform = field(default_factory=AffineTransform)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        he = tuple(float(h) for h in self.half_extents)
        if len(he) != 3 or min(he) <= 0:
            raise ValueError(f"half_extents must be 3 positive reals, got {self.half_extents}")
        object.__setattr__(self, "half_extents", he)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.pose.translation)

    def bbox_half_size(self) -> np.ndarray:
        """Half-size of the world-space axis-aligned box enclosing the posed shape."""
        local = np.asarray(self.half_extents) * np.asarray(self.pose.scale)
        return np.abs(self.pose.rotation) @ local

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        h = self.bbox_half_size()
        return self.center - h, self.center + h

    def to_dict(self) -> dict:
        return {"kind": self.kind, "half_extents": list(self.half_extents), "pose": self.pose.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Primitive":
        return cls(d["kind"], tuple(d["half_extents"]), AffineTransform.from_dict(d["pose"]))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation from SO(3) via a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    # re-orthonormalize so RᵀR = I holds to ~1e-15
    u, _, vt = np.linalg.svd(R)
    return u @ vt


def random_affine(
    rng: np.random.Generator,
    rotation: bool = True,
    scale_range: tuple[float, float] = (1.0, 1.0),
    translation_range: tuple[float, float] = (0.0, 0.0),
) -> AffineTransform:
    lo, hi = scale_range
    if lo <= 0 or hi < lo:
        raise ValueError(f"scale_range must be a positive interval, got {scale_range}")
    R = random_rotation(rng) if rotation else np.eye(3)
    scale = rng.uniform(lo, hi, 3) if hi > lo else np.full(3, float(lo))
    tlo, thi = translation_range
    trans = rng.uniform(tlo, thi, 3) if thi > tlo else np.full(3, float(tlo))
    return AffineTransform(R, tuple(scale), tuple(trans))


def sample_primitive(
    rng: np.random.Generator,
    domain_shape: Sequence[int],
    size_range: tuple[float, float],
) -> Primitive:
    """Draw a random primitive whose posed bounding box fits inside the domain.

    Kind is uniform over ``KINDS``, half-extents are i.i.d. uniform in
    ``size_range`` and the rotation is uniform over SO(3).  Raises
    ``PrimitiveFitError`` after ``MAX_FIT_ATTEMPTS`` rejections.
    """
    shape = np.asarray(_as_shape(domain_shape), dtype=np.float64)
    lo, hi = size_range
    if not (0 < lo <= hi <= shape.min() / 2):
        raise PrimitiveFitError(
            f"primitive does not fit: size_range {size_range} outside (0, {shape.min() / 2}]"
        )
    for _ in range(MAX_FIT_ATTEMPTS):
        kind = KINDS[rng.integers(len(KINDS))]
        he = rng.uniform(lo, hi, 3)
        R = random_rotation(rng)
        half = np.abs(R) @ he
        cmin, cmax = half, shape - 1 - half
        if np.any(cmin > cmax):
            continue
        center = rng.uniform(cmin, cmax)
        return Primitive(kind, tuple(he), AffineTransform(R, (1.0, 1.0, 1.0), tuple(center)))
    raise PrimitiveFitError(
        f"primitive does not fit: no placement for size_range {size_range} "
        f"in domain {tuple(int(s) for s in shape)} after {MAX_FIT_ATTEMPTS} attempts"
    )


_KIND_ID = {k: i for i, k in enumerate(KINDS)}
_SQRT3_2 = float(np.sqrt(3.0) / 2.0)


def inside_canonical(kind: str, u: np.ndarray) -> np.ndarray:
    """Implicit inequality of each kind in coordinates normalized by half-extents.

    ``u`` has shape (..., 3); every shape fits inside the cube [-1, 1]³.
    """
    ux, uy, uz = u[..., 0], u[..., 1], u[..., 2]
    if kind == "ellipsoid":
        return ux * ux + uy * uy + uz * uz <= 1.0
    if kind == "cuboid":
        return (np.abs(ux) <= 1.0) & (np.abs(uy) <= 1.0) & (np.abs(uz) <= 1.0)
    if kind == "cylinder":
        return (ux * ux + uy * uy <= 1.0) & (np.abs(uz) <= 1.0)
    if kind == "cone":
        # apex at uz = +1, unit-radius base at uz = -1
        rad = 0.5 * (1.0 - uz)
        return (ux * ux + uy * uy <= rad * rad) & (np.abs(uz) <= 1.0)
    if kind == "prism":
        # triangular prism, triangle inscribed in the unit circle
        return (
            (-uy <= 0.5)
            & (_SQRT3_2 * ux + 0.5 * uy <= 0.5)
            & (-_SQRT3_2 * ux + 0.5 * uy <= 0.5)
            & (np.abs(uz) <= 1.0)
        )
    raise ValueError(f"unknown primitive kind {kind!r}")


@numba.njit(cache=True)
def _inside_scalar(kind, ux, uy, uz):
    if kind == 0:
        return ux * ux + uy * uy + uz * uz <= 1.0
    if abs(uz) > 1.0:
        return False
    if kind == 1:
        return abs(ux) <= 1.0 and abs(uy) <= 1.0
    if kind == 2:
        return ux * ux + uy * uy <= 1.0
    if kind == 3:
        rad = 0.5 * (1.0 - uz)
        return ux * ux + uy * uy <= rad * rad
    return -uy <= 0.5 and _SQRT3_2 * ux + 0.5 * uy <= 0.5 and -_SQRT3_2 * ux + 0.5 * uy <= 0.5


@numba.njit(cache=True)
def _raster(kind, lo, out, M, b):
    nx, ny, nz = out.shape
    for i in range(nx):
        x = float(lo[0] + i)
        for j in range(ny):
            y = float(lo[1] + j)
            for k in range(nz):
                z = float(lo[2] + k)
                ux = M[0, 0] * x + M[0, 1] * y + M[0, 2] * z + b[0]
                uy = M[1, 0] * x + M[1, 1] * y + M[1, 2] * z + b[1]
                uz = M[2, 0] * x + M[2, 1] * y + M[2, 2] * z + b[2]
                out[i, j, k] = _inside_scalar(kind, ux, uy, uz)


def local_map(p: Primitive, transform: AffineTransform | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Affine map (M, b) with ``u = M @ x + b`` taking world points to normalized local coords.

    ``transform`` acts on the posed primitive about its center.
    """
    # pose inverse: diag(1/s) Rᵀ (x - t), then divide by half-extents
    M = (p.pose.rotation.T / np.asarray(p.pose.scale)[:, None]) / np.asarray(p.half_extents)[:, None]
    b = -M @ np.asarray(p.pose.translation)
    if transform is not None:
        # about-center inverse: diag(1/s_a) R_aᵀ (x - c - t_a) + c
        c = p.center
        A = transform.rotation.T / np.asarray(transform.scale)[:, None]
        a = c - A @ (c + np.asarray(transform.translation))
        b = M @ a + b
        M = M @ A
    return np.ascontiguousarray(M), np.ascontiguousarray(b)


def contains(p: Primitive, points: np.ndarray, transform: AffineTransform | None = None) -> np.ndarray:
    """Boolean membership of world points; ``transform`` acts about the primitive center."""
    pts = np.asarray(points, dtype=np.float64)
    M, b = local_map(p, transform)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    u = np.stack([M[r, 0] * x + M[r, 1] * y + M[r, 2] * z + b[r] for r in range(3)], axis=-1)
    return inside_canonical(p.kind, u)


def voxel_bounds(
    p: Primitive, domain_shape: Sequence[int], pad: int = 0, transform: AffineTransform | None = None
) -> tuple[slice, slice, slice]:
    """Index box covering every voxel center the primitive can contain, grown by ``pad``."""
    shape = _as_shape(domain_shape)
    half = p.bbox_half_size()
    center = p.center
    if transform is not None:
        half = np.abs(transform.rotation) @ (np.asarray(transform.scale) * half)
        center = center + np.asarray(transform.translation)
    lo = np.floor(center - half).astype(int) - pad
    hi = np.ceil(center + half).astype(int) + 1 + pad
    return tuple(slice(max(0, int(a)), min(n, int(b))) for a, b, n in zip(lo, hi, shape))


def grid_points(box: tuple[slice, slice, slice]) -> np.ndarray:
    axes = [np.arange(s.start, s.stop, dtype=np.float64) for s in box]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack(g, axis=-1)


def rasterize(p: Primitive, box: tuple[slice, slice, slice], transform: AffineTransform | None = None) -> np.ndarray:
    """Occupancy of the voxel block ``box`` (global index ranges)."""
    shape = tuple(max(0, s.stop - s.start) for s in box)
    out = np.zeros(shape, dtype=np.bool_)
    if min(shape) > 0:
        M, b = local_map(p, transform)
        lo = np.array([s.start for s in box], dtype=np.int64)
        _raster(_KIND_ID[p.kind], lo, out, M, b)
    return out


def voxelize(
    p: Primitive,
    domain_shape: Sequence[int],
    transform: AffineTransform | None = None,
    box: tuple[slice, slice, slice] | None = None,
) -> np.ndarray:
    """Center-inside, boundary-inclusive occupancy mask of ``p``.

    Voxel ``(i, j, k)`` has its center at coordinates ``(i, j, k)``.  With
    ``box`` given, only that sub-block is rasterized and returned.
    """
    shape = _as_shape(domain_shape)
    if box is not None:
        return rasterize(p, box, transform)
    box = voxel_bounds(p, shape, pad=1, transform=transform)
    out = np.zeros(shape, dtype=bool)
    out[box] = rasterize(p, box, transform)
    return out


def rotate90(p: Primitive, domain_shape: Sequence[int], k: int = 1, axes: tuple[int, int] = (0, 1)) -> Primitive:
    """Rotate a primitive by k·90° in the plane ``axes`` about the domain center.

    Matches ``np.rot90(mask, k, axes)`` on cubic domains.
    """
    n = _as_shape(domain_shape)
    a, b = axes
    Q = np.eye(3)
    for _ in range(k % 4):
        # np.rot90 with axes (a, b): new[a] = n-1-old[b], new[b] = old[a]
        step = np.eye(3)
        step[[a, a, b, b], [a, b, a, b]] = [0.0, -1.0, 1.0, 0.0]
        Q = step @ Q
    c = (np.asarray(n, dtype=np.float64) - 1.0) / 2.0
    t = Q @ (np.asarray(p.pose.translation) - c) + c
    pose = AffineTransform(Q @ p.pose.rotation, p.pose.scale, tuple(t))
    return Primitive(p.kind, p.half_extents, pose)
