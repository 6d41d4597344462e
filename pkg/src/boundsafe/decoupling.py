"""Texture-bearing core built from an independently posed inner primitive."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    KINDS,
    AffineTransform,
    Primitive,
    random_affine,
    random_rotation,
    rasterize,
    voxelize,
)

INNER_FRACTION_RANGE = (0.4, 0.9)
INNER_OFFSET_FRACTION = 0.25
INNER_SCALE_RANGE = (0.8, 1.25)
INNER_SHIFT_RANGE = (-2.0, 2.0)


@dataclass
class CoreRegion:
    mask: np.ndarray
    inner_primitive: Primitive
    inner_affine: AffineTransform

    @property
    def voxels(self) -> np.ndarray:
        return np.argwhere(self.mask)

    def __len__(self):
        return int(self.mask.sum())


def safe_zone(distance: np.ndarray, tau_shell: int, tau_gap: int) -> np.ndarray:
    return np.asarray(distance) > tau_shell + tau_gap


def core_region(
    distance: np.ndarray,
    inner: Primitive,
    affine: AffineTransform,
    tau_shell: int,
    tau_gap: int,
    box: tuple[slice, slice, slice] | None = None,
) -> CoreRegion:
    """Intersect the transformed inner primitive with {D > tau_shell + tau_gap}.

    ``distance`` covers the full domain, or only ``box`` when given (the
    inner primitive is then rasterized in that block's global coordinates).
    """
    zone = safe_zone(distance, tau_shell, tau_gap)
    if box is None:
        inner_mask = voxelize(inner, distance.shape, transform=affine)
    else:
        inner_mask = rasterize(inner, box, affine)
    return CoreRegion(inner_mask & zone, inner, affine)


def sample_inner(rng: np.random.Generator, outer: Primitive) -> tuple[Primitive, AffineTransform]:
    """Draw an inner primitive and its random affine, independent of the outer shape.

    Only the outer center and size are used, to keep the inner shape inside
    the object; kind and rotation come from fresh draws.
    """
    kind_rng, pose_rng, affine_rng = (np.random.default_rng(int(s)) for s in rng.integers(0, 2**63 - 1, 3))
    kind = KINDS[kind_rng.integers(len(KINDS))]
    outer_half = np.asarray(outer.half_extents) * np.asarray(outer.pose.scale)
    size = float(outer_half.min())
    he = size * pose_rng.uniform(*INNER_FRACTION_RANGE, 3)
    offset = pose_rng.uniform(-INNER_OFFSET_FRACTION, INNER_OFFSET_FRACTION, 3) * size
    pose = AffineTransform(random_rotation(pose_rng), (1.0, 1.0, 1.0), tuple(outer.center + offset))
    affine = random_affine(affine_rng, rotation=True, scale_range=INNER_SCALE_RANGE, translation_range=INNER_SHIFT_RANGE)
    return Primitive(kind, tuple(he), pose), affine
