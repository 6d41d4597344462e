"""Scene sampling and rendering of image / instance-label pairs.

A ``SceneSpec`` is a complete, JSON-serializable record of one volume.
Rendering is a pure function of the scene record, so any volume can be rebuilt
bit-exactly from its sidecar.
"""

from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from .config import GenConfig
from .decoupling import core_region, sample_inner
from .edt import compute_edt
from .geometry import AffineTransform, Primitive, sample_primitive, voxel_bounds, voxelize
from .shielding import ShieldParams, Stratum, partition_regions, render_shield
from .texture import BASIS_KINDS, MixtureParams, sample_basis, sample_mixture_weights, synthesize_texture

MAX_OVERLAP_FRACTION = 0.3
OVERLAP_TRIES = 10
INNER_TRIES = 10

_GEOM, _INTENSITY, _INNER, _TEXTURE = range(4)


def _f32(x: float) -> float:
    # intensities are stored as float32; keep the sampled values exactly representable
    return float(np.float32(x))


@dataclass(frozen=True)
class ObjectSpec:
    primitive: Primitive
    shield: ShieldParams
    mixture: MixtureParams
    inner_primitive: Primitive | None = None
    inner_affine: AffineTransform | None = None

    def to_dict(self) -> dict:
        return {
            "primitive": self.primitive.to_dict(),
            "shield_params": self.shield.to_dict(),
            "mixture_params": self.mixture.to_dict(),
            "inner_primitive": self.inner_primitive.to_dict() if self.inner_primitive else None,
            "inner_affine": self.inner_affine.to_dict() if self.inner_affine else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        return cls(
            Primitive.from_dict(d["primitive"]),
            ShieldParams.from_dict(d["shield_params"]),
            MixtureParams.from_dict(d["mixture_params"]),
            Primitive.from_dict(d["inner_primitive"]) if d.get("inner_primitive") else None,
            AffineTransform.from_dict(d["inner_affine"]) if d.get("inner_affine") else None,
        )


@dataclass(frozen=True)
class SceneSpec:
    domain_shape: tuple[int, int, int]
    global_seed: int
    volume_index: int
    mu_bg: float
    mode: str
    objects: tuple[ObjectSpec, ...]
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "domain_shape", tuple(int(s) for s in self.domain_shape))
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.objects:
            raise ValueError("a scene needs at least one object")
        if self.mode not in ("shielded", "naive"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def with_mode(self, mode: str) -> "SceneSpec":
        return SceneSpec(self.domain_shape, self.global_seed, self.volume_index, self.mu_bg, mode,
                         self.objects, {**self.config, "mode": mode})

    def to_dict(self) -> dict:
        return {
            "domain_shape": list(self.domain_shape),
            "global_seed": self.global_seed,
            "volume_index": self.volume_index,
            "mu_bg": self.mu_bg,
            "mode": self.mode,
            "objects": [o.to_dict() for o in self.objects],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            tuple(d["domain_shape"]),
            int(d["global_seed"]),
            int(d["volume_index"]),
            float(d["mu_bg"]),
            d["mode"],
            tuple(ObjectSpec.from_dict(o) for o in d["objects"]),
            dict(d.get("config") or {}),
        )


class ObjectGeometry:
    """Per-object rasters on the object's padded bounding block."""

    def __init__(self, obj: ObjectSpec, domain_shape, block=None):
        self.obj = obj
        self.domain_shape = tuple(domain_shape)
        if block is None:
            box = voxel_bounds(obj.primitive, domain_shape, pad=1)
            block = (box, voxelize(obj.primitive, domain_shape, box=box))
        self.box, self.mask = block
        self.offset = np.array([s.start for s in self.box])

    @cached_property
    def distance(self) -> np.ndarray:
        return compute_edt(self.mask)

    @cached_property
    def strata(self) -> np.ndarray:
        return partition_regions(self.distance, self.obj.shield.tau_shell, self.obj.shield.tau_gap)

    @cached_property
    def core(self) -> np.ndarray:
        o = self.obj
        if o.inner_primitive is None:
            return np.zeros(self.mask.shape, dtype=bool)
        return core_region(self.distance, o.inner_primitive, o.inner_affine,
                           o.shield.tau_shell, o.shield.tau_gap, box=self.box).mask

    def full(self, local: np.ndarray, fill=0) -> np.ndarray:
        out = np.full(self.domain_shape, fill, dtype=local.dtype)
        out[self.box] = local
        return out

    def lookup(self, local: np.ndarray, coords: np.ndarray, fill=0):
        """Gather ``local`` at global integer coords; ``fill`` outside the block."""
        idx = np.asarray(coords, dtype=np.int64) - self.offset
        inside = np.all((idx >= 0) & (idx < np.array(local.shape)), axis=1)
        out = np.full(len(idx), fill, dtype=local.dtype)
        out[inside] = local[tuple(idx[inside].T)]
        return out


def _stream(global_seed: int, volume_index: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(global_seed), spawn_key=(int(volume_index), *key))
    return np.random.Generator(np.random.PCG64(ss))


def _sample_shell(rng, mu_bg, contrast_min):
    below = max(0.0, mu_bg - contrast_min)
    above = max(0.0, 1.0 - (mu_bg + contrast_min))
    while True:
        u = rng.uniform(0.0, below + above)
        mu = _f32(u if u < below else mu_bg + contrast_min + (u - below))
        if abs(mu - mu_bg) >= contrast_min and 0.0 <= mu <= 1.0:
            return mu


def _overlap_ok(box_a, mask_a, box_b, mask_b) -> bool:
    """Overlap is at most MAX_OVERLAP_FRACTION of the smaller object."""
    lo = [max(a.start, b.start) for a, b in zip(box_a, box_b)]
    hi = [min(a.stop, b.stop) for a, b in zip(box_a, box_b)]
    if any(l >= h for l, h in zip(lo, hi)):
        return True
    sa = tuple(slice(l - a.start, h - a.start) for l, h, a in zip(lo, hi, box_a))
    sb = tuple(slice(l - b.start, h - b.start) for l, h, b in zip(lo, hi, box_b))
    inter = np.count_nonzero(mask_a[sa] & mask_b[sb])
    return inter <= MAX_OVERLAP_FRACTION * min(np.count_nonzero(mask_a), np.count_nonzero(mask_b))


def sample_scene(global_seed: int, volume_index: int, config: GenConfig) -> SceneSpec:
    """Draw one scene; the result depends only on (global_seed, volume_index, config)."""
    shape = config.domain_shape
    scene_rng = _stream(global_seed, volume_index, 0)
    lo, hi = config.objects_range
    n_objects = int(scene_rng.integers(lo, hi + 1))
    mu_bg = _f32(scene_rng.uniform())

    objects: list[ObjectSpec] = []
    placed: list[tuple[tuple[slice, ...], np.ndarray]] = []
    for k in range(n_objects):
        geom_rng = _stream(global_seed, volume_index, k + 1, _GEOM)
        for _ in range(OVERLAP_TRIES):
            prim = sample_primitive(geom_rng, shape, config.size_range)
            box = voxel_bounds(prim, shape, pad=1)
            mask = voxelize(prim, shape, box=box)
            if all(_overlap_ok(box, mask, b, m) for b, m in placed):
                break
        placed.append((box, mask))

        irng = _stream(global_seed, volume_index, k + 1, _INTENSITY)
        mu_shell = _sample_shell(irng, mu_bg, config.contrast_min)
        mu_gap = _f32(irng.uniform())
        d = config.core_contrast_max
        mu_core = _f32(np.clip(mu_bg + irng.uniform(-d, d), 0.0, 1.0))
        shield = ShieldParams(config.tau_shell, config.tau_gap, mu_shell, mu_gap, mu_bg)
        shield.validate(config.contrast_min, allow_unsafe_gap=config.allow_unsafe_gap)

        trng = _stream(global_seed, volume_index, k + 1, _TEXTURE)
        weights = sample_mixture_weights(trng, config.dirichlet_concentration, config.enabled_mask)
        bases = tuple(sample_basis(trng, kind, config.texture_frequency_range) for kind in BASIS_KINDS)
        mixture = MixtureParams(weights, mu_core, float(config.texture_amplitude), bases,
                                float(config.dirichlet_concentration))

        obj = ObjectSpec(prim, shield, mixture)
        geo = ObjectGeometry(obj, shape, block=(box, mask))
        inner_rng = _stream(global_seed, volume_index, k + 1, _INNER)
        inner = affine = None
        for _ in range(INNER_TRIES):
            cand, cand_affine = sample_inner(inner_rng, prim)
            region = core_region(geo.distance, cand, cand_affine, config.tau_shell, config.tau_gap, box=geo.box)
            if len(region):
                inner, affine = cand, cand_affine
                break
        objects.append(ObjectSpec(prim, shield, mixture, inner, affine))

    return SceneSpec(shape, int(global_seed), int(volume_index), mu_bg, config.mode, tuple(objects),
                     config.provenance())


@dataclass
class RenderedSample:
    image: np.ndarray
    instance_labels: np.ndarray
    spec: SceneSpec

    @property
    def binary_mask(self) -> np.ndarray:
        return self.instance_labels > 0

    @cached_property
    def geometries(self) -> list[ObjectGeometry]:
        return [ObjectGeometry(o, self.spec.domain_shape) for o in self.spec.objects]


def _object_values(obj: ObjectSpec, geo: ObjectGeometry, mode: str) -> np.ndarray:
    """Intensity of the object over its block (valid where ``geo.mask``)."""
    if mode == "naive":
        vals = np.zeros(geo.mask.shape)
        coords = np.argwhere(geo.mask) + geo.offset
        vals[geo.mask] = synthesize_texture(coords, obj.mixture)
        return vals
    canvas = np.full(geo.mask.shape, obj.mixture.mu_core)
    vals = render_shield(geo.strata, obj.shield, canvas)
    core = geo.core
    if core.any():
        vals[core] = synthesize_texture(np.argwhere(core) + geo.offset, obj.mixture)
    return vals


def render(spec: SceneSpec) -> RenderedSample:
    """Paint objects in order onto a uniform background; later objects win overlaps."""
    image = np.full(spec.domain_shape, spec.mu_bg, dtype=np.float32)
    labels = np.zeros(spec.domain_shape, dtype=np.uint16)
    geoms = []
    for k, obj in enumerate(spec.objects):
        geo = ObjectGeometry(obj, spec.domain_shape)
        geoms.append(geo)
        vals = _object_values(obj, geo, spec.mode).astype(np.float32)
        sub_img = image[geo.box]
        sub_img[geo.mask] = vals[geo.mask]
        labels[geo.box][geo.mask] = k + 1
    sample = RenderedSample(image, labels, spec)
    sample.__dict__["geometries"] = geoms
    return sample


def object_field(spec: SceneSpec, k: int, coords, mixture: MixtureParams | None = None,
                 geometry: ObjectGeometry | None = None) -> np.ndarray:
    """The intensity field T of object k evaluated anywhere in the domain.

    Naive mode: the texture itself, defined everywhere.  Shielded mode: the
    layered shell / gap / core field, with the shell constant extended over
    the outside so the field is defined at stencil points beyond the object.
    ``mixture`` overrides the object's texture realization.
    """
    obj = spec.objects[k]
    mix = mixture or obj.mixture
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    if spec.mode == "naive":
        vals = synthesize_texture(coords, mix)
    else:
        geo = geometry or ObjectGeometry(obj, spec.domain_shape)
        strata = geo.lookup(geo.strata, coords, fill=Stratum.BACKGROUND)
        sh = obj.shield
        vals = np.full(len(coords), sh.mu_shell)
        vals[strata == Stratum.GAP] = sh.mu_gap
        vals[strata == Stratum.CORE_ZONE] = mix.mu_core
        in_core = geo.lookup(geo.core, coords, fill=False)
        if in_core.any():
            vals[in_core] = synthesize_texture(coords[in_core], mix)
    return vals.astype(np.float32).astype(np.float64)


def stratum_map(sample: RenderedSample) -> tuple[np.ndarray, np.ndarray]:
    """Global stratum labels of each voxel's owning object, and a textured-core map.

    The core map holds the owning object's index + 1 on its decoupled core
    voxels, 0 elsewhere.
    """
    strata = np.zeros(sample.spec.domain_shape, dtype=np.int8)
    core_owner = np.zeros(sample.spec.domain_shape, dtype=np.uint16)
    for k, geo in enumerate(sample.geometries):
        own = sample.instance_labels[geo.box] == k + 1
        strata[geo.box][own] = geo.strata[own]
        core_owner[geo.box][own & geo.core] = k + 1
    return strata, core_owner


@dataclass(frozen=True)
class BatchFailure:
    """Stand-in for a volume that failed to render."""

    volume_index: int
    message: str


def _render_index(args):
    seed, index, config, keep_going = args
    try:
        return render(sample_scene(seed, index, config))
    except Exception as e:
        if not keep_going:
            raise
        return BatchFailure(index, f"{type(e).__name__}: {e}")


def default_parallelism() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("BOUNDSAFE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def render_batch(global_seed: int, count: int, config: GenConfig,
                 parallelism: int | None = None, start: int = 0,
                 keep_going: bool = False) -> Iterator[RenderedSample | BatchFailure]:
    """Yield samples for indices start .. start+count-1 in index order.

    Each volume has its own RNG stream, so output does not depend on
    ``parallelism``.  With ``keep_going`` a failing volume yields a
    ``BatchFailure`` instead of aborting the batch.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    workers = parallelism or default_parallelism()
    jobs = ((global_seed, i, config, keep_going) for i in range(start, start + count))
    if workers <= 1:
        for job in jobs:
            yield _render_index(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        for job in jobs:
            pending.append(pool.submit(_render_index, job))
            if len(pending) >= 2 * workers:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
