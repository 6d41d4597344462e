"""Boundary-aliasing diagnostics on rendered volumes.

Everything works in voxel units with unit spacing.  At each boundary
voxel ``x_b`` of object ``k`` the image gradient splits, by the discrete
product rule, into a geometric term ``(T(x_b) - B) * step * n`` and a
texture-interference term ``grad T(x_b)``, where ``T`` is the object's
own intensity field and ``B`` the uniform background.  The boundary
saliency ratio compares the squared contrast with the expected squared
texture gradient over fresh texture realizations::

    BSR(x_b) = |T(x_b) - B|² / (E_z ||grad T(x_b; z)||² + eps)
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .composer import RenderedSample, object_field, stratum_map
from .edt import boundary_mask, compute_edt
from .shielding import Stratum
from .texture import BASIS_KINDS, reseed_mixture

DEFAULT_EPSILON = 1e-6
DEFAULT_MC_REALIZATIONS = 16
_MC_STREAM = 1000


def spatial_gradient(volume: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided on the faces; shape (..., 3)."""
    v = np.asarray(volume, dtype=np.float64)
    if v.ndim != 3 or min(v.shape) < 3:
        raise ValueError(f"spatial_gradient needs a 3D volume with every dim >= 3, got {v.shape}")
    return np.stack(np.gradient(v), axis=-1)


def field_gradient(fn: Callable[[np.ndarray], np.ndarray], coords: np.ndarray, shape) -> np.ndarray:
    """Gradient of a point-evaluable field at integer coords, same stencil as ``spatial_gradient``."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    n = np.asarray(shape)
    if len(coords) == 0:
        return np.zeros((0, 3))
    plus, minus, denom = [], [], []
    for a in range(3):
        e = np.zeros(3, dtype=np.int64)
        e[a] = 1
        hi = np.minimum(coords + e, n - 1)
        lo = np.maximum(coords - e, 0)
        plus.append(hi)
        minus.append(lo)
        denom.append((hi[:, a] - lo[:, a]).astype(np.float64))
    stack = np.concatenate(plus + minus)
    uniq, inv = np.unique(stack, axis=0, return_inverse=True)
    vals = np.asarray(fn(uniq), dtype=np.float64)[inv.reshape(-1)]
    m = len(coords)
    g = np.empty((m, 3))
    for a in range(3):
        vp = vals[a * m:(a + 1) * m]
        vm = vals[(3 + a) * m:(4 + a) * m]
        g[:, a] = (vp - vm) / denom[a]
    return g


def _neighbours_owned(labels: np.ndarray, coords: np.ndarray, own: int) -> np.ndarray:
    """True where every in-domain face neighbour is background or owned by ``own``."""
    n = np.asarray(labels.shape)
    ok = np.ones(len(coords), dtype=bool)
    for a in range(3):
        for step in (-1, 1):
            nb = coords.copy()
            nb[:, a] += step
            valid = (nb[:, a] >= 0) & (nb[:, a] < n[a])
            lab = np.zeros(len(coords), dtype=labels.dtype)
            lab[valid] = labels[tuple(nb[valid].T)]
            ok &= (lab == 0) | (lab == own)
    return ok


@dataclass
class BoundaryTerms:
    """Per-boundary-voxel ingredients of the gradient decomposition for one object."""

    object_index: int
    coords: np.ndarray
    contrast: np.ndarray
    geometric: np.ndarray
    interference: np.ndarray
    measured: np.ndarray | None = None

    @property
    def residual(self) -> np.ndarray:
        return np.linalg.norm(self.measured - (self.geometric + self.interference), axis=1)

    @property
    def interference_norm(self) -> np.ndarray:
        return np.linalg.norm(self.interference, axis=1)

    @property
    def geometric_norm(self) -> np.ndarray:
        return np.linalg.norm(self.geometric, axis=1)

    def summary(self) -> dict:
        if len(self.coords) == 0:
            return {"count": 0}
        rel = self.residual / np.maximum(np.abs(self.contrast), 1e-300)
        return {
            "count": int(len(self.coords)),
            "residual_max": float(self.residual.max()),
            "relative_residual_p90": float(np.percentile(rel, 90)),
            "interference_max": float(self.interference_norm.max()),
            "interference_median": float(np.median(self.interference_norm)),
            "geometric_median": float(np.median(self.geometric_norm)),
        }


def _boundary_terms(sample: RenderedSample, k: int, coords: np.ndarray, image_grad: np.ndarray | None) -> BoundaryTerms:
    spec = sample.spec
    geo = sample.geometries[k]
    local = coords - geo.offset
    # outward normal from the two-sided distance field
    sdf = compute_edt(geo.mask) - compute_edt(~geo.mask)
    normal = -np.stack(np.gradient(sdf), axis=-1)[tuple(local.T)]
    occ_grad = np.stack(np.gradient(geo.mask.astype(np.float64)), axis=-1)[tuple(local.T)]
    # symmetric spots can cancel the distance gradient; fall back to occupancy
    flat = np.linalg.norm(normal, axis=1) == 0
    normal[flat] = -occ_grad[flat]
    length = np.linalg.norm(normal, axis=1, keepdims=True)
    normal = np.divide(normal, length, out=np.zeros_like(normal), where=length > 0)
    step = np.sum(occ_grad * normal, axis=1, keepdims=True)
    field = lambda c: object_field(spec, k, c, geometry=geo)  # noqa: E731
    contrast = field(coords) - spec.mu_bg
    geometric = contrast[:, None] * step * normal
    interference = field_gradient(field, coords, spec.domain_shape)
    measured = image_grad[tuple(coords.T)] if image_grad is not None else None
    return BoundaryTerms(k, coords, contrast, geometric, interference, measured)


def visible_boundary(sample: RenderedSample, k: int) -> np.ndarray:
    """Global coords of object k's boundary voxels that k still owns."""
    geo = sample.geometries[k]
    coords = np.argwhere(boundary_mask(geo.mask)) + geo.offset
    return coords[sample.instance_labels[tuple(coords.T)] == k + 1]


def decomposition_check(sample: RenderedSample, object_index: int) -> BoundaryTerms:
    """Measured image gradient against geometric + interference terms at boundary voxels.

    Only voxels whose face neighbours belong to this object or to the
    background are used, so the image there is exactly ``B + M (T - B)``.
    """
    k = object_index
    coords = visible_boundary(sample, k)
    coords = coords[_neighbours_owned(sample.instance_labels, coords, k + 1)]
    if len(coords) == 0:
        warnings.warn(f"object {k} has no visible boundary voxels; skipped", stacklevel=2)
        empty = np.zeros((0, 3))
        return BoundaryTerms(k, coords, np.zeros(0), empty, empty, empty)
    return _boundary_terms(sample, k, coords, spatial_gradient(sample.image))


def gap_gradient_max(sample: RenderedSample, image_grad: np.ndarray | None = None) -> float:
    """Largest gradient norm over voxels whose full 3x3x3 stencil is gap of one object."""
    strata, _ = stratum_map(sample)
    labels = sample.instance_labels
    g = spatial_gradient(sample.image) if image_grad is None else image_grad
    inner = (slice(1, -1),) * 3
    centre_lab = labels[inner]
    ok = (strata[inner] == Stratum.GAP) & (centre_lab > 0)
    n = labels.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for dk in (-1, 0, 1):
                sl = tuple(slice(1 + d, n[a] - 1 + d) for a, d in enumerate((di, dj, dk)))
                ok &= (strata[sl] == Stratum.GAP) & (labels[sl] == centre_lab)
    if not ok.any():
        return 0.0
    return float(np.linalg.norm(g[inner][ok], axis=1).max())


def boundary_core_contacts(sample: RenderedSample) -> int:
    """Number of boundary voxels whose 3x3x3 stencil touches their own object's textured core."""
    total = 0
    for geo in sample.geometries:
        core = geo.core
        if not core.any():
            continue
        grown = core.copy()
        # 3x3x3 dilation by shifted ORs
        for a in range(3):
            g = grown.copy()
            sl_hi = [slice(None)] * 3
            sl_lo = [slice(None)] * 3
            sl_hi[a], sl_lo[a] = slice(1, None), slice(None, -1)
            g[tuple(sl_hi)] |= grown[tuple(sl_lo)]
            g[tuple(sl_lo)] |= grown[tuple(sl_hi)]
            grown = g
        total += int(np.count_nonzero(grown & boundary_mask(geo.mask)))
    return total


@dataclass
class AliasingReport:
    object_index: np.ndarray
    coords: np.ndarray
    bsr: np.ndarray
    geometric_term: np.ndarray
    interference_norm: np.ndarray
    summary: dict
    epsilon: float
    mc_realizations: int
    notices: list[str] = field(default_factory=list)

    @property
    def per_boundary_voxel(self) -> list[dict]:
        return [
            {"object": int(o), "coord": tuple(int(c) for c in xyz), "bsr": float(b),
             "geometric_term": tuple(float(g) for g in geo), "interference_norm": float(i)}
            for o, xyz, b, geo, i in zip(self.object_index, self.coords, self.bsr,
                                         self.geometric_term, self.interference_norm)
        ]


def _summarize(bsr: np.ndarray, gap_max: float) -> dict:
    if len(bsr) == 0:
        return {"count": 0, "bsr_min": None, "bsr_median": None, "bsr_p05": None,
                "frac_aliased": None, "gap_gradient_max": gap_max}
    return {
        "count": int(len(bsr)),
        "bsr_min": float(bsr.min()),
        "bsr_median": float(np.median(bsr)),
        "bsr_p05": float(np.percentile(bsr, 5)),
        "frac_aliased": float(np.mean(bsr < 1.0)),
        "gap_gradient_max": gap_max,
    }


def bsr_map(
    sample: RenderedSample,
    epsilon: float = DEFAULT_EPSILON,
    mc_realizations: int = DEFAULT_MC_REALIZATIONS,
    intensity_affine: tuple[float, float] = (1.0, 0.0),
) -> AliasingReport:
    """Boundary saliency ratio at every visible boundary voxel.

    The expectation over texture realizations is a Monte Carlo mean over
    ``mc_realizations`` reseeded mixtures (new weights and noise seeds,
    same geometry and intensities).  ``intensity_affine = (s, c)`` analyzes
    the sample under the intensity map ``v -> s v + c``; ``epsilon`` is in
    squared intensity units and scales by ``s²`` with it.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if mc_realizations < 1:
        raise ValueError("mc_realizations must be >= 1")
    s, c = (float(x) for x in intensity_affine)
    eps = epsilon * s * s
    spec = sample.spec
    enabled = tuple(kind in spec.config.get("texture_kinds_enabled", BASIS_KINDS) for kind in BASIS_KINDS)
    image = sample.image.astype(np.float64) * s + c
    mu_bg = spec.mu_bg * s + c

    rows = {"obj": [], "coords": [], "bsr": [], "geo": [], "inter": []}
    notices = []
    for k, obj in enumerate(spec.objects):
        coords = visible_boundary(sample, k)
        if len(coords) == 0:
            notices.append(f"object {k}: no visible boundary voxels")
            continue
        geo = sample.geometries[k]
        num = (image[tuple(coords.T)] - mu_bg) ** 2
        expect = np.zeros(len(coords))
        for r in range(mc_realizations):
            ss = np.random.SeedSequence(spec.global_seed, spawn_key=(spec.volume_index, k + 1, _MC_STREAM, r))
            mix = reseed_mixture(obj.mixture, np.random.default_rng(ss), enabled)
            fn = lambda p, mix=mix: object_field(spec, k, p, mix, geo) * s + c  # noqa: E731
            g = field_gradient(fn, coords, spec.domain_shape)
            expect += np.sum(g * g, axis=1)
        expect /= mc_realizations
        terms = _boundary_terms(sample, k, coords, None)
        rows["obj"].append(np.full(len(coords), k))
        rows["coords"].append(coords)
        rows["bsr"].append(num / (expect + eps))
        rows["geo"].append(terms.geometric * s)
        rows["inter"].append(terms.interference_norm * abs(s))
    if not rows["bsr"]:
        notices.append("no boundary voxels in sample")
        warnings.warn("no boundary voxels in sample; empty report", stacklevel=2)
        empty = AliasingReport(np.zeros(0, int), np.zeros((0, 3), int), np.zeros(0), np.zeros((0, 3)),
                               np.zeros(0), _summarize(np.zeros(0), 0.0), epsilon, mc_realizations, notices)
        return empty
    bsr = np.concatenate(rows["bsr"])
    gap_max = gap_gradient_max(sample) * abs(s)
    return AliasingReport(
        np.concatenate(rows["obj"]), np.concatenate(rows["coords"]), bsr,
        np.concatenate(rows["geo"]), np.concatenate(rows["inter"]),
        _summarize(bsr, gap_max), epsilon, mc_realizations, notices,
    )


def pooled_summary(reports) -> dict:
    """Summary statistics over the boundary voxels of several reports."""
    reports = list(reports)
    bsr = np.concatenate([r.bsr for r in reports]) if reports else np.zeros(0)
    gap = max((r.summary["gap_gradient_max"] for r in reports), default=0.0)
    return _summarize(bsr, gap)


def write_reports(reports: dict[int, AliasingReport], directory, stem: str = "report",
                  extra: dict | None = None) -> list[Path]:
    """Write ``<stem>_summary.json`` and a one-row-per-boundary-voxel ``<stem>_voxels.csv``.

    ``reports`` maps a sample index to its report.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    first = next(iter(reports.values()), None)
    payload = {
        "pooled": pooled_summary(reports.values()),
        "samples": {str(i): {"summary": r.summary, "notices": r.notices} for i, r in sorted(reports.items())},
        "epsilon": first.epsilon if first else None,
        "mc_realizations": first.mc_realizations if first else None,
        **(extra or {}),
    }
    summary_path = out / f"{stem}_summary.json"
    summary_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    table_path = out / f"{stem}_voxels.csv"
    with table_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "object", "x", "y", "z", "bsr", "geo_x", "geo_y", "geo_z", "interference_norm"])
        for i, r in sorted(reports.items()):
            for o, xyz, b, g, inter in zip(r.object_index, r.coords, r.bsr, r.geometric_term, r.interference_norm):
                w.writerow([i, int(o), *map(int, xyz), repr(float(b)), *(repr(float(v)) for v in g), repr(float(inter))])
    return [summary_path, table_path]
