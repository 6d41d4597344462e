import numpy as np
import pytest

from boundsafe.decoupling import core_region, safe_zone, sample_inner
from boundsafe.edt import boundary_mask, compute_edt
from boundsafe.geometry import KINDS, AffineTransform, Primitive, random_rotation, sample_primitive, voxelize
from boundsafe.shielding import Stratum, partition_regions

N = 32


def sphere(center, radius):
    return Primitive("ellipsoid", (radius,) * 3, AffineTransform(translation=center))


def grid():
    return np.stack(np.meshgrid(*[np.arange(N)] * 3, indexing="ij"), -1).astype(float)


def test_inner_outside_object_is_empty():
    d = compute_edt(voxelize(sphere((8, 8, 8), 6), (N,) * 3))
    region = core_region(d, sphere((25, 25, 25), 4), AffineTransform(), 1, 2)
    assert len(region) == 0


def test_inner_covering_domain_gives_safe_zone():
    d = compute_edt(voxelize(sphere((15.5, 15.5, 15.5), 13), (N,) * 3))
    whole = Primitive("cuboid", (40, 40, 40), AffineTransform(translation=(15.5,) * 3))
    region = core_region(d, whole, AffineTransform(), 2, 3)
    np.testing.assert_array_equal(region.mask, d > 5)


def test_sphere_in_sphere_matches_conjunction_oracle():
    rng = np.random.default_rng(0)
    x = grid()
    for _ in range(10):
        oc, orad = rng.uniform(13, 18, 3), rng.uniform(9, 13)
        ic, irad = oc + rng.uniform(-3, 3, 3), rng.uniform(3, 9)
        R = random_rotation(rng)
        s, t = rng.uniform(0.8, 1.25, 3), rng.uniform(-2, 2, 3)
        affine = AffineTransform(R, tuple(s), tuple(t))
        outer = ((x - oc) ** 2).sum(-1) <= orad ** 2
        d = compute_edt(outer)
        # affine acts about the inner center: y = R (s * (x - c)) + c + t, so invert it
        local = ((x - ic - t) @ R) / s
        inner = (local ** 2).sum(-1) <= irad ** 2
        expected = inner & (d > 2 + 3)
        region = core_region(d, sphere(tuple(ic), irad), affine, 2, 3)
        np.testing.assert_array_equal(region.mask, expected)


def test_core_inside_core_zone_and_away_from_gap():
    rng = np.random.default_rng(1)
    for _ in range(20):
        outer = sample_primitive(rng, (N,) * 3, (8, 15))
        d = compute_edt(voxelize(outer, (N,) * 3))
        inner, affine = sample_inner(rng, outer)
        region = core_region(d, inner, affine, 2, 2)
        strata = partition_regions(d, 2, 2)
        assert np.all(strata[region.mask] == Stratum.CORE_ZONE)
        if len(region):
            assert d[boundary_mask(region.mask)].min() > 2 + 2 - 1
        assert np.array_equal(safe_zone(d, 2, 2), strata == Stratum.CORE_ZONE)


def test_sample_inner_deterministic():
    outer = sample_primitive(np.random.default_rng(0), (64,) * 3, (8, 20))
    a = sample_inner(np.random.default_rng(5), outer)
    b = sample_inner(np.random.default_rng(5), outer)
    assert a[0] == b[0] and a[1] == b[1]


def euler_zyx(R):
    return np.array([np.arctan2(R[1, 0], R[0, 0]), -np.arcsin(np.clip(R[2, 0], -1, 1)),
                     np.arctan2(R[2, 1], R[2, 2])])


@pytest.fixture(scope="module")
def outer_inner_draws():
    rng = np.random.default_rng(2024)
    draws = []
    for _ in range(10000):
        outer = sample_primitive(rng, (96,) * 3, (8, 24))
        inner, affine = sample_inner(rng, outer)
        draws.append((outer, inner, affine))
    return draws


def test_inner_kind_independent_of_outer(outer_inner_draws):
    outer = np.array([o.kind for o, _, _ in outer_inner_draws])
    inner = np.array([i.kind for _, i, _ in outer_inner_draws])
    p_prism = np.mean(inner == "prism")
    assert abs(np.mean(inner[outer == "cylinder"] == "prism") - p_prism) < 0.02
    for k in KINDS:
        assert abs(np.mean(inner == k) - 0.2) < 0.02
    # same-kind pairs occur only at chance level
    assert abs(np.mean(inner == outer) - 0.2) < 0.02


def test_inner_rotation_independent_of_outer(outer_inner_draws):
    ea = np.array([euler_zyx(o.pose.rotation) for o, _, _ in outer_inner_draws])
    eb = np.array([euler_zyx(a.rotation @ i.pose.rotation) for _, i, a in outer_inner_draws])
    corr = np.corrcoef(ea.T, eb.T)[:3, 3:]
    assert np.abs(corr).max() < 0.05


def test_inner_centered_within_outer_bbox(outer_inner_draws):
    for outer, inner, _ in outer_inner_draws[:500]:
        lo, hi = outer.bbox()
        assert np.all(inner.center >= lo) and np.all(inner.center <= hi)
