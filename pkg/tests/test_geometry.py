import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boundsafe.geometry import (
    KINDS,
    AffineTransform,
    Primitive,
    PrimitiveFitError,
    contains,
    random_affine,
    random_rotation,
    rotate90,
    sample_primitive,
    voxelize,
)


def inside_oracle(kind, u):
    """Canonical membership written out per shape, independent of the library code."""
    x, y, z = u[..., 0], u[..., 1], u[..., 2]
    if kind == "ellipsoid":
        return x * x + y * y + z * z <= 1
    if kind == "cuboid":
        return (abs(x) <= 1) & (abs(y) <= 1) & (abs(z) <= 1)
    if kind == "cylinder":
        return (x * x + y * y <= 1) & (abs(z) <= 1)
    if kind == "cone":
        # apex at z=+1, unit-radius base at z=-1
        return (np.hypot(x, y) <= (1 - z) / 2) & (abs(z) <= 1)
    if kind == "prism":
        # equilateral triangle inscribed in the unit circle, vertex on +y
        n = [(0.0, -1.0), (np.sqrt(3) / 2, 0.5), (-np.sqrt(3) / 2, 0.5)]
        tri = np.ones(x.shape, dtype=bool)
        for a, b in n:
            tri &= a * x + b * y <= 0.5 + 1e-12
        return tri & (abs(z) <= 1)
    raise AssertionError(kind)


def oracle_mask(p, shape):
    g = np.stack(np.meshgrid(*[np.arange(n) for n in shape], indexing="ij"), -1).astype(float)
    local = p.pose.inverse_apply(g.reshape(-1, 3)) / np.asarray(p.half_extents)
    return inside_oracle(p.kind, local).reshape(shape)


def test_unit_ellipsoid_is_plus_sign():
    p = Primitive("ellipsoid", (1, 1, 1), AffineTransform(translation=(1, 1, 1)))
    m = voxelize(p, (3, 3, 3))
    expected = np.zeros((3, 3, 3), bool)
    expected[1, 1, 1] = True
    for a in range(3):
        for s in (0, 2):
            idx = [1, 1, 1]
            idx[a] = s
            expected[tuple(idx)] = True
    assert m.sum() == 7
    np.testing.assert_array_equal(m, expected)


def test_tiny_ellipsoid_single_voxel():
    p = Primitive("ellipsoid", (0.4, 0.4, 0.4), AffineTransform(translation=(4, 5, 6)))
    m = voxelize(p, (10, 10, 10))
    assert m.sum() == 1 and m[4, 5, 6]


def test_cuboid_spanning_domain_is_full():
    p = Primitive("cuboid", (4, 4, 4), AffineTransform(translation=(3.5, 3.5, 3.5)))
    assert voxelize(p, (8, 8, 8)).all()


@pytest.mark.parametrize("kind", KINDS)
def test_voxelize_matches_oracle_under_random_pose(kind):
    rng = np.random.default_rng(KINDS.index(kind))
    for _ in range(5):
        pose = AffineTransform(random_rotation(rng), tuple(rng.uniform(0.7, 1.4, 3)), tuple(rng.uniform(8, 12, 3)))
        p = Primitive(kind, tuple(rng.uniform(2, 6, 3)), pose)
        np.testing.assert_array_equal(voxelize(p, (20, 20, 20)), oracle_mask(p, (20, 20, 20)))


def test_contains_agrees_with_voxelize(rng):
    p = sample_primitive(rng, (40, 40, 40), (5, 12))
    m = voxelize(p, (40, 40, 40))
    pts = np.argwhere(np.ones((40, 40, 40), bool)).astype(float)
    np.testing.assert_array_equal(contains(p, pts).reshape(m.shape), m)


def test_sample_primitive_bbox_inside_domain():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = sample_primitive(rng, (96, 96, 96), (8, 24))
        lo, hi = p.bbox()
        assert np.all(lo >= 0) and np.all(hi < 96)
        assert p.kind in KINDS


def test_sample_primitive_impossible_fit():
    with pytest.raises(PrimitiveFitError, match="primitive does not fit"):
        sample_primitive(np.random.default_rng(0), (96, 96, 96), (200, 300))


def test_sample_primitive_deterministic():
    a = sample_primitive(np.random.default_rng(9), (64, 64, 64), (4, 16))
    b = sample_primitive(np.random.default_rng(9), (64, 64, 64), (4, 16))
    assert a == b


def test_sample_primitive_kinds_uniform():
    rng = np.random.default_rng(1)
    kinds = [sample_primitive(rng, (64, 64, 64), (4, 8)).kind for _ in range(5000)]
    freq = np.array([kinds.count(k) for k in KINDS]) / len(kinds)
    assert np.all(abs(freq - 0.2) < 0.03)


def test_random_affine_degenerate_is_identity(rng):
    t = random_affine(rng, rotation=False, scale_range=(1, 1), translation_range=(0, 0))
    assert t == AffineTransform.identity()


def test_random_affine_properties():
    for seed in range(50):
        t = random_affine(np.random.default_rng(seed), True, (0.5, 2.0), (-3, 3))
        R = t.rotation
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0)
        assert abs(np.linalg.det(R) - 1) < 1e-9
        assert all(0.5 <= s <= 2.0 for s in t.scale)
        assert all(-3 <= x <= 3 for x in t.translation)
    a = random_affine(np.random.default_rng(3), True, (0.5, 2.0), (-3, 3))
    b = random_affine(np.random.default_rng(3), True, (0.5, 2.0), (-3, 3))
    assert a == b


def test_random_rotation_is_uniform_over_so3():
    # for Haar-distributed R, E[R] = 0 and E[tr R] = 0, E[tr(R)^2] = 1
    rng = np.random.default_rng(7)
    Rs = np.array([random_rotation(rng) for _ in range(20000)])
    assert np.abs(Rs.mean(0)).max() < 0.02
    tr = np.trace(Rs, axis1=1, axis2=2)
    assert abs(tr.mean()) < 0.03
    assert abs((tr ** 2).mean() - 1) < 0.05


def test_affine_rejects_bad_rotation_and_scale():
    with pytest.raises(ValueError):
        AffineTransform(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        AffineTransform(np.eye(3) * 1.001)
    with pytest.raises(ValueError):
        AffineTransform(scale=(1, 0, 1))


def test_primitive_rejects_bad_fields():
    with pytest.raises(ValueError):
        Primitive("torus", (1, 1, 1))
    with pytest.raises(ValueError):
        Primitive("cone", (1, -1, 1))


def test_dict_round_trip(rng):
    p = sample_primitive(rng, (64, 64, 64), (4, 16))
    assert Primitive.from_dict(p.to_dict()) == p


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(KINDS), seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3),
       axes=st.sampled_from([(0, 1), (0, 2), (1, 2), (1, 0)]))
def test_rot90_equivariance(kind, seed, k, axes):
    rng = np.random.default_rng(seed)
    n = 21
    pose = AffineTransform(random_rotation(rng), (1, 1, 1), tuple(rng.uniform(7, 13, 3)))
    p = Primitive(kind, tuple(rng.uniform(2, 6, 3)), pose)
    rotated = voxelize(rotate90(p, (n, n, n), k, axes), (n, n, n))
    np.testing.assert_array_equal(rotated, np.rot90(voxelize(p, (n, n, n)), k, axes))


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(KINDS), seed=st.integers(0, 2**32 - 1), grow=st.floats(1.0, 1.6))
def test_monotone_under_uniform_growth(kind, seed, grow):
    rng = np.random.default_rng(seed)
    pose = AffineTransform(random_rotation(rng), (1, 1, 1), tuple(rng.uniform(10, 14, 3)))
    he = rng.uniform(2, 6, 3)
    small = voxelize(Primitive(kind, tuple(he), pose), (24, 24, 24))
    big = voxelize(Primitive(kind, tuple(he * grow), pose), (24, 24, 24))
    assert not (small & ~big).any()


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(("ellipsoid", "cuboid", "cylinder")), seed=st.integers(0, 2**32 - 1),
       grow=st.lists(st.floats(1.0, 1.6), min_size=3, max_size=3))
def test_monotone_under_per_axis_growth(kind, seed, grow):
    # shapes whose implicit test is monotone in every |u_i|
    rng = np.random.default_rng(seed)
    pose = AffineTransform(random_rotation(rng), (1, 1, 1), tuple(rng.uniform(10, 14, 3)))
    he = rng.uniform(2, 6, 3)
    small = voxelize(Primitive(kind, tuple(he), pose), (24, 24, 24))
    big = voxelize(Primitive(kind, tuple(he * np.asarray(grow)), pose), (24, 24, 24))
    assert not (small & ~big).any()


def test_empty_mask_is_legal():
    p = Primitive("ellipsoid", (0.2, 0.2, 0.2), AffineTransform(translation=(2.5, 2.5, 2.5)))
    assert not voxelize(p, (6, 6, 6)).any()
