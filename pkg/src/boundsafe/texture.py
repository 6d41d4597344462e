"""Perlin fBm noise bases and their Dirichlet-weighted mixture.

Three bases model tissue appearance: isotropic granular noise, fibrous
noise stretched along a direction, and porous two-level thresholded noise.
A texture is ``mu_core + amplitude * sum_i w_i * basis_i(x)`` clamped to
[0, 1], with ``w`` on the probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

BASIS_KINDS = ("granular", "fibrous", "porous")

DEFAULT_OCTAVES = 4
DEFAULT_PERSISTENCE = 0.5
DEFAULT_LACUNARITY = 2.0
DEFAULT_FREQUENCY_RANGE = (0.15, 0.4)
DEFAULT_ANISOTROPY_RANGE = (2.0, 6.0)
DEFAULT_POROSITY_RANGE = (-0.2, 0.2)


@numba.njit(cache=True, inline="always")
def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


@numba.njit(cache=True, inline="always")
def _grad(h, x, y, z):
    # the 12 cube-edge gradient directions, padded to 16
    h = h & 15
    u = x if h < 8 else y
    if h < 4:
        v = y
    elif h == 12 or h == 14:
        v = x
    else:
        v = z
    return (u if (h & 1) == 0 else -u) + (v if (h & 2) == 0 else -v)


@numba.njit(cache=True, inline="always")
def _noise(x, y, z, perm):
    fx = np.floor(x)
    fy = np.floor(y)
    fz = np.floor(z)
    X = int(fx) & 255
    Y = int(fy) & 255
    Z = int(fz) & 255
    x -= fx
    y -= fy
    z -= fz
    u = _fade(x)
    v = _fade(y)
    w = _fade(z)
    A = perm[X] + Y
    AA = perm[A] + Z
    AB = perm[A + 1] + Z
    B = perm[X + 1] + Y
    BA = perm[B] + Z
    BB = perm[B + 1] + Z
    g000 = _grad(perm[AA], x, y, z)
    g100 = _grad(perm[BA], x - 1.0, y, z)
    g010 = _grad(perm[AB], x, y - 1.0, z)
    g110 = _grad(perm[BB], x - 1.0, y - 1.0, z)
    g001 = _grad(perm[AA + 1], x, y, z - 1.0)
    g101 = _grad(perm[BA + 1], x - 1.0, y, z - 1.0)
    g011 = _grad(perm[AB + 1], x, y - 1.0, z - 1.0)
    g111 = _grad(perm[BB + 1], x - 1.0, y - 1.0, z - 1.0)
    x00 = g000 + u * (g100 - g000)
    x10 = g010 + u * (g110 - g010)
    x01 = g001 + u * (g101 - g001)
    x11 = g011 + u * (g111 - g011)
    y0 = x00 + v * (x10 - x00)
    y1 = x01 + v * (x11 - x01)
    return y0 + w * (y1 - y0)


@numba.njit(cache=True)
def _fbm(points, perm, frequency, octaves, persistence, lacunarity, out):
    norm = 0.0
    amp = 1.0
    for _ in range(octaves):
        norm += amp
        amp *= persistence
    for n in range(points.shape[0]):
        total = 0.0
        amp = 1.0
        f = frequency
        for _ in range(octaves):
            total += amp * _noise(points[n, 0] * f, points[n, 1] * f, points[n, 2] * f, perm)
            amp *= persistence
            f *= lacunarity
        r = total / norm
        # the 12-gradient lattice can overshoot 1 by a few percent at rare points
        if r > 1.0:
            r = 1.0
        elif r < -1.0:
            r = -1.0
        out[n] = r


@lru_cache(maxsize=256)
def _tables(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Doubled permutation table and lattice offset derived from a seed."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(256).astype(np.int64)
    perm = np.concatenate([perm, perm])
    perm.setflags(write=False)
    offset = rng.uniform(0.0, 256.0, 3)
    offset.setflags(write=False)
    return perm, offset


@dataclass(frozen=True)
class NoiseBasisParams:
    kind: str
    seed: int
    base_frequency: float = 0.25
    octaves: int = DEFAULT_OCTAVES
    persistence: float = DEFAULT_PERSISTENCE
    lacunarity: float = DEFAULT_LACUNARITY
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    anisotropy_ratio: float = 1.0
    porosity_threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        object.__setattr__(self, "direction", tuple(float(c) for c in self.direction))
        if self.base_frequency <= 0:
            raise ValueError("base_frequency must be positive")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if not 0 < self.persistence <= 1:
            raise ValueError("persistence must lie in (0, 1]")
        if self.lacunarity <= 1:
            raise ValueError("lacunarity must be > 1")
        if self.kind == "fibrous":
            if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
                raise ValueError("fibrous direction must be a unit vector")
            if self.anisotropy_ratio < 1:
                raise ValueError("anisotropy_ratio must be >= 1")
        if self.kind == "porous" and not -1 < self.porosity_threshold < 1:
            raise ValueError("porosity_threshold must lie in (-1, 1)")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["direction"] = list(self.direction)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseBasisParams":
        d = dict(d)
        d["direction"] = tuple(d["direction"])
        return cls(**d)


@dataclass(frozen=True)
class MixtureParams:
    weights: tuple[float, float, float]
    mu_core: float
    amplitude: float
    bases: tuple[NoiseBasisParams, NoiseBasisParams, NoiseBasisParams]
    concentration: float = 1.0

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bases", tuple(self.bases))
        if len(w) != 3 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must lie on the simplex, got {w}")
        if len(self.bases) != 3:
            raise ValueError("exactly three bases are required")
        if not 0.0 <= self.mu_core <= 1.0:
            raise ValueError("mu_core must lie in [0, 1]")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "mu_core": self.mu_core,
            "amplitude": self.amplitude,
            "concentration": self.concentration,
            "bases": [b.to_dict() for b in self.bases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureParams":
        return cls(
            tuple(d["weights"]),
            float(d["mu_core"]),
            float(d["amplitude"]),
            tuple(NoiseBasisParams.from_dict(b) for b in d["bases"]),
            float(d["concentration"]),
        )


def perlin_fbm(points, params: NoiseBasisParams) -> np.ndarray | float:
    """Octave-summed Perlin noise normalized into [-1, 1].

    Accepts a single point of shape (3,) or an array of shape (N, 3).
    """
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = np.ascontiguousarray(pts.reshape(-1, 3))
    perm, _ = _tables(int(params.seed))
    out = np.empty(pts.shape[0], dtype=np.float64)
    _fbm(pts, perm, float(params.base_frequency), int(params.octaves),
         float(params.persistence), float(params.lacunarity), out)
    return float(out[0]) if scalar else out


def anisotropic_scaling(direction, ratio: float) -> np.ndarray:
    """Matrix compressing coordinates along ``direction`` by ``ratio``."""
    v = np.asarray(direction, dtype=np.float64).reshape(3, 1)
    return np.eye(3) - (1.0 - 1.0 / ratio) * (v @ v.T)


def basis_field(coords, params: NoiseBasisParams) -> np.ndarray:
    """Evaluate one basis on voxel coordinates (N, 3); returns values aligned with coords."""
    x = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    if len(x) == 0:
        raise ValueError("basis_field needs a non-empty region")
    _, offset = _tables(int(params.seed))
    if params.kind == "fibrous" and params.anisotropy_ratio != 1.0:
        x = x @ anisotropic_scaling(params.direction, params.anisotropy_ratio).T
    vals = perlin_fbm(x + offset, params)
    if params.kind == "porous":
        return np.where(vals > params.porosity_threshold, 1.0, -1.0)
    return vals


def sample_mixture_weights(rng: np.random.Generator, concentration: float = 1.0, enabled=(True, True, True)) -> tuple[float, float, float]:
    """Symmetric Dirichlet draw over the enabled bases, via normalized Gamma variates."""
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    enabled = np.asarray(enabled, dtype=bool)
    if not enabled.any():
        raise ValueError("at least one basis must be enabled")
    g = np.zeros(3)
    g[enabled] = rng.gamma(concentration, 1.0, int(enabled.sum()))
    if g.sum() == 0.0:
        # all Gamma draws underflowed (tiny concentration): put the mass on one basis
        g[np.flatnonzero(enabled)[rng.integers(enabled.sum())]] = 1.0
    w = g / g.sum()
    return tuple(float(x) for x in w)


def sample_basis(
    rng: np.random.Generator,
    kind: str,
    frequency_range=DEFAULT_FREQUENCY_RANGE,
    anisotropy_range=DEFAULT_ANISOTROPY_RANGE,
    porosity_range=DEFAULT_POROSITY_RANGE,
) -> NoiseBasisParams:
    seed = int(rng.integers(0, 2**63 - 1))
    freq = float(rng.uniform(*frequency_range))
    kw = {}
    if kind == "fibrous":
        d = rng.standard_normal(3)
        kw["direction"] = tuple(d / np.linalg.norm(d))
        kw["anisotropy_ratio"] = float(rng.uniform(*anisotropy_range))
    elif kind == "porous":
        kw["porosity_threshold"] = float(rng.uniform(*porosity_range))
    return NoiseBasisParams(kind, seed, freq, **kw)


def reseed_mixture(mix: MixtureParams, rng: np.random.Generator, enabled=(True, True, True)) -> MixtureParams:
    """Fresh texture realization: new weights, noise seeds and fibre direction; same scales."""
    weights = sample_mixture_weights(rng, mix.concentration, enabled)
    bases = []
    for b in mix.bases:
        kw = {"seed": int(rng.integers(0, 2**63 - 1))}
        if b.kind == "fibrous":
            d = rng.standard_normal(3)
            kw["direction"] = tuple(d / np.linalg.norm(d))
        bases.append(NoiseBasisParams(**{**b.__dict__, **kw}))
    return MixtureParams(weights, mix.mu_core, mix.amplitude, tuple(bases), mix.concentration)


def synthesize_texture(coords, mix: MixtureParams) -> np.ndarray:
    """Texture values on voxel coordinates (N, 3), clamped to [0, 1]."""
    x = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    acc = np.zeros(len(x))
    if len(x) and mix.amplitude > 0:
        for w, b in zip(mix.weights, mix.bases):
            if w > 0.0:
                acc += w * basis_field(x, b)
    return np.clip(mix.mu_core + mix.amplitude * acc, 0.0, 1.0)
