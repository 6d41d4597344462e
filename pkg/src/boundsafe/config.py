"""Generation configuration: defaults, validation and YAML loading.

The config file is a flat YAML mapping; every key is optional::

    domain_shape: [96, 96, 96]
    count: 5000
    global_seed: 0
    mode: shielded          # or naive
    objects_range: [1, 6]
    size_range: [14, 40]    # half-extents, voxels
    tau_shell: 2
    tau_gap: 9
    allow_unsafe_gap: false # permit tau_gap below the kernel rule (warns)
    contrast_min: 0.2       # floor on |mu_shell - mu_bg|
    core_contrast_max: 0.1  # |mu_core - mu_bg| upper bound
    dirichlet_concentration: 1.0
    texture_amplitude: 0.25
    texture_kinds_enabled: [granular, fibrous, porous]
    texture_frequency_range: [0.15, 0.4]
    output_format: raw      # or nifti
    output_dir: out
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .shielding import DEFAULT_KERNEL_SIZE, GapWidthError, validate_gap_width
from .texture import BASIS_KINDS, DEFAULT_FREQUENCY_RANGE

MODES = ("shielded", "naive")
FORMATS = ("raw", "nifti")


class ConfigError(ValueError):
    pass


class UnsafeGapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GenConfig:
    domain_shape: tuple[int, int, int] = (96, 96, 96)
    count: int = 5000
    global_seed: int = 0
    mode: str = "shielded"
    objects_range: tuple[int, int] = (1, 6)
    size_range: tuple[float, float] = (14.0, 40.0)
    tau_shell: int = 2
    tau_gap: int = 9
    allow_unsafe_gap: bool = False
    contrast_min: float = 0.2
    core_contrast_max: float = 0.1
    dirichlet_concentration: float = 1.0
    texture_amplitude: float = 0.25
    texture_kinds_enabled: tuple[str, ...] = BASIS_KINDS
    texture_frequency_range: tuple[float, float] = DEFAULT_FREQUENCY_RANGE
    output_format: str = "raw"
    output_dir: str = "out"

    def __post_init__(self):
        tup = {
            "domain_shape": int,
            "objects_range": int,
            "size_range": float,
            "texture_kinds_enabled": str,
            "texture_frequency_range": float,
        }
        for name, typ in tup.items():
            v = getattr(self, name)
            if isinstance(v, (str, bytes)) or not hasattr(v, "__iter__"):
                raise ConfigError(f"{name}: expected a list, got {v!r}")
            object.__setattr__(self, name, tuple(typ(x) for x in v))
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"{name}: {why} (got {getattr(self, name)!r})")

        if len(self.domain_shape) != 3 or min(self.domain_shape) < 3:
            bad("domain_shape", "need 3 ints, each >= 3")
        if not isinstance(self.count, int) or self.count < 1:
            bad("count", "must be an integer >= 1")
        if self.mode not in MODES:
            bad("mode", f"must be one of {MODES}")
        lo, hi = self.objects_range if len(self.objects_range) == 2 else (0, -1)
        if not 1 <= lo <= hi:
            bad("objects_range", "need [lo, hi] with 1 <= lo <= hi")
        if len(self.size_range) != 2 or not 0 < self.size_range[0] <= self.size_range[1] <= min(self.domain_shape) / 2:
            bad("size_range", "need 0 < lo <= hi <= min(domain_shape)/2")
        if self.tau_shell < 1:
            bad("tau_shell", "must be >= 1")
        try:
            validate_gap_width(self.tau_gap, DEFAULT_KERNEL_SIZE)
        except GapWidthError as e:
            if not self.allow_unsafe_gap or self.tau_gap < 0:
                raise ConfigError(f"tau_gap: {e}; set allow_unsafe_gap to override") from None
            warnings.warn(f"unsafe gap width accepted: {e}", UnsafeGapWarning, stacklevel=3)
        if not 0 <= self.contrast_min <= 0.5:
            bad("contrast_min", "must lie in [0, 0.5]")
        if not 0 <= self.core_contrast_max <= 1:
            bad("core_contrast_max", "must lie in [0, 1]")
        if self.dirichlet_concentration <= 0:
            bad("dirichlet_concentration", "must be positive")
        if self.texture_amplitude < 0:
            bad("texture_amplitude", "must be non-negative")
        if not self.texture_kinds_enabled or not set(self.texture_kinds_enabled) <= set(BASIS_KINDS):
            bad("texture_kinds_enabled", f"non-empty subset of {BASIS_KINDS}")
        flo, fhi = self.texture_frequency_range
        if not 0 < flo <= fhi:
            bad("texture_frequency_range", "need 0 < lo <= hi")
        if self.output_format not in FORMATS:
            bad("output_format", f"must be one of {FORMATS}")

    @property
    def enabled_mask(self) -> tuple[bool, bool, bool]:
        return tuple(k in self.texture_kinds_enabled for k in BASIS_KINDS)

    def replace(self, **changes) -> "GenConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def provenance(self) -> dict:
        """Every field that can affect voxel content; the output location is left out
        so identical batches written to different directories stay byte-identical."""
        d = self.to_dict()
        del d["output_dir"]
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "GenConfig":
        d = dict(d or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None


def load_config(path) -> GenConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: parse error{where}: {getattr(e, 'problem', e)}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat key-value mapping")
    return GenConfig.from_dict(data)
