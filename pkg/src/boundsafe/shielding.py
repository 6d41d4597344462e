"""Distance-based shell / gap / core strata and their constant-intensity rendering."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_KERNEL_SIZE = 3
DEFAULT_CONTRAST_MIN = 0.2


class Stratum(enum.IntEnum):
    BACKGROUND = 0
    SHELL = 1
    GAP = 2
    CORE_ZONE = 3


class GapWidthError(ValueError):
    """Gap narrower than the first-layer gradient stencil it must shield."""

    def __init__(self, tau_gap: int, kernel_size: int):
        self.tau_gap = tau_gap
        self.kernel_size = kernel_size
        super().__init__(
            f"tau_gap={tau_gap} violates the gradient-shield rule tau_gap >= kernel_size - 1 "
            f"(kernel_size={kernel_size}, so tau_gap must be >= {kernel_size - 1})"
        )


def validate_gap_width(tau_gap: int, kernel_size: int = DEFAULT_KERNEL_SIZE) -> None:
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and >= 3, got {kernel_size}")
    if tau_gap < kernel_size - 1:
        raise GapWidthError(tau_gap, kernel_size)


@dataclass(frozen=True)
class ShieldParams:
    tau_shell: int
    tau_gap: int
    mu_shell: float
    mu_gap: float
    mu_bg: float

    def validate(self, contrast_min: float = DEFAULT_CONTRAST_MIN, allow_unsafe_gap: bool = False) -> None:
        if self.tau_shell < 1:
            raise ValueError(f"tau_shell must be >= 1, got {self.tau_shell}")
        if not allow_unsafe_gap:
            validate_gap_width(self.tau_gap)
        elif self.tau_gap < 0:
            raise ValueError(f"tau_gap must be >= 0, got {self.tau_gap}")
        for name in ("mu_shell", "mu_gap", "mu_bg"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.mu_shell - self.mu_bg) < contrast_min:
            raise ValueError(
                f"boundary contrast |mu_shell - mu_bg| = {abs(self.mu_shell - self.mu_bg):.4g} "
                f"below contrast_min={contrast_min}"
            )

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "ShieldParams":
        return cls(int(d["tau_shell"]), int(d["tau_gap"]), float(d["mu_shell"]), float(d["mu_gap"]), float(d["mu_bg"]))


def partition_regions(distance: np.ndarray, tau_shell: int, tau_gap: int) -> np.ndarray:
    """Label each voxel by stratum from its distance to the background.

    shell: 0 < D <= tau_shell; gap: tau_shell < D <= tau_shell + tau_gap;
    core zone: D > tau_shell + tau_gap.  Returns an int8 array of ``Stratum``.
    """
    if tau_shell < 1 or tau_gap < 0:
        raise ValueError(f"need tau_shell >= 1 and tau_gap >= 0, got {tau_shell}, {tau_gap}")
    d = np.asarray(distance)
    labels = np.full(d.shape, Stratum.CORE_ZONE, dtype=np.int8)
    labels[d <= tau_shell + tau_gap] = Stratum.GAP
    labels[d <= tau_shell] = Stratum.SHELL
    labels[d <= 0] = Stratum.BACKGROUND
    return labels


def render_shield(labels: np.ndarray, params: ShieldParams, canvas: np.ndarray) -> np.ndarray:
    """Write the exact constants into background, shell and gap; leave core zone as is."""
    if labels.shape != canvas.shape:
        raise ValueError(f"shape mismatch: labels {labels.shape} vs canvas {canvas.shape}")
    out = np.array(canvas, copy=True)
    out[labels == Stratum.BACKGROUND] = params.mu_bg
    out[labels == Stratum.SHELL] = params.mu_shell
    out[labels == Stratum.GAP] = params.mu_gap
    return out
