"""Shared parameter and density containers."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MediumParams:
    """Wavenumbers above (k_plus) and below (k_minus) the interface, the
    transmission coefficient mu, and the strip heights of the two half-plane
    kernels (h_minus below the interface, h_plus above it)."""

    k_plus: float
    k_minus: float
    mu: float
    h_minus: float
    h_plus: float

    def __post_init__(self):
        for name in ("k_plus", "k_minus", "mu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
        if not (np.isfinite(self.h_minus) and np.isfinite(self.h_plus)):
            raise ValueError("strip heights must be finite")
        if self.h_minus >= self.h_plus:
            raise ValueError("need h_minus < h_plus")

    def check_profile(self, profile):
        """Raise if the strips do not clear the profile range."""
        if not (self.h_minus < profile.f_minus and self.h_plus > profile.f_plus):
            raise ValueError(
                f"strip heights ({self.h_minus}, {self.h_plus}) must enclose the profile "
                f"range [{profile.f_minus}, {profile.f_plus}] strictly")

    @classmethod
    def for_profile(cls, profile, k_plus, k_minus, mu, margin=None):
        from .surface import strip_heights

        h_minus, h_plus = strip_heights(profile, margin)
        return cls(float(k_plus), float(k_minus), float(mu), h_minus, h_plus)


@dataclass(frozen=True)
class DensityPair:
    """Nodal values of the two boundary densities."""

    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        if np.shape(self.phi) != np.shape(self.psi):
            raise ValueError("phi and psi must have equal length")

    @property
    def stacked(self):
        return np.concatenate([self.phi, self.psi])

    @classmethod
    def from_stacked(cls, chi):
        n = chi.size // 2
        return cls(chi[:n].copy(), chi[n:].copy())
