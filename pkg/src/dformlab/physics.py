"""Physical parameters, body forces, and the laminar reference state.

The Grashof number G = |f| / (nu^2 kappa0^2) is the single dimensionless
control knob; experiments specify G and derive the forcing amplitude from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .spectral import Grid, SpectralField, field_from_coeffs, norm_h


@dataclass(frozen=True)
class ForcingSpec:
    """Body force description.

    kind 'kolmogorov' is f = (amplitude * sin(mode * kappa0 * x2), 0): a
    single-shear force on one eigenmode of the Stokes operator, so it is
    divergence-free, zero-mean, and time-independent.  kind 'none' is f = 0.
    """

    kind: str = "kolmogorov"
    mode: int = 2
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("kolmogorov", "none"):
            raise ConfigError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "kolmogorov" and self.mode < 1:
            raise ConfigError(f"forcing mode must be >= 1, got {self.mode}")


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity, domain size, and forcing; everything else derives from these."""

    nu: float = 1.0
    L: float = 2.0 * np.pi
    forcing: ForcingSpec = field(default_factory=ForcingSpec)

    def __post_init__(self) -> None:
        if self.nu <= 0:
            raise ConfigError(f"viscosity must be positive, got {self.nu}")
        if self.L <= 0:
            raise ConfigError(f"domain size must be positive, got {self.L}")

    @property
    def kappa0(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def time_unit(self) -> float:
        """The natural slow time scale 1 / (nu kappa0^2)."""
        return 1.0 / (self.nu * self.kappa0**2)


def forcing_field(grid: Grid, params: PhysicalParams) -> SpectralField:
    """The body force as a spectral field on `grid`."""
    spec = params.forcing
    coeff = np.zeros((2, grid.n, grid.ncols), dtype=np.complex128)
    if spec.kind == "kolmogorov":
        j = spec.mode
        if j > grid.dealias_cut:
            raise ConfigError(f"forcing mode {j} exceeds the resolved band of {grid!r}")
        # sin(j kappa0 x2) = (exp(i j kappa0 x2) - exp(-i j kappa0 x2)) / (2i)
        coeff[0, 0, j] = spec.amplitude / 2j
    return field_from_coeffs(grid, coeff)


def grashof(params: PhysicalParams, grid: Grid | None = None) -> float:
    """G = |f| / (nu^2 kappa0^2), measured from the actual force field."""
    if params.forcing.kind == "none" or params.forcing.amplitude == 0.0:
        return 0.0
    if grid is None:
        grid = Grid(max(16, 4 * params.forcing.mode), params.L)
    f = forcing_field(grid, params)
    return norm_h(f) / (params.nu**2 * params.kappa0**2)


def amplitude_for_grashof(G: float, nu: float, L: float) -> float:
    """Kolmogorov-force amplitude giving Grashof number G.

    |f| = amplitude * L / sqrt(2) for the single-shear force, so
    amplitude = sqrt(2) * G * nu^2 * kappa0^2 / L.
    """
    kappa0 = 2.0 * np.pi / L
    return float(np.sqrt(2.0) * G * nu**2 * kappa0**2 / L)


def params_for_grashof(
    G: float,
    *,
    nu: float = 1.0,
    L: float = 2.0 * np.pi,
    forcing_mode: int = 2,
) -> PhysicalParams:
    """Parameters with a Kolmogorov force scaled to the requested Grashof number."""
    if G < 0:
        raise ConfigError(f"Grashof number must be >= 0, got {G}")
    if G == 0.0:
        return PhysicalParams(nu=nu, L=L, forcing=ForcingSpec(kind="none"))
    amp = amplitude_for_grashof(G, nu, L)
    return PhysicalParams(nu=nu, L=L, forcing=ForcingSpec(kind="kolmogorov", mode=forcing_mode, amplitude=amp))


def laminar_state(grid: Grid, params: PhysicalParams) -> SpectralField:
    """The exact steady shear u* = f / (nu lambda_f) for a Kolmogorov force.

    The force sits on a single Stokes eigenmode with eigenvalue
    lambda_f = (mode * kappa0)^2, and the shear transports itself nowhere
    (B(u*, u*) = 0), so nu A u* = f exactly.
    """
    if params.forcing.kind != "kolmogorov":
        raise ConfigError("laminar state is defined for Kolmogorov forcing only")
    lam = (params.forcing.mode * params.kappa0) ** 2
    f = forcing_field(grid, params)
    return f * (1.0 / (params.nu * lam))
