"""Uniformly sampled trajectories of spectral fields.

A trajectory holds value samples (and usually derivative samples) on the
grid s0, s0 + ds, ...  Derivatives make the container a C^1 object: cubic
Hermite evaluation between nodes is fourth order in ds, which keeps
trajectory interpolation error far below the solver error it is fed from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, GridMismatchError, ProviderGapError
from .interpolants import Interpolant, apply_interpolant
from .physics import PhysicalParams
from .spectral import Grid, SpectralField, norm_v


@dataclass(frozen=True)
class XNorms:
    """Trajectory-space norms: x0 = sup ||v|| / (nu kappa0); x adds the
    derivative term sup ||v'|| / (nu^2 kappa0^3)."""

    x0: float
    x: float | None


@dataclass(frozen=True)
class Trajectory:
    s0: float
    ds: float
    values: tuple[SpectralField, ...]
    derivs: tuple[SpectralField, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ConfigError("trajectory needs at least one sample")
        if self.ds <= 0:
            raise ConfigError(f"sample spacing must be positive, got {self.ds}")
        if self.derivs is not None and len(self.derivs) != len(self.values):
            raise ConfigError("derivative samples must match value samples one to one")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def s1(self) -> float:
        return self.s0 + (len(self.values) - 1) * self.ds

    @property
    def grid(self) -> Grid:
        return self.values[0].grid

    def times(self) -> np.ndarray:
        return self.s0 + self.ds * np.arange(len(self.values))

    def window(self) -> float:
        return self.s1 - self.s0

    def value_at(self, s: float) -> SpectralField:
        """Evaluate at s: exact at nodes, cubic Hermite between them.

        Requires derivative samples for off-node queries (linear blending
        would silently degrade accuracy by two orders in ds).
        """
        idx, theta = self._locate(s)
        if theta == 0.0:
            return self.values[idx]
        if self.derivs is None:
            raise ConfigError("off-node evaluation needs derivative samples")
        v0, v1 = self.values[idx], self.values[idx + 1]
        d0, d1 = self.derivs[idx], self.derivs[idx + 1]
        t2, t3 = theta * theta, theta * theta * theta
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + theta
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return h00 * v0 + (h10 * self.ds) * d0 + h01 * v1 + (h11 * self.ds) * d1

    def _locate(self, s: float) -> tuple[int, float]:
        pos = (s - self.s0) / self.ds
        if pos < -1e-9 or pos > len(self.values) - 1 + 1e-9:
            raise ProviderGapError(
                f"s = {s:g} outside trajectory window [{self.s0:g}, {self.s1:g}]"
            )
        idx = int(np.floor(pos))
        idx = min(max(idx, 0), len(self.values) - 2) if len(self.values) > 1 else 0
        theta = pos - idx
        if abs(theta) < 1e-12:
            theta = 0.0
        elif abs(theta - 1.0) < 1e-12 and idx + 1 <= len(self.values) - 1:
            idx, theta = idx + 1, 0.0
        return idx, theta

    # -- algebra (same time grid required) ---------------------------------

    def _check_aligned(self, other: "Trajectory") -> None:
        if (
            len(self.values) != len(other.values)
            or abs(self.s0 - other.s0) > 1e-9 * max(abs(self.s0), 1.0)
            or abs(self.ds - other.ds) > 1e-12 * self.ds
        ):
            raise GridMismatchError("trajectories live on different sample grids")

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check_aligned(other)
        values = tuple(a - b for a, b in zip(self.values, other.values))
        derivs = None
        if self.derivs is not None and other.derivs is not None:
            derivs = tuple(a - b for a, b in zip(self.derivs, other.derivs))
        return Trajectory(self.s0, self.ds, values, derivs)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self._check_aligned(other)
        values = tuple(a + b for a, b in zip(self.values, other.values))
        derivs = None
        if self.derivs is not None and other.derivs is not None:
            derivs = tuple(a + b for a, b in zip(self.derivs, other.derivs))
        return Trajectory(self.s0, self.ds, values, derivs)

    def scaled(self, factor: float) -> "Trajectory":
        return self.map(lambda f: f * factor)

    def map(self, fn: Callable[[SpectralField], SpectralField]) -> "Trajectory":
        """Apply a linear map sample-wise (derivatives transform the same way)."""
        values = tuple(fn(v) for v in self.values)
        derivs = tuple(fn(d) for d in self.derivs) if self.derivs is not None else None
        return Trajectory(self.s0, self.ds, values, derivs)

    def interpolant_image(self, J: Interpolant) -> "Trajectory":
        return self.map(lambda v: apply_interpolant(J, v))


def constant_trajectory(field: SpectralField, s0: float, ds: float, n: int) -> Trajectory:
    from .spectral import zero_field

    z = zero_field(field.grid)
    return Trajectory(s0, ds, (field,) * n, (z,) * n)


def x_norms(v: Trajectory, params: PhysicalParams) -> XNorms:
    """Sup-norms over the sample window, scaled to be dimensionless."""
    scale0 = params.nu * params.kappa0
    x0 = max(norm_v(f) for f in v.values) / scale0
    if v.derivs is None:
        return XNorms(x0=x0, x=None)
    scale1 = params.nu**2 * params.kappa0**3
    x = x0 + max(norm_v(d) for d in v.derivs) / scale1
    return XNorms(x0=x0, x=x)


def fd_consistency(v: Trajectory) -> float:
    """Worst relative mismatch between stored derivatives and centered
    differences of the values; O(ds^2) for a trajectory of a smooth flow."""
    if v.derivs is None or len(v) < 3:
        raise ConfigError("need derivative samples and >= 3 points")
    worst = 0.0
    for i in range(1, len(v) - 1):
        fd = (v.values[i + 1] - v.values[i - 1]) * (0.5 / v.ds)
        err = norm_v(fd - v.derivs[i])
        scale = max(norm_v(v.derivs[i]), 1e-300)
        worst = max(worst, err / scale)
    return worst


# ---------------------------------------------------------------------------
# providers: time -> field, for feeding nudged integrations


def frozen_provider(field: SpectralField) -> Callable[[float], SpectralField]:
    def provide(s: float) -> SpectralField:
        return field

    return provide


def trajectory_provider(traj: Trajectory, *, clamp: bool = False) -> Callable[[float], SpectralField]:
    """Evaluate a trajectory; outside the window either clamp to the nearest
    endpoint (for deliberate pre-window relaxation) or raise ProviderGapError."""

    def provide(s: float) -> SpectralField:
        if clamp:
            s = min(max(s, traj.s0), traj.s1)
        return traj.value_at(s)

    return provide
