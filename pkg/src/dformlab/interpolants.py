"""General interpolant operators and their measured approximation constants.

Three families, all linear maps on spectral fields:

* modal   -- projection onto Stokes eigenmodes with |n1|^2 + |n2|^2 <= n.
* volume  -- means over an n-by-n grid of square cells, prolonged piecewise
             constant, then mollified by spectral truncation at |k| <= pi/h.
* nodal   -- values at n-by-n grid-aligned nodes (averaged over a small
             stencil of collocation points), prolonged and mollified the same
             way.

Each operator has a resolution length h: for modal, h = lambda_next^(-1/2)
where lambda_next is the first excluded Stokes eigenvalue; for volume and
nodal, h = L / n.

The two approximation bounds

    |J phi - phi|     <= c1 h ||phi|| + c2 h^2 |A phi|
    ||J phi - phi||   <= c1t   ||phi|| + c2t  h |A phi|

are not assumed: the constants are fitted as the minimal envelope over a
seeded random ensemble (linear program), then verified to dominate every
sample.  cJ = c1 + c2^2 / 2 is the combination the nudging thresholds use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.optimize import linprog

from .errors import ConfigError, GridMismatchError
from .spectral import (
    Grid,
    SpectralField,
    embed,
    field_from_coeffs,
    norm_a,
    norm_h,
    norm_v,
    random_solenoidal_field,
)

KINDS = ("modal", "volume", "nodal")

# Estimation ensemble family, fixed across resolutions so that refining the
# grid re-measures the same physical fields.  Broadband power laws alone
# never produce binding constraints for the first-order term (their error is
# spread across scales), so narrow shells bracketing 1/h for every operator
# of interest are mixed in.
ENSEMBLE_EXPONENTS = (-1.0, -5.0 / 3.0, -3.0)
ENSEMBLE_BAND = (1.0, 21.0)
ENSEMBLE_SHELLS = tuple(float(k) for k in np.geomspace(1.0, 15.0, 8))


@dataclass(frozen=True)
class ApproxConstants:
    """Fitted envelope constants for one interpolant at one h."""

    c1: float
    c2: float
    c1t: float
    c2t: float
    n_samples: int
    ensemble_seed: int

    @property
    def cj(self) -> float:
        return self.c1 + 0.5 * self.c2**2


@dataclass(frozen=True)
class Interpolant:
    """One interpolant operator; immutable, reusable across grids of side L."""

    kind: str
    n: int
    L: float
    stencil_frac: float = 0.25
    constants: ApproxConstants | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown interpolant kind {self.kind!r}")
        if self.n < 1:
            raise ConfigError(f"interpolant resolution must be >= 1, got {self.n}")
        if self.L <= 0:
            raise ConfigError(f"domain size must be positive, got {self.L}")
        if not 0.0 <= self.stencil_frac < 0.5:
            raise ConfigError(f"stencil_frac must lie in [0, 0.5), got {self.stencil_frac}")

    @property
    def h(self) -> float:
        kappa0 = 2.0 * math.pi / self.L
        if self.kind == "modal":
            return 1.0 / (kappa0 * math.sqrt(_next_lattice_sq(self.n)))
        return self.L / self.n

    def apply(self, u: SpectralField) -> SpectralField:
        return apply_interpolant(self, u)

    def with_constants(self, constants: ApproxConstants) -> "Interpolant":
        return replace(self, constants=constants)

    def label(self) -> str:
        return f"{self.kind}:{self.n}"


def make_interpolant(kind: str, n: int, L: float, *, stencil_frac: float = 0.25) -> Interpolant:
    return Interpolant(kind=kind, n=n, L=L, stencil_frac=stencil_frac)


def h_of(J: Interpolant) -> float:
    return J.h


def _next_lattice_sq(n: int) -> int:
    """Smallest integer > n expressible as a sum of two squares."""
    s = n + 1
    while True:
        r = int(math.isqrt(s))
        if any((s - a * a) == int(math.isqrt(s - a * a)) ** 2 for a in range(r + 1)):
            return s
        s += 1


def interpolant_rank(J: Interpolant, grid: Grid) -> int:
    """Dimension of the operator's range (both velocity components)."""
    if J.kind == "modal":
        keep = (grid.lattice_sq > 0) & (grid.lattice_sq <= J.n) & grid.dealias
        # count full-plane modes: interior rfft columns stand for two
        return int(2 * (keep * grid.col_weight).sum())
    return 2 * J.n**2


def apply_interpolant(J: Interpolant, u: SpectralField) -> SpectralField:
    grid = u.grid
    if abs(grid.L - J.L) > 1e-12 * J.L:
        raise GridMismatchError(f"interpolant built for L={J.L:g} applied on {grid!r}")
    if J.kind == "modal":
        mask = grid.lattice_sq <= J.n
        return SpectralField(grid, _ro(u.coeff * mask))
    if J.n > grid.n:
        raise ConfigError(f"interpolant resolution {J.n} exceeds field resolution {grid.n}")
    if grid.n % J.n != 0:
        raise ConfigError(f"interpolant resolution {J.n} must divide grid size {grid.n}")
    stride = grid.n // J.n
    U = np.fft.irfft2(u.coeff * grid.n**2, s=(grid.n, grid.n))
    if J.kind == "volume":
        cells = U.reshape(2, J.n, stride, J.n, stride).mean(axis=(2, 4))
    else:  # nodal
        r = int(round(J.stencil_frac * stride))
        if r > 0:
            U = uniform_filter(U, size=(1, 2 * r + 1, 2 * r + 1), mode="wrap")
        cells = U[:, ::stride, ::stride]
    coarse = np.repeat(np.repeat(cells, stride, axis=1), stride, axis=2)
    coeff = np.fft.rfft2(coarse) / grid.n**2
    # mollify: keep |k| <= pi/h, i.e. lattice |n| <= J.n / 2
    coeff *= grid.lattice_sq <= (J.n / 2) ** 2
    return field_from_coeffs(grid, coeff)


def _ro(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# constant estimation


def _fit_envelope(a: np.ndarray, b: np.ndarray, d: np.ndarray) -> tuple[float, float]:
    """Smallest (c1, c2) >= 0 with c1 a_i + c2 b_i >= d_i for all i.

    Two lexicographic stages: minimize c1 + c2, then pick the c1-minimal
    point within 2% of that optimum.  Without the second stage the reported
    vertex flaps between nearly-optimal corners under tiny perturbations of
    the sample set, which would make the constants look resolution-unstable
    for no mathematical reason.  Finally the pair is inflated so every
    constraint holds exactly despite solver slack.
    """
    keep = d > 0
    if not keep.any():
        return 0.0, 0.0
    a, b, d = a[keep], b[keep], d[keep]
    A_ub = np.column_stack([-a, -b])
    opts = dict(A_ub=A_ub, b_ub=-d, bounds=[(0, None), (0, None)], method="highs")
    stage1 = linprog(c=[1.0, 1.0], **opts)
    if not stage1.success:
        raise RuntimeError(f"envelope fit failed: {stage1.message}")
    total = float(stage1.x.sum())
    stage2 = linprog(
        c=[1.0, 1e-9],
        A_ub=np.vstack([A_ub, [1.0, 1.0]]),
        b_ub=np.append(-d, total * 1.02),
        bounds=[(0, None), (0, None)],
        method="highs",
    )
    x = stage2.x if stage2.success else stage1.x
    c1, c2 = max(float(x[0]), 0.0), max(float(x[1]), 0.0)
    lhs = c1 * a + c2 * b
    good = lhs > 0
    worst = float((d[good] / lhs[good]).max()) if good.any() else 1.0
    if worst > 1.0:
        c1, c2 = c1 * worst, c2 * worst
    return c1, c2


_MASTER_N = 64


@lru_cache(maxsize=8)
def _master_grid(L: float) -> Grid:
    return Grid(_MASTER_N, L)


def ensemble_sample(grid: Grid, rng: np.random.Generator) -> SpectralField:
    """One draw of the estimation ensemble: broadband or narrow shell, even odds.

    Draws happen on a fixed master grid and are embedded into the target, so
    different resolutions measure identical physical fields and constant
    estimates compare like for like under refinement.
    """
    src = _master_grid(grid.L) if grid.n >= _MASTER_N else grid
    if rng.integers(2) == 0:
        exponent = ENSEMBLE_EXPONENTS[rng.integers(len(ENSEMBLE_EXPONENTS))]
        phi = random_solenoidal_field(src, rng, exponent=exponent, band=ENSEMBLE_BAND, norm=1.0)
    else:
        k = ENSEMBLE_SHELLS[rng.integers(len(ENSEMBLE_SHELLS))]
        phi = random_solenoidal_field(src, rng, exponent=-5.0 / 3.0, band=(k, 1.4 * k), norm=1.0)
    return embed(phi, grid)


def estimate_approx_constants(
    J: Interpolant,
    grid: Grid,
    *,
    n_samples: int = 400,
    seed: int = 0,
) -> ApproxConstants:
    """Fit (c1, c2) and (c1t, c2t) over the seeded estimation ensemble."""
    rng = np.random.default_rng(seed)
    h = J.h
    rows = np.empty((n_samples, 6))
    for i in range(n_samples):
        phi = ensemble_sample(grid, rng)
        diff = apply_interpolant(J, phi) - phi
        nv, na = norm_v(phi), norm_a(phi)
        rows[i] = (h * nv, h**2 * na, norm_h(diff), nv, h * na, norm_v(diff))
    c1, c2 = _fit_envelope(rows[:, 0], rows[:, 1], rows[:, 2])
    c1t, c2t = _fit_envelope(rows[:, 3], rows[:, 4], rows[:, 5])
    return ApproxConstants(c1=c1, c2=c2, c1t=c1t, c2t=c2t, n_samples=n_samples, ensemble_seed=seed)


def estimate_family_constants(
    kind: str,
    sizes: Sequence[int],
    grid: Grid,
    *,
    stencil_frac: float = 0.25,
    n_samples: int = 120,
    seed: int = 0,
) -> ApproxConstants:
    """h-uniform constants for one interpolant kind, pooled across sizes.

    A single-size fit can shift all the error into whichever term is cheap at
    that particular h; pooling the envelope constraints over a ladder of sizes
    yields one (c1, c2) pair that certifiably covers every h in the ladder,
    which is the object the admissibility thresholds expect.
    """
    if not sizes:
        raise ConfigError("family estimation needs at least one size")
    pooled = []
    for n in sizes:
        J = make_interpolant(kind, n, grid.L, stencil_frac=stencil_frac)
        rng = np.random.default_rng(seed)
        h = J.h
        for _ in range(n_samples):
            phi = ensemble_sample(grid, rng)
            diff = apply_interpolant(J, phi) - phi
            nv, na = norm_v(phi), norm_a(phi)
            pooled.append((h * nv, h**2 * na, norm_h(diff), nv, h * na, norm_v(diff)))
    rows = np.array(pooled)
    c1, c2 = _fit_envelope(rows[:, 0], rows[:, 1], rows[:, 2])
    c1t, c2t = _fit_envelope(rows[:, 3], rows[:, 4], rows[:, 5])
    return ApproxConstants(
        c1=c1, c2=c2, c1t=c1t, c2t=c2t, n_samples=len(sizes) * n_samples, ensemble_seed=seed
    )
