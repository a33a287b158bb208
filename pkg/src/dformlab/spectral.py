"""Spectral representation of periodic 2D vector fields and the operators on them.

Conventions, fixed once here and relied on everywhere else:

* Domain is the square [0, L]^2 with periodic boundaries; kappa0 = 2*pi/L is
  the smallest wavenumber.
* A field is a truncated Fourier series u(x) = sum_k uhat(k) exp(i k. x) with
  k = kappa0 * (n1, n2) on the integer lattice.  Coefficients are stored on
  the numpy rfft2 layout, shape (2, n, n//2 + 1): axis -2 is n1 in fftfreq
  order, axis -1 is n2 >= 0.  The conjugate half-plane is implicit.
* Norms use the Parseval identity |u|^2 = L^2 * sum_k |uhat(k)|^2 where the
  sum runs over the full plane.  A single mode pair at +-k with coefficient
  magnitude a therefore has |u| = a * sqrt(2) * L.
* Every field is band-limited to the 2/3-rule square mask |n1|, |n2| <= n//3
  and has zero spatial mean.  With products dealiased by the same mask the
  discrete bilinear term is a true Galerkin truncation, so the energy and
  enstrophy identities hold to round-off rather than to truncation error.
* Velocity fields are divergence-free (range of the Leray projector) unless
  a function explicitly says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, NonzeroMeanError

# Relative tolerance for the zero-mean check in leray_project.
_MEAN_TOL = 1e-13


class Grid:
    """Wavenumber bookkeeping for an n-by-n periodic grid of side L.

    Precomputes physical wavenumbers, the squared-wavenumber array, the 2/3
    dealias mask, the integer lattice |n|^2 (used for modal cutoffs), and the
    column weights that turn an rfft2 half-plane sum into a full-plane sum.
    """

    def __init__(self, n: int, L: float):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {n}")
        if L <= 0:
            raise ValueError(f"domain size must be positive, got {L}")
        self.n = int(n)
        self.L = float(L)
        self.kappa0 = 2.0 * np.pi / self.L
        ncols = n // 2 + 1

        lat1 = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)  # n1 in fftfreq order
        lat2 = np.arange(ncols, dtype=np.int64)  # n2 >= 0
        self.lat1 = lat1
        self.lat2 = lat2
        self.lattice_sq = lat1[:, None] ** 2 + lat2[None, :] ** 2

        self.k1 = self.kappa0 * lat1[:, None].astype(np.float64)
        self.k2 = self.kappa0 * lat2[None, :].astype(np.float64)
        self.ksq = self.k1**2 + self.k2**2
        self.inv_ksq = np.zeros_like(self.ksq)
        np.divide(1.0, self.ksq, out=self.inv_ksq, where=self.ksq > 0)

        cut = n // 3
        self.dealias_cut = cut
        self.dealias = (np.abs(lat1)[:, None] <= cut) & (lat2[None, :] <= cut)

        # Full-plane weights: interior rfft columns represent two modes.
        w = np.full(ncols, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.col_weight = w[None, :]

        for arr in (self.lattice_sq, self.k1, self.k2, self.ksq, self.inv_ksq, self.dealias, self.col_weight):
            arr.flags.writeable = False

    @property
    def ncols(self) -> int:
        return self.n // 2 + 1

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid) and self.n == other.n and self.L == other.L

    def __hash__(self) -> int:
        return hash((self.n, self.L))

    def __repr__(self) -> str:
        return f"Grid(n={self.n}, L={self.L:g})"

    # -- scalar-coefficient utilities (used for vector components too) ------

    def mod2_sum(self, coeff: np.ndarray, power: float = 0.0) -> np.ndarray:
        """sum_k |k|^(2*power) |coeff(k)|^2 over the full plane.

        Sums the trailing two axes; leading axes pass through. power=0 gives
        the plain Parseval sum.
        """
        mag2 = (coeff.real**2 + coeff.imag**2) * self.col_weight
        if power != 0.0:
            ksq_safe = np.where(self.ksq > 0, self.ksq, 1.0)
            mag2 = mag2 * ksq_safe**power
        return mag2.sum(axis=(-2, -1))

    def scalar_sobolev(self, coeff: np.ndarray, alpha: float) -> float:
        """|A^alpha phi| for a scalar coefficient array (A = -Laplacian)."""
        return float(self.L * np.sqrt(self.mod2_sum(coeff, power=2.0 * alpha)))

    def scalar_to_physical(self, coeff: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(coeff * (self.n**2), s=(self.n, self.n))

    def scalar_from_physical(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(values) / (self.n**2)


@dataclass(frozen=True)
class SpectralField:
    """Immutable band-limited zero-mean vector field in coefficient form.

    coeff has shape (2, n, n//2+1), complex128, write-protected.  Arithmetic
    returns new fields on the same grid.
    """

    grid: Grid
    coeff: np.ndarray

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_grids(self.grid, other.grid)
        return SpectralField(self.grid, _freeze(self.coeff + other.coeff))

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_grids(self.grid, other.grid)
        return SpectralField(self.grid, _freeze(self.coeff - other.coeff))

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, _freeze(self.coeff * scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, _freeze(-self.coeff))


@dataclass(frozen=True)
class NormBundle:
    """Norms of one field computed in a single pass.

    l2   : |u|, the L^2 norm
    v    : ||u|| = |A^(1/2) u|, the energy (H^1) norm
    a    : |A u|
    a32  : |A^(3/2) u|
    linf : sup_x of the pointwise vector magnitude
    """

    l2: float
    v: float
    a: float
    a32: float
    linf: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr

def _check_grids(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a!r} vs {b!r}")


def _hermitize_col0(coeff: np.ndarray) -> None:
    """Enforce uhat(-n1, 0) = conj(uhat(n1, 0)) on the n2 = 0 column."""
    col = coeff[..., :, 0]
    mirror = np.roll(col[..., ::-1], 1, axis=-1)
    coeff[..., :, 0] = 0.5 * (col + np.conj(mirror))


def _sanitize(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    out = np.array(coeff, dtype=np.complex128, copy=True)
    out *= grid.dealias
    _hermitize_col0(out)
    out[..., 0, 0] = 0.0
    return out


def field_from_coeffs(grid: Grid, coeff: np.ndarray, *, project: bool = False) -> SpectralField:
    """Build a field from a raw coefficient array.

    Applies the dealias mask, restores Hermitian symmetry on the n2 = 0
    column, and removes the mean mode.  project=True additionally applies the
    Leray projector, which is required whenever the input is not already
    divergence-free.
    """
    if coeff.shape != (2, grid.n, grid.ncols):
        raise ValueError(f"coefficient array must have shape {(2, grid.n, grid.ncols)}, got {coeff.shape}")
    out = _sanitize(grid, coeff)
    if project:
        out = _leray_raw(grid, out)
    return SpectralField(grid, _freeze(out))


def field_from_physical(grid: Grid, values: np.ndarray, *, project: bool = False) -> SpectralField:
    """Transform (2, n, n) physical samples to a field (mean removed)."""
    if values.shape != (2, grid.n, grid.n):
        raise ValueError(f"physical array must have shape {(2, grid.n, grid.n)}, got {values.shape}")
    return field_from_coeffs(grid, np.fft.rfft2(values) / grid.n**2, project=project)


def to_physical(u: SpectralField) -> np.ndarray:
    """Collocation values on the n-by-n grid, shape (2, n, n)."""
    return np.fft.irfft2(u.coeff * (u.grid.n**2), s=(u.grid.n, u.grid.n))


def zero_field(grid: Grid) -> SpectralField:
    return SpectralField(grid, _freeze(np.zeros((2, grid.n, grid.ncols), dtype=np.complex128)))


def embed(u: SpectralField, grid: Grid) -> SpectralField:
    """Represent u on another grid of the same domain by lattice copy.

    Padding to a finer grid is exact; moving to a coarser grid truncates to
    the coarser dealiased band.
    """
    if grid == u.grid:
        return u
    if abs(grid.L - u.grid.L) > 1e-12 * grid.L:
        raise GridMismatchError(f"cannot embed between domains L={u.grid.L:g} and L={grid.L:g}")
    src = u.grid
    R = min(src.n, grid.n) // 2 - 1
    rows_src = np.abs(src.lat1) <= R
    rows_dst = src.lat1[rows_src] % grid.n
    nck = R + 1
    coeff = np.zeros((2, grid.n, grid.ncols), dtype=np.complex128)
    coeff[:, rows_dst, :nck] = u.coeff[:, rows_src, :nck]
    return field_from_coeffs(grid, coeff)


# ---------------------------------------------------------------------------
# operators


def _leray_raw(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    div = grid.k1 * coeff[0] + grid.k2 * coeff[1]
    div *= grid.inv_ksq
    out = np.empty_like(coeff)
    out[0] = coeff[0] - grid.k1 * div
    out[1] = coeff[1] - grid.k2 * div
    return out


def leray_project(u: SpectralField) -> SpectralField:
    """Project onto divergence-free fields: uhat - k (k . uhat)/|k|^2.

    The projector needs a zero-mean input (the k = 0 mode has no well-defined
    projection); construction normally guarantees that, but the check is cheap.
    """
    scale = np.abs(u.coeff).max()
    if np.abs(u.coeff[:, 0, 0]).max() > _MEAN_TOL * max(scale, 1.0):
        raise NonzeroMeanError("leray_project requires a zero-mean field")
    return SpectralField(u.grid, _freeze(_leray_raw(u.grid, u.coeff)))


def divergence_coeffs(u: SpectralField) -> np.ndarray:
    """Spectral divergence i k . uhat, shape (n, ncols). Zero for projected fields."""
    return 1j * (u.grid.k1 * u.coeff[0] + u.grid.k2 * u.coeff[1])


def stokes_apply(u: SpectralField, alpha: float = 1.0) -> SpectralField:
    """Apply A^alpha (Stokes operator; |k|^(2 alpha) multiplier), alpha in [-1, 2].

    On the mean-free band-limited space A agrees with -Laplacian composed with
    the Leray projector; negative powers are well-defined because the k = 0
    mode is absent.
    """
    if not -1.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [-1, 2], got {alpha}")
    grid = u.grid
    ksq_safe = np.where(grid.ksq > 0, grid.ksq, 1.0)
    out = u.coeff * ksq_safe**alpha
    out[..., 0, 0] = 0.0
    return SpectralField(grid, _freeze(out))


def _bilinear_raw(grid: Grid, uc: np.ndarray, vc: np.ndarray) -> np.ndarray:
    n = grid.n
    U = np.fft.irfft2(uc * n**2, s=(n, n))
    dv1 = np.fft.irfft2((1j * grid.k1) * vc * n**2, s=(n, n))
    dv2 = np.fft.irfft2((1j * grid.k2) * vc * n**2, s=(n, n))
    W = U[0] * dv1 + U[1] * dv2
    wc = np.fft.rfft2(W) / n**2
    wc *= grid.dealias
    wc[..., 0, 0] = 0.0
    return _leray_raw(grid, wc)


def bilinear(u: SpectralField, v: SpectralField) -> SpectralField:
    """B(u, v) = P[(u . grad) v], dealiased by the shared 2/3 mask.

    Computed pseudo-spectrally (8 transforms); with the square mask the
    result is the exact Galerkin truncation, so the antisymmetry and
    enstrophy identities hold to round-off.
    """
    _check_grids(u.grid, v.grid)
    return SpectralField(u.grid, _freeze(_bilinear_raw(u.grid, u.coeff, v.coeff)))


# ---------------------------------------------------------------------------
# norms and inner products


def inner_h(u: SpectralField, v: SpectralField) -> float:
    """L^2 inner product (u, v) = L^2 * sum_k uhat . conj(vhat)."""
    _check_grids(u.grid, v.grid)
    g = u.grid
    s = ((u.coeff * np.conj(v.coeff)).real * g.col_weight).sum()
    return float(g.L**2 * s)


def inner_v(u: SpectralField, v: SpectralField) -> float:
    """V inner product ((u, v)) = (A^(1/2) u, A^(1/2) v)."""
    _check_grids(u.grid, v.grid)
    g = u.grid
    s = ((u.coeff * np.conj(v.coeff)).real * g.ksq * g.col_weight).sum()
    return float(g.L**2 * s)


def sobolev_norm(u: SpectralField, alpha: float) -> float:
    """|A^alpha u|; alpha = 0 gives |u|, 1/2 gives ||u||, 1 gives |Au|."""
    g = u.grid
    return float(g.L * np.sqrt(g.mod2_sum(u.coeff, power=2.0 * alpha).sum()))


def norm_h(u: SpectralField) -> float:
    return sobolev_norm(u, 0.0)


def norm_v(u: SpectralField) -> float:
    return sobolev_norm(u, 0.5)


def norm_a(u: SpectralField) -> float:
    return sobolev_norm(u, 1.0)


def norm_inf(u: SpectralField) -> float:
    """sup-norm of the pointwise vector magnitude on the collocation grid."""
    U = to_physical(u)
    return float(np.sqrt(U[0] ** 2 + U[1] ** 2).max())


def norms(u: SpectralField) -> NormBundle:
    g = u.grid
    mag2 = (u.coeff.real**2 + u.coeff.imag**2) * g.col_weight
    base = mag2.sum()
    ksq = g.ksq
    v2 = (mag2 * ksq).sum()
    a2 = (mag2 * ksq**2).sum()
    a32 = (mag2 * ksq**3).sum()
    return NormBundle(
        l2=float(g.L * np.sqrt(base)),
        v=float(g.L * np.sqrt(v2)),
        a=float(g.L * np.sqrt(a2)),
        a32=float(g.L * np.sqrt(a32)),
        linf=norm_inf(u),
    )


def energy(u: SpectralField) -> float:
    """E = |u|^2 / 2."""
    return 0.5 * norm_h(u) ** 2


def enstrophy(u: SpectralField) -> float:
    """Z = ||u||^2 / 2."""
    return 0.5 * norm_v(u) ** 2


# ---------------------------------------------------------------------------
# field constructors


def solenoidal_mode(grid: Grid, n1: int, n2: int, amplitude: float, phase: float = 0.0) -> SpectralField:
    """Single divergence-free eigenmode pair at lattice +-(n1, n2).

    The stored coefficient has magnitude `amplitude`, direction perpendicular
    to k, so |u| = amplitude * sqrt(2) * L and A u = |k|^2 u exactly.
    """
    if n1 == 0 and n2 == 0:
        raise ValueError("mode (0, 0) is not admissible")
    coeff = np.zeros((2, grid.n, grid.ncols), dtype=np.complex128)
    a = amplitude * np.exp(1j * phase)
    knorm = np.hypot(n1, n2)
    perp = np.array([-n2 / knorm, n1 / knorm])
    if n2 > 0:
        coeff[:, n1 % grid.n, n2] = a * perp
    elif n2 < 0:
        # conjugate partner lives in the stored n2 >= 0 half-plane
        coeff[:, (-n1) % grid.n, -n2] = np.conj(a * perp)
    else:
        # n2 = 0 column holds both +-k explicitly
        coeff[:, n1 % grid.n, 0] = a * perp
        coeff[:, (-n1) % grid.n, 0] = np.conj(a * perp)
    field = field_from_coeffs(grid, coeff)
    if not field.coeff.any():
        raise ValueError(f"mode ({n1}, {n2}) lies outside the dealiased band of {grid!r}")
    return field


def random_solenoidal_field(
    grid: Grid,
    rng: np.random.Generator,
    *,
    exponent: float = -5.0 / 3.0,
    band: tuple[float, float] = (1.0, 21.0),
    norm: float = 1.0,
    norm_kind: str = "v",
) -> SpectralField:
    """Random divergence-free field with a power-law energy spectrum.

    Complex Gaussian coefficients are shaped by the envelope
    |n|^((exponent - 1)/2) inside the lattice band, projected, and rescaled
    so the requested norm ('h' for |u|, 'v' for ||u||) equals `norm`.
    """
    coeff = _random_coeffs(grid, rng, 2, exponent, band)
    field = field_from_coeffs(grid, coeff, project=True)
    current = norm_h(field) if norm_kind == "h" else norm_v(field)
    if current == 0.0:
        raise ValueError("empty spectral band for this grid")
    return field * (norm / current)


def random_scalar_coeffs(
    grid: Grid,
    rng: np.random.Generator,
    *,
    exponent: float = -5.0 / 3.0,
    band: tuple[float, float] = (1.0, 21.0),
    grad_norm: float = 1.0,
) -> np.ndarray:
    """Random zero-mean scalar coefficient array, |grad phi| rescaled to grad_norm."""
    coeff = _random_coeffs(grid, rng, 1, exponent, band)[0]
    current = grid.scalar_sobolev(coeff, 0.5)
    if current == 0.0:
        raise ValueError("empty spectral band for this grid")
    return coeff * (grad_norm / current)


def _random_coeffs(grid: Grid, rng: np.random.Generator, ncomp: int, exponent: float, band: tuple[float, float]) -> np.ndarray:
    shape = (ncomp, grid.n, grid.ncols)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    lat = np.sqrt(grid.lattice_sq.astype(np.float64))
    lat_safe = np.where(lat > 0, lat, 1.0)
    envelope = lat_safe ** ((exponent - 1.0) / 2.0)
    envelope = np.where((lat >= band[0]) & (lat <= band[1]), envelope, 0.0)
    return z * envelope
