"""The data-to-solution map W, the defect scalar g, and the descent equation.

W(v) approximates the unique solution of the nudged flow that stays bounded
for all time when driven by the data trajectory v: integrating from rest at
s0 - pre_window (with v held at its left endpoint there) forgets the start
at the nudging rate, so by s0 the window restriction no longer depends on
the pre-window.  The defect

    g(v) = ||v - J W(v)||_{X,0}

vanishes exactly when v is the interpolant image of a solution, and drives
the descent equation dv/dt = -g(v)^2 (v - Ju*).  Because the right side is
parallel to v - Ju*, the evolution reduces to a scalar amplitude a(t) along
the ray through the initial data:

    v(t) = Ju* + a(t) (v0 - Ju*),    da/dt = -g(Ju* + a (v0 - Ju*))^2 a.

Each amplitude evaluation costs one full W solve; evaluations at distinct
amplitudes are independent of each other and are memoized per amplitude.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import SolverConfig, integrate_nse, integrate_nudged
from .errors import ConfigError, NumericalBlowupError
from .inequalities import AdmissibleRegion
from .interpolants import Interpolant, apply_interpolant
from .physics import PhysicalParams, grashof
from .spectral import SpectralField, norm_a, norm_v, zero_field
from .trajectories import Trajectory, constant_trajectory, trajectory_provider, x_norms

__all__ = [
    "DFormConfig",
    "WAuditRow",
    "WResult",
    "EvolutionRow",
    "EvolutionRecord",
    "PreWindowReport",
    "RefinementReport",
    "dform_config_for",
    "compute_W",
    "g_value",
    "steady_residual",
    "measure_R",
    "pre_window_study",
    "measure_eps_disc",
    "evolve_determining_form",
]


@dataclass(frozen=True)
class DFormConfig:
    """Parameters of the bounded-solution map and the descent equation.

    K must dominate sqrt(2 rho^2 + G^2/mu + 1); rho is the radius of the
    trajectory ball the map is defined on, R the measured attractor scale
    it derives from (rho = 4R in the curated factory).
    """

    mu: float
    rho: float
    K: float
    R: float
    pre_window: float
    u_star: SpectralField | None = None

    def __post_init__(self) -> None:
        for name in ("mu", "rho", "K", "R", "pre_window"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")

    def k_floor(self, params: PhysicalParams) -> float:
        G = grashof(params)
        return math.sqrt(2.0 * self.rho**2 + G**2 / self.mu + 1.0)

    def validate(
        self,
        params: PhysicalParams,
        J: Interpolant,
        *,
        region: AdmissibleRegion | None = None,
        strict: bool = False,
    ) -> tuple[str, ...]:
        """Enforce the hard invariants; report the soft ones.

        The K floor and the mu-h smallness bound raise ConfigError.  The
        analytic lower window on mu only warns: the constants behind it are
        sufficient, not necessary, and measured gains far below it already
        relax the map in practice.
        """
        notes: list[str] = []
        floor = self.k_floor(params)
        if self.K < floor * (1.0 - 1e-12):
            raise ConfigError(
                f"K = {self.K:g} is below the floor sqrt(2 rho^2 + G^2/mu + 1) = {floor:g}"
            )
        consts = region.J if region is not None else J.constants
        if consts is None:
            message = (
                "interpolant approximation constants unavailable; "
                "the mu-h smallness bound was not checked"
            )
            if strict:
                raise ConfigError(message)
            notes.append(message)
        else:
            smallness = 2.0 * self.mu * J.h**2 * params.kappa0**2 * (consts.c1**2 + consts.c2)
            if not smallness < 0.5:
                raise ConfigError(
                    f"2 mu h^2 kappa0^2 (c1^2 + c2) = {smallness:g} must stay below 1/2; "
                    f"lower mu or refine the interpolant (h = {J.h:g})"
                )
        if region is not None:
            lo, _hi = region.mu_window_W(self.K)
            if self.mu < lo:
                message = (
                    f"mu = {self.mu:g} is below the analytic window floor {lo:.3g} "
                    "for the bounded-solution map; proceeding (the analytic constants "
                    "are sufficient, not necessary)"
                )
                warnings.warn(message, stacklevel=2)
                notes.append(message)
        return tuple(notes)


def dform_config_for(
    params: PhysicalParams,
    J: Interpolant,
    mu: float,
    *,
    R: float,
    pre_window: float | None = None,
    u_star: SpectralField | None = None,
    region: AdmissibleRegion | None = None,
) -> DFormConfig:
    """Curated construction: rho = 4R, K at its floor, default pre-window.

    Validates the result (hard invariants raise; the analytic mu window only
    warns when a region with measured constants is supplied).
    """
    if not R > 0:
        raise ConfigError(f"R must be positive, got {R}")
    rho = 4.0 * R
    G = grashof(params)
    if not mu > 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    K = math.sqrt(2.0 * rho**2 + G**2 / mu + 1.0) * (1.0 + 1e-9)
    config = DFormConfig(
        mu=mu,
        rho=rho,
        K=K,
        R=R,
        pre_window=pre_window if pre_window is not None else 10.0 * params.time_unit,
        u_star=u_star,
    )
    config.validate(params, J, region=region)
    return config


# ---------------------------------------------------------------------------
# the W map


@dataclass(frozen=True)
class WAuditRow:
    """Per-sample norms of the mapped trajectory: ||w||, ||w'||, |Aw|."""

    s: float
    norm_w: float
    norm_dw: float
    norm_aw: float


@dataclass(frozen=True)
class WResult:
    """W(v) plus the bound and ball reports the map's guarantees refer to."""

    trajectory: Trajectory
    audit: tuple[WAuditRow, ...]
    bound_ratio: float  # max_s ||w(s)|| / (nu kappa0 K)
    ball_ratio: float  # ||v||_X / rho
    notes: tuple[str, ...]


def _aligned_solver(v: Trajectory, solver: SolverConfig | None) -> SolverConfig:
    """Land solver samples exactly on the data trajectory's nodes."""
    base_dt = solver.dt if solver is not None else 0.01
    sample_every = max(1, round(v.ds / base_dt))
    dt = v.ds / sample_every
    if solver is None:
        return SolverConfig(resolution=v.grid.n, dt=dt, sample_every=sample_every)
    return replace(solver, resolution=v.grid.n, dt=dt, sample_every=sample_every)


def compute_W(
    v: Trajectory,
    params: PhysicalParams,
    J: Interpolant,
    config: DFormConfig,
    *,
    solver: SolverConfig | None = None,
    region: AdmissibleRegion | None = None,
) -> WResult:
    """Map a data trajectory to the nudged solution it pins down.

    Two phases with the same stepper: an unrecorded relaxation from rest over
    [s0 - pre_window, s0] with v clamped to its left endpoint, then the
    recorded pass over the window itself, sampled exactly on v's nodes.
    Derivative samples are the nudged equation's right side at each node.
    """
    if len(v) < 2:
        raise ConfigError("the data window needs at least two samples")
    notes = list(config.validate(params, J, region=region))
    xv = x_norms(v, params)
    ball_value = xv.x if xv.x is not None else xv.x0
    ball_ratio = ball_value / config.rho
    if ball_ratio > 1.0:
        message = (
            f"data trajectory leaves the X-ball: ||v||_X = {ball_value:g} "
            f"exceeds rho = {config.rho:g}"
        )
        warnings.warn(message, stacklevel=2)
        notes.append(message)
    solver = _aligned_solver(v, solver)
    provider = trajectory_provider(v, clamp=True)
    relaxed = integrate_nudged(
        zero_field(v.grid), provider, params, J, config.mu, solver,
        config.pre_window, t0=v.s0 - config.pre_window,
    )
    run = integrate_nudged(
        relaxed.final, provider, params, J, config.mu, solver,
        v.window(), t0=v.s0, want_trajectory=True,
    )
    w = run.trajectory
    assert w is not None and len(w) == len(v)
    audit = tuple(
        WAuditRow(s=float(s), norm_w=norm_v(f), norm_dw=norm_v(d), norm_aw=norm_a(f))
        for s, f, d in zip(w.times(), w.values, w.derivs)
    )
    scale = params.nu * params.kappa0 * config.K
    bound_ratio = max(row.norm_w for row in audit) / scale
    return WResult(
        trajectory=w,
        audit=audit,
        bound_ratio=bound_ratio,
        ball_ratio=ball_ratio,
        notes=tuple(notes),
    )


def g_value(
    v: Trajectory,
    params: PhysicalParams,
    J: Interpolant,
    config: DFormConfig,
    *,
    solver: SolverConfig | None = None,
    w: WResult | Trajectory | None = None,
) -> float:
    """Defect g(v) = ||v - J W(v)||_{X,0}; zero exactly on solution images."""
    if w is None:
        w = compute_W(v, params, J, config, solver=solver)
    w_traj = w.trajectory if isinstance(w, WResult) else w
    return x_norms(v - w_traj.interpolant_image(J), params).x0


def steady_residual(
    u_run: Trajectory,
    params: PhysicalParams,
    J: Interpolant,
    config: DFormConfig,
    *,
    solver: SolverConfig | None = None,
) -> float:
    """Defect of a flow run's interpolant image: near zero identifies the
    run as (numerically) lying on an actual solution."""
    return g_value(u_run.interpolant_image(J), params, J, config, solver=solver)


def measure_R(
    runs: Sequence[Trajectory], params: PhysicalParams, J: Interpolant
) -> float:
    """Operational attractor scale: twice the largest ||Ju||_X over the runs."""
    if not runs:
        raise ConfigError("R measurement needs at least one trajectory")
    worst = 0.0
    for run in runs:
        xn = x_norms(run.interpolant_image(J), params)
        if xn.x is None:
            raise ConfigError("R measurement needs derivative samples")
        worst = max(worst, xn.x)
    return 2.0 * worst


# ---------------------------------------------------------------------------
# discretization floors


@dataclass(frozen=True)
class PreWindowReport:
    """Window-restriction change under pre-window doubling."""

    pre_windows: tuple[float, ...]
    changes: tuple[float, ...]
    converged: bool
    settled: float


def pre_window_study(
    v: Trajectory,
    params: PhysicalParams,
    J: Interpolant,
    config: DFormConfig,
    *,
    solver: SolverConfig | None = None,
    tol: float = 1e-8,
    max_doublings: int = 3,
) -> PreWindowReport:
    """Double the pre-window until W's window restriction stops moving.

    The change metric is the worst per-sample difference relative to the
    trajectory's own scale; `settled` is the shortest pre-window whose
    doubling changed the restriction by less than tol.
    """
    pre_windows = [config.pre_window]
    previous = compute_W(v, params, J, config, solver=solver).trajectory
    changes: list[float] = []
    converged = False
    settled = config.pre_window
    for _ in range(max_doublings):
        doubled = replace(config, pre_window=2.0 * pre_windows[-1])
        current = compute_W(v, params, J, doubled, solver=solver).trajectory
        scale = max(max(norm_v(f) for f in previous.values), 1e-300)
        change = max(
            norm_v(a - b) for a, b in zip(current.values, previous.values)
        ) / scale
        changes.append(change)
        if change < tol:
            converged = True
            settled = pre_windows[-1]
            break
        pre_windows.append(doubled.pre_window)
        previous = current
        settled = doubled.pre_window
    return PreWindowReport(
        pre_windows=tuple(pre_windows),
        changes=tuple(changes),
        converged=converged,
        settled=settled,
    )


@dataclass(frozen=True)
class RefinementReport:
    """Defect of an on-attractor run under simultaneous dt and sample-spacing
    halving; eps_disc is twice the base-level defect, the working floor."""

    dts: tuple[float, ...]
    spacings: tuple[float, ...]
    g_values: tuple[float, ...]
    ratios: tuple[float, ...]
    eps_disc: float
    converging: bool


def measure_eps_disc(
    u0: SpectralField,
    params: PhysicalParams,
    J: Interpolant,
    config: DFormConfig,
    solver: SolverConfig,
    *,
    T: float | None = None,
    levels: int = 2,
) -> RefinementReport:
    """Calibrate the discretization floor of g on a known solution.

    u0 should already lie on the attractor (spun up).  Each level halves dt,
    and with it the sample spacing; the defect of the level's own run, solved
    at the level's own resolution, traces how much of g is discretization.
    """
    if levels < 2:
        raise ConfigError(f"refinement needs at least two levels, got {levels}")
    horizon = T if T is not None else 5.0 * params.time_unit
    dts: list[float] = []
    spacings: list[float] = []
    values: list[float] = []
    for k in range(levels):
        level = replace(solver, dt=solver.dt / 2**k)
        run = integrate_nse(u0, params, level, horizon, want_trajectory=True)
        assert run.trajectory is not None
        values.append(steady_residual(run.trajectory, params, J, config, solver=level))
        dts.append(run.dt)
        spacings.append(run.trajectory.ds)
    ratios = tuple(
        values[k] / max(values[k + 1], 1e-300) for k in range(levels - 1)
    )
    return RefinementReport(
        dts=tuple(dts),
        spacings=tuple(spacings),
        g_values=tuple(values),
        ratios=ratios,
        eps_disc=2.0 * values[0],
        converging=all(r > 2.0 for r in ratios) or values[-1] <= 1e-10,
    )


# ---------------------------------------------------------------------------
# the descent equation


@dataclass(frozen=True)
class EvolutionRow:
    t: float
    a: float
    g: float
    xnorm_dist: float


@dataclass(frozen=True)
class EvolutionRecord:
    """Descent history along the ray through the initial data."""

    rows: tuple[EvolutionRow, ...]
    dist0: float
    terminated: bool  # the stall event fired before t_end
    final_rate: float  # |da/dt| at the last recorded row
    g_evaluations: int
    error: str = ""

    @property
    def success(self) -> bool:
        return not self.error


def evolve_determining_form(
    v0: Trajectory,
    u_star: SpectralField,
    t_end: float,
    params: PhysicalParams,
    J: Interpolant,
    config: DFormConfig,
    *,
    solver: SolverConfig | None = None,
    rtol: float = 1e-6,
    stop_rate: float = 1e-8,
) -> EvolutionRecord:
    """Integrate dv/dt = -g(v)^2 (v - Ju*) by its scalar ray reduction.

    The right side keeps v - Ju* parallel to v0 - Ju*, so only the amplitude
    a(t) evolves: da/dt = -g(a)^2 a from a(0) = 1, solved adaptively with g
    memoized per amplitude.  Terminates early once |da/dt| < stop_rate; a
    blow-up inside a g evaluation aborts with the partial record.
    """
    if t_end <= 0:
        raise ConfigError(f"t_end must be positive, got {t_end}")
    base = constant_trajectory(apply_interpolant(J, u_star), v0.s0, v0.ds, len(v0))
    ray = v0 - base
    xr = x_norms(ray, params)
    dist0 = xr.x if xr.x is not None else xr.x0
    if not dist0 < 3.0 * config.R:
        raise ConfigError(
            f"||v0 - Ju*||_X = {dist0:g} must stay below 3R = {3.0 * config.R:g} "
            "for the descent ball to be forward invariant"
        )

    cache: dict[float, float] = {}

    def g_of(a: float) -> float:
        key = float(a)
        if key not in cache:
            trial = base + ray.scaled(key)
            cache[key] = g_value(trial, params, J, config, solver=solver)
        return cache[key]

    if dist0 == 0.0:
        g0 = g_of(1.0)
        rows = (
            EvolutionRow(t=0.0, a=1.0, g=g0, xnorm_dist=0.0),
            EvolutionRow(t=t_end, a=1.0, g=g0, xnorm_dist=0.0),
        )
        return EvolutionRecord(
            rows=rows, dist0=0.0, terminated=False, final_rate=0.0,
            g_evaluations=len(cache),
        )

    history: dict[float, float] = {}

    def rhs(t: float, y: np.ndarray) -> tuple[float]:
        a = float(y[0])
        return (-g_of(a) ** 2 * a,)

    def stalled(t: float, y: np.ndarray) -> float:
        a = float(y[0])
        history[float(t)] = a
        return g_of(a) ** 2 * abs(a) - stop_rate

    stalled.terminal = True
    stalled.direction = -1

    error = ""
    try:
        sol = solve_ivp(
            rhs, (0.0, t_end), [1.0], method="RK45",
            rtol=rtol, atol=1e-12, events=stalled,
        )
        ts = sol.t
        amps = sol.y[0]
        terminated = sol.status == 1
    except NumericalBlowupError as exc:
        items = sorted(history.items())
        ts = np.array([t for t, _ in items])
        amps = np.array([a for _, a in items])
        terminated = False
        error = f"g evaluation failed: {exc}"

    rows = tuple(
        EvolutionRow(
            t=float(t), a=float(a), g=g_of(float(a)), xnorm_dist=abs(float(a)) * dist0
        )
        for t, a in zip(ts, amps)
    )
    final_rate = rows[-1].g ** 2 * abs(rows[-1].a) if rows else math.inf
    return EvolutionRecord(
        rows=rows,
        dist0=dist0,
        terminated=terminated,
        final_rate=final_rate,
        g_evaluations=len(cache),
        error=error,
    )
