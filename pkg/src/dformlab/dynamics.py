"""Time integration of the flow and its nudged copy.

The semi-discrete system is du/dt = L u + N(u, t) with L the diagonal viscous
multiplier -nu |k|^2 and N the dealiased advection plus forcing (plus, for the
nudged equation, the feedback term -mu nu kappa0^2 P(Jw - v)).  Two steppers
are provided:

* ``ifrk4``: integrating-factor (Lawson) RK4.  The substitution
  z = exp(-tL) u removes the linear part exactly, so pure viscous decay is
  reproduced to round-off and the nonlinear terms see classical fourth order.
* ``cnab2``: Crank-Nicolson on L, second-order Adams-Bashforth on N, with a
  one-step self-starting bootstrap (N_{-1} := N_0).

Feedback handling: ``explicit`` puts the whole nudging term in N and requires
dt < 1/(mu nu kappa0^2); ``implicit`` (modal interpolants only) advances the
step without feedback and then applies a backward-Euler relaxation of the
observed modes toward the data, w_J <- (w_J + a v_J)/(1 + a) with
a = mu nu kappa0^2 dt.  The relaxation is unconditionally stable and tends to
direct insertion as mu -> infinity, at the cost of first-order accuracy in the
feedback channel, so explicit remains the default.
"""

from __future__ import annotations

import os
import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericalBlowupError
from .interpolants import Interpolant, apply_interpolant
from .physics import PhysicalParams, forcing_field, grashof
from .spectral import (
    Grid,
    SpectralField,
    _bilinear_raw,
    _leray_raw,
    bilinear,
    norm_a,
    norm_h,
    norm_v,
    random_solenoidal_field,
    stokes_apply,
    to_physical,
)
from .trajectories import Trajectory


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters shared by every run."""

    resolution: int = 64
    dt: float = 0.01
    integrator: str = "ifrk4"
    sample_every: int = 5
    feedback: str = "explicit"
    spin_up_time: float | None = None
    seed: int = 0
    cfl_warn: bool = True

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.integrator not in ("ifrk4", "cnab2"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if self.sample_every < 1:
            raise ConfigError(f"sample_every must be >= 1, got {self.sample_every}")
        if self.feedback not in ("explicit", "implicit"):
            raise ConfigError(f"unknown feedback mode {self.feedback!r}")


@dataclass(frozen=True)
class DiagnosticsRow:
    """One sampled diagnostics record; deltas are NaN when no reference exists."""

    s: float
    energy: float
    enstrophy: float
    norm_v: float
    norm_da: float
    delta_h: float = float("nan")
    delta_v: float = float("nan")
    delta_da: float = float("nan")


@dataclass(frozen=True)
class FlowRun:
    """Output of one integration."""

    params: PhysicalParams
    solver: SolverConfig
    t0: float
    t1: float
    dt: float
    n_steps: int
    final: SpectralField
    diagnostics: tuple[DiagnosticsRow, ...]
    trajectory: Trajectory | None = None


@dataclass(frozen=True)
class DecayRecord:
    """Synchronization time series delta = w - u plus the fitted decay rate."""

    s: np.ndarray
    delta_v: np.ndarray
    delta_h: np.ndarray
    delta_da: np.ndarray
    energy: np.ndarray
    enstrophy: np.ndarray
    rate: float
    synchronized: bool
    diverged: bool
    mu: float
    h: float
    kind: str
    admissible: bool | None = None
    final_u: SpectralField | None = None
    final_w: SpectralField | None = None

    def __post_init__(self) -> None:
        if np.any(np.diff(self.s) <= 0):
            raise ConfigError("decay record needs a strictly increasing time column")


@dataclass(frozen=True)
class SweepCell:
    """One row of the synchronization phase table."""

    mu: float
    h: float
    kind: str
    label: str
    rate: float
    synchronized: bool
    diverged: bool
    admissible: bool | None = None
    error: str = ""


@dataclass(frozen=True)
class SpinUpReport:
    """Field after spin-up plus the absorbing-ball bookkeeping."""

    field: SpectralField
    params: PhysicalParams
    T: float
    grashof: float
    norm_h_ratio: float
    norm_v_ratio: float
    bound_ok: bool
    dissipation_ratio: float
    dissipation_ok: bool
    max_da: float


# ---------------------------------------------------------------------------
# right-hand sides


def make_grid(params: PhysicalParams, solver: SolverConfig) -> Grid:
    return Grid(solver.resolution, params.L)


def nse_rhs(u: SpectralField, params: PhysicalParams) -> SpectralField:
    """du/dt = -nu A u - B(u, u) + f, as a field."""
    f = forcing_field(u.grid, params)
    return f - stokes_apply(u) * params.nu - bilinear(u, u)


def _viscous_multiplier(grid: Grid, params: PhysicalParams) -> np.ndarray:
    return -params.nu * grid.ksq


class _Lawson:
    """Integrating-factor RK4 for dz/dt = L z + N(z, t), L real diagonal."""

    def __init__(self, lins: Sequence[np.ndarray], dt: float):
        self.dt = dt
        self.E = [np.exp(dt * L) for L in lins]
        self.E2 = [np.exp(0.5 * dt * L) for L in lins]

    def step(self, state: list[np.ndarray], t: float, nonlin) -> list[np.ndarray]:
        dt, E, E2 = self.dt, self.E, self.E2
        k1 = nonlin(state, t)
        k2 = nonlin([E2[i] * (state[i] + (0.5 * dt) * k1[i]) for i in range(len(state))], t + 0.5 * dt)
        k3 = nonlin([E2[i] * state[i] + (0.5 * dt) * k2[i] for i in range(len(state))], t + 0.5 * dt)
        k4 = nonlin([E[i] * state[i] + dt * E2[i] * k3[i] for i in range(len(state))], t + dt)
        return [
            E[i] * state[i]
            + (dt / 6.0) * (E[i] * k1[i] + 2.0 * E2[i] * (k2[i] + k3[i]) + k4[i])
            for i in range(len(state))
        ]


class _CNAB2:
    """Crank-Nicolson (L) + Adams-Bashforth 2 (N), Euler-bootstrapped."""

    def __init__(self, lins: Sequence[np.ndarray], dt: float):
        self.dt = dt
        self.pre = [1.0 + 0.5 * dt * L for L in lins]
        self.post = [1.0 / (1.0 - 0.5 * dt * L) for L in lins]
        self.prev: list[np.ndarray] | None = None

    def step(self, state: list[np.ndarray], t: float, nonlin) -> list[np.ndarray]:
        now = nonlin(state, t)
        prev = self.prev if self.prev is not None else now
        out = [
            self.post[i] * (self.pre[i] * state[i] + self.dt * (1.5 * now[i] - 0.5 * prev[i]))
            for i in range(len(state))
        ]
        self.prev = now
        return out


def _make_stepper(solver: SolverConfig, lins: Sequence[np.ndarray], dt: float):
    cls = _Lawson if solver.integrator == "ifrk4" else _CNAB2
    return cls(lins, dt)


# ---------------------------------------------------------------------------
# the integration core


_CHECK_EVERY = 16
_BLOWUP_COEFF = 1.0e8


def _step_plan(T: float, solver: SolverConfig) -> tuple[int, float]:
    """Whole number of steps that is a multiple of the sample cadence and
    lands exactly on T; dt is adjusted by at most a few percent."""
    if T <= 0:
        raise ConfigError(f"integration time must be positive, got {T}")
    span = max(1, round(T / (solver.dt * solver.sample_every)))
    n_steps = span * solver.sample_every
    return n_steps, T / n_steps


def _advance(
    stepper,
    nonlin,
    state: list[np.ndarray],
    t0: float,
    dt: float,
    n_steps: int,
    *,
    sample_every: int,
    on_sample: Callable[[float, list[np.ndarray]], None],
    post_step: Callable[[list[np.ndarray], float], list[np.ndarray]] | None = None,
) -> list[np.ndarray]:
    history: deque[tuple[float, float]] = deque(maxlen=8)
    on_sample(t0, state)
    for i in range(1, n_steps + 1):
        t_prev = t0 + (i - 1) * dt
        state = stepper.step(state, t_prev, nonlin)
        if post_step is not None:
            state = post_step(state, t_prev + dt)
        t = t0 + i * dt
        if i % _CHECK_EVERY == 0 or i == n_steps:
            peak = max(float(np.abs(a).max()) for a in state)
            if not np.isfinite(peak) or peak > _BLOWUP_COEFF:
                raise NumericalBlowupError(
                    f"solution blew up (peak coefficient {peak:.3g})",
                    t=t,
                    history=list(history),
                )
            history.append((t, peak))
        if i % sample_every == 0:
            on_sample(t, state)
    return state


class _Sampler:
    """Collects diagnostics (and optionally trajectory samples) during a run."""

    def __init__(
        self,
        grid: Grid,
        params: PhysicalParams,
        solver: SolverConfig,
        dt: float,
        *,
        deriv_of: Callable[[list[np.ndarray], float], np.ndarray] | None,
        watch: int = 0,
        delta_against: Callable[[float, list[np.ndarray]], SpectralField | None] | None = None,
        want_trajectory: bool = False,
        extra: Callable[[float, list[np.ndarray]], None] | None = None,
    ):
        self.grid, self.params, self.solver, self.dt = grid, params, solver, dt
        self.watch = watch
        self.deriv_of = deriv_of
        self.delta_against = delta_against
        self.want_trajectory = want_trajectory
        self.extra = extra
        self.rows: list[DiagnosticsRow] = []
        self.values: list[SpectralField] = []
        self.derivs: list[SpectralField] = []
        self.t_first: float | None = None
        self._warned_cfl = False

    def __call__(self, t: float, state: list[np.ndarray]) -> None:
        if self.t_first is None:
            self.t_first = t
        u = SpectralField(self.grid, state[self.watch].copy())
        row = dict(
            s=t,
            energy=0.5 * norm_h(u) ** 2,
            enstrophy=0.5 * norm_v(u) ** 2,
            norm_v=norm_v(u),
            norm_da=norm_a(u),
        )
        if self.delta_against is not None:
            ref = self.delta_against(t, state)
            if ref is not None:
                d = u - ref
                row.update(delta_h=norm_h(d), delta_v=norm_v(d), delta_da=norm_a(d))
        self.rows.append(DiagnosticsRow(**row))
        if self.want_trajectory:
            self.values.append(u)
            if self.deriv_of is not None:
                self.derivs.append(SpectralField(self.grid, self.deriv_of(state, t)))
        if self.extra is not None:
            self.extra(t, state)
        if self.solver.cfl_warn and not self._warned_cfl:
            speed = float(np.abs(to_physical(u)).max())
            ratio = speed * self.dt / (self.grid.L / self.grid.n)
            if ratio > 1.0:
                self._warned_cfl = True
                warnings.warn(
                    f"advective CFL ratio {ratio:.2f} > 1 at t = {t:.3g}; "
                    "reduce dt or resolution demands",
                    RuntimeWarning,
                    stacklevel=2,
                )

    def trajectory(self) -> Trajectory | None:
        if not self.want_trajectory:
            return None
        ds = self.dt * self.solver.sample_every
        derivs = tuple(self.derivs) if self.derivs else None
        return Trajectory(self.t_first, ds, tuple(self.values), derivs)


# ---------------------------------------------------------------------------
# public integrations


def integrate_nse(
    u0: SpectralField,
    params: PhysicalParams,
    solver: SolverConfig,
    T: float,
    *,
    t0: float = 0.0,
    want_trajectory: bool = False,
    on_sample: Callable[[float, SpectralField], None] | None = None,
) -> FlowRun:
    """Advance the flow for time T from u0."""
    grid = u0.grid
    if grid.n != solver.resolution:
        solver = replace(solver, resolution=grid.n)
    n_steps, dt = _step_plan(T, solver)
    lin = _viscous_multiplier(grid, params)
    fc = forcing_field(grid, params).coeff

    def nonlin(state: list[np.ndarray], t: float) -> list[np.ndarray]:
        return [fc - _bilinear_raw(grid, state[0], state[0])]

    def deriv_of(state: list[np.ndarray], t: float) -> np.ndarray:
        return lin * state[0] + nonlin(state, t)[0]

    extra = None
    if on_sample is not None:
        extra = lambda t, state: on_sample(t, SpectralField(grid, state[0].copy()))

    sampler = _Sampler(
        grid, params, solver, dt, deriv_of=deriv_of, want_trajectory=want_trajectory, extra=extra
    )
    stepper = _make_stepper(solver, [lin], dt)
    state = _advance(
        stepper, nonlin, [np.array(u0.coeff)], t0, dt, n_steps,
        sample_every=solver.sample_every, on_sample=sampler,
    )
    return FlowRun(
        params=params, solver=solver, t0=t0, t1=t0 + n_steps * dt, dt=dt, n_steps=n_steps,
        final=SpectralField(grid, state[0]), diagnostics=tuple(sampler.rows),
        trajectory=sampler.trajectory(),
    )


def _feedback_gain(params: PhysicalParams, mu: float) -> float:
    return mu * params.nu * params.kappa0**2


def _check_explicit_dt(dt: float, params: PhysicalParams, mu: float) -> None:
    gain = _feedback_gain(params, mu)
    if mu > 0 and dt * gain >= 1.0:
        raise ConfigError(
            f"dt = {dt:g} violates the explicit-feedback bound dt < 1/(mu nu kappa0^2) = {1.0 / gain:g}"
        )


def _modal_mask(J: Interpolant, grid: Grid) -> np.ndarray:
    return (grid.lattice_sq <= J.n) & grid.dealias


def _j_raw(J: Interpolant, grid: Grid, coeff: np.ndarray) -> np.ndarray:
    if J.kind == "modal":
        return coeff * _modal_mask(J, grid)
    return apply_interpolant(J, SpectralField(grid, coeff)).coeff


def integrate_nudged(
    w0: SpectralField,
    provider: Callable[[float], SpectralField],
    params: PhysicalParams,
    J: Interpolant,
    mu: float,
    solver: SolverConfig,
    T: float,
    *,
    t0: float = 0.0,
    want_trajectory: bool = False,
    reference: Callable[[float], SpectralField] | None = None,
) -> FlowRun:
    """Advance the nudged equation dw/ds + nu A w + B(w,w) = f - mu nu kappa0^2 P(Jw - v).

    `provider` supplies the observed data v(s); `reference` (optional) supplies
    a full field for the delta columns of the diagnostics.
    """
    grid = w0.grid
    if mu < 0:
        raise ConfigError(f"nudging gain must be >= 0, got {mu}")
    if grid.n != solver.resolution:
        solver = replace(solver, resolution=grid.n)
    n_steps, dt = _step_plan(T, solver)
    gain = _feedback_gain(params, mu)
    implicit = solver.feedback == "implicit" and mu > 0
    if implicit and J.kind != "modal":
        raise ConfigError("implicit feedback needs a diagonal (modal) interpolant")
    if not implicit:
        _check_explicit_dt(dt, params, mu)
    lin = _viscous_multiplier(grid, params)
    fc = forcing_field(grid, params).coeff

    def feedback(wc: np.ndarray, t: float) -> np.ndarray:
        diff = _j_raw(J, grid, wc) - provider(t).coeff
        return -gain * _leray_raw(grid, diff)

    def nonlin(state: list[np.ndarray], t: float) -> list[np.ndarray]:
        out = fc - _bilinear_raw(grid, state[0], state[0])
        if mu > 0 and not implicit:
            out = out + feedback(state[0], t)
        return [out]

    post_step = None
    if implicit:
        mask = _modal_mask(J, grid)
        blend = mask * (gain * dt / (1.0 + gain * dt))

        def post_step(state: list[np.ndarray], t: float) -> list[np.ndarray]:
            wc = state[0]
            return [wc + blend * (provider(t).coeff - wc)]

    def deriv_of(state: list[np.ndarray], t: float) -> np.ndarray:
        out = lin * state[0] + fc - _bilinear_raw(grid, state[0], state[0])
        if mu > 0:
            out = out + feedback(state[0], t)
        return out

    delta_against = None
    if reference is not None:
        delta_against = lambda t, state: reference(t)

    sampler = _Sampler(
        grid, params, solver, dt,
        deriv_of=deriv_of, want_trajectory=want_trajectory, delta_against=delta_against,
    )
    stepper = _make_stepper(solver, [lin], dt)
    state = _advance(
        stepper, nonlin, [np.array(w0.coeff)], t0, dt, n_steps,
        sample_every=solver.sample_every, on_sample=sampler, post_step=post_step,
    )
    return FlowRun(
        params=params, solver=solver, t0=t0, t1=t0 + n_steps * dt, dt=dt, n_steps=n_steps,
        final=SpectralField(grid, state[0]), diagnostics=tuple(sampler.rows),
        trajectory=sampler.trajectory(),
    )


# ---------------------------------------------------------------------------
# spin-up onto the absorbing ball


def initial_field(grid: Grid, params: PhysicalParams, seed: int) -> SpectralField:
    """Seeded large-scale starting field with amplitude matched to the forcing."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5EED)))
    G = grashof(params, grid)
    scale = 0.2 * params.nu * params.kappa0 * max(G, 1.0)
    return random_solenoidal_field(rng=rng, grid=grid, exponent=-2.0, band=(1.0, 6.0), norm=scale)


def spin_up(
    params: PhysicalParams,
    solver: SolverConfig,
    *,
    initial: SpectralField | None = None,
) -> SpinUpReport:
    """Run long enough to land on the absorbing ball and record the checks.

    The final field must satisfy the ball bounds |u| <= nu G and
    ||u|| <= nu kappa0 G (up to tolerance), and the trailing one-time-unit
    average of |Au|^2 must sit below 2 nu^2 kappa0^4 G^2.  Violations are
    reported, not fatal.
    """
    T = solver.spin_up_time if solver.spin_up_time is not None else 20.0 * params.time_unit
    if T < 20.0 * params.time_unit * (1.0 - 1e-9):
        raise ConfigError(
            f"spin-up time {T:g} is below the required 20/(nu kappa0^2) = {20.0 * params.time_unit:g}"
        )
    grid = Grid(solver.resolution, params.L)
    u0 = initial if initial is not None else initial_field(grid, params, solver.seed)
    run = integrate_nse(u0, params, solver, T)
    G = grashof(params, grid)
    nu, kappa0 = params.nu, params.kappa0

    tail = [r for r in run.diagnostics if r.s >= run.t1 - params.time_unit]
    mean_da_sq = float(np.mean([r.norm_da**2 for r in tail]))
    max_da = max(r.norm_da for r in tail)

    # unforced runs only decay like exp(-nu kappa0^2 t); "zero" means below
    # this floor, not machine epsilon
    atol = 1e-6 * nu * kappa0 * max(G, 1.0)
    final_h, final_v = norm_h(run.final), norm_v(run.final)
    if G > 0:
        ratio_h = final_h / (nu * G)
        ratio_v = final_v / (nu * kappa0 * G)
        diss_ratio = mean_da_sq / (2.0 * nu**2 * kappa0**4 * G**2)
    else:
        ratio_h = 0.0 if final_h <= atol else float("inf")
        ratio_v = 0.0 if final_v <= atol else float("inf")
        diss_ratio = 0.0 if mean_da_sq <= atol**2 else float("inf")
    tol = 1e-3
    return SpinUpReport(
        field=run.final,
        params=params,
        T=T,
        grashof=G,
        norm_h_ratio=ratio_h,
        norm_v_ratio=ratio_v,
        bound_ok=bool(ratio_h <= 1.0 + tol and ratio_v <= 1.0 + tol),
        dissipation_ratio=diss_ratio,
        dissipation_ok=bool(diss_ratio <= 1.0 + tol),
        max_da=max_da,
    )


def measure_c0(reports: Sequence[SpinUpReport]) -> float:
    """Attractor curvature constant: sup over runs of |Au| / (nu kappa0^2 G^3).

    Feeds the synchronization threshold via c3 = (2 cT c0)^(1/3); taking the
    sup over several Grashof numbers keeps the estimate conservative.
    """
    if not reports:
        raise ConfigError("need at least one spin-up report")
    vals = []
    for rep in reports:
        if rep.grashof <= 0:
            continue
        vals.append(rep.max_da / (rep.params.nu * rep.params.kappa0**2 * rep.grashof**3))
    if not vals:
        raise ConfigError("c0 needs at least one forced run (G > 0)")
    return max(vals)


# ---------------------------------------------------------------------------
# synchronization experiments


def fit_decay_rate(s: np.ndarray, delta: np.ndarray, *, floor: float) -> float:
    """Exponential rate lambda with delta ~ exp(-lambda s), fitted log-linearly.

    Fits the final half of the run but drops samples at or below the
    round-off floor; falls back to the full above-floor segment when the
    final half is already saturated.  Returns 0 when fewer than three
    usable samples exist.
    """
    s = np.asarray(s, dtype=float)
    delta = np.asarray(delta, dtype=float)
    alive = delta > floor
    half = s >= s[0] + 0.5 * (s[-1] - s[0])
    pick = alive & half
    if pick.sum() < 3:
        pick = alive
    if pick.sum() < 3:
        return 0.0
    slope = np.polyfit(s[pick], np.log(delta[pick]), 1)[0]
    return float(-slope)


_SYNC_TOL = 1e-8
_DIVERGE_FACTOR = 1e3


def sync_experiment(
    params: PhysicalParams,
    J: Interpolant,
    mu: float,
    solver: SolverConfig,
    T: float,
    *,
    u0: SpectralField,
    w0: SpectralField | None = None,
    admissible: bool | None = None,
) -> DecayRecord:
    """Run the reference flow u and the nudged copy w in lockstep.

    w observes v = Ju; the feedback is assembled as P J(w - u) (one
    interpolant application on the difference).  Synchronization is declared
    when ||w - u|| / ||u|| stays below 1e-8 for a full time unit at the end
    of the run; divergence when the mismatch grows a thousandfold.
    """
    grid = u0.grid
    if mu < 0:
        raise ConfigError(f"nudging gain must be >= 0, got {mu}")
    if grid.n != solver.resolution:
        solver = replace(solver, resolution=grid.n)
    n_steps, dt = _step_plan(T, solver)
    gain = _feedback_gain(params, mu)
    implicit = solver.feedback == "implicit" and mu > 0
    if implicit and J.kind != "modal":
        raise ConfigError("implicit feedback needs a diagonal (modal) interpolant")
    if not implicit:
        _check_explicit_dt(dt, params, mu)
    lin = _viscous_multiplier(grid, params)
    fc = forcing_field(grid, params).coeff

    def nonlin(state: list[np.ndarray], t: float) -> list[np.ndarray]:
        uc, wc = state
        nu_term = fc - _bilinear_raw(grid, uc, uc)
        nw_term = fc - _bilinear_raw(grid, wc, wc)
        if mu > 0 and not implicit:
            nw_term = nw_term - gain * _leray_raw(grid, _j_raw(J, grid, wc - uc))
        return [nu_term, nw_term]

    post_step = None
    if implicit:
        mask = _modal_mask(J, grid)
        blend = mask * (gain * dt / (1.0 + gain * dt))

        def post_step(state: list[np.ndarray], t: float) -> list[np.ndarray]:
            uc, wc = state
            return [uc, wc + blend * (uc - wc)]

    rows: list[tuple[float, float, float, float, float, float]] = []

    def on_sample(t: float, state: list[np.ndarray]) -> None:
        u = SpectralField(grid, state[0])
        d = SpectralField(grid, state[1] - state[0])
        rows.append(
            (t, norm_v(d), norm_h(d), norm_a(d), 0.5 * norm_h(u) ** 2, 0.5 * norm_v(u) ** 2)
        )

    w_start = w0.coeff if w0 is not None else np.zeros_like(u0.coeff)
    stepper = _make_stepper(solver, [lin, lin], dt)
    state = _advance(
        stepper, nonlin, [np.array(u0.coeff), np.array(w_start)], 0.0, dt, n_steps,
        sample_every=solver.sample_every, on_sample=on_sample, post_step=post_step,
    )

    arr = np.array(rows)
    s, d_v, d_h, d_da, energy, enstrophy = (arr[:, i] for i in range(6))
    u_scale = float(np.median(np.sqrt(2.0 * enstrophy)))
    floor = 1e-13 * max(u_scale, 1e-30)
    rate = fit_decay_rate(s, d_v, floor=floor)

    tail = s >= s[-1] - params.time_unit
    rel = d_v / np.maximum(np.sqrt(2.0 * enstrophy), 1e-300)
    synchronized = bool(tail.sum() >= 2 and np.all(rel[tail] <= _SYNC_TOL))
    diverged = bool(d_v[0] > 0 and d_v.max() > _DIVERGE_FACTOR * d_v[0])
    return DecayRecord(
        s=s, delta_v=d_v, delta_h=d_h, delta_da=d_da, energy=energy, enstrophy=enstrophy,
        rate=rate, synchronized=synchronized and not diverged, diverged=diverged,
        mu=mu, h=J.h, kind=J.kind, admissible=admissible,
        final_u=SpectralField(grid, state[0]), final_w=SpectralField(grid, state[1]),
    )


def sweep_workers(requested: int | None = None) -> int:
    """Worker count for sweeps: explicit argument, else DFORM_THREADS, else 4."""
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("DFORM_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"DFORM_THREADS must be an integer, got {env!r}") from exc
    return min(4, os.cpu_count() or 1)


def threshold_sweep(
    params: PhysicalParams,
    solver: SolverConfig,
    cells: Sequence[tuple[float, Interpolant]],
    T: float,
    *,
    u0: SpectralField,
    w0: SpectralField | None = None,
    admissible_of: Callable[[float, Interpolant], bool] | None = None,
    max_workers: int | None = None,
) -> list[SweepCell]:
    """Synchronization phase table over (mu, J) cells; cells run independently.

    Each cell shortens dt as needed to respect the explicit-feedback bound.
    Per-cell failures are recorded in the row, and the table is sorted by
    (kind, h, mu) so the output does not depend on scheduling order.

    Supply a generic w0 (with energy in the slow modes) so that the mu = 0
    control rows measure the uncoupled relaxation rather than the trivial
    shear ramp-up from rest.
    """

    def run_cell(mu: float, J: Interpolant) -> SweepCell:
        admissible = admissible_of(mu, J) if admissible_of is not None else None
        cfg = solver
        gain = _feedback_gain(params, mu)
        if solver.feedback == "explicit" and mu > 0 and solver.dt * gain >= 0.9:
            cfg = replace(solver, dt=0.9 / gain)
        try:
            rec = sync_experiment(params, J, mu, cfg, T, u0=u0, w0=w0, admissible=admissible)
        except (ConfigError, NumericalBlowupError) as exc:
            return SweepCell(
                mu=mu, h=J.h, kind=J.kind, label=J.label(), rate=float("nan"),
                synchronized=False, diverged=isinstance(exc, NumericalBlowupError),
                admissible=admissible, error=str(exc),
            )
        return SweepCell(
            mu=mu, h=J.h, kind=J.kind, label=J.label(), rate=rec.rate,
            synchronized=rec.synchronized, diverged=rec.diverged, admissible=admissible,
        )

    if not cells:
        return []
    with ThreadPoolExecutor(max_workers=sweep_workers(max_workers)) as pool:
        results = list(pool.map(lambda c: run_cell(*c), cells))
    return sorted(results, key=lambda r: (r.kind, r.h, r.mu))
