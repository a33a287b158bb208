"""Integrator and synchronization-experiment tests.

Oracles: closed-form viscous eigenmode decay, the exactly-steady laminar
shear, the discrete energy balance, Richardson order measurements, and the
analytic form of the nudged delta equation near a stable reference.
"""

import warnings

import numpy as np
import pytest

from dformlab import (
    ConfigError,
    NumericalBlowupError,
    ProviderGapError,
)
from dformlab.dynamics import (
    SolverConfig,
    _step_plan,
    fit_decay_rate,
    initial_field,
    integrate_nse,
    integrate_nudged,
    measure_c0,
    nse_rhs,
    spin_up,
    sweep_workers,
    sync_experiment,
    threshold_sweep,
)
from dformlab.interpolants import apply_interpolant, make_interpolant
from dformlab.physics import (
    PhysicalParams,
    ForcingSpec,
    forcing_field,
    laminar_state,
    params_for_grashof,
)
from dformlab.spectral import (
    Grid,
    inner_h,
    norm_h,
    norm_v,
    random_solenoidal_field,
    solenoidal_mode,
    zero_field,
)
from dformlab.trajectories import frozen_provider, trajectory_provider

L = 2.0 * np.pi
FREE = PhysicalParams(nu=1.0, L=L, forcing=ForcingSpec(kind="none"))


def quiet(**kw) -> SolverConfig:
    kw.setdefault("cfl_warn", False)
    return SolverConfig(**kw)


class TestStepPlan:
    def test_lands_exactly_on_t(self):
        solver = quiet(dt=0.012, sample_every=5)
        n, dt = _step_plan(1.0, solver)
        assert n % 5 == 0
        assert abs(n * dt - 1.0) < 1e-12
        assert abs(dt - 0.012) < 0.3 * 0.012

    def test_rejects_nonpositive_horizon(self):
        with pytest.raises(ConfigError, match="positive"):
            _step_plan(0.0, quiet())

    @pytest.mark.parametrize(
        "kw",
        [dict(dt=-0.1), dict(integrator="euler"), dict(sample_every=0), dict(feedback="magic")],
    )
    def test_solver_config_validation(self, kw):
        with pytest.raises(ConfigError):
            SolverConfig(**kw)


class TestLinearExactness:
    @pytest.mark.parametrize("n", [64, 128])
    @pytest.mark.parametrize("mode", [(1, 0), (1, 1)])
    def test_eigenmode_decay_matches_exponential(self, n, mode):
        # single eigenmode, f = 0: u(t) = exp(-nu lam t) u0; B(u0, u0) = 0,
        # so the integrating-factor scheme reproduces it to round-off
        grid = Grid(n, L)
        lam = float(mode[0] ** 2 + mode[1] ** 2)
        u0 = solenoidal_mode(grid, *mode, amplitude=0.3, phase=0.4)
        T = 1.0 / lam
        run = integrate_nse(u0, FREE, quiet(resolution=n, dt=T / 100), T)
        expect = np.exp(-lam * T) * norm_h(u0)
        assert abs(norm_h(run.final) - expect) < 1e-10 * expect
        d = run.final - u0 * np.exp(-lam * T)
        assert norm_h(d) < 1e-10 * expect

    def test_cnab2_is_second_order_on_eigenmode(self):
        grid = Grid(32, L)
        u0 = solenoidal_mode(grid, 1, 0, amplitude=1.0)
        errs = []
        for dt in (0.02, 0.01):
            run = integrate_nse(
                u0, FREE, quiet(resolution=32, dt=dt, integrator="cnab2", sample_every=1), 1.0
            )
            errs.append(abs(norm_h(run.final) - np.exp(-1.0) * norm_h(u0)))
        order = np.log2(errs[0] / errs[1])
        assert 1.7 < order < 2.3

    def test_deterministic_rerun(self):
        grid = Grid(32, L)
        rng = np.random.default_rng(7)
        u0 = random_solenoidal_field(grid, rng, norm=0.5)
        params = params_for_grashof(2.0)
        runs = [integrate_nse(u0, params, quiet(resolution=32, dt=0.01), 0.5) for _ in range(2)]
        assert np.array_equal(runs[0].final.coeff, runs[1].final.coeff)


class TestNonlinearOrder:
    def richardson_order(self, integrator: str) -> float:
        grid = Grid(32, L)
        rng = np.random.default_rng(3)
        u0 = random_solenoidal_field(grid, rng, norm=1.0, band=(1.0, 5.0))
        params = params_for_grashof(2.0)
        finals = []
        for dt in (0.02, 0.01, 0.005):
            cfg = quiet(resolution=32, dt=dt, integrator=integrator, sample_every=1)
            finals.append(integrate_nse(u0, params, cfg, 0.5).final)
        e1 = norm_v(finals[0] - finals[1])
        e2 = norm_v(finals[1] - finals[2])
        return float(np.log2(e1 / e2))

    def test_ifrk4_fourth_order(self):
        assert self.richardson_order("ifrk4") > 3.5

    def test_cnab2_second_order(self):
        order = self.richardson_order("cnab2")
        assert 1.5 < order < 2.6


class TestSteadyState:
    @pytest.mark.parametrize("integrator,tol", [("ifrk4", 1e-8), ("cnab2", 1e-10)])
    def test_laminar_state_held_fixed(self, integrator, tol):
        # the laminar shear solves the discrete equations exactly; cnab2 has
        # it as an exact fixed point, ifrk4 drifts only through the O(dt^4)
        # quadrature of the constant source
        params = params_for_grashof(5.0)
        grid = Grid(64, L)
        star = laminar_state(grid, params)
        cfg = quiet(resolution=64, dt=0.005, integrator=integrator, sample_every=100)
        run = integrate_nse(star, params, cfg, 10.0, want_trajectory=True)
        worst = max(norm_v(v - star) for v in run.trajectory.values)
        assert worst < tol * norm_v(star)

    def test_laminar_rhs_residual_is_zero(self):
        params = params_for_grashof(5.0)
        grid = Grid(64, L)
        star = laminar_state(grid, params)
        assert norm_v(nse_rhs(star, params)) < 1e-14 * norm_v(star)

    def energy_balance_mismatch(self, dt: float) -> float:
        params = params_for_grashof(3.0)
        grid = Grid(32, L)
        rng = np.random.default_rng(11)
        u0 = random_solenoidal_field(grid, rng, norm=1.0, band=(1.0, 6.0))
        cfg = quiet(resolution=32, dt=dt, sample_every=1)
        run = integrate_nse(u0, params, cfg, 1.0, want_trajectory=True)
        f = forcing_field(grid, params)
        rows = run.diagnostics
        worst = 0.0
        for i in range(1, len(rows) - 1):
            fd = (rows[i + 1].energy - rows[i - 1].energy) / (rows[i + 1].s - rows[i - 1].s)
            u_i = run.trajectory.values[i]
            rhs = inner_h(f, u_i) - 2.0 * params.nu * rows[i].enstrophy
            worst = max(worst, abs(fd - rhs))
        return worst

    def test_energy_balance_second_order_per_step(self):
        # dE/dt = (f, u) - 2 nu Z: centered differences of the recorded
        # energy must match the recorded right side to O(dt^2)
        coarse = self.energy_balance_mismatch(0.005)
        fine = self.energy_balance_mismatch(0.0025)
        assert coarse < 0.05
        assert 3.0 < coarse / fine < 5.5


class TestFailureModes:
    def test_blowup_raises_with_diagnostics(self):
        # CFL violated by two orders of magnitude: the advective term must
        # overflow and surface as a structured error, not NaN output
        grid = Grid(16, L)
        rng = np.random.default_rng(2)
        u0 = random_solenoidal_field(grid, rng, norm=1e4, band=(1.0, 5.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            with pytest.raises(NumericalBlowupError) as info:
                integrate_nse(u0, FREE, quiet(resolution=16, dt=0.5, sample_every=1), 40.0)
        assert info.value.t > 0

    def test_cfl_warning_fires_once(self):
        grid = Grid(32, L)
        rng = np.random.default_rng(0)
        u0 = random_solenoidal_field(grid, rng, norm=120.0, band=(1.0, 4.0))
        cfg = SolverConfig(resolution=32, dt=0.02, sample_every=1, cfl_warn=True)
        with pytest.warns(RuntimeWarning, match="CFL"):
            integrate_nse(u0, FREE, cfg, 0.1)


class TestNudged:
    def test_mu_zero_matches_nse_bitwise(self):
        grid = Grid(32, L)
        rng = np.random.default_rng(5)
        w0 = random_solenoidal_field(grid, rng, norm=0.7)
        params = params_for_grashof(2.0)
        J = make_interpolant("modal", 10, L)
        provider = frozen_provider(laminar_state(grid, params))
        cfg = quiet(resolution=32, dt=0.01)
        a = integrate_nse(w0, params, cfg, 0.5)
        b = integrate_nudged(w0, provider, params, J, 0.0, cfg, 0.5)
        assert np.array_equal(a.final.coeff, b.final.coeff)

    @pytest.mark.parametrize("integrator,tol", [("ifrk4", 1e-7), ("cnab2", 1e-12)])
    def test_steady_data_holds_steady_state(self, integrator, tol):
        # all terms balance at w = u*; cnab2 keeps the exact fixed point,
        # ifrk4 equilibrates at its (tiny) source-quadrature drift
        params = params_for_grashof(4.0)
        grid = Grid(64, L)
        star = laminar_state(grid, params)
        J = make_interpolant("volume", 16, L)
        provider = frozen_provider(apply_interpolant(J, star))
        cfg = quiet(resolution=64, dt=0.005, integrator=integrator)
        run = integrate_nudged(star, provider, params, J, 10.0, cfg, 5.0)
        assert norm_v(run.final - star) < tol * norm_v(star)

    @pytest.mark.parametrize("integrator,tol", [("ifrk4", 1e-7), ("cnab2", 1e-10)])
    def test_relaxation_toward_steady_reference(self, integrator, tol):
        # G = 1: the laminar state is the whole attractor, so observing Ju*
        # must pull w from rest to u* at roughly the feedback rate
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        J = make_interpolant("modal", 8, L)
        provider = frozen_provider(apply_interpolant(J, star))
        cfg = quiet(resolution=32, dt=0.01, integrator=integrator)
        run = integrate_nudged(zero_field(grid), provider, params, J, 6.0, cfg, 8.0, want_trajectory=True)
        assert norm_v(run.final - star) < tol * norm_v(star)

    def test_explicit_dt_bound_enforced(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        J = make_interpolant("modal", 8, L)
        provider = frozen_provider(laminar_state(grid, params))
        with pytest.raises(ConfigError, match="explicit-feedback"):
            integrate_nudged(
                laminar_state(grid, params), provider, params, J, 200.0, quiet(resolution=32, dt=0.01), 1.0
            )

    def test_implicit_feedback_requires_modal(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        J = make_interpolant("volume", 8, L)
        provider = frozen_provider(laminar_state(grid, params))
        cfg = quiet(resolution=32, dt=0.01, feedback="implicit")
        with pytest.raises(ConfigError, match="modal"):
            integrate_nudged(laminar_state(grid, params), provider, params, J, 5.0, cfg, 1.0)

    def test_implicit_feedback_stable_at_huge_gain(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        J = make_interpolant("modal", 12, L)
        provider = frozen_provider(apply_interpolant(J, star))
        cfg = quiet(resolution=32, dt=0.01, feedback="implicit")
        run = integrate_nudged(zero_field(grid), provider, params, J, 1e6, cfg, 8.0)
        assert norm_v(run.final - star) < 1e-6 * norm_v(star)

    def test_provider_gap_propagates(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        run = integrate_nse(star, params, quiet(resolution=32, dt=0.01), 0.5, want_trajectory=True)
        provider = trajectory_provider(run.trajectory)  # window [0, 0.5], no clamp
        J = make_interpolant("modal", 8, L)
        with pytest.raises(ProviderGapError):
            integrate_nudged(star, provider, params, J, 1.0, quiet(resolution=32, dt=0.01), 2.0)


class TestSpinUp:
    def test_forced_run_lands_on_absorbing_ball(self):
        params = params_for_grashof(1.0)
        cfg = quiet(resolution=32, dt=0.02, sample_every=10, seed=3)
        rep = spin_up(params, cfg)
        assert rep.bound_ok
        assert rep.dissipation_ok
        assert rep.norm_v_ratio <= 1.001
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        assert norm_v(rep.field - star) < 1e-4 * norm_v(star)

    def test_unforced_run_decays_to_zero(self):
        cfg = quiet(resolution=32, dt=0.02, sample_every=10, seed=1)
        rep = spin_up(FREE, cfg)
        assert rep.bound_ok and rep.dissipation_ok
        assert rep.norm_v_ratio == 0.0
        assert norm_v(rep.field) < 1e-7

    def test_short_spin_up_rejected(self):
        params = params_for_grashof(1.0)
        with pytest.raises(ConfigError, match="spin-up"):
            spin_up(params, quiet(resolution=32, dt=0.02, spin_up_time=5.0))

    def test_determinism(self):
        params = params_for_grashof(2.0)
        cfg = quiet(resolution=32, dt=0.02, sample_every=10, seed=9)
        a, b = spin_up(params, cfg), spin_up(params, cfg)
        assert np.array_equal(a.field.coeff, b.field.coeff)

    def test_measure_c0_laminar_oracle(self):
        # laminar attractors give |Au| = nu kappa0^2 G kappa_f^2/kappa0^2 *
        # ... = |f|/nu, so |Au|/(nu kappa0^2 G^3) = 1/G^2; the sup over
        # G in {1, 2} is 1 up to spin-up leftovers
        reports = [
            spin_up(params_for_grashof(G), quiet(resolution=32, dt=0.02, sample_every=10, seed=4))
            for G in (1.0, 2.0)
        ]
        c0 = measure_c0(reports)
        assert 0.9 < c0 < 1.1
        with pytest.raises(ConfigError):
            measure_c0([])

    def test_initial_field_seeded(self):
        grid = Grid(32, L)
        params = params_for_grashof(3.0)
        a = initial_field(grid, params, 5)
        b = initial_field(grid, params, 5)
        c = initial_field(grid, params, 6)
        assert np.array_equal(a.coeff, b.coeff)
        assert not np.array_equal(a.coeff, c.coeff)


class TestDecayFit:
    def test_recovers_planted_rate(self):
        s = np.linspace(0.0, 4.0, 80)
        delta = 3.0 * np.exp(-2.5 * s)
        assert abs(fit_decay_rate(s, delta, floor=1e-12) - 2.5) < 1e-9

    def test_ignores_saturated_floor(self):
        s = np.linspace(0.0, 8.0, 160)
        delta = np.maximum(3.0 * np.exp(-2.5 * s), 1e-9)
        rate = fit_decay_rate(s, delta, floor=3e-9)
        assert abs(rate - 2.5) < 0.05

    def test_flat_series_gives_zero(self):
        s = np.linspace(0.0, 1.0, 10)
        assert fit_decay_rate(s, np.full(10, 1e-16), floor=1e-12) == 0.0


class TestSyncExperiment:
    def setup_method(self):
        self.params = params_for_grashof(1.0)
        self.grid = Grid(32, L)
        self.star = laminar_state(self.grid, self.params)
        self.cfg = quiet(resolution=32, dt=0.01, sample_every=5)

    def test_synchronizes_at_admissible_gain(self):
        J = make_interpolant("modal", 8, L)
        rec = sync_experiment(self.params, J, 4.0, self.cfg, 8.0, u0=self.star, admissible=True)
        assert rec.synchronized and not rec.diverged
        assert rec.rate > 1.0
        assert rec.admissible is True
        assert np.all(np.diff(rec.s) > 0)
        assert np.all(rec.delta_v >= 0) and np.all(rec.energy >= 0)
        rel = rec.delta_v[-1] / np.sqrt(2.0 * rec.enstrophy[-1])
        assert rel < 1e-8

    def test_mu_zero_not_synchronized(self):
        # w0 carries slow large-scale modes; without coupling they only relax
        # at the viscous rate of |k| = 1, far too slow for the horizon
        J = make_interpolant("modal", 8, L)
        rng = np.random.default_rng(21)
        w0 = random_solenoidal_field(self.grid, rng, norm=0.5, band=(1.0, 3.0))
        rec = sync_experiment(self.params, J, 0.0, self.cfg, 6.0, u0=self.star, w0=w0)
        assert not rec.synchronized

    def test_identical_start_is_synchronized_with_zero_rate(self):
        J = make_interpolant("modal", 8, L)
        rec = sync_experiment(self.params, J, 2.0, self.cfg, 3.0, u0=self.star, w0=self.star)
        assert rec.synchronized
        assert rec.rate == 0.0

    def test_rate_weakly_monotone_in_mu(self):
        J = make_interpolant("modal", 10, L)
        rates = [
            sync_experiment(self.params, J, mu, self.cfg, 3.0, u0=self.star).rate
            for mu in (0.5, 1.0, 2.0, 4.0, 8.0)
        ]
        for lo, hi in zip(rates, rates[1:]):
            assert hi >= lo * 0.99

    def test_volume_interpolant_synchronizes(self):
        J = make_interpolant("volume", 16, L)
        rec = sync_experiment(self.params, J, 3.0, self.cfg, 8.0, u0=self.star)
        assert rec.synchronized
        assert rec.kind == "volume" and abs(rec.h - L / 16) < 1e-12


class TestThresholdSweep:
    def test_empty_grid(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        out = threshold_sweep(params, quiet(resolution=32), [], 1.0, u0=star)
        assert out == []

    def test_single_cell_matches_sync_experiment(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        cfg = quiet(resolution=32, dt=0.01, sample_every=5)
        J = make_interpolant("modal", 8, L)
        rows = threshold_sweep(params, cfg, [(4.0, J)], 8.0, u0=star, max_workers=1)
        rec = sync_experiment(params, J, 4.0, cfg, 8.0, u0=star)
        assert len(rows) == 1
        cell = rows[0]
        assert cell.synchronized == rec.synchronized
        assert abs(cell.rate - rec.rate) < 1e-12
        assert cell.label == "modal:8"

    def test_grid_rows_sorted_and_classified(self):
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        cfg = quiet(resolution=32, dt=0.01, sample_every=5)
        cells = [
            (mu, make_interpolant(kind, n, L))
            for mu in (0.0, 4.0)
            for kind, n in (("modal", 8), ("volume", 16))
        ]
        rng = np.random.default_rng(23)
        w0 = random_solenoidal_field(grid, rng, norm=0.5, band=(1.0, 3.0))
        rows = threshold_sweep(
            params, cfg, cells, 8.0, u0=star, w0=w0,
            admissible_of=lambda mu, J: mu > 0, max_workers=2,
        )
        assert [(r.kind, r.h, r.mu) for r in rows] == sorted((r.kind, r.h, r.mu) for r in rows)
        by_key = {(r.kind, r.mu): r for r in rows}
        assert by_key[("modal", 4.0)].synchronized
        assert not by_key[("modal", 0.0)].synchronized
        assert by_key[("modal", 0.0)].admissible is False
        assert by_key[("volume", 4.0)].admissible is True

    def test_cell_failure_recorded_not_raised(self):
        grid = Grid(16, L)
        rng = np.random.default_rng(2)
        u0 = random_solenoidal_field(grid, rng, norm=1e4, band=(1.0, 5.0))
        cfg = quiet(resolution=16, dt=0.5, sample_every=1)
        J = make_interpolant("modal", 8, L)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rows = threshold_sweep(FREE, cfg, [(0.0, J)], 40.0, u0=u0, max_workers=1)
        assert len(rows) == 1
        assert rows[0].error != ""
        assert rows[0].diverged and not rows[0].synchronized

    def test_high_mu_cell_shrinks_dt(self):
        # mu nu kappa0^2 dt would be 2 at the sweep dt; the cell must adapt
        # rather than reject
        params = params_for_grashof(1.0)
        grid = Grid(32, L)
        star = laminar_state(grid, params)
        cfg = quiet(resolution=32, dt=0.01, sample_every=5)
        J = make_interpolant("modal", 10, L)
        rows = threshold_sweep(params, cfg, [(200.0, J)], 6.0, u0=star, max_workers=1)
        assert rows[0].error == ""
        assert rows[0].synchronized


class TestSweepWorkers:
    def test_env_and_overrides(self, monkeypatch):
        monkeypatch.setenv("DFORM_THREADS", "2")
        assert sweep_workers() == 2
        assert sweep_workers(6) == 6
        monkeypatch.setenv("DFORM_THREADS", "zebra")
        with pytest.raises(ConfigError, match="DFORM_THREADS"):
            sweep_workers()
        monkeypatch.delenv("DFORM_THREADS")
        assert sweep_workers() >= 1
