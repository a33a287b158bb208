"""Trajectory container, interpolation accuracy, norms, and providers.

Oracles: closed-form sinusoidal trajectories (exact values, derivatives, and
sup norms) and the fourth-order error model of cubic Hermite interpolation.
"""

import numpy as np
import pytest

from dformlab import ConfigError, GridMismatchError, ProviderGapError
from dformlab.dynamics import SolverConfig, integrate_nse
from dformlab.interpolants import apply_interpolant, make_interpolant
from dformlab.physics import PhysicalParams, params_for_grashof
from dformlab.spectral import Grid, norm_v, random_solenoidal_field, solenoidal_mode, zero_field
from dformlab.trajectories import (
    Trajectory,
    constant_trajectory,
    fd_consistency,
    frozen_provider,
    trajectory_provider,
    x_norms,
)

L = 2.0 * np.pi


def sinusoid(grid, omega, ds, n, s0=0.0, amp=0.8):
    """v(s) = phi sin(omega s) with exact derivative samples."""
    phi = solenoidal_mode(grid, 1, 2, amplitude=amp)
    s = s0 + ds * np.arange(n)
    values = tuple(phi * float(np.sin(omega * t)) for t in s)
    derivs = tuple(phi * float(omega * np.cos(omega * t)) for t in s)
    return phi, Trajectory(s0, ds, values, derivs)


class TestConstruction:
    def test_validation(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        with pytest.raises(ConfigError, match="at least one"):
            Trajectory(0.0, 0.1, ())
        with pytest.raises(ConfigError, match="positive"):
            Trajectory(0.0, -0.1, (phi,))
        with pytest.raises(ConfigError, match="one to one"):
            Trajectory(0.0, 0.1, (phi, phi), (phi,))

    def test_basic_accessors(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        traj = constant_trajectory(phi, 2.0, 0.5, 5)
        assert len(traj) == 5
        assert traj.s1 == 4.0
        assert traj.window() == 2.0
        assert np.allclose(traj.times(), [2.0, 2.5, 3.0, 3.5, 4.0])
        assert all(norm_v(d) == 0.0 for d in traj.derivs)


class TestEvaluation:
    def test_exact_at_nodes(self):
        grid = Grid(16, L)
        _, traj = sinusoid(grid, 2.0, 0.25, 9)
        for i, t in enumerate(traj.times()):
            assert norm_v(traj.value_at(t) - traj.values[i]) == 0.0

    def test_hermite_fourth_order_between_nodes(self):
        grid = Grid(16, L)
        omega = 2.0
        errs = []
        for ds in (0.2, 0.1):
            phi, traj = sinusoid(grid, omega, ds, int(2.0 / ds) + 1)
            worst = 0.0
            for t in np.linspace(0.05, 1.8, 40):
                exact = phi * float(np.sin(omega * t))
                worst = max(worst, norm_v(traj.value_at(t) - exact))
            errs.append(worst)
        order = np.log2(errs[0] / errs[1])
        assert 3.5 < order < 4.5

    def test_off_node_needs_derivatives(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        traj = Trajectory(0.0, 0.5, (phi, phi * 2.0))
        with pytest.raises(ConfigError, match="derivative"):
            traj.value_at(0.3)

    def test_window_guard_and_clamp(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        traj = constant_trajectory(phi, 0.0, 0.5, 3)
        with pytest.raises(ProviderGapError):
            traj.value_at(1.7)
        strict = trajectory_provider(traj)
        with pytest.raises(ProviderGapError):
            strict(-0.5)
        clamped = trajectory_provider(traj, clamp=True)
        assert norm_v(clamped(-3.0) - phi) == 0.0
        assert norm_v(clamped(9.0) - phi) == 0.0

    def test_frozen_provider(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        provider = frozen_provider(phi)
        assert provider(0.0) is phi and provider(57.0) is phi


class TestAlgebra:
    def test_add_sub_scaled(self):
        grid = Grid(16, L)
        phi, a = sinusoid(grid, 1.0, 0.2, 6)
        _, b = sinusoid(grid, 1.0, 0.2, 6, amp=0.3)
        total = a + b
        diff = total - b
        for i in range(len(a)):
            assert norm_v(diff.values[i] - a.values[i]) < 1e-14
            assert norm_v(diff.derivs[i] - a.derivs[i]) < 1e-14
        half = a.scaled(0.5)
        assert abs(norm_v(half.values[3]) - 0.5 * norm_v(a.values[3])) < 1e-14

    def test_alignment_required(self):
        grid = Grid(16, L)
        _, a = sinusoid(grid, 1.0, 0.2, 6)
        _, b = sinusoid(grid, 1.0, 0.25, 6)
        with pytest.raises(GridMismatchError):
            a - b

    def test_interpolant_image_commutes_with_scaling(self):
        grid = Grid(32, L)
        rng = np.random.default_rng(1)
        fields = tuple(random_solenoidal_field(grid, rng, norm=1.0) for _ in range(3))
        traj = Trajectory(0.0, 0.1, fields, (zero_field(grid),) * 3)
        J = make_interpolant("volume", 8, L)
        image = traj.interpolant_image(J)
        for i in range(3):
            assert norm_v(image.values[i] - apply_interpolant(J, fields[i])) == 0.0
        scaled_image = traj.scaled(2.0).interpolant_image(J)
        for i in range(3):
            assert norm_v(scaled_image.values[i] - image.values[i] * 2.0) < 1e-14


class TestXNorms:
    def test_zero_and_constant(self):
        grid = Grid(16, L)
        params = PhysicalParams(nu=0.5, L=L)
        z = constant_trajectory(zero_field(grid), 0.0, 0.1, 4)
        nz = x_norms(z, params)
        assert nz.x0 == 0.0 and nz.x == 0.0
        phi = solenoidal_mode(grid, 1, 1, 0.7)
        c = constant_trajectory(phi, 0.0, 0.1, 4)
        nc = x_norms(c, params)
        expect = norm_v(phi) / (params.nu * params.kappa0)
        assert abs(nc.x0 - expect) < 1e-14
        assert abs(nc.x - expect) < 1e-14

    def test_sinusoid_closed_form(self):
        # v = phi sin(omega s): sup ||v|| = ||phi||, sup ||v'|| = omega ||phi||
        grid = Grid(16, L)
        params = PhysicalParams(nu=0.5, L=L)
        omega = 3.0
        phi, traj = sinusoid(grid, omega, 0.002, 2001)  # dense, window 4 > period
        got = x_norms(traj, params)
        base = norm_v(phi) / (params.nu * params.kappa0)
        expect_x = base * (1.0 + omega / (params.nu * params.kappa0**2))
        assert abs(got.x0 - base) < 1e-5 * base
        assert abs(got.x - expect_x) < 1e-5 * expect_x

    def test_missing_derivatives(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        traj = Trajectory(0.0, 0.1, (phi,))
        assert x_norms(traj, PhysicalParams()).x is None


class TestFdConsistency:
    def test_solver_derivatives_match_centered_differences(self):
        # stored derivatives are equation right sides; centered differences
        # of the values must agree to O(ds^2)
        params = params_for_grashof(2.0)
        grid = Grid(32, L)
        rng = np.random.default_rng(8)
        u0 = random_solenoidal_field(grid, rng, norm=1.0, band=(1.0, 5.0))
        mism = []
        for every in (4, 2):
            cfg = SolverConfig(resolution=32, dt=0.005, sample_every=every, cfl_warn=False)
            run = integrate_nse(u0, params, cfg, 1.0, want_trajectory=True)
            mism.append(fd_consistency(run.trajectory))
        assert mism[1] < 0.05
        ratio = mism[0] / mism[1]
        assert 3.0 < ratio < 5.5

    def test_needs_enough_samples(self):
        grid = Grid(16, L)
        phi = solenoidal_mode(grid, 1, 0, 1.0)
        with pytest.raises(ConfigError):
            fd_consistency(constant_trajectory(phi, 0.0, 0.1, 2))
