"""Forcing construction, Grashof scaling, and the laminar reference state."""

import numpy as np
import pytest

from dformlab.errors import ConfigError
from dformlab.physics import (
    ForcingSpec,
    PhysicalParams,
    amplitude_for_grashof,
    forcing_field,
    grashof,
    laminar_state,
    params_for_grashof,
)
from dformlab.spectral import Grid, bilinear, norm_h, stokes_apply


class TestForcing:
    def test_kolmogorov_norm(self, grid64):
        # |f| = amplitude * L / sqrt(2) for the single-shear force
        p = PhysicalParams(forcing=ForcingSpec(kind="kolmogorov", mode=2, amplitude=3.0))
        f = forcing_field(grid64, p)
        assert abs(norm_h(f) - 3.0 * grid64.L / np.sqrt(2.0)) < 1e-12

    def test_force_is_divergence_free_eigenmode(self, grid64):
        p = PhysicalParams(forcing=ForcingSpec(mode=3, amplitude=1.0))
        f = forcing_field(grid64, p)
        lam = (3 * p.kappa0) ** 2
        af = stokes_apply(f, 1.0)
        assert np.abs(af.coeff - lam * f.coeff).max() < 1e-12 * lam

    def test_unresolvable_mode_rejected(self):
        p = PhysicalParams(forcing=ForcingSpec(mode=12))
        with pytest.raises(ConfigError, match="resolved band"):
            forcing_field(Grid(16, 2 * np.pi), p)

    def test_bad_specs_rejected(self):
        with pytest.raises(ConfigError):
            ForcingSpec(kind="checkerboard")
        with pytest.raises(ConfigError):
            ForcingSpec(mode=0)
        with pytest.raises(ConfigError):
            PhysicalParams(nu=0.0)


class TestGrashof:
    @pytest.mark.parametrize("G", [1.0, 5.0, 20.0])
    def test_round_trip(self, G):
        p = params_for_grashof(G)
        assert abs(grashof(p) - G) < 1e-12 * G

    def test_scales_with_viscosity_and_domain(self):
        p = params_for_grashof(7.0, nu=0.05, L=1.0, forcing_mode=1)
        assert abs(grashof(p) - 7.0) < 1e-10

    def test_zero_grashof_means_no_force(self, grid64):
        p = params_for_grashof(0.0)
        assert p.forcing.kind == "none"
        assert grashof(p) == 0.0
        assert norm_h(forcing_field(grid64, p)) == 0.0

    def test_amplitude_formula(self):
        a = amplitude_for_grashof(5.0, 1.0, 2 * np.pi)
        assert abs(a - 5.0 * np.sqrt(2.0) / (2 * np.pi)) < 1e-14


class TestLaminarState:
    def test_exact_steady_balance(self, grid64):
        # nu A u* = f and B(u*, u*) = 0, both to the last bit
        p = params_for_grashof(5.0)
        u = laminar_state(grid64, p)
        f = forcing_field(grid64, p)
        resid = stokes_apply(u, 1.0) * p.nu - f
        assert np.abs(resid.coeff).max() < 1e-15
        assert norm_h(bilinear(u, u)) == 0.0

    def test_norm_scaling(self, grid64):
        # ||u*|| = |f| / (nu j kappa0); checks the eigenvalue bookkeeping
        p = params_for_grashof(5.0, forcing_mode=2)
        u = laminar_state(grid64, p)
        from dformlab.spectral import norm_v

        f = forcing_field(grid64, p)
        assert abs(norm_v(u) - norm_h(f) / (p.nu * 2 * p.kappa0)) < 1e-12
