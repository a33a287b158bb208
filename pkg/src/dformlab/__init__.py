"""Desk-scale laboratory for 2D periodic Navier-Stokes, nudging, and determining forms."""

from .config import RunConfig, component_rng, load_config, parse_config, save_config
from .dform import (
    DFormConfig,
    compute_W,
    dform_config_for,
    evolve_determining_form,
    g_value,
    measure_R,
    measure_eps_disc,
    steady_residual,
)
from .dynamics import (
    SolverConfig,
    initial_field,
    integrate_nse,
    integrate_nudged,
    spin_up,
    sweep_workers,
    sync_experiment,
    threshold_sweep,
)
from .errors import (
    ConfigError,
    DformlabError,
    GridMismatchError,
    NonzeroMeanError,
    NumericalBlowupError,
    ProviderGapError,
    SnapshotFormatError,
)
from .experiments import run_experiment
from .inequalities import (
    admissible_region,
    check_identity_suite,
    check_linf_lemma,
    estimate_inequality_constants,
)
from .interpolants import (
    ApproxConstants,
    Interpolant,
    estimate_approx_constants,
    estimate_family_constants,
    make_interpolant,
)
from .snapshots import Snapshot, load_snapshot, read_snapshot, save_snapshot
from .trajectories import Trajectory, constant_trajectory, x_norms
from .physics import ForcingSpec, PhysicalParams, forcing_field, grashof, laminar_state, params_for_grashof
from .spectral import (
    Grid,
    NormBundle,
    SpectralField,
    bilinear,
    energy,
    enstrophy,
    field_from_coeffs,
    field_from_physical,
    inner_h,
    inner_v,
    leray_project,
    norm_a,
    norm_h,
    norm_inf,
    norm_v,
    norms,
    random_solenoidal_field,
    sobolev_norm,
    solenoidal_mode,
    stokes_apply,
    to_physical,
    zero_field,
)

__version__ = "0.1.0"

__all__ = [
    "ApproxConstants",
    "ConfigError",
    "DFormConfig",
    "DformlabError",
    "ForcingSpec",
    "Grid",
    "GridMismatchError",
    "Interpolant",
    "NonzeroMeanError",
    "NormBundle",
    "NumericalBlowupError",
    "PhysicalParams",
    "ProviderGapError",
    "RunConfig",
    "Snapshot",
    "SnapshotFormatError",
    "SolverConfig",
    "Trajectory",
    "admissible_region",
    "bilinear",
    "check_identity_suite",
    "check_linf_lemma",
    "component_rng",
    "compute_W",
    "constant_trajectory",
    "dform_config_for",
    "energy",
    "enstrophy",
    "estimate_approx_constants",
    "estimate_family_constants",
    "estimate_inequality_constants",
    "evolve_determining_form",
    "field_from_coeffs",
    "field_from_physical",
    "forcing_field",
    "g_value",
    "grashof",
    "initial_field",
    "inner_h",
    "inner_v",
    "integrate_nse",
    "integrate_nudged",
    "laminar_state",
    "leray_project",
    "load_config",
    "load_snapshot",
    "make_interpolant",
    "measure_R",
    "measure_eps_disc",
    "norm_a",
    "norm_h",
    "norm_inf",
    "norm_v",
    "norms",
    "params_for_grashof",
    "parse_config",
    "random_solenoidal_field",
    "read_snapshot",
    "run_experiment",
    "save_config",
    "save_snapshot",
    "sobolev_norm",
    "solenoidal_mode",
    "spin_up",
    "steady_residual",
    "stokes_apply",
    "sweep_workers",
    "sync_experiment",
    "threshold_sweep",
    "to_physical",
    "x_norms",
    "zero_field",
]
