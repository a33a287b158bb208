"""Experiment drivers: run a configured experiment, write its artifacts.

Each driver takes a validated RunConfig and an output directory, produces
CSV files (stable column order, shortest round-trip float formatting, so
identical configs yield identical bytes) plus DFL1 snapshots, and returns a
JSON-friendly summary.  The service and CLI layers both call these.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig, component_rng
from .dform import (
    compute_W,
    dform_config_for,
    evolve_determining_form,
    measure_R,
)
from .dynamics import (
    initial_field,
    integrate_nse,
    spin_up,
    sync_experiment,
    threshold_sweep,
)
from .errors import ConfigError
from .inequalities import (
    check_identity_suite,
    check_linf_lemma,
    estimate_inequality_constants,
)
from .interpolants import estimate_approx_constants, make_interpolant
from .physics import PhysicalParams, grashof, laminar_state
from .snapshots import save_snapshot
from .spectral import Grid, SpectralField, random_solenoidal_field, solenoidal_mode
from .trajectories import constant_trajectory

# ---------------------------------------------------------------------------
# CSV plumbing


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ConfigError(f"row width {len(row)} does not match header {header}")
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _out_dir(base: str | Path) -> Path:
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# shared pieces


def _start_field(config: RunConfig, grid: Grid, params: PhysicalParams) -> SpectralField:
    choice = config.experiment.initial
    if choice == "laminar":
        return laminar_state(grid, params)
    if choice == "eigenmode":
        return solenoidal_mode(grid, 1, 0, amplitude=1.0)
    return initial_field(grid, params, config.experiment.seed)


def _reference_field(config: RunConfig, params: PhysicalParams) -> SpectralField:
    """Spin up when asked; otherwise use the configured start directly."""
    solver = config.solver_config()
    if solver.spin_up_time is not None:
        return spin_up(params, solver).field
    grid = Grid(solver.resolution, params.L)
    return _start_field(config, grid, params)


def _write_diagnostics(path: Path, rows) -> Path:
    header = ("s", "E", "Z", "norm_V", "norm_DA", "delta_H", "delta_V", "delta_DA")
    return write_csv(
        path,
        header,
        (
            (r.s, r.energy, r.enstrophy, r.norm_v, r.norm_da, r.delta_h, r.delta_v, r.delta_da)
            for r in rows
        ),
    )


# ---------------------------------------------------------------------------
# drivers


def run_simulate(config: RunConfig, out_dir: str | Path) -> dict:
    out = _out_dir(out_dir)
    params = config.physical_params()
    solver = config.solver_config()
    grid = Grid(solver.resolution, params.L)
    u0 = _start_field(config, grid, params)
    cadence = config.experiment.snapshot_every
    seen = [0]
    snapshots: list[str] = []

    def on_sample(t: float, field: SpectralField) -> None:
        if seen[0] % cadence == 0:
            name = f"snap_{seen[0]:06d}.dfl"
            save_snapshot(field, out / name, nu=params.nu, time=t)
            snapshots.append(name)
        seen[0] += 1

    run = integrate_nse(
        u0, params, solver, config.experiment.T,
        on_sample=on_sample if cadence else None,
    )
    files = {"diagnostics": str(_write_diagnostics(out / "diagnostics.csv", run.diagnostics))}
    final = save_snapshot(run.final, out / "final.dfl", nu=params.nu, time=run.t1)
    files["final"] = str(final)
    last = run.diagnostics[-1]
    return {
        "kind": "simulate",
        "grashof": grashof(params),
        "t1": run.t1,
        "n_steps": run.n_steps,
        "energy": last.energy,
        "enstrophy": last.enstrophy,
        "snapshots": snapshots,
        "files": files,
    }


def _sync_start(config: RunConfig, grid: Grid, params: PhysicalParams) -> SpectralField:
    """Generic nudged-copy start with slow-mode content, scaled to the flow."""
    rng = component_rng(config.experiment.seed, "sync-start")
    G = grashof(params)
    norm = 0.5 * params.nu * params.kappa0 * max(G, 1.0)
    return random_solenoidal_field(grid, rng, norm=norm, band=(1.0, 3.0))


def run_sync(config: RunConfig, out_dir: str | Path) -> dict:
    out = _out_dir(out_dir)
    params = config.physical_params()
    solver = config.solver_config()
    J = config.interpolant_op()
    u0 = _reference_field(config, params)
    w0 = _sync_start(config, u0.grid, params)
    record = sync_experiment(
        params, J, config.experiment.mu, solver, config.experiment.T, u0=u0, w0=w0
    )
    decay = write_csv(
        out / "decay.csv",
        ("s", "delta_H", "delta_V", "delta_DA", "E", "Z"),
        zip(record.s, record.delta_h, record.delta_v, record.delta_da,
            record.energy, record.enstrophy),
    )
    files = {"decay": str(decay)}
    if record.final_u is not None:
        files["final_u"] = str(save_snapshot(
            record.final_u, out / "final_u.dfl", nu=params.nu, time=record.s[-1]
        ))
    if record.final_w is not None:
        files["final_w"] = str(save_snapshot(
            record.final_w, out / "final_w.dfl", nu=params.nu, time=record.s[-1]
        ))
    return {
        "kind": "sync",
        "mu": record.mu,
        "h": record.h,
        "interpolant": J.label(),
        "rate": record.rate,
        "synchronized": record.synchronized,
        "diverged": record.diverged,
        "files": files,
    }


def run_sweep(config: RunConfig, out_dir: str | Path) -> dict:
    out = _out_dir(out_dir)
    params = config.physical_params()
    solver = config.solver_config()
    exp = config.experiment
    mu_values = exp.mu_values or (config.experiment.mu,)
    n_values = exp.n_values or (config.interpolant.n,)
    kinds = exp.kinds or ("modal", "volume", "nodal")
    cells = [
        (mu, make_interpolant(kind, n, params.L, stencil_frac=config.interpolant.stencil_frac))
        for kind in kinds
        for n in n_values
        for mu in mu_values
    ]
    u0 = _reference_field(config, params)
    w0 = _sync_start(config, u0.grid, params)
    table = threshold_sweep(params, solver, cells, exp.T, u0=u0, w0=w0)
    sweep = write_csv(
        out / "sweep.csv",
        ("mu", "h", "kind", "decay_rate", "synchronized"),
        ((c.mu, c.h, c.kind, c.rate, c.synchronized) for c in table),
    )
    return {
        "kind": "sweep",
        "cells": len(table),
        "synchronized": sum(1 for c in table if c.synchronized),
        "failed": sum(1 for c in table if c.error),
        "files": {"sweep": str(sweep)},
    }


def run_dform(config: RunConfig, out_dir: str | Path) -> dict:
    out = _out_dir(out_dir)
    params = config.physical_params()
    solver = config.solver_config()
    J = config.interpolant_op()
    exp = config.experiment
    grid = Grid(solver.resolution, params.L)
    ustar = laminar_state(grid, params)

    R = exp.R
    if R == 0.0:
        reference = _reference_field(config, params)
        probe = integrate_nse(reference, params, solver, exp.T, want_trajectory=True)
        R = measure_R([probe.trajectory], params, J)
    dform_cfg = dform_config_for(
        params, J, exp.mu, R=R,
        pre_window=exp.pre_window if exp.pre_window > 0 else None,
        u_star=ustar,
    )

    rng = component_rng(exp.seed, "perturbation")
    pert = random_solenoidal_field(
        grid, rng, norm=0.5 * params.nu * params.kappa0, band=(1.0, 4.0)
    )
    ds = solver.dt * solver.sample_every
    n_samples = max(2, int(round(exp.T / ds)) + 1)
    v0 = constant_trajectory(J.apply(ustar) + J.apply(pert), 0.0, ds, n_samples)

    w_result = compute_W(v0, params, J, dform_cfg, solver=solver)
    audit = write_csv(
        out / "w_audit.csv",
        ("s", "norm_w", "norm_dw", "norm_aw"),
        ((r.s, r.norm_w, r.norm_dw, r.norm_aw) for r in w_result.audit),
    )
    record = evolve_determining_form(
        v0, ustar, exp.t_end, params, J, dform_cfg,
        solver=solver, stop_rate=exp.stop_rate,
    )
    evolution = write_csv(
        out / "evolution.csv",
        ("t", "a", "g", "xnorm_dist"),
        ((r.t, r.a, r.g, r.xnorm_dist) for r in record.rows),
    )
    return {
        "kind": "dform",
        "R": R,
        "mu": exp.mu,
        "dist0": record.dist0,
        "terminated": record.terminated,
        "final_rate": record.final_rate,
        "g_evaluations": record.g_evaluations,
        "rows": len(record.rows),
        "error": record.error,
        "files": {"evolution": str(evolution), "w_audit": str(audit)},
    }


def _require_master_resolution(resolution: int) -> None:
    """Estimation ensembles live on a 64-point master grid; refuse less."""
    if resolution < 64:
        raise ConfigError(
            f"verification ensembles need resolution >= 64, got {resolution}"
        )


def run_verify(config: RunConfig, out_dir: str | Path) -> dict:
    out = _out_dir(out_dir)
    params = config.physical_params()
    solver = config.solver_config()
    exp = config.experiment
    _require_master_resolution(solver.resolution)
    grid = Grid(solver.resolution, params.L)
    identities = check_identity_suite(grid, n_triples=exp.n_fields, seed=exp.seed)
    lemma = check_linf_lemma(grid, n_fields=exp.n_fields, seed=exp.seed)
    rows = [
        ("identity_flip", identities.flip, identities.n_triples, grid.n, exp.seed),
        ("identity_ortho", identities.ortho, identities.n_triples, grid.n, exp.seed),
        ("identity_moveu", identities.moveu, identities.n_triples, grid.n, exp.seed),
        ("linf_violations", float(lemma.violations), lemma.n_fields, grid.n, exp.seed),
        ("linf_min_ratio", lemma.min_ratio, lemma.n_fields, grid.n, exp.seed),
    ]
    table = write_csv(
        out / "inequalities.csv",
        ("id", "constant", "ensemble_size", "resolution", "seed"),
        rows,
    )
    passed = identities.passed() and lemma.violations == 0
    return {
        "kind": "verify",
        "max_identity_violation": identities.max_violation(),
        "linf_violations": lemma.violations,
        "passed": passed,
        "files": {"inequalities": str(table)},
    }


def run_constants(config: RunConfig, out_dir: str | Path) -> dict:
    out = _out_dir(out_dir)
    params = config.physical_params()
    solver = config.solver_config()
    exp = config.experiment
    _require_master_resolution(solver.resolution)
    grid = Grid(solver.resolution, params.L)
    estimates = estimate_inequality_constants(grid, n_samples=exp.n_samples, seed=exp.seed)
    ineq = write_csv(
        out / "inequalities.csv",
        ("id", "constant", "ensemble_size", "resolution", "seed"),
        (
            (r.id, r.constant, r.n_samples, r.resolution, r.seed)
            for r in estimates.values()
        ),
    )
    rows = []
    for kind in ("modal", "volume", "nodal"):
        J = make_interpolant(
            kind, config.interpolant.n, params.L, stencil_frac=config.interpolant.stencil_frac
        )
        c = estimate_approx_constants(J, grid, n_samples=exp.n_samples, seed=exp.seed)
        rows.append((kind, J.h, c.c1, c.c2, c.c1t, c.c2t, c.cj, c.ensemble_seed))
    consts = write_csv(
        out / "constants.csv",
        ("kind", "h", "c1", "c2", "c1t", "c2t", "cJ", "ensemble_seed"),
        rows,
    )
    return {
        "kind": "constants",
        "inequalities": {r.id: r.constant for r in estimates.values()},
        "files": {"inequalities": str(ineq), "constants": str(consts)},
    }


DRIVERS = {
    "simulate": run_simulate,
    "sync": run_sync,
    "sweep": run_sweep,
    "dform": run_dform,
    "verify": run_verify,
    "constants": run_constants,
}


def run_experiment(config: RunConfig, out_dir: str | Path) -> dict:
    """Dispatch on the configured experiment kind."""
    driver = DRIVERS.get(config.experiment.kind)
    if driver is None:
        raise ConfigError(f"unknown experiment kind {config.experiment.kind!r}")
    return driver(config, out_dir)
