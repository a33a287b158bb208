"""Run configuration: strict schema, TOML round-trip, and seed splitting.

Configs are flat key-value TOML with four sections (physical, solver,
interpolant, experiment).  Unknown keys are rejected so sweep provenance
stays trustworthy; floats are written with shortest round-trip repr, so a
config survives save/load bit-exactly.

Randomness: every run names one integer seed.  Component streams derive
from it as SeedSequence((seed, component_id, index)), with component ids
listed in COMPONENTS — the same seed never feeds two different purposes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

import numpy as np
import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .dynamics import SolverConfig
from .errors import ConfigError
from .interpolants import Interpolant, make_interpolant
from .physics import PhysicalParams, params_for_grashof

COMPONENTS = {
    "initial-field": 0,
    "sync-start": 1,
    "sweep-start": 2,
    "ensemble": 3,
    "perturbation": 4,
}


def component_rng(seed: int, component: str, index: int = 0) -> np.random.Generator:
    """Deterministic per-purpose stream from the single run seed."""
    if component not in COMPONENTS:
        raise ConfigError(f"unknown rng component {component!r}; known: {sorted(COMPONENTS)}")
    return np.random.default_rng(np.random.SeedSequence((seed, COMPONENTS[component], index)))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhysicalSection(_Section):
    nu: float = Field(default=1.0, gt=0)
    L: float = Field(default=2.0 * math.pi, gt=0)
    forcing_mode: int = Field(default=2, ge=1)
    grashof: float = Field(default=1.0, ge=0)


class SolverSection(_Section):
    resolution: int = Field(default=64, ge=4)
    dt: float = Field(default=0.01, gt=0)
    integrator: Literal["ifrk4", "cnab2"] = "ifrk4"
    sample_every: int = Field(default=5, ge=1)
    feedback: Literal["explicit", "implicit"] = "explicit"
    spin_up_time: float | None = Field(default=None, gt=0)


class InterpolantSection(_Section):
    kind: Literal["modal", "volume", "nodal"] = "modal"
    n: int = Field(default=8, ge=1)
    stencil_frac: float = Field(default=0.25, ge=0, lt=0.5)


class ExperimentSection(_Section):
    kind: Literal["simulate", "sync", "sweep", "dform", "verify", "constants"] = "simulate"
    initial: Literal["seeded", "eigenmode", "laminar"] = "seeded"
    T: float = Field(default=5.0, gt=0)
    mu: float = Field(default=8.0, ge=0)
    seed: int = Field(default=0, ge=0)
    snapshot_every: int = Field(default=0, ge=0)
    mu_values: tuple[float, ...] = ()
    n_values: tuple[int, ...] = ()
    kinds: tuple[Literal["modal", "volume", "nodal"], ...] = ()
    t_end: float = Field(default=1e6, gt=0)
    stop_rate: float = Field(default=1e-8, gt=0)
    pre_window: float = Field(default=0.0, ge=0)
    R: float = Field(default=0.0, ge=0)
    n_fields: int = Field(default=200, ge=1)
    n_samples: int = Field(default=200, ge=1)


class RunConfig(_Section):
    physical: PhysicalSection = PhysicalSection()
    solver: SolverSection = SolverSection()
    interpolant: InterpolantSection = InterpolantSection()
    experiment: ExperimentSection = ExperimentSection()

    # -- domain objects ----------------------------------------------------

    def physical_params(self) -> PhysicalParams:
        p = self.physical
        return params_for_grashof(p.grashof, nu=p.nu, L=p.L, forcing_mode=p.forcing_mode)

    def solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(
            resolution=s.resolution,
            dt=s.dt,
            integrator=s.integrator,
            sample_every=s.sample_every,
            feedback=s.feedback,
            spin_up_time=s.spin_up_time,
            seed=self.experiment.seed,
        )

    def interpolant_op(self) -> Interpolant:
        i = self.interpolant
        return make_interpolant(i.kind, i.n, self.physical.L, stencil_frac=i.stencil_frac)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid config: {problems}") from exc


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def config_to_toml(config: RunConfig) -> str:
    """Deterministic writer; floats use shortest round-trip repr, None keys
    are omitted (reloaded as their defaults)."""
    lines: list[str] = []
    for section_name in ("physical", "solver", "interpolant", "experiment"):
        section = getattr(config, section_name)
        lines.append(f"[{section_name}]")
        for key in type(section).model_fields:
            value = getattr(section, key)
            if value is None:
                continue
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def save_config(config: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(config_to_toml(config))
    return path
