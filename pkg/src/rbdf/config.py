"""Flat key=value run configuration.

One file drives every CLI command.  Lines are ``key = value`` with
``#`` comments; unknown keys are rejected, values are validated by
constructing the typed parameter objects.  Parsing then serializing
then parsing is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .spectral import DomainSpec
from .solver import PhysicalParams, StepperConfig
from .interpolants import (
    FourierLowpass,
    ModifiedInterpolant,
    NodalBilinear,
    VolumeAverage,
)


class ConfigError(ValueError):
    pass


_INTERP_KINDS = {"fourier": FourierLowpass, "volume": VolumeAverage, "nodal": NodalBilinear}


@dataclass
class RunConfig:
    # domain / grid
    nx: int = 64
    ny: int = 128
    L: float = 6.283185307179586
    l: float = 3.141592653589793
    # physics
    nu: float = 1.0
    kappa: float = 1.0
    g: float = 100.0
    a: float = 0.0
    # stepping / run
    dt: float = 0.004
    t_end: float = 10.0
    t_span: float = 10.0
    sample_every: int = 250
    diag_every: int = 50
    seed: int = 0
    amplitude: float = 1.0
    theta_amplitude: float = 0.0
    # observation / nudging
    mu: float = 100.0
    h: float = 0.25
    interp: str = "fourier"
    # lifting map
    tau_spin: float = 5.0
    spin_tolerance: float = 1e-6
    # scalar reduction
    s_span: float = 40.0
    ode_dt: float = 0.5
    beta_grid: int = 7
    # attractor bounds / audit
    burn_in: float = 10.0
    horizon: float = 30.0
    j1: float = 0.0
    j2: float = 0.0
    bc: str = "stress-free"
    # output
    out: str = "rbdf-out"

    # -- typed views ----------------------------------------------------

    def domain(self) -> DomainSpec:
        return DomainSpec(L=self.L, l=self.l, Nx=self.nx, Ny=self.ny)

    def params(self) -> PhysicalParams:
        return PhysicalParams(nu=self.nu, kappa=self.kappa, g=self.g, domain=self.domain(), a=self.a)

    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt)

    def interpolant(self) -> ModifiedInterpolant:
        try:
            kind = _INTERP_KINDS[self.interp]
        except KeyError:
            raise ConfigError(f"unknown interp kind {self.interp!r}") from None
        return ModifiedInterpolant(kind(h=self.h))

    def validate(self) -> "RunConfig":
        try:
            self.domain()
            self.params()
            self.stepper()
            self.interpolant()
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e
        if self.bc not in ("stress-free", "no-slip"):
            raise ConfigError(f"unknown bc {self.bc!r}")
        return self


def parse(text: str) -> RunConfig:
    """Parse key = value lines into a validated RunConfig."""
    field_map = {f.name: f for f in fields(RunConfig)}
    values = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in field_map:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        ftype = field_map[key].type
        try:
            if ftype == "int":
                values[key] = int(val)
            elif ftype == "float":
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError:
            raise ConfigError(f"line {ln}: bad value for {key}: {val!r}") from None
    return RunConfig(**values).validate()


def serialize(cfg: RunConfig) -> str:
    lines = ["# rbdf run configuration"]
    for f in fields(RunConfig):
        lines.append(f"{f.name} = {getattr(cfg, f.name)!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def load(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def save(path, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(cfg))
