"""Invariant smoke suite behind ``rbdf selftest`` (exit 0 on pass)."""

from __future__ import annotations

import os
import tempfile

import numpy as np

from . import bilinear, config, snapshots
from .interpolants import (
    FourierLowpass,
    ModifiedInterpolant,
    NodalBilinear,
    VolumeAverage,
    apply_modified,
    apply_raw_grid,
)
from .solver import (
    PhysicalParams,
    StepperConfig,
    random_state,
    simulate,
    step,
)
from .spectral import (
    DomainSpec,
    Parity,
    divergence_residual,
    from_grid,
    norm_a0,
    norm_h1,
    norm_l2,
    random_scalar,
    random_velocity,
    to_grid,
)


def run() -> int:
    checks = []

    def check(name, ok, detail=""):
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))

    d = DomainSpec(L=2 * np.pi, l=np.pi, Nx=32, Ny=64)
    rng = np.random.default_rng(0)
    u = random_velocity(d, rng, 1.0)
    v = random_velocity(d, rng, 0.8)
    th = random_scalar(d, rng, 1.1)

    g1 = to_grid(u.u1)
    back = from_grid(g1, Parity.EVEN_X2, d)
    err = np.max(np.abs(back.coeffs - u.u1.coeffs))
    check("transform round trip", err < 1e-13, f"err={err:.2e}")

    check("divergence-free", divergence_residual(u) < 1e-12)

    i1 = abs(bilinear.b0_form(u, v, v)) / (norm_h1(u) * norm_l2(v) ** 2)
    i2 = abs(bilinear.b1_form(u, th, th)) / (norm_h1(u) * norm_l2(th) ** 2)
    i3 = abs(bilinear.b0_form_a0(u)) / (norm_h1(u) ** 2 * norm_a0(u))
    check("advection orthogonality", max(i1, i2, i3) < 1e-12, f"max={max(i1,i2,i3):.2e}")

    p = PhysicalParams(nu=1.0, kappa=1.0, g=10.0, domain=d)
    s0 = random_state(p, 1, amplitude_u=0.0)
    s1 = step(s0, p, StepperConfig(dt=1e-2))
    check("rest state fixed", norm_l2(s1.u) == 0.0 and norm_l2(s1.theta) == 0.0)

    s0 = random_state(p, 2, amplitude_u=0.5)
    res = simulate(s0, p, StepperConfig(dt=5e-3), t_end=0.5, sample_every=50)
    drift = float(np.max(np.abs(res.series["mean_u"])))
    check("mean conservation", drift <= 1e-10, f"drift={drift:.2e}")

    lp = FourierLowpass(h=0.5)
    il = apply_raw_grid(lp, to_grid(u.u1), d)
    errl = norm_l2(from_grid(g1 - il, Parity.EVEN_X2, d))
    check("low-pass tail bound", errl <= lp.h * norm_h1(u), f"{errl:.3f} <= {lp.h*norm_h1(u):.3f}")

    const = np.full((d.Ny, d.Nx), 2.5)
    ok = True
    for kind in (VolumeAverage(h=0.8), NodalBilinear(h=0.8)):
        out = apply_raw_grid(kind, const, d)
        ok &= bool(np.max(np.abs(out - 2.5)) < 1e-12)
    check("cell operators preserve constants", ok)

    m = ModifiedInterpolant(NodalBilinear(h=0.8))
    iu = apply_modified(m, u)
    check("modified operator lands divergence-free", divergence_residual(iu) < 1e-12)

    cfg = config.RunConfig().validate()
    rt = config.parse(config.serialize(cfg))
    check("config round trip", rt == cfg)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "snap.rbdf")
        snapshots.write_state(path, res.snapshots[-1], p)
        loaded, _ = snapshots.read_state(path)
        path2 = os.path.join(tmp, "snap2.rbdf")
        snapshots.write_state(path2, loaded, p)
        same = open(path, "rb").read() == open(path2, "rb").read()
        check("snapshot write/read/write byte-identical", same)

    print(f"{sum(checks)}/{len(checks)} checks passed")
    return 0 if all(checks) else 1
