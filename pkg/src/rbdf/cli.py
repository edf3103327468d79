"""Command-line entry points.

Subcommands: simulate | nudge | wmap | detform | audit | interp-fit |
selftest.  All take ``--config`` (flat key=value file; defaults apply
when omitted) plus a few overrides.  Exit codes: 0 success, 2
configuration error, 3 numerical failure, 4 infeasible audit.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import audit as audit_mod
from . import config as config_mod
from . import determining as det
from . import interpolants as interp_mod
from . import nudging as nudge_mod
from . import snapshots as snap_mod
from . import solver as solver_mod
from .config import ConfigError, RunConfig
from .solver import NonFiniteError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4


def _load_config(args) -> RunConfig:
    cfg = config_mod.load(args.config) if args.config else RunConfig().validate()
    for key in ("mu", "h", "t_end", "seed", "out"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            setattr(cfg, key, val)
    return cfg.validate()


def _outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _prepared_reference(cfg: RunConfig, args):
    """Reference start state: a restart snapshot or a burned-in run."""
    p = cfg.params()
    if getattr(args, "ref", None):
        state, p_file = snap_mod.read_state(args.ref)
        return state, p_file
    state0 = solver_mod.random_state(
        p, cfg.seed, amplitude_u=cfg.amplitude, amplitude_theta=cfg.theta_amplitude
    )
    res = solver_mod.simulate(
        state0, p, cfg.stepper(), t_end=cfg.burn_in, sample_every=10**9, diag_every=10**9
    )
    return res.snapshots[-1], p


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    p = cfg.params()
    if args.restart:
        state0, p = snap_mod.read_state(args.restart)
    else:
        state0 = solver_mod.random_state(
            p, cfg.seed, amplitude_u=cfg.amplitude, amplitude_theta=cfg.theta_amplitude
        )
    res = solver_mod.simulate(
        state0, p, cfg.stepper(), t_end=cfg.t_end,
        sample_every=cfg.sample_every, diag_every=cfg.diag_every,
    )
    for i, s in enumerate(res.snapshots):
        snap_mod.write_state(os.path.join(out, f"snap_{i:05d}.rbdf"), s, p)
    series = res.series
    cols = list(series.keys())
    rows = list(zip(*[series[c] for c in cols]))
    snap_mod.write_csv(
        os.path.join(out, "energy.csv"), "simulate", cols, rows,
        seed=cfg.seed, dt=cfg.dt, g=cfg.g,
    )
    print(f"simulate: {len(res.snapshots)} snapshots -> {out}")
    return 0


def cmd_nudge(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    ref0, p = _prepared_reference(cfg, args)
    np_ = nudge_mod.NudgeParams(mu=cfg.mu, interp=cfg.interpolant())
    rep = nudge_mod.synchronize_experiment(
        ref0, p, np_, cfg.stepper(), t_span=cfg.t_span, diag_every=cfg.diag_every
    )
    rows = zip(rep.t, rep.err_v0, rep.err_l2_theta, rep.err_h1_theta)
    snap_mod.write_csv(
        os.path.join(out, "sync.csv"), "nudge",
        ["t", "err_v0", "err_l2_theta", "err_h1_theta"], rows,
        mu=cfg.mu, h=cfg.h, interp=cfg.interp, rate=f"{rep.rate:.6g}",
    )
    print(
        f"nudge: decay {rep.combined[0]:.3e} -> {rep.combined[-1]:.3e}, "
        f"fitted rate {rep.rate:.3f} -> {out}/sync.csv"
    )
    return 0


def _reference_trajectory(cfg: RunConfig, args):
    ref0, p = _prepared_reference(cfg, args)
    interp = cfg.interpolant()
    run = det.record_trajectory(ref0, p, cfg.stepper(), t_span=cfg.t_span, interp=interp)
    return run, p, interp


def cmd_wmap(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    run, p, interp = _reference_trajectory(cfg, args)
    np_ = nudge_mod.NudgeParams(mu=cfg.mu, interp=interp)
    spin = det.SpinUpConfig(tau_spin=cfg.tau_spin, tolerance=cfg.spin_tolerance)
    keep = max(1, int(round(0.2 / cfg.dt)))
    res = det.W_map(run.traj, p, np_, spin, keep_fields_every=keep)
    diff = res.v_tail.minus(res.w.ih)
    rel = det.norm_X(diff, p) / max(det.norm_X(run.traj, p), 1e-300)
    for i, (t, u, th) in enumerate(res.w.fields):
        st = solver_mod.RBState(u, th, t)
        snap_mod.write_state(os.path.join(out, f"wmap_{i:05d}.rbdf"), st, p)
    with open(os.path.join(out, "wmap_report.txt"), "w") as fh:
        fh.write(snap_mod.meta_line("wmap", mu=cfg.mu, h=cfg.h) + "\n")
        fh.write(f"norm_X_v = {det.norm_X(run.traj, p):.12g}\n")
        fh.write(f"norm_Y_w = {det.norm_Y(res.w, p):.12g}\n")
        fh.write(f"norm_Z_eta = {det.norm_Z(res.eta, p):.12g}\n")
        fh.write(f"consistency_rel = {rel:.12g}\n")
        fh.write(f"tau_spin_used = {res.tau_used:.12g}\n")
        fh.write(f"stationarity = {res.stationarity:.12g}\n")
    print(f"wmap: consistency {rel:.3e}, tau {res.tau_used:.2f} -> {out}")
    return 0


def cmd_detform(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    run, p, interp = _reference_trajectory(cfg, args)
    np_ = nudge_mod.NudgeParams(mu=cfg.mu, interp=interp)
    spin = det.SpinUpConfig(tau_spin=cfg.tau_spin, tolerance=cfg.spin_tolerance)
    v0 = run.traj.scaled(args.v0_scale)
    cache = det.FCache(v0, p, np_, spin)
    states = det.beta_evolve(
        v0, p, np_, spin, s_span=cfg.s_span, ode_dt=cfg.ode_dt,
        n_grid=cfg.beta_grid, cache=cache,
    )
    roots = det.find_zeros(v0, p, np_, spin, cache=cache)
    rows = [(st.s, st.beta, cache.f(round(st.beta, 12))) for st in states]
    snap_mod.write_csv(
        os.path.join(out, "detform.csv"), "detform", ["s", "beta", "f_beta"], rows,
        v0_scale=args.v0_scale, roots=";".join(f"{r:.6f}" for r in roots),
    )
    if roots:
        rec = det.recover_solution(
            v0.scaled(roots[0]), p, np_, spin,
            keep_fields_every=max(1, int(round(0.2 / cfg.dt))),
        )
        for i, (t, u, th) in enumerate(rec.fields):
            st = solver_mod.RBState(u, th, t)
            snap_mod.write_state(os.path.join(out, f"recovered_{i:05d}.rbdf"), st, p)
    print(f"detform: beta(end) = {states[-1].beta:.6f}, roots = {roots} -> {out}")
    return 0


def cmd_audit(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    p = cfg.params()
    if cfg.j1 > 0 and cfg.j2 > 0:
        J1, J2 = cfg.j1, cfg.j2
    else:
        bounds = solver_mod.estimate_attractor_bounds(
            p, cfg.stepper(), burn_in=cfg.burn_in, horizon=cfg.horizon, seed=cfg.seed,
            amplitude=cfg.amplitude,
        )
        J1, J2 = bounds.J1, bounds.J2
    bc = audit_mod.BcCase.NO_SLIP if cfg.bc == "no-slip" else audit_mod.BcCase.STRESS_FREE
    inp = audit_mod.AuditInput(p=p, bc=bc, J1=J1, J2=J2, mu=cfg.mu, h=cfg.h)
    report = audit_mod.check_conditions(inp)
    rows = [
        (cid, r.lhs, r.rhs, r.margin, int(r.satisfied))
        for cid, r in report.conditions.items()
    ]
    snap_mod.write_csv(
        os.path.join(out, "audit.csv"), "audit",
        ["condition", "lhs", "rhs", "margin", "pass"], rows,
        bc=cfg.bc, mu=cfg.mu, h=cfg.h, J1=f"{J1:.6g}", J2=f"{J2:.6g}",
    )
    suggestion = audit_mod.suggest_mu_h(inp)
    with open(os.path.join(out, "audit.txt"), "w") as fh:
        fh.write(snap_mod.meta_line("audit", bc=cfg.bc) + "\n")
        fh.write(f"J1 = {J1:.6g}\nJ2 = {J2:.6g}\nR = {report.R:.6g}\nrho = {report.rho:.6g}\n")
        fh.write("\n[constants]\n")
        for k, v in report.constants.items():
            fh.write(f"{k} = {v:.6g}\n")
        fh.write("\n[conditions]\n")
        for cid, r in report.conditions.items():
            fh.write(
                f"{cid}: {r.lhs:.6g} {r.op} {r.rhs:.6g}  pass={r.satisfied} margin={r.margin:.6g}"
                + (f"  ({r.note})" if r.note else "") + "\n"
            )
        for note in report.notes:
            fh.write(f"note: {note}\n")
        fh.write("\n[suggestion]\n")
        if isinstance(suggestion, audit_mod.Infeasible):
            fh.write(f"infeasible: {suggestion.binding}: {suggestion.reason}\n")
        else:
            fh.write(
                f"mu_min = {suggestion.mu_min:.6g} (binding {suggestion.binding_mu})\n"
                f"h_max = {suggestion.h_max:.6g} (binding {suggestion.binding_h})\n"
            )
    if isinstance(suggestion, audit_mod.Infeasible):
        print(f"audit: infeasible ({suggestion.binding}) -> {out}")
        return EXIT_INFEASIBLE
    print(
        f"audit: mu_min {suggestion.mu_min:.4g}, h_max {suggestion.h_max:.4g} -> {out}"
    )
    return 0


def cmd_interp_fit(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    d = cfg.domain()
    kind = config_mod._INTERP_KINDS[cfg.interp](h=cfg.h)
    h_hi = min(d.L, d.l) / 2.0
    h_values = tuple(np.geomspace(cfg.h, h_hi, 4))
    fit = interp_mod.fit_constants(kind, d, h_values, n_fields=100, seed=cfg.seed)
    rows = [tuple(r) for r in fit.samples]
    snap_mod.write_csv(
        os.path.join(out, "interp_fit.csv"), "interp-fit",
        ["h", "err_l2", "err_h1", "norm_h1", "norm_h2"], rows,
        kind=cfg.interp, c1=f"{fit.c_l2[0]:.6g}", c2=f"{fit.c_l2[1]:.6g}",
        c1t=f"{fit.c_h1[0]:.6g}", c2t=f"{fit.c_h1[1]:.6g}",
    )
    print(
        f"interp-fit [{cfg.interp}]: c_l2 = {fit.c_l2}, c_h1 = {fit.c_h1} -> {out}"
    )
    return 0


def cmd_selftest(args) -> int:
    from . import selftest

    return selftest.run()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbdf", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, overrides=("mu", "h", "t_end", "seed", "out")):
        sp.add_argument("--config", help="key=value configuration file")
        if "mu" in overrides:
            sp.add_argument("--mu", type=float)
        if "h" in overrides:
            sp.add_argument("--h", type=float)
        if "t_end" in overrides:
            sp.add_argument("--t-end", dest="t_end", type=float)
        if "seed" in overrides:
            sp.add_argument("--seed", type=int)
        if "out" in overrides:
            sp.add_argument("--out")

    sp = sub.add_parser("simulate", help="integrate the full system")
    common(sp)
    sp.add_argument("--restart", help="continue from a snapshot file")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("nudge", help="synchronization experiment")
    common(sp)
    sp.add_argument("--ref", help="reference start snapshot")
    sp.set_defaults(fn=cmd_nudge)

    sp = sub.add_parser("wmap", help="evaluate the lifting map on an observed trajectory")
    common(sp)
    sp.add_argument("--ref", help="reference start snapshot")
    sp.set_defaults(fn=cmd_wmap)

    sp = sub.add_parser("detform", help="scalar-reduction descent and root finding")
    common(sp)
    sp.add_argument("--ref", help="reference start snapshot")
    sp.add_argument("--v0-scale", dest="v0_scale", type=float, default=2.0)
    sp.set_defaults(fn=cmd_detform)

    sp = sub.add_parser("audit", help="constants and sufficient conditions")
    common(sp)
    sp.set_defaults(fn=cmd_audit)

    sp = sub.add_parser("interp-fit", help="fit interpolation-error envelopes")
    common(sp)
    sp.set_defaults(fn=cmd_interp_fit)

    sp = sub.add_parser("selftest", help="run the invariant smoke suite")
    sp.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        NonFiniteError,
        det.SpanTooShortError,
        det.TailNotConvergedError,
        det.NotSteadyError,
        det.NoConvergenceError,
        interp_mod.HTooSmallError,
    ) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
