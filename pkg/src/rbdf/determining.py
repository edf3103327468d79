"""Trajectory phase space, the lifting map W, and its scalar reduction.

A phase-space element is a uniformly sampled velocity trajectory with
range in the observation band (compact storage: only retained modes).
The lifting map W sends a trajectory v to the bounded solution of the
nudged auxiliary system driven by v; numerically it is realized by
spin-up from rest plus a tail-stationarity test (re-spinning from a
shifted start must reproduce the tail).  On top of W sit:

* the trajectory norms (sup-type X, and Y/Z with sliding window
  integrals of |A0 w|^2 and |A1 eta|^2);
* the descent vector field -|v - Ih W(v)|_X^2 (v - Ih u*), whose steady
  states are the observed attractor trajectories;
* the exact scalar reduction along the ray through v0: beta' =
  -beta * f(beta) with f(beta) = |beta v0 - Ih W(beta v0)|_X^2, plus a
  zero finder that identifies attractor trajectories on the ray;
* Lipschitz probing of W between trajectory pairs, and recovery of the
  full (velocity, temperature) pair from a steady velocity trajectory.

Expensive f(beta) values are cached; grid evaluations can run on a
thread pool capped by the RBDF_THREADS environment variable.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .interpolants import ModifiedInterpolant, pr_mask
from .nudging import NudgeParams, NudgedIntegrator, StepDrive, make_observer
from .solver import Integrator, PhysicalParams, RBState, StepperConfig, state_arrays
from .spectral import (
    DomainSpec,
    Parity,
    ScalarField,
    SpectralField,
    VelocityField,
    eig_lambda1,
)


class SpanTooShortError(ValueError):
    """Trajectory span cannot accommodate spin-up plus one window."""


class TailNotConvergedError(RuntimeError):
    """Tail stationarity check failed; increase tau_spin or mu."""


class NotSteadyError(RuntimeError):
    """Trajectory is not a steady state of the descent dynamics."""


class NoConvergenceError(RuntimeError):
    """beta still evolving at the end of the requested s-span."""


class OutOfBallWarning(UserWarning):
    """Input lies outside the ball the theory covers; result computed anyway."""


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled velocity trajectory in the observation band.

    ``u1, u2`` have shape (n_samples, n_sel): coefficients at the flat
    half-spectrum indices ``sel``.  ``stage1, stage2`` (shape
    (n_samples-1, n_sel)) hold the recorder's predictor-stage
    observation for each step, which lets a re-integration reproduce the
    recorded dynamics exactly; linear combinations preserve them.
    """

    t0: float
    dt: float
    u1: np.ndarray
    u2: np.ndarray
    sel: np.ndarray
    domain: DomainSpec
    interp: ModifiedInterpolant
    stage1: np.ndarray | None = None
    stage2: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.u1.shape[0]

    @property
    def t1(self) -> float:
        return self.t0 + (self.n_samples - 1) * self.dt

    @property
    def span(self) -> float:
        return (self.n_samples - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def v0_weights(self) -> np.ndarray:
        d = self.domain
        w = d.parseval_weights.ravel()[self.sel]
        k2 = d.K2.ravel()[self.sel]
        return w * (1.0 + d.measure * k2)

    def v0_series(self) -> np.ndarray:
        """||v(t_i)||_V0 for every sample."""
        wv = self.v0_weights()
        s = (np.abs(self.u1) ** 2 + np.abs(self.u2) ** 2) @ wv
        return np.sqrt(s)

    def field(self, i: int) -> VelocityField:
        d = self.domain
        c1 = d.zeros()
        c2 = d.zeros()
        c1.ravel()[self.sel] = self.u1[i]
        c2.ravel()[self.sel] = self.u2[i]
        return VelocityField(
            SpectralField(c1, Parity.EVEN_X2, d), SpectralField(c2, Parity.ODD_X2, d)
        )

    def scaled(self, alpha: float) -> "Trajectory":
        return replace(
            self,
            u1=alpha * self.u1,
            u2=alpha * self.u2,
            stage1=None if self.stage1 is None else alpha * self.stage1,
            stage2=None if self.stage2 is None else alpha * self.stage2,
        )

    def restrict(self, t_lo: float) -> "Trajectory":
        """Slice off everything before the first sample >= t_lo."""
        i0 = int(np.ceil((t_lo - self.t0) / self.dt - 1e-9))
        i0 = max(0, i0)
        if i0 >= self.n_samples:
            raise SpanTooShortError("restriction leaves no samples")
        return replace(
            self,
            t0=self.t0 + i0 * self.dt,
            u1=self.u1[i0:],
            u2=self.u2[i0:],
            stage1=None if self.stage1 is None else self.stage1[i0:],
            stage2=None if self.stage2 is None else self.stage2[i0:],
        )

    def minus(self, other: "Trajectory") -> "Trajectory":
        _check_compatible(self, other)
        n = min(self.n_samples, other.n_samples)
        return replace(
            self,
            u1=self.u1[:n] - other.u1[:n],
            u2=self.u2[:n] - other.u2[:n],
            stage1=None,
            stage2=None,
        )

    def zeros_like(self) -> "Trajectory":
        return replace(
            self,
            u1=np.zeros_like(self.u1),
            u2=np.zeros_like(self.u2),
            stage1=None if self.stage1 is None else np.zeros_like(self.stage1),
            stage2=None if self.stage2 is None else np.zeros_like(self.stage2),
        )


def _check_compatible(a: Trajectory, b: Trajectory) -> None:
    if a.dt != b.dt or abs(a.t0 - b.t0) > 1e-9 * a.dt or not np.array_equal(a.sel, b.sel):
        raise ValueError("trajectories not on a common sample grid")


def norm_X(v: Trajectory, p: PhysicalParams) -> float:
    """sup_t ||v(t)||_V0 scaled by 1/(nu*sqrt(lam1))."""
    lam1 = eig_lambda1(p.domain)
    return float(v.v0_series().max()) / (p.nu * np.sqrt(lam1))


def sliding_window_sup(t: np.ndarray, y: np.ndarray, T: float) -> tuple[float, int]:
    """sup over full windows of the trapezoid integral of y over [t, t+T].

    Only windows entirely inside the span count; returns the sup and the
    number of windows used.  Raises SpanTooShortError without one.
    """
    dt = t[1] - t[0]
    m = int(round(T / dt))
    if m < 1 or m > len(t) - 1:
        raise SpanTooShortError("span shorter than one integral window")
    cum = np.concatenate([[0.0], np.cumsum((y[1:] + y[:-1]) * 0.5 * dt)])
    ints = cum[m:] - cum[:-m]
    return float(ints.max()), len(ints)


@dataclass
class WSeries:
    """Velocity half of a lifted trajectory: its observed projection as
    a Trajectory plus the scalar series the Y-norm needs."""

    t: np.ndarray
    ih: Trajectory
    v0: np.ndarray
    a0_sq: np.ndarray
    fields: list

    def norm_Y(self, p: PhysicalParams) -> float:
        lam1 = eig_lambda1(p.domain)
        T = 1.0 / (p.nu * lam1)
        sup_int, _ = sliding_window_sup(self.t, self.a0_sq, T)
        return float(self.v0.max()) / (p.nu * np.sqrt(lam1)) + np.sqrt(
            sup_int / (p.nu * lam1)
        )


@dataclass
class EtaSeries:
    """Temperature half: scalar series for the Z-norm."""

    t: np.ndarray
    v1: np.ndarray
    a1_sq: np.ndarray
    l2: np.ndarray
    fields: list

    def norm_Z(self, p: PhysicalParams) -> float:
        lam1 = eig_lambda1(p.domain)
        T = 1.0 / (p.nu * lam1)
        sup_int, _ = sliding_window_sup(self.t, self.a1_sq, T)
        return float(self.v1.max()) + np.sqrt(p.nu * sup_int)


def norm_Y(w: WSeries, p: PhysicalParams) -> float:
    return w.norm_Y(p)


def norm_Z(eta: EtaSeries, p: PhysicalParams) -> float:
    return eta.norm_Z(p)


# ---------------------------------------------------------------------------
# Recording reference trajectories


@dataclass
class ReferenceRun:
    """Observed trajectory of a reference solution plus checkpoints."""

    traj: Trajectory
    final_state: RBState
    fields: list  # (t, VelocityField, ScalarField) checkpoints


def record_trajectory(
    state0: RBState,
    p: PhysicalParams,
    cfg: StepperConfig,
    t_span: float,
    interp: ModifiedInterpolant,
    keep_fields_every: int | None = None,
) -> ReferenceRun:
    """Integrate the plain system, recording its observed projection at
    every step (including predictor stages)."""
    from .solver import arrays_to_state

    d = p.domain
    sel = np.flatnonzero(pr_mask(d, interp.h).ravel())
    c1, c2, cth = state_arrays(state0)
    integ = Integrator(p, cfg.dt)
    observe = make_observer(interp, d)
    n_steps = int(round(t_span / cfg.dt))
    n_sel = sel.size
    u1 = np.empty((n_steps + 1, n_sel), np.complex128)
    u2 = np.empty((n_steps + 1, n_sel), np.complex128)
    s1 = np.empty((n_steps, n_sel), np.complex128)
    s2 = np.empty((n_steps, n_sel), np.complex128)

    def gather(out1, out2, i, a, b):
        o1, o2 = observe(a, b)
        out1[i] = o1.ravel()[sel]
        out2[i] = o2.ravel()[sel]

    holder = {}

    def hook(t_stage, pa, pb, pc):
        gather(s1, s2, holder["i"], pa, pb)

    integ.stage_hook = hook
    gather(u1, u2, 0, c1, c2)
    fields = []
    t = state0.t
    for i in range(n_steps):
        holder["i"] = i
        t = integ.step_inplace(t, c1, c2, cth)
        gather(u1, u2, i + 1, c1, c2)
        if keep_fields_every and ((i + 1) % keep_fields_every == 0):
            st = arrays_to_state(c1, c2, cth, d, t)
            fields.append((t, st.u, st.theta))
    traj = Trajectory(
        t0=state0.t, dt=cfg.dt, u1=u1, u2=u2, sel=sel, domain=d, interp=interp,
        stage1=s1, stage2=s2,
    )
    final = arrays_to_state(c1, c2, cth, d, t)
    return ReferenceRun(traj, final, fields)


def project_state(u: VelocityField, interp: ModifiedInterpolant) -> VelocityField:
    from .interpolants import apply_modified

    return apply_modified(interp, u)


# ---------------------------------------------------------------------------
# The lifting map W


@dataclass(frozen=True)
class SpinUpConfig:
    """Transient discard length and tail-stationarity tolerance.

    ``tau_spin`` must be at least 5 thermal relaxation times
    (5/(kappa*lam1)); with ``adaptive`` the discard grows (within the
    available span) until re-spinning from a shifted start changes the
    tail by no more than ``tolerance`` relative in the sup-V0 metric.
    """

    tau_spin: float
    tolerance: float = 1e-6
    check_offset: float | None = None
    adaptive: bool = True


@dataclass
class WMapResult:
    w: WSeries
    eta: EtaSeries
    tau_used: float
    stationarity: float
    v_tail: Trajectory


def _norms_of_arrays(c1, c2, d):
    w = d.parseval_weights
    k2 = d.K2
    e1 = c1.real**2 + c1.imag**2
    e2 = c2.real**2 + c2.imag**2
    s0 = float(np.sum(w * e1) + np.sum(w * e2))
    s1 = float(np.sum(w * k2 * e1) + np.sum(w * k2 * e2))
    s2 = float(np.sum(w * k2 * k2 * e1) + np.sum(w * k2 * k2 * e2))
    return s0, s1, s2


def _scalar_norms(c, d):
    w = d.parseval_weights
    k2 = d.K2
    e = c.real**2 + c.imag**2
    return (
        float(np.sum(w * e)),
        float(np.sum(w * k2 * e)),
        float(np.sum(w * k2 * k2 * e)),
    )


class _TrajDrive:
    """Per-step scatter of compact trajectory samples into full arrays."""

    def __init__(self, v: Trajectory):
        d = v.domain
        self.v = v
        self.sel = v.sel
        self.buf_start = (d.zeros(), d.zeros())
        self.buf_stage = (d.zeros(), d.zeros())
        self.drive = StepDrive()

    def set_index(self, i: int):
        v = self.v
        self.buf_start[0].ravel()[self.sel] = v.u1[i]
        self.buf_start[1].ravel()[self.sel] = v.u2[i]
        if v.stage1 is not None:
            self.buf_stage[0].ravel()[self.sel] = v.stage1[i]
            self.buf_stage[1].ravel()[self.sel] = v.stage2[i]
        else:
            self.buf_stage[0].ravel()[self.sel] = v.u1[i + 1]
            self.buf_stage[1].ravel()[self.sel] = v.u2[i + 1]
        self.drive.set_step(
            v.t0 + i * v.dt, v.t0 + (i + 1) * v.dt, self.buf_start, self.buf_stage
        )

    def __call__(self, t):
        return self.drive(t)


def _integrate_driven(
    v: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    i_start: int,
    scheme: str,
    record_scalars: bool,
    keep_fields_every: int | None,
    fields_from: int = 0,
):
    """Drive the auxiliary system by v from rest starting at sample i_start.

    Fields are only retained from (absolute) sample index ``fields_from``
    on, every ``keep_fields_every`` samples.
    """
    from .solver import arrays_to_state

    d = v.domain
    drive = _TrajDrive(v)
    integ = NudgedIntegrator(p, v.dt, np_, drive, scheme=scheme)
    c1 = d.zeros()
    c2 = d.zeros()
    cth = d.zeros()
    n = v.n_samples
    m = n - i_start
    ih1 = np.empty((m, v.sel.size), np.complex128)
    ih2 = np.empty((m, v.sel.size), np.complex128)
    sel = v.sel
    scal = np.empty((m, 5)) if record_scalars else None
    fields: list = []

    def record(j, t):
        ih1[j] = c1.ravel()[sel]
        ih2[j] = c2.ravel()[sel]
        if record_scalars:
            s0, s1, s2 = _norms_of_arrays(c1, c2, d)
            e0, e1, e2 = _scalar_norms(cth, d)
            meas = d.measure
            scal[j] = (
                np.sqrt(s0 + meas * s1),  # ||w||_V0
                meas * s2,  # |A0 w|^2
                np.sqrt(meas * e1),  # ||eta||_V1
                meas * e2,  # |A1 eta|^2
                np.sqrt(meas * e0),  # |eta|
            )
        jj = i_start + j
        if keep_fields_every and jj >= fields_from and (jj - fields_from) % keep_fields_every == 0:
            st = arrays_to_state(c1, c2, cth, d, t)
            fields.append((t, st.u, st.theta))

    record(0, v.t0 + i_start * v.dt)
    for i in range(i_start, n - 1):
        drive.set_index(i)
        integ.step_inplace(v.t0 + i * v.dt, c1, c2, cth)
        record(i - i_start + 1, v.t0 + (i + 1) * v.dt)
    return ih1, ih2, scal, fields


def W_map(
    v: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    keep_fields_every: int | None = None,
    check_stationarity: bool = True,
    scheme: str = "auto",
) -> WMapResult:
    """Lift a trajectory to the bounded auxiliary solution it determines.

    Integrates the nudged system from rest over v's span, discards the
    spin-up transient, and (optionally) verifies that a re-spin from a
    shifted start reproduces the tail to the configured tolerance,
    growing the discard inside the available span if necessary.
    """
    if v.interp != np_.interp:
        raise ValueError("trajectory and nudge parameters use different operators")
    lam1 = eig_lambda1(p.domain)
    if spin.tau_spin < 5.0 / (p.kappa * lam1):
        raise ValueError("tau_spin below 5 thermal relaxation times")
    T_window = 1.0 / (p.nu * lam1)
    if v.span < spin.tau_spin + T_window:
        raise SpanTooShortError(
            f"span {v.span:.3g} < tau_spin + window = {spin.tau_spin + T_window:.3g}"
        )
    n = v.n_samples
    tau_idx_min = int(np.ceil(spin.tau_spin / v.dt - 1e-9))
    ih1, ih2, scal, fields = _integrate_driven(
        v, p, np_, 0, scheme, True, keep_fields_every, fields_from=tau_idx_min
    )
    stationarity = np.nan
    tau_idx = tau_idx_min
    if check_stationarity:
        offset = spin.check_offset if spin.check_offset is not None else spin.tau_spin / 2
        j0 = max(1, int(round(offset / v.dt)))
        ih1b, ih2b, _, _ = _integrate_driven(v, p, np_, j0, scheme, False, None)
        # diff on overlap: main sample j0+k vs check sample k
        d1 = ih1[j0:] - ih1b[: n - j0]
        d2 = ih2[j0:] - ih2b[: n - j0]
        wv = v.v0_weights()
        diff_v0 = np.sqrt((np.abs(d1) ** 2 + np.abs(d2) ** 2) @ wv)
        main_v0 = np.sqrt((np.abs(ih1) ** 2 + np.abs(ih2) ** 2) @ wv)
        scale = max(float(main_v0.max()), 1e-300)
        suffix = np.flip(np.maximum.accumulate(np.flip(diff_v0))) / scale
        # tails start at main index j0 + k  (k indexes the overlap)
        win_idx = int(round(T_window / v.dt))
        best = np.inf
        found = None
        for k in range(len(suffix)):
            main_i = j0 + k
            if main_i < tau_idx_min:
                continue
            if n - 1 - main_i < win_idx:
                break
            best = min(best, suffix[k])
            if suffix[k] <= spin.tolerance:
                found = main_i
                break
            if not spin.adaptive:
                break
        if found is None:
            raise TailNotConvergedError(
                f"tail changes by {best:.3e} rel (tolerance {spin.tolerance:.1e}); "
                "increase tau_spin or mu"
            )
        tau_idx = found
        stationarity = float(suffix[found - j0])
    tail = slice(tau_idx, n)
    tt = v.times()[tail]
    v_tail = v.restrict(tt[0])
    ih_traj = Trajectory(
        t0=float(tt[0]), dt=v.dt, u1=ih1[tail], u2=ih2[tail], sel=v.sel,
        domain=v.domain, interp=v.interp,
    )
    keep = [f for f in fields if f[0] >= tt[0] - 1e-12]
    w = WSeries(t=tt, ih=ih_traj, v0=scal[tail, 0], a0_sq=scal[tail, 1], fields=keep)
    eta = EtaSeries(
        t=tt, v1=scal[tail, 2], a1_sq=scal[tail, 3], l2=scal[tail, 4], fields=keep
    )
    return WMapResult(
        w=w, eta=eta, tau_used=tau_idx * v.dt, stationarity=stationarity, v_tail=v_tail
    )


# ---------------------------------------------------------------------------
# Descent field, scalar reduction, probing


@dataclass
class DetformRhs:
    q: float
    rhs: Trajectory
    v_tail: Trajectory
    ih_w: Trajectory


def detform_rhs(
    v: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    rho: float | None = None,
    **kw,
) -> DetformRhs:
    """Descent vector -q(v)^2 (v - Ih u*) with q = |v - Ih W(v)|_X.

    The reference steady state u* is the rest state, so Ih u* = 0."""
    if rho is not None and norm_X(v, p) > rho:
        warnings.warn(
            f"|v|_X = {norm_X(v, p):.3g} exceeds rho = {rho:.3g}", OutOfBallWarning
        )
    res = W_map(v, p, np_, spin, **kw)
    diff = res.v_tail.minus(res.w.ih)
    q = norm_X(diff, p)
    rhs = res.v_tail.scaled(-(q**2))
    return DetformRhs(q=q, rhs=rhs, v_tail=res.v_tail, ih_w=res.w.ih)


@dataclass(frozen=True)
class BetaState:
    s: float
    beta: float


class FCache:
    """Deterministic cache of f(beta) = |beta v0 - Ih W(beta v0)|_X^2.

    One entry per beta; concurrent writers may race benignly (values
    are deterministic)."""

    def __init__(self, v0: Trajectory, p, np_, spin, scheme: str = "auto"):
        self.v0 = v0
        self.p = p
        self.np_ = np_
        self.spin = spin
        self.scheme = scheme
        self.values: dict[float, float] = {}
        self._tau: float | None = None

    def f(self, beta: float) -> float:
        b = float(beta)
        if b in self.values:
            return self.values[b]
        if b == 0.0:
            traj = self.v0.zeros_like()
        else:
            traj = self.v0.scaled(b)
        # The stationarity search runs once; later evaluations reuse the
        # discard it certified.
        if self._tau is None:
            res = W_map(traj, self.p, self.np_, self.spin, scheme=self.scheme)
            self._tau = res.tau_used
        else:
            spin = replace(self.spin, tau_spin=max(self.spin.tau_spin, self._tau))
            res = W_map(
                traj, self.p, self.np_, spin, check_stationarity=False,
                scheme=self.scheme,
            )
        diff = res.v_tail.minus(res.w.ih)
        val = norm_X(diff, self.p) ** 2
        self.values[b] = val
        return val

    def evaluate_grid(self, betas) -> np.ndarray:
        betas = [float(b) for b in betas]
        missing = [b for b in betas if b not in self.values]
        workers = int(os.environ.get("RBDF_THREADS", "1") or "1")
        if missing and self._tau is None:
            self.f(missing.pop())  # prime the certified discard serially
        if workers > 1 and len(missing) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                list(ex.map(self.f, missing))
        else:
            for b in missing:
                self.f(b)
        return np.array([self.values[b] for b in betas])


def beta_f(
    beta: float,
    v0: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    cache: FCache | None = None,
) -> float:
    """One evaluation of the scalar descent speed f(beta)."""
    if not 0.0 <= beta <= 1.0 + 1e-12:
        raise ValueError("beta must lie in [0, 1]")
    if cache is None:
        cache = FCache(v0, p, np_, spin)
    return cache.f(beta)


def beta_evolve(
    v0: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    s_span: float,
    ode_dt: float,
    n_grid: int = 7,
    cache: FCache | None = None,
    require_converged: bool = False,
    conv_tol: float = 1e-8,
) -> list[BetaState]:
    """Integrate beta' = -beta f(beta), beta(0) = 1, by classical RK4.

    f is evaluated exactly on a beta grid (one auxiliary-system
    integration each) and interpolated monotonically in between; the
    s-step is subdivided so that max|f| * step <= 0.5.
    """
    if cache is None:
        cache = FCache(v0, p, np_, spin)
    grid = np.linspace(0.0, 1.0, n_grid)
    fvals = cache.evaluate_grid(grid)
    interp = PchipInterpolator(grid, fvals)

    def f_of(b):
        return max(float(interp(np.clip(b, 0.0, 1.0))), 0.0)

    fmax = float(fvals.max())
    n_sub = max(1, int(np.ceil(ode_dt * fmax / 0.5))) if fmax > 0 else 1
    h = ode_dt / n_sub
    out = [BetaState(0.0, 1.0)]
    s, b = 0.0, 1.0
    n_steps = int(round(s_span / ode_dt))
    for _ in range(n_steps):
        for _ in range(n_sub):
            k1 = -b * f_of(b)
            k2 = -(b + 0.5 * h * k1) * f_of(b + 0.5 * h * k1)
            k3 = -(b + 0.5 * h * k2) * f_of(b + 0.5 * h * k2)
            k4 = -(b + h * k3) * f_of(b + h * k3)
            b = b + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            b = min(max(b, 0.0), 1.0)
            s += h
        out.append(BetaState(s, b))
    if require_converged and b * f_of(b) > conv_tol:
        raise NoConvergenceError(
            f"beta rhs {b * f_of(b):.3e} above {conv_tol:.1e} at s = {s:.3g}"
        )
    return out


def find_zeros(
    v0: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    grid=None,
    zero_tol_rel: float = 1e-6,
    beta_tol: float = 1e-3,
    cache: FCache | None = None,
) -> list[float]:
    """Roots of f(beta) on (0, 1]: the ray's attractor trajectories.

    Coarse-grid minima that dip toward zero are refined by golden-
    section search; a root is accepted when f falls below
    ``zero_tol_rel * |v0|_X^2``.
    """
    if cache is None:
        cache = FCache(v0, p, np_, spin)
    if grid is None:
        grid = np.linspace(0.0, 1.0, 9)
    grid = np.asarray(grid, dtype=float)
    fvals = cache.evaluate_grid(grid)
    scale = max(norm_X(v0, p) ** 2, 1e-300)
    tol = zero_tol_rel * scale
    coarse = max(100.0 * tol, 1e-2 * float(fvals.max()))
    roots = []
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    for i in range(1, len(grid)):
        lo_i = max(0, i - 1)
        hi_i = min(len(grid) - 1, i + 1)
        is_min = fvals[i] <= fvals[lo_i] and (
            i == len(grid) - 1 or fvals[i] <= fvals[hi_i]
        )
        if not is_min or grid[i] <= 0.0 or fvals[i] > coarse:
            continue
        a, b = grid[lo_i], grid[hi_i]
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1, f2 = cache.f(x1), cache.f(x2)
        while b - a > beta_tol:
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = cache.f(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = cache.f(x2)
        best = 0.5 * (a + b)
        if cache.f(round(best, 12)) <= tol:
            if not roots or abs(roots[-1] - best) > 2 * beta_tol:
                roots.append(float(best))
    return roots


@dataclass
class LipschitzProbe:
    ratio_Y: float
    ratio_Z: float
    dX: float
    dY: float
    dZ: float


def lipschitz_probe(
    v1: Trajectory,
    v2: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    scheme: str = "auto",
) -> LipschitzProbe:
    """Measured |W(v1)-W(v2)|_Y / |v1-v2|_X (and the Z analogue).

    Rejects identical inputs (the ratio is 0/0)."""
    _check_compatible(v1, v2)
    dX = norm_X(v1.minus(v2), p)
    if dX == 0.0:
        raise ZeroDivisionError("identical trajectories")
    r1 = W_map(v1, p, np_, spin, keep_fields_every=1, scheme=scheme)
    r2 = W_map(v2, p, np_, spin, keep_fields_every=1, scheme=scheme)
    tau = max(r1.tau_used, r2.tau_used)
    f1 = [f for f in r1.w.fields if f[0] >= v1.t0 + tau - 1e-12]
    f2 = [f for f in r2.w.fields if f[0] >= v2.t0 + tau - 1e-12]
    n = min(len(f1), len(f2))
    d = v1.domain
    t = np.array([f1[i][0] for i in range(n)])
    phi_v0 = np.empty(n)
    phi_a0 = np.empty(n)
    psi_v1 = np.empty(n)
    psi_a1 = np.empty(n)
    for i in range(n):
        du1 = f1[i][1].u1.coeffs - f2[i][1].u1.coeffs
        du2 = f1[i][1].u2.coeffs - f2[i][1].u2.coeffs
        dth = f1[i][2].theta.coeffs - f2[i][2].theta.coeffs
        s0, s1, s2 = _norms_of_arrays(du1, du2, d)
        e0, e1, e2 = _scalar_norms(dth, d)
        phi_v0[i] = np.sqrt(s0 + d.measure * s1)
        phi_a0[i] = d.measure * s2
        psi_v1[i] = np.sqrt(d.measure * e1)
        psi_a1[i] = d.measure * e2
    lam1 = eig_lambda1(d)
    T = 1.0 / (p.nu * lam1)
    sup_a0, _ = sliding_window_sup(t, phi_a0, T)
    dY = float(phi_v0.max()) / (p.nu * np.sqrt(lam1)) + np.sqrt(sup_a0 / (p.nu * lam1))
    sup_a1, _ = sliding_window_sup(t, psi_a1, T)
    dZ = float(psi_v1.max()) + np.sqrt(p.nu * sup_a1)
    return LipschitzProbe(ratio_Y=dY / dX, ratio_Z=dZ / dX, dX=dX, dY=dY, dZ=dZ)


@dataclass
class RecoveredSolution:
    t: np.ndarray
    fields: list  # (t, VelocityField, ScalarField)
    q_rel: float


def recover_solution(
    v: Trajectory,
    p: PhysicalParams,
    np_: NudgeParams,
    spin: SpinUpConfig,
    steady_tol: float = 1e-4,
    keep_fields_every: int = 1,
) -> RecoveredSolution:
    """Full (velocity, temperature) trajectory behind a steady v.

    The input must satisfy the steady-state criterion
    |v - Ih W(v)|_X <= steady_tol * |v|_X; the returned pair is the
    lifted solution on the tail, temperature included even though only
    velocity was observed."""
    res = W_map(v, p, np_, spin, keep_fields_every=keep_fields_every)
    diff = res.v_tail.minus(res.w.ih)
    q_rel = norm_X(diff, p) / max(norm_X(v, p), 1e-300)
    if q_rel > steady_tol:
        raise NotSteadyError(f"relative defect {q_rel:.3e} > {steady_tol:.1e}")
    return RecoveredSolution(t=res.w.t, fields=res.w.fields, q_rel=q_rel)
