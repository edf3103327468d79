"""Velocity-nudged auxiliary system and the synchronization experiment.

The auxiliary system copies the full dynamics but relaxes the coarse
observables of its velocity toward driving data v(t):

    dw/dt   + nu*A0 w + B0(w,w) = P_sigma(g*eta*e2) - mu*nu*lam1*(Ih w - v)
    deta/dt + kappa*A1 eta + B1(w,eta) = w2/l

Only the momentum equation is forced; the temperature equation is the
untouched original evaluated at (w, eta).  When the observation operator
is a spectral low-pass, the -mu*nu*lam1*Ih w part is diagonal and is
folded into the integrating factor, which removes the mu-induced step
restriction; other operators are integrated explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .interpolants import (
    FourierLowpass,
    ModifiedInterpolant,
    apply_modified,
    apply_modified_arrays,
    pr_mask,
)
from .solver import (
    Integrator,
    PhysicalParams,
    RBState,
    StepperConfig,
    arrays_to_state,
    state_arrays,
)
from .spectral import (
    Parity,
    ScalarField,
    SpectralField,
    VelocityField,
    eig_lambda1,
    norm_h1,
    norm_l2,
    norm_v0,
)


@dataclass(frozen=True)
class NudgeParams:
    mu: float
    interp: ModifiedInterpolant

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")


@dataclass
class SyncReport:
    """Error history of a nudged run against its reference."""

    t: np.ndarray
    err_v0: np.ndarray
    err_l2_theta: np.ndarray
    err_h1_theta: np.ndarray
    rate: float
    rate_window: tuple[float, float]
    mu: float
    h: float

    @property
    def combined(self) -> np.ndarray:
        return self.err_v0 + self.err_l2_theta

    @property
    def final_err_v0(self) -> float:
        return float(self.err_v0[-1])

    @property
    def final_err_l2_theta(self) -> float:
        return float(self.err_l2_theta[-1])


def aux_rhs(
    w: VelocityField,
    eta: ScalarField,
    v: VelocityField,
    p: PhysicalParams,
    np_: NudgeParams,
) -> tuple[VelocityField, ScalarField]:
    """Full auxiliary right-hand side with the driving value v at the
    current time.  The temperature part is identical to the plain system
    evaluated at (w, eta)."""
    from .solver import rb_rhs

    dw, deta = rb_rhs(RBState(w, eta, 0.0), p)
    lam1 = eig_lambda1(p.domain)
    ih = apply_modified(np_.interp, w)
    coef = np_.mu * p.nu * lam1
    c1 = dw.u1.coeffs - coef * (ih.u1.coeffs - v.u1.coeffs)
    c2 = dw.u2.coeffs - coef * (ih.u2.coeffs - v.u2.coeffs)
    d = p.domain
    return (
        VelocityField(
            SpectralField(c1, Parity.EVEN_X2, d), SpectralField(c2, Parity.ODD_X2, d)
        ),
        deta,
    )


class NudgedIntegrator(Integrator):
    """Integrator of the auxiliary system driven by ``drive(t)``.

    ``drive(t)`` returns the spectral pair (v1, v2) of the driving data,
    supported on the observation band.

    Schemes: ``explicit`` evaluates the whole feedback explicitly (the
    nudged system then shares the reference's exponential factors, so a
    perfectly synchronized twin is an exact fixed point of the discrete
    map); ``folded`` moves the diagonal -mu*nu*lam1*Ih w part into the
    integrating factor, which is unconditionally stable in mu but biases
    the feedback balance at O((mu*nu*lam1*dt)^2).  ``auto`` picks
    explicit while mu*nu*lam1*dt <= 0.5.
    """

    def __init__(self, p: PhysicalParams, dt: float, np_: NudgeParams, drive,
                 scheme: str = "auto"):
        self.np_ = np_
        self.drive = drive
        lam1 = eig_lambda1(p.domain)
        self.feedback_coef = np_.mu * p.nu * lam1
        d = p.domain
        lowpass = isinstance(np_.interp.base, FourierLowpass)
        if scheme == "auto":
            scheme = "explicit" if self.feedback_coef * dt <= 0.5 else "folded"
        if scheme == "folded" and not lowpass:
            raise ValueError("folded scheme requires a spectral low-pass base")
        self.scheme = scheme
        if lowpass:
            self._obs_mask = pr_mask(d, np_.interp.h).astype(np.float64)
        if scheme == "folded":
            extra = self.feedback_coef * self._obs_mask
            super().__init__(p, dt, extra_decay_u=extra, forcing=self._force_folded)
        elif lowpass:
            super().__init__(p, dt, forcing=self._force_lowpass)
        else:
            self._ih1 = np.empty((d.Ny, d.Mx), np.complex128)
            self._ih2 = np.empty((d.Ny, d.Mx), np.complex128)
            super().__init__(p, dt, forcing=self._force_general)

    def _force_folded(self, t, c1, c2, cth, r1, r2, rth):
        v1, v2 = self.drive(t)
        kernels.add_scaled(r1, v1, self.feedback_coef)
        kernels.add_scaled(r2, v2, self.feedback_coef)

    def _force_lowpass(self, t, c1, c2, cth, r1, r2, rth):
        v1, v2 = self.drive(t)
        kernels.nudge_feedback(r1, c1, v1, self._obs_mask, self.feedback_coef)
        kernels.nudge_feedback(r2, c2, v2, self._obs_mask, self.feedback_coef)

    def _force_general(self, t, c1, c2, cth, r1, r2, rth):
        v1, v2 = self.drive(t)
        apply_modified_arrays(self.np_.interp, c1, c2, self.d, self._ih1, self._ih2)
        self._ih1 -= v1
        self._ih2 -= v2
        kernels.add_scaled(r1, self._ih1, -self.feedback_coef)
        kernels.add_scaled(r2, self._ih2, -self.feedback_coef)


class StepDrive:
    """Driving data aligned to the integrator's stages.

    Each step supplies the observation at the step start and a second
    value for the predictor stage; queries before the step midpoint get
    the first, later ones the second (robust to roundoff in the query
    time).  Producing the stage value from the reference's own
    predictor keeps a synchronized twin exactly synchronized.
    """

    def __init__(self):
        self.t_mid = 0.0
        self.v_start = None
        self.v_stage = None

    def set_step(self, t0, t1, v_start, v_stage):
        self.t_mid = 0.5 * (t0 + t1)
        self.v_start = v_start
        self.v_stage = v_stage

    def __call__(self, t):
        return self.v_start if t < self.t_mid else self.v_stage


def fit_decay_rate(t: np.ndarray, err: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Least-squares log-linear rate over the post-transient window.

    The window drops the initial transient (error still above half its
    starting value) and the saturated tail (within 10x of the floor).
    """
    err = np.maximum(err, 1e-300)
    lo = 10.0 * float(err.min())
    hi = 0.5 * float(err[0])
    keep = (err > lo) & (err < hi)
    if keep.sum() < 5:
        keep = np.ones_like(err, dtype=bool)
    tt, ee = t[keep], np.log(err[keep])
    slope = float(np.polyfit(tt, ee, 1)[0])
    return slope, (float(tt[0]), float(tt[-1]))


def make_observer(interp: ModifiedInterpolant, domain):
    """Returns the coarse-observation map on raw coefficient pairs."""
    if isinstance(interp.base, FourierLowpass):
        mask = pr_mask(domain, interp.h).astype(np.float64)

        def observe(c1, c2):
            return mask * c1, mask * c2

    else:

        def observe(c1, c2):
            o1 = np.empty_like(c1)
            o2 = np.empty_like(c2)
            apply_modified_arrays(interp, c1, c2, domain, o1, o2)
            return o1, o2

    return observe


def synchronize_experiment(
    ref0: RBState,
    p: PhysicalParams,
    np_: NudgeParams,
    cfg: StepperConfig,
    t_span: float,
    diag_every: int = 10,
    scheme: str = "auto",
) -> SyncReport:
    """Run the reference and the nudged system in lockstep.

    The nudged system starts from (0,0) and is driven by the coarse
    observation of the reference velocity at every step, including the
    predictor stage.  Returns the error history and a fitted exponential
    decay rate.
    """
    d = p.domain
    r1, r2, rth = state_arrays(ref0)
    w1 = d.zeros()
    w2 = d.zeros()
    wth = d.zeros()
    ref_int = Integrator(p, cfg.dt)
    drive = StepDrive()
    aux_int = NudgedIntegrator(p, cfg.dt, np_, drive, scheme=scheme)
    observe = make_observer(np_.interp, d)

    stage_obs = [None]

    def capture_stage(t_stage, c1, c2, cth):
        stage_obs[0] = observe(c1, c2)

    ref_int.stage_hook = capture_stage

    rows = []

    def record(t):
        diff_u = VelocityField(
            SpectralField(w1 - r1, Parity.EVEN_X2, d),
            SpectralField(w2 - r2, Parity.ODD_X2, d),
        )
        diff_th = ScalarField(SpectralField(wth - rth, Parity.ODD_X2, d))
        rows.append((t, norm_v0(diff_u), norm_l2(diff_th), norm_h1(diff_th)))

    n_steps = int(round(t_span / cfg.dt))
    t = ref0.t
    record(t)
    for i in range(1, n_steps + 1):
        v_start = observe(r1, r2)
        t_next = ref_int.step_inplace(t, r1, r2, rth)
        drive.set_step(t, t_next, v_start, stage_obs[0])
        aux_int.step_inplace(t, w1, w2, wth)
        t = t_next
        if i % diag_every == 0 or i == n_steps:
            record(t)
    cols = np.array(rows)
    combined = cols[:, 1] + cols[:, 2]
    rate, window = fit_decay_rate(cols[:, 0], combined)
    return SyncReport(
        t=cols[:, 0],
        err_v0=cols[:, 1],
        err_l2_theta=cols[:, 2],
        err_h1_theta=cols[:, 3],
        rate=rate,
        rate_window=window,
        mu=np_.mu,
        h=np_.interp.h,
    )
