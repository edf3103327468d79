import numpy as np
import pytest

from rbdf.interpolants import FourierLowpass, ModifiedInterpolant, NodalBilinear
from rbdf.nudging import (
    NudgedIntegrator,
    NudgeParams,
    StepDrive,
    aux_rhs,
    fit_decay_rate,
    synchronize_experiment,
)
from rbdf.solver import PhysicalParams, RBState, StepperConfig, random_state, rb_rhs, simulate
from rbdf.spectral import (
    DomainSpec,
    Parity,
    SpectralField,
    VelocityField,
    eig_lambda1,
    from_grid,
    norm_l2,
    norm_v0,
    zero_scalar,
    zero_velocity,
)


@pytest.fixture()
def params(small_domain):
    return PhysicalParams(nu=1.0, kappa=1.0, g=50.0, domain=small_domain)


@pytest.fixture()
def nudge(small_domain):
    return NudgeParams(mu=50.0, interp=ModifiedInterpolant(FourierLowpass(h=1 / 3)))


@pytest.fixture(scope="module")
def small_attractor():
    d = DomainSpec(L=2 * np.pi, l=np.pi, Nx=32, Ny=64)
    p = PhysicalParams(nu=1.0, kappa=1.0, g=50.0, domain=d)
    s0 = random_state(p, 17, amplitude_u=1.0)
    res = simulate(s0, p, StepperConfig(dt=4e-3), t_end=10.0, sample_every=10**9, diag_every=10**9)
    return res.snapshots[-1], p


class TestAuxRhs:
    def test_feedback_vanishes_on_observed_data(self, params, nudge, small_domain):
        from rbdf.interpolants import apply_modified

        rng = np.random.default_rng(0)
        from rbdf.spectral import random_scalar, random_velocity

        w = random_velocity(small_domain, rng, 1.0)
        eta = random_scalar(small_domain, rng, 0.7)
        v = apply_modified(nudge.interp, w)
        dw, deta = aux_rhs(w, eta, v, params, nudge)
        dw0, deta0 = rb_rhs(RBState(w, eta, 0.0), params)
        assert np.max(np.abs(dw.u1.coeffs - dw0.u1.coeffs)) < 1e-12
        assert np.max(np.abs(dw.u2.coeffs - dw0.u2.coeffs)) < 1e-12
        # the temperature equation is the untouched original
        assert np.array_equal(deta.theta.coeffs, deta0.theta.coeffs)

    def test_zero_state_zero_drive(self, params, nudge, small_domain):
        w = zero_velocity(small_domain)
        eta = zero_scalar(small_domain)
        dw, deta = aux_rhs(w, eta, zero_velocity(small_domain), params, nudge)
        assert norm_l2(dw) == 0.0 and norm_l2(deta) == 0.0


class TestDiagonalDecay:
    """A shear mode in the observation band, zero drive, no nonlinearity:
    the momentum coefficient decays at exactly nu*|k|^2 + mu*nu*lam1."""

    def shear_state(self, d):
        X1, X2 = d.grid
        u1 = from_grid(np.cos(np.pi * X2 / d.l), Parity.EVEN_X2, d)
        return VelocityField(u1, SpectralField(d.zeros(), Parity.ODD_X2, d))

    @pytest.mark.parametrize("scheme,rtol", [("folded", 1e-13), ("explicit", 1e-3)])
    def test_decay_rate(self, params, nudge, small_domain, scheme, rtol):
        d = small_domain
        u = self.shear_state(d)
        c1 = u.u1.coeffs.copy()
        c2 = u.u2.coeffs.copy()
        cth = d.zeros()
        drive = StepDrive()
        zero = (d.zeros(), d.zeros())
        dt = 1e-3
        integ = NudgedIntegrator(params, dt, nudge, drive, scheme=scheme)
        drive.set_step(0.0, dt, zero, zero)
        before = c1[1, 0]
        integ.step_inplace(0.0, c1, c2, cth)
        lam1 = eig_lambda1(d)
        k2 = d.K2[1, 0]
        expected = np.exp(-(params.nu * k2 + nudge.mu * params.nu * lam1) * dt)
        got = (c1[1, 0] / before).real
        assert got == pytest.approx(expected, rel=rtol)

    def test_folded_requires_lowpass(self, params, small_domain):
        np_ = NudgeParams(mu=10.0, interp=ModifiedInterpolant(NodalBilinear(h=0.7)))
        with pytest.raises(ValueError):
            NudgedIntegrator(params, 1e-3, np_, StepDrive(), scheme="folded")

    def test_auto_folds_when_stiff(self, params, nudge, small_domain):
        stiff = NudgeParams(mu=1e4, interp=nudge.interp)
        integ = NudgedIntegrator(params, 1e-3, stiff, StepDrive(), scheme="auto")
        assert integ.scheme == "folded"
        integ2 = NudgedIntegrator(params, 1e-3, nudge, StepDrive(), scheme="auto")
        assert integ2.scheme == "explicit"


class TestSynchronization:
    def test_zero_reference_stays_zero(self, params, nudge, small_domain):
        ref0 = RBState(zero_velocity(small_domain), zero_scalar(small_domain), 0.0)
        rep = synchronize_experiment(ref0, params, nudge, StepperConfig(dt=2e-3), t_span=0.5)
        assert np.all(rep.err_v0 == 0.0)
        assert np.all(rep.err_l2_theta == 0.0)

    def test_synchronizes_and_respects_bounds(self, small_attractor, nudge):
        ref0, p = small_attractor
        rep = synchronize_experiment(ref0, p, nudge, StepperConfig(dt=2e-3), t_span=8.0, diag_every=20)
        # deep synchronization despite velocity-only forcing
        assert rep.combined[-1] < 1e-8 * rep.combined[0]
        assert rep.rate < 0
        # temperature synchronizes without receiving feedback
        assert rep.err_l2_theta[-1] < 1e-8 * rep.err_l2_theta[0]
        # Lyapunov functional decreasing after the transient
        lam1 = eig_lambda1(p.domain)
        eps2 = (p.nu * lam1) ** 2
        lyap = rep.err_v0**2 + eps2 * rep.err_l2_theta**2
        i0, i1 = np.searchsorted(rep.t, rep.rate_window)
        window = lyap[i0 : i1 + 1]
        assert np.all(np.diff(window) <= 1e-12 * window[:-1])

    def test_eta_bound_throughout(self, small_attractor, nudge):
        # run the nudged pair and track |eta| <= 2|Omega| on the aux side
        ref0, p = small_attractor
        d = p.domain
        rep = synchronize_experiment(ref0, p, nudge, StepperConfig(dt=2e-3), t_span=3.0, diag_every=20)
        # |eta| <= |eta - theta| + |theta|; theta obeys the same bound
        ref = simulate(ref0, p, StepperConfig(dt=2e-3), t_end=ref0.t + 3.0, sample_every=10**9, diag_every=20)
        eta_norm = rep.err_l2_theta + ref.series["norm_l2_theta"][: len(rep.err_l2_theta)]
        assert np.all(eta_norm <= 2 * d.measure)

    def test_mu_trend_not_worse(self, small_attractor):
        ref0, p = small_attractor
        interp = ModifiedInterpolant(FourierLowpass(h=1 / 3))
        finals = []
        for mu in (12.5, 25.0, 50.0):
            rep = synchronize_experiment(
                ref0, p, NudgeParams(mu=mu, interp=interp), StepperConfig(dt=2e-3),
                t_span=2.5, diag_every=50,
            )
            finals.append(rep.final_err_v0)
        assert finals[1] <= finals[0] * 1.05
        assert finals[2] <= finals[1] * 1.05


class TestRateFit:
    def test_pure_exponential(self):
        t = np.linspace(0, 10, 200)
        err = 3.0 * np.exp(-1.7 * t) + 1e-12
        rate, window = fit_decay_rate(t, err)
        assert rate == pytest.approx(-1.7, rel=1e-2)
        assert window[0] >= 0 and window[1] <= 10
