import numpy as np
import pytest

from rbdf.solver import (
    AttractorBounds,
    NonFiniteError,
    PhysicalParams,
    RBState,
    StepperConfig,
    canonical_from_grid,
    check_max_principle,
    estimate_attractor_bounds,
    random_state,
    rb_rhs,
    simulate,
    state_arrays,
    step,
)
from rbdf.spectral import (
    DomainSpec,
    Parity,
    ScalarField,
    SpectralField,
    VelocityField,
    from_grid,
    norm_h1,
    norm_l2,
    norm_v0,
    to_grid,
    zero_scalar,
    zero_velocity,
)


@pytest.fixture()
def params(small_domain):
    return PhysicalParams(nu=1.0, kappa=1.0, g=50.0, domain=small_domain)


def states_equal(a: RBState, b: RBState) -> bool:
    return (
        np.array_equal(a.u.u1.coeffs, b.u.u1.coeffs)
        and np.array_equal(a.u.u2.coeffs, b.u.u2.coeffs)
        and np.array_equal(a.theta.theta.coeffs, b.theta.theta.coeffs)
    )


class TestValidation:
    def test_params(self, small_domain):
        with pytest.raises(ValueError):
            PhysicalParams(nu=0.0, kappa=1.0, g=1.0, domain=small_domain)
        with pytest.raises(ValueError):
            PhysicalParams(nu=1.0, kappa=1.0, g=-1.0, domain=small_domain)
        with pytest.raises(ValueError):
            StepperConfig(dt=0.0)


class TestRhs:
    def test_rest_state(self, params):
        s = random_state(params, 0, amplitude_u=0.0)
        du, dth = rb_rhs(s, params)
        assert norm_l2(du) == 0.0 and norm_l2(dth) == 0.0

    def test_buoyancy_and_diffusion_single_mode(self, params, small_domain):
        # u = 0, theta a single odd mode: du = P(g theta e2), dtheta = -kappa A1 theta
        d = small_domain
        c = d.zeros()
        c[2, 1] = 0.3 + 0.1j
        from rbdf.spectral import project_scalar

        project_scalar(c, d)
        th = ScalarField(SpectralField(c, Parity.ODD_X2, d))
        s = RBState(zero_velocity(d), th, 0.0)
        du, dth = rb_rhs(s, params)
        g2 = params.g * c
        dd = (d.KY * g2) * d.inv_K2
        o1 = -d.KX * dd
        o2 = g2 - d.KY * dd
        assert np.max(np.abs(du.u1.coeffs - o1)) < 1e-14 * params.g
        assert np.max(np.abs(du.u2.coeffs - o2)) < 1e-14 * params.g
        assert np.max(np.abs(dth.theta.coeffs + params.kappa * d.K2 * c)) < 1e-14

    def test_shear_eigenfunction(self, params, small_domain):
        # u = (c cos(pi x2/l), 0): du = -nu (pi/l)^2 u, dtheta = u2/l = 0
        d = small_domain
        X1, X2 = d.grid
        u1 = from_grid(2.0 * np.cos(np.pi * X2 / d.l), Parity.EVEN_X2, d)
        u = VelocityField(u1, SpectralField(d.zeros(), Parity.ODD_X2, d))
        s = RBState(u, zero_scalar(d), 0.0)
        du, dth = rb_rhs(s, params)
        lam = (np.pi / d.l) ** 2
        err = np.max(np.abs(du.u1.coeffs + params.nu * lam * u1.coeffs))
        assert err < 1e-12
        assert norm_l2(dth) < 1e-13


class TestStep:
    def test_rest_state_fixed_point(self, params):
        s0 = random_state(params, 0, amplitude_u=0.0)
        s1 = step(s0, params, StepperConfig(dt=1e-2))
        assert norm_l2(s1.u) == 0.0 and norm_l2(s1.theta) == 0.0

    def test_pure_diffusion_exact(self, small_domain):
        d = small_domain
        p = PhysicalParams(nu=1.0, kappa=0.7, g=0.0, domain=d)
        c = d.zeros()
        c[1, 0] = -0.5j
        c[d.Ny - 1, 0] = 0.5j
        th = ScalarField(SpectralField(c, Parity.ODD_X2, d))
        s = RBState(zero_velocity(d), th, 0.0)
        dt = 0.01
        s1 = step(s, p, StepperConfig(dt=dt))
        expected = -0.5j * np.exp(-p.kappa * d.K2[1, 0] * dt)
        assert abs(s1.theta.theta.coeffs[1, 0] - expected) < 1e-12

    def test_mean_conserved(self, params):
        s0 = random_state(params, 5, amplitude_u=1.0)
        res = simulate(s0, params, StepperConfig(dt=2e-3), t_end=4.0, sample_every=2000, diag_every=100)
        assert np.max(np.abs(res.series["mean_u"])) <= 1e-10

    def test_blow_up_raises(self, params):
        # overflow in the quadratic terms propagates to non-finite
        # coefficients, which the stepper reports with the failure time
        s0 = random_state(params, 5, amplitude_u=1e160)
        with pytest.raises(NonFiniteError) as ei:
            simulate(s0, params, StepperConfig(dt=0.1), t_end=2.0, sample_every=10)
        assert ei.value.t > 0


class TestAccuracy:
    def test_energy_balance_unforced(self, small_domain):
        # g = 0, theta = 0: d|u|^2/dt = -2 nu ||u||^2 within 1%
        d = small_domain
        p = PhysicalParams(nu=0.5, kappa=1.0, g=0.0, domain=d)
        s0 = random_state(p, 3, amplitude_u=1.0)
        dt = 1e-3
        res = simulate(s0, p, StepperConfig(dt=dt), t_end=0.2, sample_every=10**9, diag_every=10)
        t = res.series["t"]
        e = res.series["norm_l2_u"] ** 2
        h1 = res.series["norm_v0_u"] ** 2 - e / d.measure  # ||u||^2
        de = np.gradient(e, t)
        mid = slice(2, -2)
        rel = np.abs(de[mid] + 2 * p.nu * h1[mid]) / np.abs(de[mid])
        assert np.max(rel) < 0.01

    def test_second_order_in_dt(self, small_domain):
        d = small_domain
        p = PhysicalParams(nu=1.0, kappa=1.0, g=50.0, domain=d)
        s0 = random_state(p, 9, amplitude_u=1.0)

        def final(dt):
            res = simulate(s0, p, StepperConfig(dt=dt), t_end=0.5, sample_every=10**9,
                           diag_every=10**9, restartable=False)
            return res.snapshots[-1]

        ref = final(0.5e-3 / 2)
        errs = []
        for dt in (4e-3, 2e-3):
            s = final(dt)
            diff = VelocityField(
                SpectralField(s.u.u1.coeffs - ref.u.u1.coeffs, Parity.EVEN_X2, d),
                SpectralField(s.u.u2.coeffs - ref.u.u2.coeffs, Parity.ODD_X2, d),
            )
            errs.append(norm_v0(diff))
        assert errs[0] / errs[1] >= 3.5


class TestStability:
    @staticmethod
    def linear_growth_rate(p: PhysicalParams) -> float:
        """Independent oracle: max over modes of the largest eigenvalue
        of the linearized (velocity, temperature) pair around rest."""
        d = p.domain
        lam_max = -np.inf
        for m in range(0, 6):
            for n in range(1, 6):
                k1 = 2 * np.pi * m / d.L
                k2 = np.pi * n / d.l
                k2n = k1**2 + k2**2
                coupling = p.g * (k1**2 / k2n)
                A = np.array([[-p.nu * k2n, coupling], [1.0 / d.l, -p.kappa * k2n]])
                lam_max = max(lam_max, float(np.linalg.eigvals(A).real.max()))
        return lam_max

    def test_subcritical_decay(self, small_domain):
        p = PhysicalParams(nu=1.0, kappa=1.0, g=20.0, domain=small_domain)
        assert self.linear_growth_rate(p) < 0  # oracle: below onset
        s0 = random_state(p, 4, amplitude_u=0.5, amplitude_theta=0.1)
        res = simulate(s0, p, StepperConfig(dt=2e-3), t_end=6.0, sample_every=10**9, diag_every=200)
        tail = res.series["norm_v0_u"][-8:]
        assert np.all(np.diff(tail) < 0)
        assert res.series["norm_v0_u"][-1] < 0.1 * res.series["norm_v0_u"][0]

    def test_supercritical_grows(self, small_domain):
        p = PhysicalParams(nu=1.0, kappa=1.0, g=100.0, domain=small_domain)
        assert self.linear_growth_rate(p) > 0

    def test_theta_decays_at_kappa_lam1_when_unforced(self, small_domain):
        d = small_domain
        p = PhysicalParams(nu=1.0, kappa=1.0, g=0.0, domain=d)
        s0 = random_state(p, 6, amplitude_u=1e-8, amplitude_theta=1.0)
        res = simulate(s0, p, StepperConfig(dt=2e-3), t_end=3.0, sample_every=10**9, diag_every=100)
        t = res.series["t"]
        th = res.series["norm_l2_theta"]
        rate = np.polyfit(t[3:], np.log(th[3:]), 1)[0]
        assert rate <= -p.kappa * 1.0 * 0.99  # lam1 = 1 on this domain


class TestRestart:
    def test_bitwise_restart_every_snapshot(self, params):
        s0 = random_state(params, 7, amplitude_u=1.0)
        cfg = StepperConfig(dt=2e-3)
        r1 = simulate(s0, params, cfg, t_end=0.3, sample_every=50)
        for snap in r1.snapshots[:-1]:
            r2 = simulate(snap, params, cfg, t_end=0.3, sample_every=50)
            assert states_equal(r1.snapshots[-1], r2.snapshots[-1])

    def test_grid_payload_loader_equivalence(self, params):
        s0 = random_state(params, 8, amplitude_u=1.0)
        cfg = StepperConfig(dt=2e-3)
        r1 = simulate(s0, params, cfg, t_end=0.2, sample_every=50)
        snap = r1.snapshots[1]
        c = canonical_from_grid(*snap.grid_values, params.domain)
        for got, want in zip(c, state_arrays(snap)):
            assert np.array_equal(got, want)


class TestAttractorBounds:
    def test_decaying_regime_reports_early_supremum(self, small_domain):
        p = PhysicalParams(nu=1.0, kappa=1.0, g=0.0, domain=small_domain)
        b = estimate_attractor_bounds(p, StepperConfig(dt=2e-3), burn_in=0.0, horizon=2.0, seed=2)
        assert isinstance(b, AttractorBounds)
        assert b.t_J1 <= 0.5 and b.J1 > 0
        assert b.J2 > 0

    def test_validation(self, small_domain):
        p = PhysicalParams(nu=1.0, kappa=1.0, g=0.0, domain=small_domain)
        with pytest.raises(ValueError):
            estimate_attractor_bounds(p, StepperConfig(dt=1e-2), burn_in=2.0, horizon=1.0)


class TestMaxPrinciple:
    def test_background_profile_at_start(self, params):
        s0 = random_state(params, 1, amplitude_u=0.5, amplitude_theta=0.0)
        rep = check_max_principle([s0])
        assert rep.min_T >= -1e-12
        assert rep.max_T <= 1.0 + 1e-12
        assert rep.violations == 0
