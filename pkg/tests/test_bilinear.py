import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbdf import bilinear
from rbdf.spectral import (
    DomainSpec,
    Parity,
    ScalarField,
    SpectralField,
    VelocityField,
    full_spectrum,
    laplacian_apply_velocity,
    norm_a0,
    norm_h1,
    norm_l2,
    random_scalar,
    random_velocity,
    symmetry_project,
    to_grid,
)


@pytest.fixture()
def rng():
    return np.random.default_rng(77)


def direct_grids(field: SpectralField):
    """Independent evaluation of a field and its gradient on the grid by
    direct mode summation over the full spectrum."""
    d = field.domain
    full = full_spectrum(field.coeffs, d)
    X1, X2 = d.grid
    m = np.fft.fftfreq(d.Nx) * d.Nx
    n = np.fft.fftfreq(d.Ny) * d.Ny
    val = np.zeros((d.Ny, d.Nx), dtype=complex)
    gx = np.zeros_like(val)
    gy = np.zeros_like(val)
    for j in range(d.Ny):
        for i in range(d.Nx):
            c = full[j, i]
            if c == 0:
                continue
            k1 = 2 * np.pi * m[i] / d.L
            k2 = np.pi * n[j] / d.l
            phase = np.exp(1j * (k1 * X1 + k2 * (X2 + d.l)))
            val += c * phase
            gx += 1j * k1 * c * phase
            gy += 1j * k2 * c * phase
    return val.real, gx.real, gy.real


def quadrature(d: DomainSpec, values: np.ndarray) -> float:
    return float(np.mean(values)) * d.measure


class TestTrivial:
    def test_advection_of_constant_vanishes(self, small_domain, rng):
        d = small_domain
        u = random_velocity(d, rng, 1.0)
        c1 = d.zeros()
        c1[0, 0] = 2.0
        const = VelocityField(
            SpectralField(c1, Parity.EVEN_X2, d),
            SpectralField(d.zeros(), Parity.ODD_X2, d),
        )
        b1, b2 = bilinear.B0_apply(u, const)
        assert norm_l2(b1) < 1e-14 and norm_l2(b2) < 1e-14

    def test_zero_velocity(self, small_domain, rng):
        d = small_domain
        v = random_velocity(d, rng, 1.0)
        th = random_scalar(d, rng, 1.0)
        zero = VelocityField(
            SpectralField(d.zeros(), Parity.EVEN_X2, d),
            SpectralField(d.zeros(), Parity.ODD_X2, d),
        )
        b1, b2 = bilinear.B0_apply(zero, v)
        assert norm_l2(b1) == 0.0 and norm_l2(b2) == 0.0
        assert norm_l2(bilinear.B1_apply(zero, th)) == 0.0


class TestOrthogonality:
    def test_b0_uvv(self, desk_domain, rng):
        d = desk_domain
        for _ in range(5):
            u = random_velocity(d, rng, rng.uniform(0.5, 3.0))
            v = random_velocity(d, rng, rng.uniform(0.5, 3.0))
            val = bilinear.b0_form(u, v, v)
            assert abs(val) <= 1e-12 * norm_h1(u) * norm_l2(v) ** 2

    def test_b1_utt(self, desk_domain, rng):
        d = desk_domain
        for _ in range(5):
            u = random_velocity(d, rng, rng.uniform(0.5, 3.0))
            th = random_scalar(d, rng, rng.uniform(0.5, 3.0))
            val = bilinear.b1_form(u, th, th)
            assert abs(val) <= 1e-12 * norm_h1(u) * norm_l2(th) ** 2

    def test_b0_uu_a0u(self, desk_domain, rng):
        d = desk_domain
        for _ in range(5):
            u = random_velocity(d, rng, rng.uniform(0.5, 3.0))
            val = bilinear.b0_form_a0(u)
            assert abs(val) <= 1e-11 * norm_h1(u) ** 2 * norm_a0(u)

    def test_skew_symmetry(self, desk_domain, rng):
        d = desk_domain
        u = random_velocity(d, rng, 1.3)
        v = random_velocity(d, rng, 0.9)
        w = random_velocity(d, rng, 1.7)
        s = bilinear.b0_form(u, v, w) + bilinear.b0_form(u, w, v)
        assert abs(s) <= 1e-12 * norm_h1(u) * norm_l2(v) * norm_l2(w)


class TestBruteForceOracle:
    """Direct physical-grid quadrature on an 8x8 grid.

    Fields are supported on the truncation band, so products of three
    of them are exactly integrated by the collocation mean.
    """

    @pytest.fixture()
    def tiny(self):
        return DomainSpec(L=2 * np.pi, l=np.pi, Nx=8, Ny=8)

    def test_b0_against_quadrature(self, tiny, rng):
        d = tiny
        for _ in range(20):
            u = random_velocity(d, rng, rng.uniform(0.5, 2.0), kcut_modes=2)
            v = random_velocity(d, rng, rng.uniform(0.5, 2.0), kcut_modes=2)
            w = random_velocity(d, rng, rng.uniform(0.5, 2.0), kcut_modes=2)
            u1g, _, _ = direct_grids(u.u1)
            u2g, _, _ = direct_grids(u.u2)
            v1g, v1x, v1y = direct_grids(v.u1)
            v2g, v2x, v2y = direct_grids(v.u2)
            w1g, _, _ = direct_grids(w.u1)
            w2g, _, _ = direct_grids(w.u2)
            integrand = (u1g * v1x + u2g * v1y) * w1g + (u1g * v2x + u2g * v2y) * w2g
            expected = quadrature(d, integrand)
            got = bilinear.b0_form(u, v, w)
            scale = max(norm_h1(u) * norm_l2(v) * norm_l2(w), 1e-30)
            assert abs(got - expected) <= 1e-12 * scale

    def test_b1_against_quadrature(self, tiny, rng):
        d = tiny
        for _ in range(20):
            u = random_velocity(d, rng, rng.uniform(0.5, 2.0), kcut_modes=2)
            th = random_scalar(d, rng, rng.uniform(0.5, 2.0), kcut_modes=2)
            ph = random_scalar(d, rng, rng.uniform(0.5, 2.0), kcut_modes=2)
            u1g, _, _ = direct_grids(u.u1)
            u2g, _, _ = direct_grids(u.u2)
            _, tx, ty = direct_grids(th.theta)
            pg, _, _ = direct_grids(ph.theta)
            expected = quadrature(d, (u1g * tx + u2g * ty) * pg)
            got = bilinear.b1_form(u, th, ph)
            scale = max(norm_h1(u) * norm_l2(th) * norm_l2(ph), 1e-30)
            assert abs(got - expected) <= 1e-12 * scale

    def test_B0_pointwise_against_products(self, tiny, rng):
        # low-mode inputs keep the quadratic product inside the
        # truncation band, so the advection field matches pointwise
        d = tiny
        u = random_velocity(d, rng, 1.0, kcut_modes=1)
        v = random_velocity(d, rng, 1.0, kcut_modes=1)
        b1, b2 = bilinear.B0_apply(u, v)
        u1g, _, _ = direct_grids(u.u1)
        u2g, _, _ = direct_grids(u.u2)
        _, v1x, v1y = direct_grids(v.u1)
        _, v2x, v2y = direct_grids(v.u2)
        exp1 = u1g * v1x + u2g * v1y
        exp2 = u1g * v2x + u2g * v2y
        assert np.max(np.abs(to_grid(b1) - exp1)) < 1e-12
        assert np.max(np.abs(to_grid(b2) - exp2)) < 1e-12


class TestStructure:
    def test_parity_classes_of_products(self, small_domain, rng):
        d = small_domain
        u = random_velocity(d, rng, 1.0)
        th = random_scalar(d, rng, 1.0)
        b1, b2 = bilinear.B0_apply(u, u)
        for f in (b1, b2):
            p = symmetry_project(f)
            num = norm_l2(SpectralField(f.coeffs - p.coeffs, f.parity, d))
            assert num <= 1e-12 * max(norm_l2(f), 1e-30)
        bt = bilinear.B1_apply(u, th)
        p = symmetry_project(bt.theta)
        assert np.array_equal(p.coeffs, bt.theta.coeffs)  # already projected

    def test_bilinearity(self, small_domain, rng):
        d = small_domain
        u = random_velocity(d, rng, 1.0)
        v = random_velocity(d, rng, 1.0)
        w = random_velocity(d, rng, 1.0)
        a = 2.75
        scaled = VelocityField(
            SpectralField(a * u.u1.coeffs, Parity.EVEN_X2, d),
            SpectralField(a * u.u2.coeffs, Parity.ODD_X2, d),
        )
        lhs = bilinear.b0_form(scaled, v, w)
        rhs = a * bilinear.b0_form(u, v, w)
        assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_skew_symmetry_property(seed):
    d = DomainSpec(L=2 * np.pi, l=np.pi, Nx=16, Ny=16)
    rng = np.random.default_rng(seed)
    u = random_velocity(d, rng, rng.uniform(0.1, 4.0))
    v = random_velocity(d, rng, rng.uniform(0.1, 4.0))
    w = random_velocity(d, rng, rng.uniform(0.1, 4.0))
    s = bilinear.b0_form(u, v, w) + bilinear.b0_form(u, w, v)
    scale = max(norm_h1(u) * norm_l2(v) * norm_l2(w), 1e-30)
    assert abs(s) <= 1e-12 * scale
