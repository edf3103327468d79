"""Fourier fields on the symmetry-extended periodic strip.

The physical channel ``(0, L) x (0, l)`` with stress-free walls is
represented on the doubled periodic domain ``(0, L) x (-l, l)`` with
mirror symmetries: ``u1`` and pressure even in ``x2``, ``u2`` and the
temperature fluctuation odd in ``x2``.  Everything downstream (solver,
interpolants, nudging, audit) builds on the types and operators here.

Conventions
-----------
A field is stored as half-spectrum rfft2 coefficients ``c[n, mi]`` of
shape ``(Ny, Nx//2 + 1)`` with the normalization ``f(x) = sum_k c_k
exp(i (k1*x1 + k2*(x2+l)))``, wavenumbers ``k1 = 2*pi*m/L`` and ``k2 =
pi*n/l`` (the x2 phase is referenced to the lower wall; all norms and
operators are phase-insensitive).  Inner products carry the domain
measure ``|Omega| = 2*l*L`` explicitly, so Parseval reads ``|f|_{L2}^2
= |Omega| * sum_k |c_k|^2`` (with weight 2 for the columns both
half-spectra represent).

All tolerances used by invariant checks across the package are fixed
here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as _fft

from . import kernels

# Single source of truth for roundoff tolerances (relative).
PARITY_TOL = 1e-13
DIV_TOL = 1e-12
ROUNDTRIP_TOL = 1e-13
PROJECTION_TOL = 1e-14


class Bc(enum.Enum):
    """Boundary-condition family the solver integrates."""

    STRESS_FREE = "stress-free"


class Parity(enum.Enum):
    """Symmetry class in the wall-normal direction ``x2``."""

    EVEN_X2 = 1
    ODD_X2 = -1


@dataclass(frozen=True)
class DomainSpec:
    """Extended periodic domain ``(0, L) x (-l, l)`` and its mode grid.

    Nx, Ny are the (even) numbers of collocation points in x1, x2; the
    usable band after the 2/3-rule truncation is ``|m| <= (Nx-1)//3``,
    ``|n| <= (Ny-1)//3``, which keeps triple products alias-free.
    """

    L: float
    l: float
    Nx: int
    Ny: int
    bc: Bc = Bc.STRESS_FREE

    def __post_init__(self):
        if self.L <= 0 or self.l <= 0:
            raise ValueError("domain lengths must be positive")
        if self.Nx < 4 or self.Ny < 4 or self.Nx % 2 or self.Ny % 2:
            raise ValueError("Nx, Ny must be even and >= 4")

    # -- geometry -----------------------------------------------------

    @property
    def Mx(self) -> int:
        return self.Nx // 2 + 1

    @property
    def measure(self) -> float:
        """Area |Omega| of the extended domain."""
        return 2.0 * self.l * self.L

    @cached_property
    def x1(self) -> np.ndarray:
        return np.arange(self.Nx) * (self.L / self.Nx)

    @cached_property
    def x2(self) -> np.ndarray:
        return -self.l + np.arange(self.Ny) * (2.0 * self.l / self.Ny)

    @cached_property
    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X1, X2) with x2 along axis 0, shape (Ny, Nx)."""
        X1, X2 = np.meshgrid(self.x1, self.x2)
        return X1, X2

    # -- spectral machinery -------------------------------------------

    @cached_property
    def m_modes(self) -> np.ndarray:
        """Integer x1 mode numbers of the half spectrum (>= 0)."""
        return np.arange(self.Mx)

    @cached_property
    def n_modes(self) -> np.ndarray:
        """Signed integer x2 mode numbers in FFT order."""
        return np.rint(np.fft.fftfreq(self.Ny) * self.Ny).astype(int)

    @cached_property
    def KX(self) -> np.ndarray:
        k1 = 2.0 * np.pi / self.L * self.m_modes
        return np.broadcast_to(k1[None, :], (self.Ny, self.Mx)).copy()

    @cached_property
    def KY(self) -> np.ndarray:
        k2 = np.pi / self.l * self.n_modes
        return np.broadcast_to(k2[:, None], (self.Ny, self.Mx)).copy()

    @cached_property
    def K2(self) -> np.ndarray:
        return self.KX**2 + self.KY**2

    @cached_property
    def inv_K2(self) -> np.ndarray:
        """1/|k|^2 with the zero mode mapped to 0 (mean left untouched)."""
        k2 = self.K2.copy()
        k2[0, 0] = 1.0
        inv = 1.0 / k2
        inv[0, 0] = 0.0
        return inv

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask; cutoff floor((N-1)/3) so that sums of three
        retained modes never wrap onto a retained mode."""
        kx_cut = (self.Nx - 1) // 3
        ky_cut = (self.Ny - 1) // 3
        mx = np.abs(self.m_modes) <= kx_cut
        ny = np.abs(self.n_modes) <= ky_cut
        return (ny[:, None] & mx[None, :]).astype(np.float64)

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Column weights accounting for the conjugate half spectrum."""
        w = np.full(self.Mx, 2.0)
        w[0] = 1.0
        if self.Nx % 2 == 0:
            w[-1] = 1.0
        return np.broadcast_to(w[None, :], (self.Ny, self.Mx)).copy()

    def zeros(self) -> np.ndarray:
        return np.zeros((self.Ny, self.Mx), dtype=np.complex128)


def eig_lambda1(domain: DomainSpec) -> float:
    """Smallest Laplacian eigenvalue over the odd-in-x2 mode family.

    Odd fields require |n| >= 1; the minimum of (2*pi*m/L)^2 + (pi*n/l)^2
    is attained at m=0, n=1, i.e. (pi/l)^2.
    """
    return (np.pi / domain.l) ** 2


# ---------------------------------------------------------------------------
# Fields


@dataclass(frozen=True)
class SpectralField:
    """Scalar field as half-spectrum coefficients plus an x2-parity tag."""

    coeffs: np.ndarray
    parity: Parity
    domain: DomainSpec

    def __post_init__(self):
        if self.coeffs.shape != (self.domain.Ny, self.domain.Mx):
            raise ValueError("coefficient array does not match domain")

    def copy(self) -> "SpectralField":
        return SpectralField(self.coeffs.copy(), self.parity, self.domain)


@dataclass(frozen=True)
class VelocityField:
    """Divergence-free pair (u1 even, u2 odd) with pinned mean."""

    u1: SpectralField
    u2: SpectralField

    def __post_init__(self):
        if self.u1.domain is not self.u2.domain and self.u1.domain != self.u2.domain:
            raise ValueError("velocity components on different domains")
        if self.u1.parity is not Parity.EVEN_X2 or self.u2.parity is not Parity.ODD_X2:
            raise ValueError("velocity parities must be (even, odd)")

    @property
    def domain(self) -> DomainSpec:
        return self.u1.domain


@dataclass(frozen=True)
class ScalarField:
    """Temperature fluctuation; odd in x2 (zero horizontal mean rows)."""

    theta: SpectralField

    def __post_init__(self):
        if self.theta.parity is not Parity.ODD_X2:
            raise ValueError("temperature must be odd in x2")

    @property
    def domain(self) -> DomainSpec:
        return self.theta.domain


# ---------------------------------------------------------------------------
# Transforms


def to_grid(f: SpectralField) -> np.ndarray:
    """Physical values on the (Ny, Nx) collocation grid."""
    d = f.domain
    return grid_from_coeffs(f.coeffs, d)


def grid_from_coeffs(coeffs: np.ndarray, domain: DomainSpec) -> np.ndarray:
    scale = domain.Nx * domain.Ny
    return _fft.irfft2(coeffs * scale, s=(domain.Ny, domain.Nx))


def coeffs_from_grid(values: np.ndarray, domain: DomainSpec) -> np.ndarray:
    scale = domain.Nx * domain.Ny
    return _fft.rfft2(values) / scale


def from_grid(values: np.ndarray, parity: Parity, domain: DomainSpec) -> SpectralField:
    """Transform grid values and project onto the requested parity class."""
    c = coeffs_from_grid(np.asarray(values, dtype=np.float64), domain)
    kernels.parity_project(c, parity.value)
    return SpectralField(c, parity, domain)


def full_spectrum(coeffs: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Expand half-spectrum coefficients to the full (Ny, Nx) spectrum.

    Intended for oracles and inspection, not the hot path.
    """
    Ny, Nx = domain.Ny, domain.Nx
    full = np.zeros((Ny, Nx), dtype=np.complex128)
    full[:, : domain.Mx] = coeffs
    for m in range(1, (Nx + 1) // 2):
        full[:, Nx - m] = np.conj(np.roll(coeffs[:, m][::-1], 1))
    if Nx % 2 == 0:
        # Nyquist column is self-conjugate; leave as stored.
        pass
    return full


# ---------------------------------------------------------------------------
# Projections


def symmetry_project(f: SpectralField) -> SpectralField:
    """Project onto the field's parity class (idempotent, norm-reducing)."""
    c = f.coeffs.copy()
    kernels.parity_project(c, f.parity.value)
    return SpectralField(c, f.parity, f.domain)


def parity_residual(f: SpectralField) -> float:
    """Relative L2 distance from the field's parity subspace."""
    p = symmetry_project(f)
    num = norm_l2_coeffs(f.coeffs - p.coeffs, f.domain)
    den = norm_l2_coeffs(f.coeffs, f.domain)
    return num / den if den > 0 else 0.0


def leray_project(u1: SpectralField, u2: SpectralField, mean: float | None = None) -> VelocityField:
    """Remove the gradient part per mode; the zero mode passes through.

    When ``mean`` is given, the zero mode is pinned so the integral of u1
    equals it (u2 has zero mean by oddness).
    """
    d = u1.domain
    c1, c2 = u1.coeffs.copy(), u2.coeffs.copy()
    kernels.leray(c1, c2, d.KX, d.KY, d.inv_K2)
    if mean is not None:
        c1[0, 0] = mean / d.measure
        c2[0, 0] = 0.0
    return VelocityField(
        SpectralField(c1, Parity.EVEN_X2, d), SpectralField(c2, Parity.ODD_X2, d)
    )


def project_velocity(
    c1: np.ndarray,
    c2: np.ndarray,
    domain: DomainSpec,
    mean: float | None = 0.0,
    dealias: bool = True,
) -> None:
    """In-place full state projection: parity, Leray, dealias, mean pin.

    ``mean=None`` keeps the stored u1 average instead of pinning it.
    """
    kernels.parity_project(c1, Parity.EVEN_X2.value)
    kernels.parity_project(c2, Parity.ODD_X2.value)
    kernels.leray(c1, c2, domain.KX, domain.KY, domain.inv_K2)
    if dealias:
        c1 *= domain.dealias_mask
        c2 *= domain.dealias_mask
    if mean is not None:
        c1[0, 0] = mean / domain.measure
    else:
        c1[0, 0] = c1[0, 0].real
    c2[0, 0] = 0.0


def project_scalar(c: np.ndarray, domain: DomainSpec, dealias: bool = True) -> None:
    """In-place temperature projection: odd parity plus dealias."""
    kernels.parity_project(c, Parity.ODD_X2.value)
    if dealias:
        c *= domain.dealias_mask


def divergence_residual(u: VelocityField) -> float:
    """max_k |k.u_k| relative to the field's L2 size."""
    d = u.domain
    div = 1j * (d.KX * u.u1.coeffs + d.KY * u.u2.coeffs)
    num = float(np.max(np.abs(div)))
    den = norm_l2(u) / np.sqrt(d.measure) + 1e-300
    return num / den


# ---------------------------------------------------------------------------
# Differential operators and norms


def laplacian_apply(f: SpectralField) -> SpectralField:
    """Apply A = -Laplacian (coefficient multiply by |k|^2)."""
    return SpectralField(f.coeffs * f.domain.K2, f.parity, f.domain)


def laplacian_apply_velocity(u: VelocityField) -> VelocityField:
    return VelocityField(laplacian_apply(u.u1), laplacian_apply(u.u2))


def _sum_weighted(domain: DomainSpec, power: int, *coeff_arrays: np.ndarray) -> float:
    w = domain.parseval_weights
    if power:
        w = w * domain.K2**power
    return float(sum(np.sum(w * (c.real**2 + c.imag**2)) for c in coeff_arrays))


def norm_l2_coeffs(coeffs: np.ndarray, domain: DomainSpec) -> float:
    return float(np.sqrt(domain.measure * _sum_weighted(domain, 0, coeffs)))


def norm_l2(f) -> float:
    """|f| -- L2 norm, Parseval-exact."""
    if isinstance(f, VelocityField):
        d = f.domain
        return float(np.sqrt(d.measure * _sum_weighted(d, 0, f.u1.coeffs, f.u2.coeffs)))
    if isinstance(f, ScalarField):
        f = f.theta
    return norm_l2_coeffs(f.coeffs, f.domain)


def norm_h1(f) -> float:
    """||f|| -- gradient L2 seminorm."""
    if isinstance(f, VelocityField):
        d = f.domain
        return float(np.sqrt(d.measure * _sum_weighted(d, 1, f.u1.coeffs, f.u2.coeffs)))
    if isinstance(f, ScalarField):
        f = f.theta
    return float(np.sqrt(f.domain.measure * _sum_weighted(f.domain, 1, f.coeffs)))


def norm_v0(u: VelocityField) -> float:
    """Velocity norm (|u|^2/|Omega| + ||u||^2)^(1/2)."""
    return float(np.sqrt(norm_l2(u) ** 2 / u.domain.measure + norm_h1(u) ** 2))


def norm_v1(f) -> float:
    """Temperature norm; equals the gradient seminorm."""
    return norm_h1(f)


def norm_a0(u: VelocityField) -> float:
    """|A0 u| = (|Omega| * sum |k|^4 |u_k|^2)^(1/2); velocity only."""
    if not isinstance(u, VelocityField):
        raise TypeError("norm_a0 expects a VelocityField")
    d = u.domain
    return float(np.sqrt(d.measure * _sum_weighted(d, 2, u.u1.coeffs, u.u2.coeffs)))


def norm_a1(f) -> float:
    """|A1 theta| for scalar fields (same multiplier as norm_a0)."""
    if isinstance(f, ScalarField):
        f = f.theta
    return float(np.sqrt(f.domain.measure * _sum_weighted(f.domain, 2, f.coeffs)))


def norm_h1_full(f) -> float:
    """(|f|^2/|Omega| + ||f||^2)^(1/2); coincides with norm_v0 on velocity."""
    if isinstance(f, VelocityField):
        return norm_v0(f)
    return float(np.sqrt(norm_l2(f) ** 2 / _dom(f).measure + norm_h1(f) ** 2))


def norm_h2_equiv(f) -> float:
    """|f|/|Omega| + |A f|: the H2-equivalent combination used throughout."""
    if isinstance(f, VelocityField):
        return norm_l2(f) / f.domain.measure + norm_a0(f)
    return norm_l2(f) / _dom(f).measure + norm_a1(f)


def _dom(f) -> DomainSpec:
    if isinstance(f, (VelocityField, ScalarField)):
        return f.domain
    return f.domain


def mean_velocity(u: VelocityField) -> float:
    """Integral of u1 over the domain (the conserved average)."""
    return float(u.u1.coeffs[0, 0].real * u.domain.measure)


# ---------------------------------------------------------------------------
# Random fields (seeded, reproducible)


def _random_coeffs(domain: DomainSpec, rng: np.random.Generator, kcut_modes: float) -> np.ndarray:
    """Isotropic spectrum supported on integer mode radius <= kcut_modes."""
    mm = np.abs(domain.m_modes)[None, :]
    nn = np.abs(domain.n_modes)[:, None]
    support = (np.hypot(mm, nn) <= kcut_modes) & ((mm > 0) | (nn > 0))
    c = domain.zeros()
    amp = rng.standard_normal(c.shape) + 1j * rng.standard_normal(c.shape)
    c[support] = amp[support]
    c *= domain.dealias_mask
    return c


def random_velocity(
    domain: DomainSpec,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    kcut_modes: float | None = None,
) -> VelocityField:
    """Random smooth divergence-free field, normalized so norm_v0 = amplitude."""
    if kcut_modes is None:
        kcut_modes = domain.Nx / 6
    c1 = _random_coeffs(domain, rng, kcut_modes)
    c2 = _random_coeffs(domain, rng, kcut_modes)
    project_velocity(c1, c2, domain, mean=0.0)
    u = VelocityField(
        SpectralField(c1, Parity.EVEN_X2, domain),
        SpectralField(c2, Parity.ODD_X2, domain),
    )
    nv = norm_v0(u)
    if nv > 0 and amplitude > 0:
        c1 *= amplitude / nv
        c2 *= amplitude / nv
    return u


def random_scalar(
    domain: DomainSpec,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    kcut_modes: float | None = None,
) -> ScalarField:
    """Random smooth odd scalar, normalized so |theta| = amplitude."""
    if kcut_modes is None:
        kcut_modes = domain.Nx / 6
    c = _random_coeffs(domain, rng, kcut_modes)
    project_scalar(c, domain)
    f = SpectralField(c, Parity.ODD_X2, domain)
    nl = norm_l2(f)
    if nl > 0 and amplitude > 0:
        c *= amplitude / nl
    return ScalarField(f)


def zero_velocity(domain: DomainSpec) -> VelocityField:
    return VelocityField(
        SpectralField(domain.zeros(), Parity.EVEN_X2, domain),
        SpectralField(domain.zeros(), Parity.ODD_X2, domain),
    )


def zero_scalar(domain: DomainSpec) -> ScalarField:
    return ScalarField(SpectralField(domain.zeros(), Parity.ODD_X2, domain))
