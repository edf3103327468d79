"""Dealiased pseudo-spectral advection terms and trilinear forms.

The advection of a divergence-free field is evaluated in divergence form
``(u.grad)v = div(u (x) v)``: physical-space products of 2/3-truncated
fields, transformed back, then differentiated and truncated again.  With
the truncation radius floor((N-1)/3) the collocation quadrature of any
triple product is exact, so the orthogonality identities
``b0(u,v,v) = b1(u,theta,theta) = 0`` and (on this symmetric periodic
extension) ``b0(u,u,A0 u) = 0`` hold to roundoff.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .spectral import (
    DomainSpec,
    Parity,
    ScalarField,
    SpectralField,
    VelocityField,
    coeffs_from_grid,
    grid_from_coeffs,
    laplacian_apply_velocity,
)


def _dealiased_grid(coeffs: np.ndarray, domain: DomainSpec) -> np.ndarray:
    return grid_from_coeffs(coeffs * domain.dealias_mask, domain)


def _div_form(p1_grid: np.ndarray, p2_grid: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Spectral divergence of the physical-space pair, truncated."""
    ah = coeffs_from_grid(p1_grid, domain)
    bh = coeffs_from_grid(p2_grid, domain)
    out = domain.zeros()
    kernels.div_pair(ah, bh, domain.KX, domain.KY, domain.dealias_mask, out)
    return out


def B0_apply(u: VelocityField, v: VelocityField) -> tuple[SpectralField, SpectralField]:
    """Advection term (u.grad)v as a raw spectral pair (even, odd).

    Not Leray-projected; callers apply the projector where the equations
    demand it.
    """
    d = u.domain
    if v.domain != d:
        raise ValueError("fields on different domains")
    u1p = _dealiased_grid(u.u1.coeffs, d)
    u2p = _dealiased_grid(u.u2.coeffs, d)
    v1p = _dealiased_grid(v.u1.coeffs, d)
    v2p = _dealiased_grid(v.u2.coeffs, d)
    c1 = _div_form(u1p * v1p, u2p * v1p, d)
    c2 = _div_form(u1p * v2p, u2p * v2p, d)
    return (
        SpectralField(c1, Parity.EVEN_X2, d),
        SpectralField(c2, Parity.ODD_X2, d),
    )


def B1_apply(u: VelocityField, theta: ScalarField) -> ScalarField:
    """Scalar advection (u.grad)theta, dealiased and odd-projected."""
    d = u.domain
    if theta.domain != d:
        raise ValueError("fields on different domains")
    u1p = _dealiased_grid(u.u1.coeffs, d)
    u2p = _dealiased_grid(u.u2.coeffs, d)
    tp = _dealiased_grid(theta.theta.coeffs, d)
    c = _div_form(u1p * tp, u2p * tp, d)
    kernels.parity_project(c, Parity.ODD_X2.value)
    return ScalarField(SpectralField(c, Parity.ODD_X2, d))


def inner(f: np.ndarray, g: np.ndarray, domain: DomainSpec) -> float:
    """L2 inner product of two real fields given by half spectra."""
    w = domain.parseval_weights
    return float(domain.measure * np.sum(w * (f.real * g.real + f.imag * g.imag)))


def b0_form(u: VelocityField, v: VelocityField, w: VelocityField) -> float:
    """Trilinear form integral of (u.grad)v . w."""
    bv1, bv2 = B0_apply(u, v)
    d = u.domain
    return inner(bv1.coeffs, w.u1.coeffs * d.dealias_mask, d) + inner(
        bv2.coeffs, w.u2.coeffs * d.dealias_mask, d
    )


def b0_form_a0(u: VelocityField) -> float:
    """b0(u, u, A0 u) -- vanishes on this symmetric periodic extension."""
    return b0_form(u, u, laplacian_apply_velocity(u))


def b1_form(u: VelocityField, theta: ScalarField, phi: ScalarField) -> float:
    """Trilinear form integral of (u.grad)theta . phi."""
    bt = B1_apply(u, theta)
    d = u.domain
    return inner(bt.theta.coeffs, phi.theta.coeffs * d.dealias_mask, d)
