"""Finite-rank observation operators and their spectral modification.

Three families of coarse-graining operators at length scale h:

* ``FourierLowpass`` -- orthogonal projection onto modes |k| <= 1/h;
* ``VolumeAverage``  -- averages over ~h-sized cells tiling the domain;
* ``NodalBilinear``  -- samples on an ~h-spaced node grid, rebuilt by
  periodic bilinear interpolation.

``ModifiedInterpolant`` composes any of them with the projection onto
the low Laplacian eigenmodes of the divergence-free symmetric class
(eigenvalue cutoff |k|^2 <= 1/h^2), so the composed operator lands in
the solver's state space: divergence-free, parity-clean, mean retained.

``fit_constants`` measures approximation-of-identity envelopes: the
smallest (c1, c2) with  |f - I_h f| <= c1*h*|f|_H1 + c2*h^2*|f|_H2
holding for every ensemble member (and the H1-level analogue).  The
operators' theory never fixes these numbers; the fitted envelopes are
the measured stand-ins the audit consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import nnls

from . import kernels
from .spectral import (
    DomainSpec,
    Parity,
    ScalarField,
    SpectralField,
    VelocityField,
    coeffs_from_grid,
    grid_from_coeffs,
    norm_a0,
    norm_h1_full,
    norm_h2_equiv,
    norm_l2,
    norm_v0,
    random_velocity,
)


class HTooSmallError(ValueError):
    """The length scale h is under the grid resolution."""


@dataclass(frozen=True)
class FourierLowpass:
    h: float
    type_tag: str = "I"


@dataclass(frozen=True)
class VolumeAverage:
    h: float
    type_tag: str = "II"


@dataclass(frozen=True)
class NodalBilinear:
    h: float
    type_tag: str = "II"


InterpolantKind = FourierLowpass | VolumeAverage | NodalBilinear


def _validate_h(kind: InterpolantKind, domain: DomainSpec) -> None:
    h = kind.h
    if not 0 < h < min(domain.L, domain.l):
        raise HTooSmallError(f"h={h} outside (0, min(L, l))")
    if isinstance(kind, (VolumeAverage, NodalBilinear)):
        # at least two grid points per cell along each axis
        if domain.L / h * 2 > domain.Nx or 2 * domain.l / h * 2 > domain.Ny:
            raise HTooSmallError(f"h={h} leaves fewer than 2 grid points per cell")
    else:
        kmax2 = float(np.max(domain.K2 * domain.dealias_mask))
        if 1.0 / h**2 > kmax2:
            raise HTooSmallError(f"h={h} cutoff exceeds the resolved band")


# ---------------------------------------------------------------------------
# Raw operators (act on grid values; linear, finite rank)


@lru_cache(maxsize=64)
def _cell_index(n_points: int, n_cells: int) -> np.ndarray:
    return (np.arange(n_points) * n_cells) // n_points


@lru_cache(maxsize=64)
def _bilinear_weights(n_points: int, n_cells: int, period: float) -> np.ndarray:
    """Dense (n_points, n_cells) matrix of periodic linear interpolation
    through nodes at grid indices floor(j*n_points/n_cells)."""
    node_idx = (np.arange(n_cells) * n_points) // n_cells
    x = np.arange(n_points) * (period / n_points)
    nodes = x[node_idx]
    W = np.zeros((n_points, n_cells))
    for j in range(n_cells):
        x_lo = nodes[j]
        x_hi = nodes[(j + 1) % n_cells] if j + 1 < n_cells else nodes[0] + period
        span = x_hi - x_lo
        t = (x - x_lo) / span
        in_cell = (t >= 0) & (t < 1) if n_cells > 1 else np.ones_like(t, dtype=bool)
        W[in_cell, j] += 1.0 - t[in_cell]
        W[in_cell, (j + 1) % n_cells] += t[in_cell]
    return W


def _n_cells(kind: InterpolantKind, domain: DomainSpec) -> tuple[int, int]:
    ncx = max(1, round(domain.L / kind.h))
    ncy = max(1, round(2.0 * domain.l / kind.h))
    return ncx, ncy


def apply_raw_grid(kind: InterpolantKind, values: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Apply the raw operator to physical grid values."""
    _validate_h(kind, domain)
    if isinstance(kind, FourierLowpass):
        c = coeffs_from_grid(values, domain)
        c *= (domain.K2 <= 1.0 / kind.h**2)
        return grid_from_coeffs(c, domain)
    ncx, ncy = _n_cells(kind, domain)
    if isinstance(kind, VolumeAverage):
        ix = _cell_index(domain.Nx, ncx)
        iy = _cell_index(domain.Ny, ncy)
        sums = np.zeros((ncy, ncx))
        counts = np.zeros((ncy, ncx))
        np.add.at(sums, (iy[:, None], ix[None, :]), values)
        np.add.at(counts, (iy[:, None], ix[None, :]), 1.0)
        means = sums / counts
        return means[iy[:, None], ix[None, :]]
    # NodalBilinear: sample at node grid points, rebuild separably.
    nx_idx = (np.arange(ncx) * domain.Nx) // ncx
    ny_idx = (np.arange(ncy) * domain.Ny) // ncy
    samples = values[np.ix_(ny_idx, nx_idx)]
    Wx = _bilinear_weights(domain.Nx, ncx, domain.L)
    Wy = _bilinear_weights(domain.Ny, ncy, 2.0 * domain.l)
    return Wy @ samples @ Wx.T


def apply_raw(kind: InterpolantKind, f):
    """Raw operator on a SpectralField / VelocityField / ScalarField.

    Velocity input yields a raw spectral pair; cell-based operators may
    leave it slightly non-solenoidal and off-parity, by design -- the
    modified operator restores all structure.
    """
    if isinstance(f, VelocityField):
        return _raw_velocity(kind, f)
    if isinstance(f, ScalarField):
        return ScalarField(apply_raw(kind, f.theta))
    d = f.domain
    out = apply_raw_grid(kind, grid_from_coeffs(f.coeffs, d), d)
    return SpectralField(coeffs_from_grid(out, d), f.parity, d)


def _raw_velocity(kind: InterpolantKind, u: VelocityField):
    """Componentwise raw operator; cell operators may leave the result
    slightly non-solenoidal and off-parity, by design."""
    d = u.domain
    g1 = apply_raw_grid(kind, grid_from_coeffs(u.u1.coeffs, d), d)
    g2 = apply_raw_grid(kind, grid_from_coeffs(u.u2.coeffs, d), d)
    return (
        SpectralField(coeffs_from_grid(g1, d), Parity.EVEN_X2, d),
        SpectralField(coeffs_from_grid(g2, d), Parity.ODD_X2, d),
    )


# ---------------------------------------------------------------------------
# Modified operator


@dataclass(frozen=True)
class ModifiedInterpolant:
    """Raw operator followed by the spectral eigenmode projection.

    The eigenvalue cutoff is sharp: retained modes satisfy
    |k|^2 <= 1/h^2.  The zero mode (eigenvalue 0) is always retained,
    so the conserved mean passes through.
    """

    base: InterpolantKind

    @property
    def h(self) -> float:
        return self.base.h


@lru_cache(maxsize=64)
def pr_mask(domain: DomainSpec, h: float) -> np.ndarray:
    """Boolean half-spectrum mask of the retained eigenmode band."""
    m = domain.K2 <= 1.0 / h**2
    m.setflags(write=False)
    return m


@lru_cache(maxsize=64)
def pr_rank(domain: DomainSpec, h: float) -> int:
    """Number of retained wavevectors counted over the full spectrum."""
    m = pr_mask(domain, h)
    w = domain.parseval_weights
    return int(round(float(np.sum(m * w))))


def apply_modified(m: ModifiedInterpolant, u: VelocityField) -> VelocityField:
    """Divergence-free, parity-clean coarse observation of u."""
    d = u.domain
    _validate_h(m.base, d)
    if isinstance(m.base, FourierLowpass):
        c1 = u.u1.coeffs.copy()
        c2 = u.u2.coeffs.copy()
    else:
        f1, f2 = _raw_velocity(m.base, u)
        c1, c2 = f1.coeffs.copy(), f2.coeffs.copy()
    kernels.parity_project(c1, Parity.EVEN_X2.value)
    kernels.parity_project(c2, Parity.ODD_X2.value)
    kernels.leray(c1, c2, d.KX, d.KY, d.inv_K2)
    mask = pr_mask(d, m.h)
    c1 *= mask
    c2 *= mask
    c2[0, 0] = 0.0
    return VelocityField(
        SpectralField(c1, Parity.EVEN_X2, d), SpectralField(c2, Parity.ODD_X2, d)
    )


def apply_modified_arrays(m: ModifiedInterpolant, c1, c2, domain, out1, out2) -> None:
    """Array-level modified operator (hot path for explicit nudging)."""
    if isinstance(m.base, FourierLowpass):
        out1[:] = c1
        out2[:] = c2
    else:
        g1 = apply_raw_grid(m.base, grid_from_coeffs(c1, domain), domain)
        g2 = apply_raw_grid(m.base, grid_from_coeffs(c2, domain), domain)
        out1[:] = coeffs_from_grid(g1, domain)
        out2[:] = coeffs_from_grid(g2, domain)
    kernels.parity_project(out1, Parity.EVEN_X2.value)
    kernels.parity_project(out2, Parity.ODD_X2.value)
    kernels.leray(out1, out2, domain.KX, domain.KY, domain.inv_K2)
    mask = pr_mask(domain, m.h)
    out1 *= mask
    out2 *= mask
    out2[0, 0] = 0.0


# ---------------------------------------------------------------------------
# Approximation-of-identity constants


@dataclass(frozen=True)
class ConstantsFit:
    """Envelope constants and the raw measurements behind them.

    ``c_l2`` bounds |f - I_h f|, ``c_h1`` bounds the H1 error; each is a
    (first-order, second-order) pair, the second entry zero for Type I.
    Every ensemble member satisfies the envelope by construction;
    ``max_ratio`` records the tightest member (== 1.0 up to roundoff).
    """

    kind: InterpolantKind
    type_tag: str
    c_l2: tuple[float, float]
    c_h1: tuple[float, float]
    h_values: tuple[float, ...]
    n_fields: int
    max_ratio: float
    samples: np.ndarray  # columns: h, err_l2, err_h1, norm_h1, norm_h2


def _envelope(err: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, float]:
    """Nonnegative LS fit scaled up to dominate every sample."""
    coef, _ = nnls(basis, err)
    pred = basis @ coef
    if np.any(pred <= 0):
        # degenerate fit; fall back to single-column envelopes
        coef = np.zeros(basis.shape[1])
        ratios = [np.max(err / basis[:, j]) for j in range(basis.shape[1])]
        j = int(np.argmin(ratios))
        coef[j] = ratios[j]
        return coef, 1.0
    s = float(np.max(err / pred))
    return coef * s, float(np.max(err / (pred * s)))


def fit_constants(
    kind: InterpolantKind,
    domain: DomainSpec,
    h_values,
    n_fields: int = 100,
    seed: int = 0,
    modified: bool = False,
    fields=None,
    kcut_max: float | None = None,
) -> ConstantsFit:
    """Measure the identity-approximation envelopes over an ensemble.

    With ``modified=True`` the fit targets the composed operator and the
    H1/H2 sizes are taken in the divergence-free class norms (the form
    the trajectory-space bound uses).  A caller may supply its own
    ``fields`` (e.g. the same function class on two grids for a
    refinement study); by default a seeded random ensemble of mixed
    smoothness is drawn, with spectral support up to ``kcut_max``.
    """
    h_values = tuple(float(h) for h in h_values)
    if len(h_values) < 4:
        raise ValueError("need at least 4 values of h")
    if fields is None:
        if n_fields < 100:
            raise ValueError("need an ensemble of at least 100 fields")
        rng = np.random.default_rng(seed)
        if kcut_max is None:
            kcut_max = max(3.0, domain.Nx / 6)
        fields = [
            random_velocity(domain, rng, amplitude=1.0, kcut_modes=rng.uniform(2.0, kcut_max))
            for _ in range(n_fields)
        ]
    elif len(fields) < 100:
        raise ValueError("need an ensemble of at least 100 fields")
    n_fields = len(fields)
    rows = []
    for h in h_values:
        k = type(kind)(h=h)
        mod = ModifiedInterpolant(k)
        for u in fields:
            if modified:
                iu = apply_modified(mod, u)
                nh1 = norm_v0(u)
                nh2 = norm_a0(u)
            else:
                if isinstance(k, FourierLowpass):
                    i1, i2 = apply_raw(k, u.u1), apply_raw(k, u.u2)
                else:
                    i1, i2 = _raw_velocity(k, u)
                iu = VelocityField(
                    SpectralField(i1.coeffs, Parity.EVEN_X2, domain),
                    SpectralField(i2.coeffs, Parity.ODD_X2, domain),
                )
                nh1 = norm_h1_full(u)
                nh2 = norm_h2_equiv(u)
            diff = VelocityField(
                SpectralField(u.u1.coeffs - iu.u1.coeffs, Parity.EVEN_X2, domain),
                SpectralField(u.u2.coeffs - iu.u2.coeffs, Parity.ODD_X2, domain),
            )
            rows.append((h, norm_l2(diff), norm_h1_full(diff), nh1, nh2))
    samples = np.array(rows)
    h, err_l2, err_h1, nh1, nh2 = samples.T
    if kind.type_tag == "I":
        c0, r0 = _envelope(err_l2, (h * nh1)[:, None])
        c0t, _ = _envelope(err_h1, nh1[:, None])
        c_l2 = (float(c0[0]), 0.0)
        c_h1 = (float(c0t[0]), 0.0)
        max_ratio = r0
    else:
        cl, r0 = _envelope(err_l2, np.column_stack([h * nh1, h**2 * nh2]))
        ch, _ = _envelope(err_h1, np.column_stack([nh1, h * nh2]))
        c_l2 = (float(cl[0]), float(cl[1]))
        c_h1 = (float(ch[0]), float(ch[1]))
        max_ratio = r0
    return ConstantsFit(
        kind=kind,
        type_tag=kind.type_tag,
        c_l2=c_l2,
        c_h1=c_h1,
        h_values=h_values,
        n_fields=n_fields,
        max_ratio=max_ratio,
        samples=samples,
    )
