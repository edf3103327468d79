"""Pure-numpy implementations of the hot per-step spectral kernels.

Mirrors the compiled extension ``rbdf._kernels`` operation for operation;
``rbdf.kernels`` picks whichever is available at import time.  Arrays are
half-spectrum complex128 of shape (Ny, Mx) unless noted.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def parity_project(c: np.ndarray, sign: int) -> None:
    """In-place projection onto the even (+1) / odd (-1) x2-parity class.

    Also restores the realness constraint on the self-conjugate columns
    (m = 0 and the x1 Nyquist column), so grid values stay real.
    """
    flipped = np.roll(c[::-1], 1, axis=0)
    c[:] = 0.5 * (c + sign * flipped)
    for col in (0, c.shape[1] - 1):
        col_flip = np.roll(c[::-1, col], 1)
        c[:, col] = 0.5 * (c[:, col] + np.conj(col_flip))


def leray(c1: np.ndarray, c2: np.ndarray, KX: np.ndarray, KY: np.ndarray, invK2: np.ndarray) -> None:
    """In-place per-mode removal of the gradient component."""
    d = (KX * c1 + KY * c2) * invK2
    c1 -= KX * d
    c2 -= KY * d


def div_pair(ah: np.ndarray, bh: np.ndarray, KX: np.ndarray, KY: np.ndarray,
             mask: np.ndarray, out: np.ndarray) -> None:
    """out = i*(KX*ah + KY*bh) * mask -- divergence of a spectral pair."""
    np.multiply(KX, ah, out=out)
    out += KY * bh
    out *= 1j
    out *= mask


def rb_explicit(conv1, conv2, convth, u1h, u2h, thh, KX, KY, invK2,
                g: float, inv_l: float, nu: float, kappa: float, K2,
                out1, out2, outth) -> None:
    """Assemble the momentum/temperature right-hand sides.

    out = -conv + coupling - (nu or kappa)*|k|^2*state, with the
    momentum pair Leray-projected.  Pass nu = kappa = 0 when diffusion
    is handled by an integrating factor.
    """
    np.negative(conv1, out=out1)
    np.negative(conv2, out=out2)
    out2 += g * thh
    if nu != 0.0:
        out1 -= nu * K2 * u1h
        out2 -= nu * K2 * u2h
    d = (KX * out1 + KY * out2) * invK2
    out1 -= KX * d
    out2 -= KY * d
    np.negative(convth, out=outth)
    outth += inv_l * u2h
    if kappa != 0.0:
        outth -= kappa * K2 * thh


def heun_predict(y, k1, efac, dt: float, out) -> None:
    """out = efac * (y + dt*k1)."""
    np.multiply(k1, dt, out=out)
    out += y
    out *= efac


def heun_correct(y, k1, k2, efac, dt: float, out) -> None:
    """out = efac*y + dt/2 * (efac*k1 + k2)."""
    np.multiply(k1, efac, out=out)
    out += k2
    out *= 0.5 * dt
    out += efac * y


def products_vel(u1p, u2p, p11, p12, p22) -> None:
    """Physical-space products u1*u1, u1*u2, u2*u2 (real arrays)."""
    np.multiply(u1p, u1p, out=p11)
    np.multiply(u1p, u2p, out=p12)
    np.multiply(u2p, u2p, out=p22)


def products_scalar(u1p, u2p, thp, p1t, p2t) -> None:
    """Physical-space products u1*theta, u2*theta."""
    np.multiply(u1p, thp, out=p1t)
    np.multiply(u2p, thp, out=p2t)


def add_scaled(out, a, s: float) -> None:
    """out += s*a."""
    out += s * a


def nudge_feedback(r, c, v, mask, coef: float) -> None:
    """r += coef * (v - mask*c): spectral-band relaxation toward data."""
    r += coef * (v - mask * c)
