"""Sufficient-condition audit: every named constant, every inequality.

Evaluates, for both wall treatments, the explicit constants of the
synchronization/lifting analysis and the sufficient conditions on the
relaxation coefficient mu and the observation scale h, reporting each
inequality with its two sides, a pass flag, and a signed margin.
``suggest_mu_h`` inverts the (monotone) conditions to produce a
certified admissible pair or names the binding constraint.

The universal dimensionless constants (Ladyzhenskaya, Agmon, ...) are
never fixed by the analysis; they default to 1.0 and are user-supplied
inputs, as are the interpolation envelope constants c1, c2, c1~, c2~
(measured by ``interpolants.fit_constants``).  Results are plain
arithmetic on floats: overflow saturates to inf and propagates honestly
into "condition cannot hold".
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .solver import PhysicalParams
from .spectral import eig_lambda1


class BcCase(enum.Enum):
    NO_SLIP = "no-slip"
    STRESS_FREE = "stress-free"


class HNotLessThanL(ValueError):
    """The trajectory-ball bound requires h < L."""


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class UniversalConstants:
    """Dimensionless constants of the functional inequalities.

    cL: Ladyzhenskaya; cT: logarithmic advective estimate; cB:
    Brezis-Gallouet; cA: Agmon; cE: elliptic regularity; c0..c2 and the
    tilde variants: interpolation-error envelopes (L2 and H1 level).
    All default to 1.0 -- the analysis never pins them numerically.
    """

    cL: float = 1.0
    cT: float = 1.0
    cB: float = 1.0
    cA: float = 1.0
    cE: float = 1.0
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    c0t: float = 1.0
    c1t: float = 1.0
    c2t: float = 1.0

    def __post_init__(self):
        for name in ("cL", "cT", "cB", "cA", "cE", "c0", "c1", "c2", "c0t", "c1t", "c2t"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class AuditInput:
    p: PhysicalParams
    bc: BcCase
    J1: float
    J2: float
    mu: float
    h: float
    uc: UniversalConstants = field(default_factory=UniversalConstants)
    rho: float | None = None  # defaults to 4R

    def __post_init__(self):
        if self.J1 <= 0 or self.J2 <= 0:
            raise ValueError("J1, J2 must be positive")

    @property
    def lam1(self) -> float:
        return eig_lambda1(self.p.domain)

    @property
    def omega(self) -> float:
        return self.p.domain.measure


@dataclass
class ConditionResult:
    condition_id: str
    lhs: float
    rhs: float
    op: str  # "<=", ">=", ">"
    satisfied: bool
    margin: float
    note: str = ""


@dataclass
class AuditReport:
    bc: BcCase
    R: float
    rho: float
    constants: dict
    conditions: dict
    notes: list


@dataclass
class Suggestion:
    mu_min: float
    h_max: float
    binding_mu: str
    binding_h: str
    report: AuditReport


@dataclass
class Infeasible:
    binding: str
    reason: str


def compute_R_rho(inp: AuditInput) -> tuple[float, float]:
    """Trajectory-ball radius R of the observed attractor, and rho = 4R.

    R = ((c1~ + 1) J1 + c2~ L J2) / (nu sqrt(lam1)), valid for h < L.
    """
    if not inp.h < inp.p.domain.L:
        raise HNotLessThanL(f"h = {inp.h} must be < L = {inp.p.domain.L}")
    uc = inp.uc
    R = ((uc.c1t + 1.0) * inp.J1 + uc.c2t * inp.p.domain.L * inp.J2) / (
        inp.p.nu * math.sqrt(inp.lam1)
    )
    return R, 4.0 * R


def _resolve_rho(inp: AuditInput) -> tuple[float, float]:
    R, rho4 = compute_R_rho(inp)
    return R, (inp.rho if inp.rho is not None else rho4)


def constants_noslip(inp: AuditInput) -> dict:
    """Constant chain of the no-slip analysis (synchronization and the
    Lipschitz estimates), evaluated in dependency order."""
    p, uc = inp.p, inp.uc
    nu, kap, g, l = p.nu, p.kappa, p.g, p.domain.l
    lam1 = inp.lam1
    mu = inp.mu
    _, rho = _resolve_rho(inp)
    T = 1.0 / (nu * lam1)
    K = 2.0 * inp.omega
    C1 = 4.0 * nu**2
    K1 = 27.0 * uc.cL**8 / (2.0 * nu**3)
    K2 = 4.0 * (uc.cT**2 + uc.cB**2) * rho**2 / (nu**2 * lam1)
    beta_k = K**2 / 2.0 + T * (kap * lam1 * K**2 / 4.0 + 4.0 * C1 * rho**2 / (kap * l**2 * lam1))
    C3 = (beta_k / kap + (8.0 * C1 / (l**2 * kap)) * rho**2 * T) * _exp(
        (8.0 * uc.cL**2 * C1 * lam1 / kap) * rho**2 * T
    )
    a1 = (4.0 * uc.cL**2 / kap) * 4.0 * C1 * rho**2 * lam1 * T + (
        uc.cL**4 * nu**2 / kap**2
    ) * C3 * (C3 + (8.0 * uc.cL**2 * C1 * lam1 * C3 / kap + 8.0 * C1 / (l**2 * kap)) * rho**2 * T)
    K11 = T * (1.0 / (2.0 * nu) + 1.0 / (kap * l**2 * lam1)) * (mu * nu * lam1 / kap) * nu**2
    K12 = (mu / kap) * (lam1 * T + 1.0 / kap) * nu**2
    K13 = _exp(a1) * (K11 + K12 / T)
    # sup ||phi||^2 <= (mu nu lam1 / kap) nu^2 |gamma|_X^2 ; window integral of
    # |A0 phi|^2 <= 4 mu lam1 (lam1 T + 1/kap) nu^2 |gamma|_X^2.
    lip_Y = math.sqrt(mu * nu * lam1 / kap * nu**2) / (nu * math.sqrt(lam1)) + math.sqrt(
        (1.0 / (nu * lam1)) * 4.0 * mu * lam1 * (lam1 * T + 1.0 / kap) * nu**2
    )
    lip_Z = math.sqrt(K13) + math.sqrt(nu * (K13 + a1 * K13 + K11) / kap)
    return {
        "T": T,
        "K": K,
        "C1": C1,
        "K1": K1,
        "K2": K2,
        "beta_k": beta_k,
        "C3": C3,
        "a1": a1,
        "K11": K11,
        "K12": K12,
        "K13": K13,
        "lip_Y_bound": lip_Y,
        "lip_Z_bound": lip_Z,
    }


def constants_stressfree(inp: AuditInput) -> dict:
    """Constant chain of the stress-free analysis in dependency order
    (Ct0 -> Ct1 -> Kt2 -> Ct2 -> ... -> K16)."""
    p, uc = inp.p, inp.uc
    nu, kap, g, l = p.nu, p.kappa, p.g, p.domain.l
    lam1 = inp.lam1
    om = inp.omega
    mu = inp.mu
    _, rho = _resolve_rho(inp)
    T = 1.0 / (nu * lam1)
    eps1 = 1.0 / om
    eps2 = (nu * lam1) ** 2
    Kt1 = math.sqrt(om / lam1)
    Ct0 = 2.0 * nu / (lam1 * kap)
    Ct1 = 32.0 * g**2 / (lam1 * kap * nu * lam1) + 8.0 * nu**2 * lam1
    Kt2 = Kt1**2 * Ct1 / (kap * l**2)
    Ct2 = 2.0 * Kt2 / (lam1 * kap)
    Kt3 = 27.0 / (4.0 * kap**3) * uc.cL**4 * om**2 * Ct1**2
    Kt4 = 2.0 * om * Ct1 / (l**2 * kap)
    Ct3 = (Ct2 / 2.0 + T * (kap * lam1 * Ct2 / 4.0 + Ct1 / (kap * l**2 * lam1))) / kap
    Ct4 = (Ct3 + Kt4 * T) * _exp(2.0 * Kt3 * T * rho**4)
    K13 = uc.cL**2 * math.sqrt(om) / math.sqrt(lam1) * Ct4 * rho**2
    Khat1 = uc.cA * uc.cE * math.sqrt(Ct1) * rho / math.sqrt(om)
    Khat2 = uc.cA * uc.cE * math.sqrt(Ct1) * rho
    K14 = 2.0 * Khat1**2 + 54.0 / nu**3 * Khat2**4
    Khat3 = uc.cE * uc.cL * math.sqrt(Ct1) * rho
    Khat4 = uc.cE * uc.cL * om**0.25 * math.sqrt(Ct1) * rho
    K15 = 2.0 * Khat3**2 + 54.0 / nu**3 * Khat4**4
    K16 = (
        2.0 * g**2 / (lam1 * kap * eps2 * om)
        + 2.0 * g**2 / (kap * eps2)
        + Kt1**2 * eps2 / (kap * l**2)
        + eps1 * uc.cL * math.sqrt(Ct1) * rho * math.sqrt(om)
        + eps2 * K13 / kap
        + K15 / nu
        + K14 * om / nu
    )
    C6 = 8.0 * lam1 * nu**3 / kap
    a1 = (4.0 * uc.cL**2 / kap) * Ct1 * rho**2 * T + (uc.cL**4 * nu**2 / kap**2) * Ct4 * rho**2 * (
        Ct4 * rho**2 + T * (2.0 * Kt3 * rho**4 * Ct4 * rho**2 + Kt4 * rho**2)
    )
    Kt11 = T * (1.0 / nu + 2.0 * om / (kap * l**2)) * mu * C6
    Kt12 = _exp(a1) * (Kt11 + (1.0 / (kap * eps2 * T)) * (8.0 * mu * nu * lam1 * nu**2 * lam1 * T + 4.0 * mu * C6))
    # sup ||phi||_V0^2 <= mu C6 |gamma|_X^2 ; nu * window integral of
    # |A0 phi|^2 <= (8 mu nu^3 lam1^2 T + 4 mu C6) |gamma|_X^2.
    lip_Y = math.sqrt(mu * C6) / (nu * math.sqrt(lam1)) + math.sqrt(
        (8.0 * mu * nu**3 * lam1**2 * T + 4.0 * mu * C6) / (nu**2 * lam1)
    )
    lip_Z = math.sqrt(Kt12) + math.sqrt(nu * (Kt12 + a1 * Kt12 + Kt11) / kap)
    return {
        "T": T,
        "eps1": eps1,
        "eps2": eps2,
        "Kt1": Kt1,
        "Ct0": Ct0,
        "Ct1": Ct1,
        "Kt2": Kt2,
        "Ct2": Ct2,
        "Kt3": Kt3,
        "Kt4": Kt4,
        "Ct3": Ct3,
        "Ct4": Ct4,
        "K13": K13,
        "Khat1": Khat1,
        "Khat2": Khat2,
        "Khat3": Khat3,
        "Khat4": Khat4,
        "K14": K14,
        "K15": K15,
        "K16": K16,
        "C6": C6,
        "a1": a1,
        "Kt11": Kt11,
        "Kt12": Kt12,
        "lip_Y_bound": lip_Y,
        "lip_Z_bound": lip_Z,
    }


def _cond(cid: str, lhs: float, rhs: float, op: str, note: str = "") -> ConditionResult:
    if op == "<=":
        ok = lhs <= rhs
        margin = rhs - lhs
    elif op == ">=":
        ok = lhs >= rhs
        margin = lhs - rhs
    elif op == ">":
        ok = lhs > rhs
        margin = lhs - rhs
    else:
        raise ValueError(op)
    if math.isnan(lhs) or math.isnan(rhs):
        ok = False
    return ConditionResult(cid, lhs, rhs, op, bool(ok), margin, note)


def check_conditions(inp: AuditInput) -> AuditReport:
    """Evaluate the sufficient mu/h conditions for the chosen walls."""
    p, uc = inp.p, inp.uc
    nu, kap, g, l, L = p.nu, p.kappa, p.g, p.domain.l, p.domain.L
    lam1 = inp.lam1
    om = inp.omega
    mu, h = inp.mu, inp.h
    R, rho = _resolve_rho(inp)
    notes = []
    conds = {}
    if inp.bc is BcCase.NO_SLIP:
        c = constants_noslip(inp)
        conds["4.1a"] = _cond("4.1a", mu * math.sqrt(lam1) * uc.c1 * h, 0.25, "<=")
        conds["4.1b"] = _cond("4.1b", 2.0 * mu * lam1**2 * uc.c2**2 * h**4, 0.125, "<=")
        conds["4.2"] = _cond(
            "4.2", mu * nu**2 * lam1**2 * c["C1"], 5.0 * g**2 * c["K"] / (2.0 * rho**2), ">"
        )
        conds["4.3"] = _cond("4.3", 0.25 * mu * nu - 16.0 * c["K1"] * c["C1"] ** 2 * rho**4, 0.0, ">")
        K2 = c["K2"]
        k2log = max(K2 * math.log(K2), 0.0) if K2 > 0 else 0.0
        note = ""
        if K2 < 1.0:
            note = "K2 < 1: K2 log K2 clamped at 0 (the estimate covers the worst case)"
            notes.append(note)
        lhs = (
            0.5 * mu * nu * lam1
            - g**2 / (kap * (nu * lam1) ** 2)
            - (lam1 * nu / 4.0) * k2log
            - 2.0 * uc.cL**2 * nu**2 * rho**2 / kap
            - 2.0 * nu**2 / (l**2 * kap)
        )
        conds["4.4"] = _cond("4.4", lhs, kap * lam1 / 2.0, ">=", note)
    else:
        c = constants_stressfree(inp)
        Q = (
            2.0 * g**2 / (om * kap * c["eps2"] * lam1)
            + 2.0 * g**2 / (kap * c["eps2"])
            + c["Kt1"] ** 2 * c["eps2"] / (kap * l**2)
        )
        conds["4.5"] = _cond("4.5", 0.25 * mu * nu * lam1 - Q, kap * lam1 / 2.0, ">=")
        conds["4.6"] = _cond("4.6", 0.125 * mu * lam1 - 0.25 / om, 0.0, ">=")
        conds["4.7"] = _cond("4.7", 0.25 * mu * nu * lam1 - c["K16"], kap * lam1 / 4.0, ">=")
        conds["4.8a"] = _cond("4.8a", uc.c1 * h / math.sqrt(om), 0.125, "<=")
        conds["4.8b"] = _cond("4.8b", 2.0 * uc.c2**2 * h**4 * mu * lam1 / om, 0.125, "<=")
        conds["4.9"] = _cond(
            "4.9", mu * nu * lam1 * (uc.c1**2 * h**2 + uc.c2 * h**2), nu / 2.0, "<="
        )
    if not h < L:
        notes.append("h >= L: the trajectory-ball bound hypothesis fails")
    return AuditReport(bc=inp.bc, R=R, rho=rho, constants=c, conditions=conds, notes=notes)


def suggest_mu_h(inp: AuditInput):
    """Invert the monotone conditions: smallest admissible mu, then the
    largest h the remaining conditions allow at that mu.

    Returns a certified ``Suggestion`` (its report replays every
    condition at the suggested pair) or ``Infeasible`` naming the
    binding constraint.
    """
    from dataclasses import replace as _replace

    p, uc = inp.p, inp.uc
    nu, kap, g, l, L = p.nu, p.kappa, p.g, p.domain.l, p.domain.L
    lam1 = inp.lam1
    om = inp.omega
    R, rho = _resolve_rho(inp)
    bump = 1.0 + 1e-9
    if inp.bc is BcCase.NO_SLIP:
        c = constants_noslip(inp)
        K2 = c["K2"]
        k2log = max(K2 * math.log(K2), 0.0) if K2 > 0 else 0.0
        mu_cands = {
            "4.2": 5.0 * g**2 * c["K"] / (2.0 * rho**2) / (nu**2 * lam1**2 * c["C1"]),
            "4.3": 64.0 * c["K1"] * c["C1"] ** 2 * rho**4 / nu,
            "4.4": (
                kap * lam1 / 2.0
                + g**2 / (kap * (nu * lam1) ** 2)
                + (lam1 * nu / 4.0) * k2log
                + 2.0 * uc.cL**2 * nu**2 * rho**2 / kap
                + 2.0 * nu**2 / (l**2 * kap)
            )
            * 2.0
            / (nu * lam1),
        }
    else:
        c = constants_stressfree(inp)
        if not math.isfinite(c["K16"]):
            return Infeasible("4.7", "K16 overflows (rho too large for the tail estimate)")
        Q = (
            2.0 * g**2 / (om * kap * c["eps2"] * lam1)
            + 2.0 * g**2 / (kap * c["eps2"])
            + c["Kt1"] ** 2 * c["eps2"] / (kap * l**2)
        )
        mu_cands = {
            "4.5": (kap * lam1 / 2.0 + Q) * 4.0 / (nu * lam1),
            "4.6": 2.0 / (lam1 * om),
            "4.7": (kap * lam1 / 4.0 + c["K16"]) * 4.0 / (nu * lam1),
        }
    binding_mu = max(mu_cands, key=lambda k: mu_cands[k])
    mu_min = mu_cands[binding_mu] * bump
    if not math.isfinite(mu_min):
        return Infeasible(binding_mu, "required mu is not finite")
    if inp.bc is BcCase.NO_SLIP:
        h_cands = {
            "4.1a": 0.25 / (mu_min * math.sqrt(lam1) * uc.c1),
            "4.1b": (0.125 / (2.0 * mu_min * lam1**2 * uc.c2**2)) ** 0.25,
            "h<L": L,
        }
    else:
        h_cands = {
            "4.8a": 0.125 * math.sqrt(om) / uc.c1,
            "4.8b": (0.125 * om / (2.0 * uc.c2**2 * mu_min * lam1)) ** 0.25,
            "4.9": math.sqrt(0.5 / (mu_min * lam1 * (uc.c1**2 + uc.c2))),
            "h<L": L,
        }
    binding_h = min(h_cands, key=lambda k: h_cands[k])
    h_max = h_cands[binding_h] / bump
    if not (h_max > 0 and math.isfinite(h_max)):
        return Infeasible(binding_h, "no positive admissible h")
    report = check_conditions(_replace(inp, mu=mu_min, h=h_max))
    if not all(r.satisfied for r in report.conditions.values()):
        failing = [k for k, r in report.conditions.items() if not r.satisfied]
        return Infeasible(failing[0], "replay at suggested pair fails")
    return Suggestion(
        mu_min=mu_min, h_max=h_max, binding_mu=binding_mu, binding_h=binding_h, report=report
    )
