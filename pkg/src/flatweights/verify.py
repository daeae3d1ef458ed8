"""Inequality checks for weights, each returning a :class:`CheckResult`.

Dimensional constants that are only known to exist (``tau``, ``tau'``,
``kappa``, ``c_n``, ``C_n``) are caller parameters.  Calibrated values come
from :func:`calibrate_embedding`.

Tolerances: ``1e-9`` where the inequality is an algebraic identity on the
grid, ``0`` (margin reporting) where it is only expected, and ``inf`` for
record-only checks that report an implied constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constants as K
from .errors import (
    DegenerateWeight,
    EmptySubset,
    EpsilonOutOfRange,
    InvalidConstant,
    InvalidParameter,
)
from .grid import (
    Cube,
    CubeFamily,
    DoubleMode,
    GridFn,
    Weight,
    cube_blocks,
    dual_weight,
    _same_grid,
)
from .results import CheckResult, safe_ratio

ALGEBRAIC_TOL = 1e-9
RECORD_ONLY = math.inf


def _tau(n: int) -> int:
    return 2 ** (n + 1)


# ---------------------------------------------------------------------------
# reverse Hoelder and its consequences


def rhi_epsilon_max(fw: float, n: int) -> float:
    """Largest admissible exponent gain, ``1 / (2**(n+1) (fw - 1))``."""
    if fw <= 1.0:
        return math.inf
    return 1.0 / (_tau(n) * (fw - 1.0))


def check_rhi(
    w: Weight, eps: float, family: CubeFamily, fw: float | None = None
) -> CheckResult:
    """Worst cube of ``mean(w**(1+eps)) <= 2 fw mean(w)**(1+eps)``."""
    n = w.grid.n
    if fw is None:
        fw = K.fujii_wilson(w, family).value
    eps_max = rhi_epsilon_max(fw, n)
    if not 0.0 <= eps <= eps_max * (1 + 1e-12):
        raise EpsilonOutOfRange(f"eps={eps} outside [0, {eps_max}]")
    e1 = 1.0 + eps
    lw = np.log(w.normalized())
    best = (-math.inf, None)
    for s, anchors, (lr,) in cube_blocks(w.grid, family, lw):
        # log of mean(w^(1+eps)) / mean(w)^(1+eps), scale free
        gap = K.logmeanexp(e1 * lr) - e1 * K.logmeanexp(lr)
        i = int(np.argmax(gap))
        if gap[i] > best[0]:
            best = (float(gap[i]), Cube(tuple(anchors[i]), s))
    Q = best[1]
    sub = np.ascontiguousarray(w.restrict(Q)).ravel()
    with np.errstate(over="ignore"):
        lhs = float(np.mean(sub**e1))
        rhs = 2.0 * fw * float(np.mean(sub)) ** e1
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        # report on the normalised scale instead
        lhs = math.exp(best[0])
        rhs = 2.0 * fw
    return CheckResult(
        "rhi",
        lhs,
        rhs,
        tol=0.0,
        witness=Q,
        params={"eps": eps, "eps_max": eps_max, "fujii_wilson": fw, "family": str(family)},
    )


def subset_exponent(fw: float, n: int) -> float:
    return 1.0 / (1.0 + _tau(n) * (fw - 1.0))


def check_subset(
    w: Weight,
    Q: Cube,
    E: np.ndarray,
    family: CubeFamily,
    fw: float | None = None,
) -> CheckResult:
    """``w(E)/w(Q) <= 2 fw (|E|/|Q|)**theta`` for a cell set ``E`` of ``Q``.

    ``E`` is a boolean mask of shape ``Q.shape``.
    """
    Q.check(w.grid)
    E = np.asarray(E, dtype=bool)
    if E.shape != Q.shape:
        raise InvalidParameter(f"subset mask has shape {E.shape}, cube has {Q.shape}")
    if not E.any():
        raise EmptySubset("E must contain at least one cell")
    if fw is None:
        fw = K.fujii_wilson(w, family).value
    theta = subset_exponent(fw, w.grid.n)
    sub = np.ascontiguousarray(w.restrict(Q))
    lhs = float(sub[E].sum() / sub.sum())
    rhs = 2.0 * fw * (E.sum() / E.size) ** theta
    return CheckResult(
        "subset",
        lhs,
        rhs,
        tol=0.0,
        witness=Q,
        params={"theta": theta, "fujii_wilson": fw, "cells": int(E.sum())},
    )


def check_subset_worst(
    w: Weight, Q: Cube, family: CubeFamily, fw: float | None = None
) -> CheckResult:
    """:func:`check_subset` on the heaviest ``k`` cells of ``Q``, worst ``k``.

    For a fixed ``|E|`` the heaviest cells maximise ``w(E)``.
    """
    if fw is None:
        fw = K.fujii_wilson(w, family).value
    theta = subset_exponent(fw, w.grid.n)
    sub = np.ascontiguousarray(w.restrict(Q)).ravel()
    order = np.argsort(-sub, kind="stable")
    frac = np.cumsum(sub[order]) / sub.sum()
    k = np.arange(1, sub.size + 1)
    ratio = frac / (2.0 * fw * (k / sub.size) ** theta)
    j = int(np.argmax(ratio))
    E = np.zeros(sub.size, dtype=bool)
    E[order[: j + 1]] = True
    return check_subset(w, Q, E.reshape(Q.shape), family, fw=fw)


def left_open_epsilon(p: float, sigma_fw: float, n: int) -> float:
    return (p - 1.0) / (_tau(n) * (sigma_fw - 1.0) + 1.0)


def check_left_open(w: Weight, p: float, family: CubeFamily) -> CheckResult:
    """``[w]_{A_{p-eps}} <= (2 [sigma]_{A_inf})**(p-1) [w]_{A_p}``.

    ``sigma`` is the dual weight and ``eps`` the guaranteed gain.  When
    ``p - eps`` reaches 1 (only for a constant dual weight) the left side is
    ``[w]_{A_1}``.
    """
    if not p > 1:
        raise InvalidParameter(f"left-openness needs p > 1, got {p}")
    sigma = dual_weight(w, p)
    sfw = K.fujii_wilson(sigma, family).value
    eps = left_open_epsilon(p, sfw, w.grid.n)
    q = p - eps
    degenerate = not q > 1.0
    lhs_sup = K.a_1(w, family) if degenerate else K.a_p(w, q, family)
    ap = K.a_p(w, p, family).value
    rhs = (2.0 * sfw) ** (p - 1.0) * ap
    params = {"p": p, "eps": eps, "p_minus_eps": q, "sigma_fujii_wilson": sfw, "a_p": ap}
    if degenerate:
        params["degenerate"] = "p - eps = 1, left side is [w]_A1"
    return CheckResult("left_open", lhs_sup.value, rhs, tol=0.0, witness=lhs_sup.witness, params=params)


def doubling_exponent(fw: float, n: int) -> float:
    """``n (4 fw)**(1 + 2**(n+1) (fw - 1))``: ``log D_w <= kappa`` times this."""
    return n * (4.0 * fw) ** (1.0 + _tau(n) * (fw - 1.0))


def check_doubling_bound(
    w: Weight,
    family: CubeFamily,
    mode: DoubleMode = DoubleMode.REQUIRE_INSIDE,
    kappa: float = 1.0,
) -> CheckResult:
    """Observed doubling constant against ``exp(kappa * doubling_exponent)``."""
    d = K.doubling(w, family, mode)
    fw = K.fujii_wilson(w, family).value
    expo = doubling_exponent(fw, w.grid.n)
    rhs = math.exp(kappa * expo) if kappa * expo < 700 else math.inf
    return CheckResult(
        "doubling",
        d.value,
        rhs,
        tol=0.0,
        witness=d.witness,
        params={
            "kappa": kappa,
            "implied_kappa": math.log(d.value) / expo,
            "fujii_wilson": fw,
            "mode": mode.value,
        },
    )


# ---------------------------------------------------------------------------
# log w in BMO


def check_bmo_chain(w: Weight, family: CubeFamily) -> list[CheckResult]:
    """The three links bounding the oscillation of ``log w``.

    (i) ``bmo_w(log w) <= 8 (log-constant - 1)``;
    (ii) ``log-constant - 1 <= 2**n (fw - 1)``, always on the dyadic family,
    where the reverse weak (1,1) constant ``2**n`` is proved;
    (iii) ``bmo_w(log w) <= 2**(n+3) (fw - 1)``.
    """
    n = w.grid.n
    logw = w.log()
    bw = K.bmo_w(logw, w, family)
    la = K.log_ainfty(w, family).value
    dy = CubeFamily.dyadic()
    la_d = la if family.is_dyadic else K.log_ainfty(w, dy).value
    fw_d = K.fujii_wilson(w, dy).value
    fw = fw_d if family.is_dyadic else K.fujii_wilson(w, family).value
    fam = str(family)
    return [
        CheckResult(
            "bmo_chain", bw.value, 8.0 * (la - 1.0), tol=ALGEBRAIC_TOL, witness=bw.witness,
            params={"link": "i", "log_ainfty": la, "family": fam},
        ),
        CheckResult(
            "bmo_chain", la_d - 1.0, 2**n * (fw_d - 1.0), tol=ALGEBRAIC_TOL,
            params={"link": "ii", "log_ainfty": la_d, "fujii_wilson": fw_d, "family": str(dy)},
        ),
        CheckResult(
            "bmo_chain", bw.value, 2 ** (n + 3) * (fw - 1.0), tol=ALGEBRAIC_TOL,
            witness=bw.witness,
            params={"link": "iii", "fujii_wilson": fw, "family": fam},
        ),
    ]


def check_tsutsui(
    f: GridFn, w: Weight, family: CubeFamily, c_n: float | None = None
) -> CheckResult:
    """``bmo(f) <= c_n log(2 [w]') bmo_w(f)``; record-only unless ``c_n`` is given.

    The implied ``c_n`` is always in ``params``.
    """
    _same_grid(f, w)
    b = K.bmo(f, family)
    if b.value == 0.0:
        return CheckResult.degenerate("tsutsui", "f is constant", implied_c_n=0.0)
    bw = K.bmo_w(f, w, family).value
    h = K.hruscev(w, family).value
    base = math.log(2.0 * h) * bw
    implied = safe_ratio(b.value, base)
    if c_n is None:
        return CheckResult(
            "tsutsui", b.value, base, tol=RECORD_ONLY, witness=b.witness,
            params={"implied_c_n": implied, "hruscev": h, "bmo_w": bw},
        )
    return CheckResult(
        "tsutsui", b.value, c_n * base, tol=0.0, witness=b.witness,
        params={"c_n": c_n, "implied_c_n": implied, "hruscev": h, "bmo_w": bw},
    )


def check_bmo_vs_bmow(f: GridFn, w: Weight, C: float, family: CubeFamily) -> CheckResult:
    """``bmo(f) <= C bmo_w(f)``, recording the implied ``C``."""
    if not C > 0:
        raise InvalidParameter(f"C must be positive, got {C}")
    _same_grid(f, w)
    b = K.bmo(f, family)
    bw = K.bmo_w(f, w, family).value
    return CheckResult(
        "bmo_vs_bmow", b.value, C * bw, tol=0.0, witness=b.witness,
        params={"C": C, "implied_C": safe_ratio(b.value, bw), "bmo_w": bw},
    )


# ---------------------------------------------------------------------------
# A_infinity into A_p


def embedding_via_jn(
    w: Weight, family: CubeFamily, bound: float = K.LOG_BOUND_DEFAULT
) -> tuple[float, CheckResult]:
    """Exponent ``p = 1 + 1/r`` from the exponential integrability exponent.

    ``r`` is :func:`flatweights.constants.jn_sup_r`; the check is
    ``[w]_{A_p} <= bound**(2(p-1))``.  For ``r >= 1`` this follows from
    Jensen's inequality on every cube, so it holds up to rounding; for
    ``r < 1`` that step is unavailable and ``params["feasible"]`` is false.
    A constant weight gives ``p = 1`` and a degenerate pass.
    """
    jn = K.jn_sup_r(w, family, bound)
    r = jn.value
    if math.isinf(r):
        return 1.0, CheckResult.degenerate("embed_jn", "constant weight", p=1.0, r_star=r)
    p = 1.0 + 1.0 / r
    ap = K.a_p(w, p, family)
    rhs = bound ** (2.0 * (p - 1.0))
    return p, CheckResult(
        "embed_jn", ap.value, rhs, tol=ALGEBRAIC_TOL, witness=ap.witness,
        params={"p": p, "r_star": r, "jn_witness": jn.witness, "feasible": r >= 1.0},
    )


@dataclass(frozen=True)
class Calibration:
    tau: float
    tau_prime: float
    r_star: float
    fujii_wilson: float


def calibrate_embedding(
    w: Weight, family: CubeFamily, bound: float = K.LOG_BOUND_DEFAULT
) -> Calibration:
    """``tau, tau'`` that make :func:`check_embedding` reproduce ``embed_jn``.

    ``tau = (1/r) / (fw - 1)`` and ``tau' = 2 log(bound) tau``.
    """
    fw = K.fujii_wilson(w, family).value
    r = K.jn_sup_r(w, family, bound).value
    if fw <= 1.0 or math.isinf(r):
        raise DegenerateWeight("calibration needs a nonconstant weight")
    tau = (1.0 / r) / (fw - 1.0)
    return Calibration(tau, 2.0 * math.log(bound) * tau, r, fw)


def check_embedding(
    w: Weight, tau: float, tau_prime: float, family: CubeFamily
) -> CheckResult:
    """``[w]_{A_p} <= exp(tau' (fw - 1))`` at ``p = 1 + tau (fw - 1)``."""
    if not (tau > 0 and tau_prime > 0):
        raise InvalidParameter("tau and tau' must be positive")
    fw = K.fujii_wilson(w, family).value
    gap = fw - 1.0
    if gap <= 0.0:
        return CheckResult.degenerate("embed_thm11", "constant weight", p=1.0, bound=1.0)
    p = 1.0 + tau * gap
    bound = math.exp(tau_prime * gap) if tau_prime * gap < 700 else math.inf
    ap = K.a_p(w, p, family)
    return CheckResult(
        "embed_thm11", ap.value, bound, tol=0.0, witness=ap.witness,
        params={"fw_minus_1": gap, "p": p, "bound": bound, "tau": tau, "tau_prime": tau_prime},
    )


@dataclass(frozen=True)
class PiecewiseEmbedding:
    """Exponent and bound of the two-regime embedding.

    ``branch`` is ``"flat"`` or ``"general"``; at the boundary ``fw = 1 + c_n``
    both are given, the other one in ``alternative``.
    """

    p: float
    bound: float
    branch: str
    alternative: "PiecewiseEmbedding | None" = None


def _exp_capped(x: float) -> float:
    return math.exp(x) if x < 700 else math.inf


def embedding_piecewise(
    fw: float, c_n: float, C_n: float, tau: float, tau_prime: float
) -> PiecewiseEmbedding:
    """Evaluate the embedding formula without a weight.

    Flat regime ``fw <= 1 + c_n``: ``p = 1 + tau (fw - 1)``, bound
    ``exp(tau' (fw - 1))``.  Otherwise ``p = exp(C_n fw)``, bound ``exp(p)``.
    """
    if not fw >= 1.0:
        raise InvalidConstant(f"A_inf constant must be >= 1, got {fw}")
    if min(c_n, C_n, tau, tau_prime) <= 0:
        raise InvalidParameter("constants must be positive")
    flat = PiecewiseEmbedding(1.0 + tau * (fw - 1.0), _exp_capped(tau_prime * (fw - 1.0)), "flat")
    pg = _exp_capped(C_n * fw)
    general = PiecewiseEmbedding(pg, _exp_capped(pg), "general")
    if fw == 1.0 + c_n:
        return PiecewiseEmbedding(flat.p, flat.bound, "flat", alternative=general)
    return flat if fw < 1.0 + c_n else general


def check_embed_piecewise(
    w: Weight, family: CubeFamily, c_n: float, C_n: float, tau: float, tau_prime: float
) -> CheckResult:
    """``[w]_{A_p} <=`` the bound of :func:`embedding_piecewise`."""
    fw = K.fujii_wilson(w, family).value
    emb = embedding_piecewise(fw, c_n, C_n, tau, tau_prime)
    params = {"fujii_wilson": fw, "p": emb.p, "bound": emb.bound, "branch": emb.branch}
    if emb.p <= 1.0:
        return CheckResult.degenerate("embed_piecewise", "constant weight", **params)
    ap = K.a_p(w, emb.p, family)
    return CheckResult("embed_piecewise", ap.value, emb.bound, tol=0.0, witness=ap.witness, params=params)


# ---------------------------------------------------------------------------
# registry


@dataclass
class VerifyParams:
    """Knobs shared by the registry checks.

    ``tau`` / ``tau_prime`` of ``None`` mean: calibrate on the weight itself.
    """

    family: CubeFamily = field(default_factory=CubeFamily.dyadic)
    ps: tuple[float, ...] = (2.0,)
    tau: float | None = None
    tau_prime: float | None = None
    kappa: float = 1.0
    mode: DoubleMode = DoubleMode.REQUIRE_INSIDE
    c_n: float = 1.0
    C_n: float = 1.0
    C: float = 4.0
    jn_bound: float = K.LOG_BOUND_DEFAULT


def _taus(w: Weight, prm: VerifyParams) -> tuple[float, float] | None:
    if prm.tau is not None and prm.tau_prime is not None:
        return prm.tau, prm.tau_prime
    try:
        cal = calibrate_embedding(w, prm.family, prm.jn_bound)
    except DegenerateWeight:
        return None
    return (
        prm.tau if prm.tau is not None else cal.tau,
        prm.tau_prime if prm.tau_prime is not None else cal.tau_prime,
    )


def _run_rhi(w, prm):
    fw = K.fujii_wilson(w, prm.family).value
    eps = rhi_epsilon_max(fw, w.grid.n)
    return [check_rhi(w, 1.0 if math.isinf(eps) else eps, prm.family, fw=fw)]


def _run_embed_thm11(w, prm):
    taus = _taus(w, prm)
    if taus is None:
        return [CheckResult.degenerate("embed_thm11", "constant weight", p=1.0, bound=1.0)]
    return [check_embedding(w, *taus, prm.family)]


def _run_embed_piecewise(w, prm):
    taus = _taus(w, prm) or (1.0, 1.0)
    return [check_embed_piecewise(w, prm.family, prm.c_n, prm.C_n, *taus)]


CHECKS: dict[str, Callable[[Weight, VerifyParams], list[CheckResult]]] = {
    "rhi": _run_rhi,
    "subset": lambda w, prm: [check_subset_worst(w, w.grid.full_cube(), prm.family)],
    "left_open": lambda w, prm: [check_left_open(w, p, prm.family) for p in prm.ps],
    "doubling": lambda w, prm: [check_doubling_bound(w, prm.family, prm.mode, prm.kappa)],
    "bmo_chain": lambda w, prm: check_bmo_chain(w, prm.family),
    "tsutsui": lambda w, prm: [check_tsutsui(w.log(), w, prm.family)],
    "embed_jn": lambda w, prm: [embedding_via_jn(w, prm.family, prm.jn_bound)[1]],
    "embed_thm11": _run_embed_thm11,
    "embed_piecewise": _run_embed_piecewise,
    "bmo_vs_bmow": lambda w, prm: [check_bmo_vs_bmow(w.log(), w, prm.C, prm.family)],
}


def parse_check_ids(text: str | None) -> list[str]:
    """Comma-separated ids; ``None``, empty or ``all`` select every check."""
    if text is None or text.strip() in ("", "all"):
        return list(CHECKS)
    ids = [t.strip() for t in text.split(",") if t.strip()]
    unknown = [i for i in ids if i not in CHECKS]
    if unknown:
        raise InvalidParameter(f"unknown check id(s): {', '.join(unknown)}")
    return ids


def run_checks(w: Weight, ids: list[str], prm: VerifyParams | None = None) -> list[CheckResult]:
    prm = prm or VerifyParams()
    out: list[CheckResult] = []
    for cid in ids:
        if cid not in CHECKS:
            raise InvalidParameter(f"unknown check id: {cid}")
        out.extend(CHECKS[cid](w, prm))
    return out
