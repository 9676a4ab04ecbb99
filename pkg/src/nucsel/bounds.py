"""Executable forms of the greedy error bounds.

Every check returns :class:`BoundReport` objects pairing a measured gap with
the closed-form right-hand side. Tight product forms and exponential
relaxations are both reported.
"""

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .sympoly import dpp_expectation, partial_trace, spectrum


class LPBound(NamedTuple):
    tight: float
    relaxed: float


@dataclass(frozen=True)
class BoundReport:
    """One evaluated bound.

    ``satisfied`` is ``measured_gap <= bound_value + 1e-10·|R_ref|`` (or the
    strict version for strict inequalities).
    """

    name: str
    k: int
    s: int
    zeta: float
    R_ref: float
    measured_gap: float
    bound_value: float
    tight_value: float
    satisfied: bool
    f: tuple = ()
    alpha: float | None = None
    beta: float | None = None
    nu: float | None = None
    eta: float | None = None
    omega: float | None = None
    eps: float | None = None
    residuals: tuple = ()
    nominal_zeta: bool = False
    extra: dict = field(default_factory=dict)

    def row(self):
        d = asdict(self)
        d["f"] = ";".join(f"{v:.6g}" for v in self.f)
        d["residuals"] = ";".join(f"{v:.6g}" for v in self.residuals)
        d.pop("extra")
        return d

    def text(self):
        mark = "ok" if self.satisfied else "VIOLATED"
        return (f"{self.name} k={self.k} s={self.s} zeta={self.zeta:g}: "
                f"gap={self.measured_gap:.6g} bound={self.bound_value:.6g} "
                f"(tight {self.tight_value:.6g}) [{mark}]")


def _check_f(f):
    f = np.asarray(f, dtype=float).ravel()
    if np.any(f <= 1):
        raise ValueError("LP coefficients must exceed 1")
    return f


def lp_bound_general(f):
    """Relative-gap bound from per-step coefficients ``f``.

    Returns ``(prod(1 - 1/f), exp(-sum(1/f)))``.
    """
    f = _check_f(f)
    return LPBound(float(np.prod(1.0 - 1.0 / f)), float(math.exp(-np.sum(1.0 / f))))


def lp_bound_accumulated(f_next, alpha):
    """Bound when the next gain is at most ``alpha`` times the accumulated gain."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not f_next > 1:
        raise ValueError("f_next must exceed 1")
    return alpha * f_next / (1 + alpha * f_next)


def lp_bound_initial(f, beta):
    """Bound when the next gain is at most ``beta`` times the first gain.

    ``f`` holds ``f_1 .. f_{k+1}``; ``f_1`` does not enter the formula.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    f = _check_f(f)
    if f.size < 2:
        raise ValueError("need f_1 .. f_{k+1} with k >= 1")
    inner = float(np.prod(1.0 / (1.0 - 1.0 / f[1:-1])))
    return 1.0 / (inner + 1.0 / (beta * f[-1]))


def lp_primal_value(f, R=1.0):
    """Solve ``min Σ y`` s.t. ``R <= Σ_{i<t} y_i + f_t y_t``, ``y >= 0`` by vertex enumeration.

    Returns the relative gap ``1 - min Σ y / R``. Exponential in ``k``; meant
    for ``k <= 6``.
    """
    f = _check_f(f)
    k = f.size
    if k == 0:
        return 1.0
    A = np.tril(np.ones((k, k)), -1) + np.diag(f)
    rows = np.vstack([A, np.eye(k)])
    rhs = np.concatenate([np.full(k, R), np.zeros(k)])
    best = math.inf
    for act in itertools.combinations(range(2 * k), k):
        M = rows[list(act)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, rhs[list(act)])
        if np.all(y >= -1e-12) and np.all(A @ y >= R - 1e-12):
            best = min(best, float(y.sum()))
    return 1.0 - best / R


def spectral_ratios(lam, r):
    """``(ν, η)`` for rank ``r``: tail/head ratio and relative tail mass."""
    lam = spectrum(lam)
    tr = float(lam.sum())
    head = partial_trace(lam, r)
    tail = tr - head
    nu = tail / head if head > 0 else math.inf
    eta = tail / tr if tr > 0 else 0.0
    return nu, eta


def dpp_discrepancy_check(run, lam, s, zeta=0.0, nominal=False):
    """Check ``1 - L(G_k)/D_s < exp(-k/((1+ζ)s))`` for every prefix ``k >= s``.

    Also records the per-step residuals ``Σ_{i<t} g_i + (1+ζ) s g_t - D_s``
    (nonnegative when the run is (1+ζ)-approximately greedy).
    """
    lam = spectrum(lam)
    if s < 1:
        raise ValueError("s must be positive")
    Ds = dpp_expectation(lam, s)
    g = np.asarray(run.gains, dtype=float)
    prev = np.concatenate([[0.0], np.cumsum(g)[:-1]])
    resid = prev + (1 + zeta) * s * g - Ds
    reports = []
    for k in range(s, run.k + 1):
        obj = float(run.objective[k - 1])
        gap = 1.0 - obj / Ds if Ds > 0 else 0.0
        c = (1 + zeta) * s
        tight = (1.0 - 1.0 / c) ** k if c > 1 else 0.0
        bound = math.exp(-k / c)
        ok = gap < bound + 1e-10 or gap <= 1e-10
        reports.append(BoundReport("dpp-discrepancy", k, s, zeta, Ds, gap, bound, tight, bool(ok),
                                   residuals=tuple(resid[:k]), nominal_zeta=nominal))
    return reports


def dpp_rank_bound_check(lam, r, s):
    """``Tr - D_s <= (1 + r/(s-r+1)) (Tr - T_r)`` for ``s >= r``."""
    lam = spectrum(lam)
    tr = float(lam.sum())
    lhs = tr - dpp_expectation(lam, s)
    rhs = (1 + r / (s - r + 1)) * (tr - partial_trace(lam, r))
    return BoundReport("dpp-rank", s, s, 0.0, tr, lhs, rhs, rhs, bool(lhs <= rhs + 1e-10 * tr))


def re_bound_columns(r, eps, nu, zeta=0.0):
    """Column count for an additive ``(r, ε)`` guarantee.

    Returns ``(k_star, s_dpp)``: the greedy estimate clamped below by ``r``
    and the DPP reference ``r/ε + r - 1``.
    """
    if r < 1 or eps <= 0 or nu <= 0:
        raise ValueError("need r >= 1, eps > 0, nu > 0")
    s_dpp = r / eps + r - 1
    val = (1 + zeta) * s_dpp * (math.log(1 / nu) + math.log(1 / eps - 1 / r + 1))
    return max(float(r), val), s_dpp


def relative_bound_columns(r, omega, nu, zeta=0.0):
    """Column count for a multiplicative guarantee ``Tr - L(G_k) <= (1+ω)(Tr - T_r)``."""
    if r < 1 or omega <= 0 or nu <= 0:
        raise ValueError("need r >= 1, omega > 0, nu > 0")
    val = (1 + zeta) * (r * nu / omega + r - 1) * math.log((r - 1) / (r * nu) + 1 / omega)
    return max(float(r), val)


def laplacian_bound_check(run, trace_pinv, s, zeta=0.0, opt_value=None):
    """``L(O_s) - L(G_k) <= (2+ζ) Tr[L⁺] exp(-(k-1)/(s(1+ζ)))`` for every prefix.

    Without ``opt_value`` the trivial reference ``Tr[L⁺]`` is used in place of
    ``L(O_s)``.
    """
    ref = float(trace_pinv if opt_value is None else opt_value)
    reports = []
    for k in range(1, run.k + 1):
        gap = ref - float(run.objective[k - 1])
        c = s * (1 + zeta)
        bound = (2 + zeta) * trace_pinv * math.exp(-(k - 1) / c)
        tight = (2 + zeta) * trace_pinv * ((1 - 1 / c) ** (k - 1) if c > 1 else float(k == 1))
        ok = gap <= bound + 1e-10 * abs(ref)
        reports.append(BoundReport("laplacian", k, s, zeta, ref, gap, bound, tight, bool(ok)))
    return reports


def greedy_step_check(run, lam, s, zeta=0.0):
    """Per-step inequalities ``Σ_{i<t} g_i + (1+ζ) s g_t >= D_s``; returns the minimum slack."""
    Ds = dpp_expectation(spectrum(lam), s)
    g = np.asarray(run.gains, dtype=float)
    prev = np.concatenate([[0.0], np.cumsum(g)[:-1]])
    return float(np.min(prev + (1 + zeta) * s * g - Ds)), Ds
