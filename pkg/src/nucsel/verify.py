"""Randomized property suites behind ``nucsel verify`` and the acceptance tests.

Each suite draws its own corpus from a seed and returns a :class:`SuiteResult`
with the number of checked inequalities, the violations and the worst slack
(negative slack means a violation).
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bounds import dpp_discrepancy_check, greedy_step_check, laplacian_bound_check, lp_bound_general, lp_primal_value
from .cur import cur_decompose, cur_error_direct, triangle_bound_check
from .gen import random_reversible_laplacian, random_spsd
from .laplacian import (complement_trace, laplacian_objective_eval, nuclear_max_laplacian_exact,
                        pinv_dense, _LapState)
from .select import CholeskyState, make_rng, nuclear_max, objective_eval
from .sympoly import dpp_expectation, spectrum

DECAYS = ("exp", "poly", "flat", 0.9, 0.5)


@dataclass
class SuiteResult:
    name: str
    cases: int
    violations: int
    worst: float

    @property
    def passed(self):
        return self.violations == 0


class _Tally:
    def __init__(self, name):
        self.name, self.cases, self.violations, self.worst = name, 0, 0, math.inf

    def record(self, slack, tol=0.0):
        self.cases += 1
        self.worst = min(self.worst, float(slack))
        if not slack >= -tol:
            self.violations += 1

    def result(self):
        return SuiteResult(self.name, self.cases, self.violations, self.worst)


def _random_lap(rng, n_lo, n_hi):
    n = int(rng.integers(n_lo, n_hi + 1))
    extra = int(rng.integers(0, n * (n - 1) // 2 - (n - 1) + 1))
    return random_reversible_laplacian(n, extra, int(rng.integers(2**31)))


def _random_subset(rng, n, lo, hi):
    size = int(rng.integers(lo, hi + 1))
    return sorted(int(i) for i in rng.choice(n, size, replace=False))


def dpp_discrepancy_suite(n_mats=100, n=50, s_max=5, k_max=25, seed=0):
    """``1 - L(G_k)/D_s < exp(-k/s)`` for deterministic runs, ``1 <= s <= s_max <= k <= k_max``."""
    rng = make_rng(seed)
    tally = _Tally("dpp-discrepancy")
    steps = _Tally("greedy-step")
    for i in range(n_mats):
        decay = DECAYS[i % len(DECAYS)]
        K = random_spsd(n, n, decay, int(rng.integers(2**31)))
        lam = spectrum(K)
        run = nuclear_max(K, k_max)
        for s in range(1, s_max + 1):
            for rep in dpp_discrepancy_check(run, lam, s):
                if rep.k < s_max:
                    continue
                # strict inequality: a zero slack counts as a violation unless the gap vanished
                slack = rep.bound_value - rep.measured_gap
                tally.record(slack if rep.satisfied else min(slack, -1e-300))
            steps.record(greedy_step_check(run, lam, s)[0], tol=1e-10 * float(lam.sum()))
    return [tally.result(), steps.result()]


def _rand_spectrum(rng, n):
    kind = rng.integers(3)
    if kind == 0:
        return rng.uniform(0.01, 1.0, n)
    if kind == 1:
        return np.exp(rng.normal(0, 1.5, n))
    return rng.uniform(0.5, 1.5, n) * 0.6 ** np.arange(n)


def dpp_property_suite(n_cases=1000, n_max=12, seed=0, tol=1e-10):
    """Monotonicity, concavity, Schur-convexity and subadditivity of ``D_s``."""
    rng = make_rng(seed)
    mono, conc, schur, sub = (_Tally(x) for x in ("dpp-monotone", "dpp-concave", "dpp-schur", "dpp-subadditive"))
    for _ in range(n_cases):
        n = int(rng.integers(2, n_max + 1))
        lam = _rand_spectrum(rng, n)
        scale = float(lam.sum())
        D = np.array([dpp_expectation(lam, s) for s in range(n + 1)])
        for s in range(n):
            mono.record((D[s + 1] - D[s]) / scale, tol)
        for s in range(1, n):
            conc.record(((D[s] - D[s - 1]) - (D[s + 1] - D[s])) / scale, tol)
        i, j = rng.choice(n, 2, replace=False)
        avg = lam.copy()
        avg[[i, j]] = 0.5 * (lam[i] + lam[j])
        for s in range(1, n + 1):
            schur.record((D[s] - dpp_expectation(avg, s)) / scale, tol)
        A = random_spsd(n, n, "exp", int(rng.integers(2**31))) * rng.uniform(0.1, 2)
        B = random_spsd(n, n, float(rng.uniform(0.3, 0.95)), int(rng.integers(2**31))) * rng.uniform(0.1, 2)
        la, lb, lab = spectrum(A), spectrum(B), spectrum(A + B)
        tr = float(lab.sum())
        for s in range(1, n + 1):
            sub.record((dpp_expectation(la, s) + dpp_expectation(lb, s) - dpp_expectation(lab, s)) / tr, tol)
    return [mono.result(), conc.result(), schur.result(), sub.result()]


def complement_identity_suite(n_laps=200, n_triples=500, n_max=40, seed=0, rtol=1e-8):
    """Complementary-trace identity and one-column augmentation identities.

    Slack is ``rtol - relative error``.
    """
    rng = make_rng(seed)
    comp = _Tally("complement-identity")
    aug_lap = _Tally("laplacian-augmentation")
    aug_ker = _Tally("kernel-augmentation")
    for _ in range(n_laps):
        lap = _random_lap(rng, 3, n_max)
        K = pinv_dense(lap)
        I = _random_subset(rng, lap.n, 1, lap.n - 1)
        lhs = complement_trace(lap.L, I)
        rhs = float(np.trace(K)) - laplacian_objective_eval(K, I, lap.h)
        comp.record(rtol - abs(lhs - rhs) / max(abs(lhs), 1e-300))
    for _ in range(n_triples):
        lap = _random_lap(rng, 3, n_max)
        K, h = pinv_dense(lap), lap.h
        n = lap.n
        I = _random_subset(rng, n, 0, n - 2)
        j = int(rng.choice(np.setdiff1d(np.arange(n), I)))
        # Laplacian gain from the incremental state vs direct differences
        st = _LapState(n, len(I) + 1, np.diag(K).copy(), None, h)
        for i in I:
            st.add(i, st.chol.residual_column(i, K[:, i]))
        r = st.chol.residual_column(j, K[:, j])
        g = st.gain(j, K[:, j], r)
        new = laplacian_objective_eval(K, I + [j], h)
        ref = new - (laplacian_objective_eval(K, I, h) if I else 0.0)
        aug_lap.record(rtol - abs(g - ref) / max(abs(new), abs(ref), 1e-300))
        # kernel gain ||r||²/r_j vs objective difference on a random SPSD matrix
        A = random_spsd(n, n, "exp", int(rng.integers(2**31)))
        cs = CholeskyState.empty(n, len(I) + 1, np.diag(A).copy())
        for i in I:
            cs.add(i, cs.residual_column(i, A[:, i]))
        r = cs.residual_column(j, A[:, j])
        g = float(r @ r) / r[j]
        new = objective_eval(A, I + [j])
        ref = new - (objective_eval(A, I) if I else 0.0)
        aug_ker.record(rtol - abs(g - ref) / max(abs(new), 1e-300))
    return [comp.result(), aug_lap.result(), aug_ker.result()]


def submodularity_suite(n_laps=200, n_triples=200, n_max=8, seed=0, tol=1e-9):
    """Second differences of ``I -> Tr[(L[Ī, Ī])⁻¹]`` are nonnegative (A nonempty)."""
    rng = make_rng(seed)
    tally = _Tally("submodularity")
    for _ in range(n_laps):
        lap = _random_lap(rng, 3, n_max)
        n = lap.n
        cache = {}

        def F(S):
            key = frozenset(S)
            if key not in cache:
                cache[key] = complement_trace(lap.L, sorted(key))
            return cache[key]

        for _ in range(n_triples):
            labels = rng.integers(0, 4, n)  # 0: A, 1: B, 2: C, 3: none
            labels[int(rng.integers(n))] = 0
            A = set(np.flatnonzero(labels == 0).tolist())
            B = set(np.flatnonzero(labels == 1).tolist())
            C = set(np.flatnonzero(labels == 2).tolist())
            val = F(A) - F(A | B) - F(A | C) + F(A | B | C)
            tally.record(val, tol)
    return [tally.result()]


def laplacian_bound_suite(n_laps=60, n_max=10, s_max=3, seed=0):
    """Greedy Laplacian bound against brute-force optima on small graphs."""
    rng = make_rng(seed)
    tally = _Tally("laplacian-bound")
    first = _Tally("first-column")
    for _ in range(n_laps):
        lap = _random_lap(rng, 4, n_max)
        K, h = pinv_dense(lap), lap.h
        tr = float(np.trace(K))
        first.record(tr - float(np.min(np.diag(K) / h ** 2)), 1e-10 * tr)
        run = nuclear_max_laplacian_exact(K, h, lap.n - 1)
        for s in range(1, min(s_max, lap.n - 1) + 1):
            opt = max(laplacian_objective_eval(K, list(S), h) for S in itertools.combinations(range(lap.n), s))
            for rep in laplacian_bound_check(run, tr, s, 0.0, opt):
                tally.record(rep.bound_value - rep.measured_gap, 1e-10 * abs(rep.R_ref))
    return [tally.result(), first.result()]


def lp_duality_suite(n_cases=200, k_max=6, seed=0, tol=1e-9):
    rng = make_rng(seed)
    tally = _Tally("lp-duality")
    for _ in range(n_cases):
        k = int(rng.integers(1, k_max + 1))
        f = rng.uniform(1.0 + 1e-3, 10.0, k)
        tally.record(tol - abs(lp_primal_value(f) - lp_bound_general(f).tight))
    return [tally.result()]


def cur_suite(n_mats=50, m_max=200, seed=0, rtol=1e-8):
    """Closed-form CUR error vs direct assembly, triangle bound and uniform-worst ordering."""
    rng = make_rng(seed)
    closed, tri, order = _Tally("cur-closed-form"), _Tally("cur-triangle"), _Tally("cur-uniform-worst")
    worst_count = 0
    for _ in range(n_mats):
        A, k = random_sparse_instance(rng, m_max)
        errs = {}
        for meth in ("nuclear", "diag-max", "diag-sample", "uniform"):
            res = cur_decompose(A, k, k, mode="deterministic", seed=int(rng.integers(2**31)), method=meth)
            direct = cur_error_direct(A, res.row_indices, res.col_indices)
            closed.record(rtol - abs(res.frobenius_error - direct) / max(res.norm_A, 1e-300))
            tri.record(0.0 if triangle_bound_check(res, A) else -1.0)
            errs[meth] = res.frobenius_error
        worst_count += errs["uniform"] >= max(errs.values())
    order.cases, order.violations, order.worst = n_mats, n_mats - worst_count, float(worst_count)
    return [closed.result(), tri.result(), order.result()]


def random_sparse_instance(rng, m_max=200):
    """Random sparse matrix with decaying column scales and uneven row norms."""
    m = int(rng.integers(m_max // 2, m_max + 1))
    n = int(rng.integers(m_max // 2, m_max + 1))
    density = float(rng.uniform(0.02, 0.1))
    A = sp.random(m, n, density=density, random_state=rng, data_rvs=rng.standard_normal, format="csr")
    A = sp.diags(np.exp(rng.normal(0, 1.5, m))) @ A @ sp.diags(np.exp(rng.normal(0, 1.5, n)))
    k = int(rng.integers(5, 21))
    return sp.csr_matrix(A), k


def run_suites(seed=0, scale=1.0):
    """All verification suites at corpus size ``scale`` (1.0 is the full acceptance size)."""
    c = lambda x: max(1, int(round(x * scale)))  # noqa: E731
    out = []
    out += dpp_discrepancy_suite(c(100), seed=seed)
    out += dpp_property_suite(c(1000), seed=seed)
    out += complement_identity_suite(c(200), c(500), seed=seed)
    out += submodularity_suite(c(200), c(200), seed=seed)
    out += laplacian_bound_suite(c(60), seed=seed)
    out += lp_duality_suite(c(200), seed=seed)
    out += cur_suite(c(50), seed=seed)
    return out
