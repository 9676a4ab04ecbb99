"""Rescaled graph Laplacians and inverse-Laplacian column selection.

A rescaled Laplacian ``L`` is symmetric positive semidefinite with a single
null vector ``h > 0`` (unit norm). Its pseudoinverse ``K = L⁺`` is never
formed in the matrix-free path: products with K use deflated PCG and
products with a factor C (``K = C Cᵀ``) use a Chebyshev approximation of an
inverse square root.

Factor convention: with ``R Rᵀ ≈ L + s h hᵀ`` (s > 0) and
``B = R⁻¹ (L + s h hᵀ) R⁻ᵀ``, the identity ``(L + s h hᵀ)⁻¹ = L⁺ + h hᵀ / s``
gives ``K = P R⁻ᵀ B⁻¹ R⁻¹ P`` with ``P = I - h hᵀ``, so ``C = P R⁻ᵀ B^{-1/2}``.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph
import scipy.sparse.linalg
import scipy.special
from numpy.polynomial import chebyshev

from .linops import (ConvergenceError, FactoredOperator, LinearOperator, cg, condition_estimate,
                     read_matrix, top_eigenvalues, write_matrix)
from .select import PIVOT_GUARD, CholeskyState, _result, argmax_lowest, make_rng

DENSE_GUARD = 2000
EXACT_PRECON_GUARD = 5000


class InvalidLaplacianError(ValueError):
    pass


@dataclass(frozen=True)
class RescaledLaplacian:
    """Sparse SPSD ``L`` with ``L h = 0``, ``h > 0`` and ``||h|| = 1``."""

    L: sp.csr_matrix
    h: np.ndarray

    @property
    def n(self):
        return self.L.shape[0]

    @property
    def pi(self):
        return self.h ** 2

    def validate(self):
        L, h = self.L, self.h
        if L.shape[0] != L.shape[1] or h.shape != (L.shape[0],):
            raise InvalidLaplacianError("dimension mismatch")
        if abs(np.linalg.norm(h) - 1.0) > 1e-12:
            raise InvalidLaplacianError("h must have unit norm")
        if np.any(h <= 0):
            raise InvalidLaplacianError("h must be elementwise positive")
        if abs(L - L.T).max() > 0:
            raise InvalidLaplacianError("L must be symmetric")
        if np.any(L.diagonal() < 0):
            raise InvalidLaplacianError("L must have a nonnegative diagonal")
        if np.linalg.norm(L @ h) > 1e-10 * sp.linalg.norm(L):
            raise InvalidLaplacianError("L h is not zero")
        ncomp, _ = scipy.sparse.csgraph.connected_components(L, directed=False)
        if ncomp != 1:
            raise InvalidLaplacianError("underlying graph is disconnected")
        return self


def make_laplacian(L, h):
    L = sp.csr_matrix(L, dtype=float)
    L = (L + L.T) * 0.5
    L.eliminate_zeros()
    h = np.asarray(h, dtype=float)
    return RescaledLaplacian(sp.csr_matrix(L), h / np.linalg.norm(h)).validate()


def from_rate_matrix(rates, pi, tol=1e-10):
    """Rescaled Laplacian ``-Diag(h) R Diag(h⁻¹)`` of a reversible chain, ``h = √π``.

    ``rates[i, j]`` is the jump rate from i to j; rows sum to zero.
    """
    R = sp.csr_matrix(rates, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n) or pi.shape != (n,):
        raise InvalidLaplacianError("dimension mismatch")
    if np.any(pi <= 0) or abs(pi.sum() - 1.0) > tol:
        raise InvalidLaplacianError("pi must be a positive probability vector")
    scale = abs(R).max() if R.nnz else 1.0
    if np.abs(np.asarray(R.sum(axis=1)).ravel()).max() > tol * scale * max(n, 1):
        raise InvalidLaplacianError("rate matrix rows must sum to zero")
    off = R - sp.diags(R.diagonal())
    if off.nnz and off.min() < 0:
        raise InvalidLaplacianError("off-diagonal rates must be nonnegative")
    F = sp.diags(pi) @ R
    if abs(F - F.T).max() > tol * scale:
        raise InvalidLaplacianError("detailed balance violated")
    h = np.sqrt(pi)
    L = -(sp.diags(h) @ R @ sp.diags(1.0 / h))
    return make_laplacian(L, h)


def to_rate_matrix(lap):
    """Inverse of :func:`from_rate_matrix`: ``R = -Diag(h⁻¹) L Diag(h)``."""
    return -(sp.diags(1.0 / lap.h) @ lap.L @ sp.diags(lap.h)).tocsr()


def pinv_dense(lap, guard=DENSE_GUARD):
    """Dense ``L⁺`` via ``(L + h hᵀ)⁻¹ - h hᵀ``."""
    if lap.n > guard:
        raise ValueError(f"dense pseudoinverse limited to n <= {guard}")
    h = lap.h
    A = lap.L.toarray() + np.outer(h, h)
    K = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), np.eye(lap.n)) - np.outer(h, h)
    K = 0.5 * (K + K.T)
    K -= np.outer(h, h @ K) + np.outer(K @ h, h) - np.outer(h, h) * (h @ K @ h)
    return 0.5 * (K + K.T)


# ---------------------------------------------------------------------------
# preconditioner


@dataclass(frozen=True)
class PreconFactor:
    """Triangular ``R`` with ``a (L + s hhᵀ) ⪯ R Rᵀ ⪯ b (L + s hhᵀ)``."""

    R: object
    a: float
    b: float
    shift: float
    mode: str = "external"

    @property
    def kappa(self):
        return self.b / self.a

    def _solve(self, X, trans):
        R = self.R
        if sp.issparse(R):
            if trans:
                return scipy.sparse.linalg.spsolve_triangular(sp.csr_matrix(R.T), X, lower=False)
            return scipy.sparse.linalg.spsolve_triangular(sp.csr_matrix(R), X, lower=True)
        return scipy.linalg.solve_triangular(R, X, lower=True, trans=1 if trans else 0,
                                             check_finite=False)

    def solve_R(self, X):
        return self._solve(X, False)

    def solve_Rt(self, X):
        return self._solve(X, True)

    def apply_inverse(self, X):
        """``(R Rᵀ)⁻¹ X``."""
        return self.solve_Rt(self.solve_R(X))


def default_precon(lap, mode="exact", path=None, seed=0):
    """Build a preconditioner factor.

    ``exact``: dense Cholesky of ``L + s hhᵀ`` (``n <= 5000``), κ = 1.
    ``identity``: ``R = I`` with ``s`` at the smallest nonzero eigenvalue,
    so κ equals the condition number of L on its image.
    ``external``: load a saved factor from ``path``.
    """
    n = lap.n
    if mode == "exact":
        if n > EXACT_PRECON_GUARD:
            raise ValueError(f"exact preconditioner limited to n <= {EXACT_PRECON_GUARD}")
        s = float(lap.L.diagonal().sum()) / max(n - 1, 1)
        A = lap.L.toarray() + s * np.outer(lap.h, lap.h)
        R = np.linalg.cholesky(0.5 * (A + A.T))
        return PreconFactor(R, 1.0, 1.0, s, "exact")
    if mode == "identity":
        lmax, lmin = _extreme_eigs(lap.L, lap.h, seed)
        pad = 1e-3
        return PreconFactor(sp.identity(n, format="csr"), lmin / (1 + pad), lmax * (1 + pad), lmin,
                            "identity")
    if mode == "external":
        if path is None:
            raise ValueError("external mode needs a factor path")
        return load_precon(path)
    raise ValueError(f"unknown preconditioner mode {mode!r}")


def _extreme_eigs(L, h, seed=0):
    kappa = condition_estimate(L, null_vec=h, seed=seed)
    lmax = float(top_eigenvalues(L, 1, tol=1e-10 * abs(L).max())[0])
    return lmax, lmax / kappa


def save_precon(path, precon):
    """Write R (Matrix Market) and the ``a``/``b`` sidecar ``<path>.bounds``."""
    path = Path(path)
    write_matrix(path, sp.csr_matrix(precon.R), comment=f"shift={precon.shift!r}")
    path.with_name(path.name + ".bounds").write_text(f"a {precon.a!r}\nb {precon.b!r}\n")


def load_precon(path):
    path = Path(path)
    side = path.with_name(path.name + ".bounds")
    try:
        R = read_matrix(path)
        head = path.read_text().splitlines()[:4]
        lines = side.read_text().split()
    except OSError as err:
        raise ValueError(f"cannot read preconditioner factor: {err}") from err
    shift = None
    for line in head:
        if line.startswith("%") and "shift=" in line:
            shift = float(line.split("shift=", 1)[1])
    vals = dict(zip(lines[0::2], lines[1::2]))
    if shift is None or "a" not in vals or "b" not in vals:
        raise ValueError("malformed preconditioner factor: missing shift or a/b bounds")
    R = sp.csr_matrix(R)
    if R.shape[0] != R.shape[1] or sp.triu(R, 1).nnz or np.any(R.diagonal() <= 0):
        raise ValueError("malformed preconditioner factor: need lower triangular, positive diagonal")
    a, b = float(vals["a"]), float(vals["b"])
    if not 0 < a <= b:
        raise ValueError("malformed preconditioner factor: need 0 < a <= b")
    return PreconFactor(R, a, b, shift, "external")


def pcg_cap(kappa, tol):
    return max(int(math.ceil(10 * math.sqrt(kappa) * math.log(1 / tol))), 10)


def pinv_matvec(lap, precon, x, tol=1e-10, max_iter=None):
    """``L⁺ x`` by preconditioned CG with the ``h`` mode projected out.

    ``x`` may be a vector or an ``n × m`` block.
    """
    if max_iter is None:
        max_iter = pcg_cap(precon.kappa, tol)
    h = lap.h

    def M(Rr):
        return precon.apply_inverse(Rr)

    try:
        return cg(lap.L, x, tol=tol, max_iter=max_iter, null_vec=h, precond=M)
    except ConvergenceError as err:
        raise ConvergenceError(f"PCG for L⁺x failed: {err}", err.best) from err


# ---------------------------------------------------------------------------
# Chebyshev


def cheb_log_bound(n, kappa):
    """Log of the closed-form relative error bound for degree-``n`` interpolation
    of ``x ↦ x^{-1/2}`` on ``[1, κ]``; ``inf`` where the bound is not valid."""
    sk = math.sqrt(kappa)
    if n < 1 or kappa <= 1:
        return math.inf
    inner = (kappa + sk * (2 - 8 * n) + 1) / (kappa * (1 - 2 * n) * n)
    if inner <= 0 or sk - 4 * n + 1 >= 0:
        return math.inf
    q = (sk + 1) ** 2 * (2 * n - 1) / ((kappa - 1) * n)
    lnum = math.log(sk - 1) + (n + 3.5) * math.log(2) + math.log(n) - n * math.log(q)
    lden = math.log(abs(sk - 4 * n + 1)) + 0.5 * math.log(inner)
    return lnum - lden


def cheb_degree_estimate(kappa, eps):
    """Closed-form degree from the Lambert-W solution of the asymptotic bound."""
    sk = math.sqrt(kappa)
    arg = eps ** 2 * (math.log(kappa - 1) - 2 * math.log(sk + 1)) / ((sk - 1) ** 2 * sk)
    w = scipy.special.lambertw(arg, -1).real
    return -w / (4 * math.log(sk + 1) - 2 * math.log(kappa - 1))


def cheb_degree(kappa, eps, n=None):
    """Smallest degree whose closed-form error bound is at most ``eps``.

    Starts from the Lambert-W estimate and refines by bisection on the exact
    bound. With ``n`` given the target is ``eps / sqrt(n)``.
    """
    if kappa < 1 or not 0 < eps < 1:
        raise ValueError("need kappa >= 1 and 0 < eps < 1")
    if kappa - 1 <= 1e-12:
        return 0
    e = eps / math.sqrt(n) if n else eps
    le = math.log(e)
    lo = int(math.floor((math.sqrt(kappa) + 1) / 4)) + 1
    hi = max(lo, int(math.ceil(cheb_degree_estimate(kappa, e))))
    while cheb_log_bound(hi, kappa) > le:
        lo = hi + 1
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if cheb_log_bound(mid, kappa) <= le:
            hi = mid
        else:
            lo = mid + 1
    return hi


def cheb_inv_sqrt_matvec(B, a, b, v, degree):
    """Approximate ``B^{-1/2} v`` by Chebyshev interpolation on ``[a, b]``.

    ``B`` is a :class:`LinearOperator` or callable acting on blocks; ``v`` may
    be a vector or block.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    V = np.asarray(v, dtype=float)
    if b <= a:
        return V / math.sqrt(a)
    apply = B.apply_block if isinstance(B, LinearOperator) else B
    vec = V.ndim == 1
    if vec:
        V = V[:, None]
    c = chebyshev.chebinterpolate(lambda x: ((a + b + (b - a) * x) / 2) ** -0.5, degree)

    def Bhat(X):
        return (2.0 * apply(X) - (a + b) * X) / (b - a)

    T0 = V
    out = c[0] * T0
    if degree >= 1:
        T1 = Bhat(V)
        out = out + c[1] * T1
        for ck in c[2:]:
            T0, T1 = T1, 2.0 * Bhat(T1) - T0
            out = out + ck * T1
    return out[:, 0] if vec else out


def laplacian_operators(lap, precon, pcg_tol=1e-10, cheb_eps=1e-8):
    """Matrix-free ``K = L⁺`` and its factor ``C`` as a :class:`FactoredOperator`."""
    n = lap.n
    h = lap.h
    s = precon.shift

    def kmul(X):
        return pinv_matvec(lap, precon, X, tol=pcg_tol)

    def bmul(X):
        Y = precon.solve_Rt(X)
        Y = lap.L @ Y + s * np.outer(h, h @ Y)
        return precon.solve_R(Y)

    degree = 0 if precon.b <= precon.a else cheb_degree(precon.kappa, cheb_eps)

    def cmul(X):
        Y = precon.solve_Rt(cheb_inv_sqrt_matvec(bmul, precon.a, precon.b, X, degree))
        return Y - np.outer(h, h @ Y)

    def ctmul(X):
        Y = X - np.outer(h, h @ X)
        return cheb_inv_sqrt_matvec(bmul, precon.a, precon.b, precon.solve_R(Y), degree)

    k_op = LinearOperator((n, n), kmul, kmul)
    c_op = LinearOperator((n, n), cmul, ctmul)
    return FactoredOperator(k_op, c_op, exact=degree == 0)


# ---------------------------------------------------------------------------
# objective


def _as_dense_k(lap_or_K):
    if isinstance(lap_or_K, RescaledLaplacian):
        return pinv_dense(lap_or_K), lap_or_K.h
    return np.asarray(lap_or_K, dtype=float), None


def laplacian_objective_eval(lap_or_K, I, h=None):
    """Inverse-Laplacian objective of a nonempty index set.

    ``Tr[(K²)_II K_II⁻¹] - (1 + h_Iᵀ K_II⁻¹ (K²)_II K_II⁻¹ h_I) / (h_Iᵀ K_II⁻¹ h_I)``
    with ``K = L⁺``.
    """
    K, h0 = _as_dense_k(lap_or_K)
    h = h0 if h is None else np.asarray(h, dtype=float)
    I = [int(i) for i in I]
    if not I:
        raise ValueError("index set must be nonempty")
    KnI = K[:, I]
    KII = KnI[I]
    try:
        cf = scipy.linalg.cho_factor(KII, lower=True)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(f"singular K[I, I] for I={I}") from err
    K2 = KnI.T @ KnI
    X = scipy.linalg.cho_solve(cf, K2)
    u = scipy.linalg.cho_solve(cf, h[I])
    tau = float(h[I] @ u)
    return float(np.trace(X) - (1.0 + u @ K2 @ u) / tau)


def complement_trace(L, I):
    """``Tr[(L[Ī, Ī])⁻¹]`` with ``Ī`` the complement of ``I``."""
    L = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
    keep = np.setdiff1d(np.arange(L.shape[0]), np.asarray(list(I), dtype=int))
    if keep.size == 0:
        return 0.0
    A = L[np.ix_(keep, keep)]
    return float(np.trace(scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), np.eye(keep.size))))


# ---------------------------------------------------------------------------
# selection


class _LapState:
    """Cholesky state plus the rank-one correction terms ``y``, ``g``, ``c``."""

    def __init__(self, n, k, d, w, h):
        self.chol = CholeskyState.empty(n, k, d, w)
        self.h = h
        self.y = h.copy()
        self.g = 0.0
        self.c = np.zeros(n)

    @property
    def t(self):
        return self.chol.t

    def khat_diag(self):
        if self.t == 0:
            return self.h ** 2
        return self.chol.d + self.y ** 2 / self.g

    def exact_scores(self):
        d, w, y, g = self.chol.d, self.chol.w, self.y, self.g
        if self.t == 0:
            return -d / self.h ** 2
        num = w + 2.0 * y * self.c / g + (y @ y) * y * y / g ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            # selected indices give 0/0; callers mask them out
            return num / (d + y * y / g)

    def gain(self, j, col, r):
        if self.t == 0:
            return -col[j] / self.h[j] ** 2
        y, g = self.y, self.g
        kh = r + y * (y[j] / g)
        return float(kh @ kh) / (r[j] + y[j] ** 2 / g)

    def add(self, j, r, Kf=None):
        st = self.chol
        t = st.t
        S_old = st.S[:, :t]
        f = st.add(j, r)
        tau = float(st.U[t] @ self.h)
        if Kf is not None:
            q = Kf - S_old @ (S_old.T @ f)
            ff = float(f @ f)
            self.c += -tau * q - float(f @ self.y) * f + tau * ff * f
            st.w += ff * f * f - 2.0 * f * q
            st.w[j] = 0.0
        self.y -= tau * f
        self.g += tau * tau
        return f


def _lap_candidates(state, guard):
    st = state.chol
    ok = np.ones(st.n, dtype=bool)
    if state.t > 0:
        ok = (st.d >= guard * st.diag0) & (st.d > 0)
    ok[st.selected] = False
    return ok


def _lap_run(K, h, k, chooser, method, need_w, seed=None, guard=PIVOT_GUARD, allow_singular=False):
    K = np.asarray(K, dtype=float)
    h = np.asarray(h, dtype=float)
    n = K.shape[0]
    if k > n:
        raise ValueError("k cannot exceed n")
    if n > DENSE_GUARD:
        raise ValueError(f"dense selection limited to n <= {DENSE_GUARD}")
    d = np.diag(K).copy()
    w = np.einsum("ij,ij->j", K, K) if need_w else None
    state = _LapState(n, k, d, w, h)
    idx, gains, diag = [], [], {}
    for _ in range(k):
        ok = _lap_candidates(state, guard)
        j = chooser(state, ok)
        if j is None:
            diag["early_stop"] = f"all candidates excluded after {state.t} selections"
            break
        col = K[:, j]
        r = state.chol.residual_column(j, col)
        if state.t > 0 and not r[j] > guard * col[j]:
            if not allow_singular:
                diag["early_stop"] = f"pivot guard hit at index {j}"
                break
            idx.append(j)
            gains.append(0.0)
            diag["dependent_picks"] = diag.get("dependent_picks", 0) + 1
            continue
        gains.append(state.gain(j, col, r))
        f_kf = None
        if need_w:
            f = r / math.sqrt(r[j])
            f_kf = K @ f
        state.add(j, r, f_kf)
        idx.append(j)
    res = _result(idx, gains, float(np.trace(K)), method, seed=seed, diagnostics=diag)
    object.__setattr__(res, "diagnostics", {**res.diagnostics, "state": state})
    return res


def nuclear_max_laplacian_exact(K, h, k, guard=PIVOT_GUARD):
    """Greedy maximization of the inverse-Laplacian objective with dense ``K = L⁺``."""

    def choose(state, ok):
        if not ok.any():
            return None
        sc = np.full(ok.size, -np.inf)
        sc[ok] = state.exact_scores()[ok]
        return argmax_lowest(sc)

    return _lap_run(K, h, k, choose, "nuclear", True, guard=guard)


def laplacian_select(K, h, k, method, seed=0, guard=PIVOT_GUARD):
    """Inverse-Laplacian selection by method name.

    The diagonal baselines use the diagonal of the limiting Schur complement
    of ``K + hhᵀ/γ`` (γ → 0): ``h²`` for the first pick, then
    ``Diag(K̃) + y² / g``.
    """
    if method == "nuclear":
        return nuclear_max_laplacian_exact(K, h, k, guard)
    rng = make_rng(seed)
    if method == "uniform":
        order = iter(rng.permutation(len(h))[:k].tolist())
        return _lap_run(K, h, k, lambda st, ok: next(order), "uniform", False, seed, guard, True)

    def weights(state, ok):
        return np.where(ok, np.maximum(state.khat_diag(), 0.0), 0.0)

    if method == "diag-max":
        def choose(state, ok):
            return argmax_lowest(np.where(ok, state.khat_diag(), -np.inf)) if ok.any() else None
        return _lap_run(K, h, k, choose, "diag-max", False, None, guard)
    if method == "diag-sample":
        def choose(state, ok):
            p = weights(state, ok)
            return int(rng.choice(p.size, p=p / p.sum())) if p.sum() > 0 else None
        return _lap_run(K, h, k, choose, "diag-sample", False, seed, guard)
    raise ValueError(f"unknown method {method!r}")


def nuclear_max_laplacian_matrix_free(lap, precon, k, z=200, seed=0, pcg_tol=1e-10,
                                      cheb_eps=1e-8, guard=PIVOT_GUARD, trace=None):
    """Matrix-free inverse-Laplacian selection.

    Scores combine sketched ``P K Z2`` and ``P C Z1`` with the exactly known
    rank-one terms; the pivot column ``K e_j`` comes from one PCG solve.
    ``trace`` (``Tr[L⁺]``) is only used to fill ``residual_trace``.
    """
    ops = laplacian_operators(lap, precon, pcg_tol, cheb_eps)
    n = lap.n
    h = lap.h
    rng = make_rng(seed)
    state = _LapState(n, k, np.zeros(n), None, h)
    exhausted = np.zeros(n, dtype=bool)
    idx, gains, diag = [], [], {"rejected_pivots": 0}
    for _ in range(k):
        est = _laplacian_scores(state, ops, z, rng)
        ok = ~exhausted
        ok[state.chol.selected] = False
        if state.t > 0 and guard > 0:
            ok &= est.denominator_resid >= guard * est.base
        j = None
        while ok.any():
            sc = np.full(n, -np.inf)
            sc[ok] = est.scores[ok]
            cand = argmax_lowest(sc)
            col = ops.column(cand)
            r = state.chol.residual_column(cand, col)
            if state.t > 0 and guard > 0 and not r[cand] > guard * col[cand]:
                exhausted[cand] = True
                ok[cand] = False
                diag["rejected_pivots"] += 1
                continue
            j = cand
            break
        if j is None:
            diag["early_stop"] = f"all candidates excluded after {state.t} selections"
            break
        gains.append(state.gain(j, col, r))
        state.add(j, r)
        idx.append(j)
    tr = float("nan") if trace is None else float(trace)
    res = _result(idx, gains, tr, "nuclear-mf", seed=seed, z=z, diagnostics=diag)
    object.__setattr__(res, "diagnostics", {**res.diagnostics, "state": state})
    return res


@dataclass(frozen=True)
class _LapEstimate:
    scores: np.ndarray
    denominator_resid: np.ndarray
    base: np.ndarray


def _laplacian_scores(state, ops, z, rng):
    h = state.h
    n = h.size
    st = state.chol
    D = ops.c_op.apply_block(rng.standard_normal((ops.c_op.in_dim, z)))
    base = np.einsum("ij,ij->i", D, D) / z
    if state.t == 0:
        return _LapEstimate(-base / h ** 2, base, base)
    Z2 = rng.standard_normal((n, z))
    N = ops.k_op.apply_block(Z2)
    PD = st.project(D)
    dres = np.einsum("ij,ij->i", PD, PD) / z
    y, g = state.y, state.g
    M = st.project(N) + np.outer(y / g, (y - h) @ Z2)
    num = np.einsum("ij,ij->i", M, M) / z + y * y / g ** 2
    den = dres + y * y / g
    return _LapEstimate(num / den, dres, base)
