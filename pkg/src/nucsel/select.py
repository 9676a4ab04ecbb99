"""Column selection on explicit SPSD matrices.

All selectors share one pivoted-Cholesky engine. After ``t`` selections the
state holds ``S`` (n×t) with ``S Sᵀ = K[:, I] K[I, I]⁻¹ K[I, :]`` and ``U``
(t×n, rows supported on ``I``) with ``S = K Uᵀ``; ``d`` and ``w`` track the
diagonals of the residual ``K̃`` and of ``K̃²``.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linops import FactoredOperator, LinearOperator, MatrixOperator, diag_and_diag_sq

PIVOT_GUARD = 1e-8
TIE_RTOL = 1e-12


class NumericalBreakdown(ArithmeticError):
    pass


class SingularSubsetError(np.linalg.LinAlgError):
    def __init__(self, msg, index):
        super().__init__(msg)
        self.index = index


def make_rng(seed):
    """Seeded counter-based generator used by every stochastic routine."""
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# matrix access


class KernelAccess:
    """Uniform column/matvec access to K.

    Accepts a dense array, a sparse matrix, a :class:`FactoredOperator` or a
    bare symmetric :class:`LinearOperator`.
    """

    def __init__(self, K):
        self.raw = K
        if isinstance(K, FactoredOperator):
            self.op = K.k_op
            self.n = K.n
            self.mat = None
        elif isinstance(K, LinearOperator):
            self.op = K
            self.n = K.in_dim
            self.mat = K.matrix if isinstance(K, MatrixOperator) else None
        else:
            self.mat = sp.csc_matrix(K) if sp.issparse(K) else np.asarray(K, dtype=float)
            if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
                raise ValueError("K must be square")
            self.n = self.mat.shape[0]
            self.op = None

    def column(self, j):
        if self.mat is not None:
            c = self.mat[:, [j]]
            return np.asarray(c.toarray() if sp.issparse(c) else c).ravel().astype(float)
        e = np.zeros(self.n)
        e[j] = 1.0
        return self.op.apply(e)

    def matvec(self, x):
        if self.mat is not None:
            return np.asarray(self.mat @ x).ravel()
        return self.op.apply(x)

    def diags(self):
        if self.mat is not None:
            return diag_and_diag_sq(self.mat)
        return diag_and_diag_sq(self.raw if isinstance(self.raw, FactoredOperator)
                                else FactoredOperator(self.op, self.op))

    def dense(self):
        if self.mat is not None:
            return self.mat.toarray() if sp.issparse(self.mat) else self.mat
        return self.op.apply_block(np.eye(self.n))


# ---------------------------------------------------------------------------
# state and results


@dataclass
class CholeskyState:
    """Incremental state of pivoted-Cholesky style selection."""

    n: int
    k_max: int
    U: np.ndarray
    S: np.ndarray
    d: np.ndarray
    w: np.ndarray | None
    diag0: np.ndarray
    selected: list = field(default_factory=list)

    @classmethod
    def empty(cls, n, k_max, d, w=None):
        d = np.asarray(d, dtype=float).copy()
        return cls(n, k_max, np.zeros((k_max, n)), np.zeros((n, k_max)), d,
                   None if w is None else np.asarray(w, dtype=float).copy(), d.copy())

    @property
    def t(self):
        return len(self.selected)

    def residual_column(self, j, col):
        """``K̃ e_j`` from the raw column ``K e_j``."""
        t = self.t
        return col - self.S[:, :t] @ self.S[j, :t]

    def project(self, X):
        """Apply ``I - K[:, I] K[I, I]⁻¹ 𝕀[I, :]`` to a block (rows indexed by n)."""
        t = self.t
        if t == 0:
            return X
        I = self.selected
        return X - self.S[:, :t] @ (self.U[:t, I] @ X[I])

    def add(self, j, r):
        """Append pivot ``j`` given its residual column ``r = K̃ e_j``."""
        t = self.t
        if t >= self.k_max:
            raise IndexError("state is full")
        p = r[j]
        if not p > 0:
            raise NumericalBreakdown(f"nonpositive pivot {p:.3e} at index {j}")
        sq = math.sqrt(p)
        u = -(self.S[j, :t] @ self.U[:t])
        u[j] += 1.0
        self.U[t] = u / sq
        f = r / sq
        self.S[:, t] = f
        self.d -= f * f
        self.d[j] = 0.0
        self.selected.append(int(j))
        return f


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection run.

    ``objective[t]`` is the objective after ``t + 1`` picks and
    ``residual_trace = trace - objective``.
    """

    indices: np.ndarray
    gains: np.ndarray
    objective: np.ndarray
    residual_trace: np.ndarray
    trace: float
    method: str
    seed: int | None = None
    z: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.indices)


def _result(indices, gains, trace, method, seed=None, z=None, diagnostics=None, offset=0.0):
    gains = np.asarray(gains, dtype=float)
    obj = offset + np.cumsum(gains) if offset else np.cumsum(gains)
    return SelectionResult(np.asarray(indices, dtype=int), gains, obj, trace - obj, float(trace),
                           method, seed, z, dict(diagnostics or {}))


def argmax_lowest(scores):
    """Index of the maximum, breaking near-ties (1e-12 rel.) toward lower indices."""
    best = np.max(scores)
    if not np.isfinite(best):
        return int(np.argmax(scores))
    return int(np.flatnonzero(scores >= best - TIE_RTOL * abs(best))[0])


def candidates(state, guard=PIVOT_GUARD):
    ok = (state.d >= guard * state.diag0) & (state.d > 0)
    ok[state.selected] = False
    return ok


# ---------------------------------------------------------------------------
# objective


def _chol_checked(A, idx, tol):
    # plain Cholesky that reports which pivot failed the relative test
    m = A.shape[0]
    L = np.zeros_like(A)
    for i in range(m):
        v = A[i:, i] - L[i:, :i] @ L[i, :i]
        if not v[0] > tol * A[i, i] or A[i, i] <= 0:
            raise SingularSubsetError(f"singular principal submatrix: pivot at index {idx[i]} "
                                      f"({v[0]:.3e})", idx[i])
        L[i:, i] = v / math.sqrt(v[0])
    return L


def objective_eval(K, I, pivot_tol=PIVOT_GUARD):
    """Nyström objective ``Tr[K[:, I] K[I, I]⁻¹ K[I, :]]``.

    Raises :class:`SingularSubsetError` naming the first index (in the
    given order) whose Cholesky pivot falls below ``pivot_tol·K_jj``.
    """
    I = [int(i) for i in I]
    if not I:
        return 0.0
    acc = KernelAccess(K)
    KnI = np.column_stack([acc.column(i) for i in I])
    L = _chol_checked(KnI[I], I, pivot_tol)
    Y = np.linalg.solve(L, KnI.T)
    return float(np.sum(Y * Y))


def schur_complement(K, I):
    K = np.asarray(K, dtype=float)
    I = list(I)
    if not I:
        return K.copy()
    return K - K[:, I] @ np.linalg.solve(K[np.ix_(I, I)], K[I])


# ---------------------------------------------------------------------------
# engine


def _run(K, k, chooser, method, need_w, seed=None, guard=PIVOT_GUARD, debug=False,
         allow_singular=False):
    acc = KernelAccess(K)
    n = acc.n
    if k > n:
        raise ValueError("k cannot exceed n")
    d, w = acc.diags() if need_w else (_diag_only(acc), None)
    state = CholeskyState.empty(n, k, d, w)
    trace = float(np.sum(state.diag0))
    idx, gains, diag = [], [], {}
    skipped = 0
    for _ in range(k):
        j = chooser(state)
        if j is None:
            diag["early_stop"] = f"all candidates excluded after {state.t} selections"
            break
        col = acc.column(j)
        r = state.residual_column(j, col)
        p = r[j]
        if allow_singular and not p > guard * max(col[j], 0.0):
            # dependent pick: contributes nothing, factor unchanged
            idx.append(j)
            gains.append(0.0)
            skipped += 1
            continue
        g = float(r @ r) / p
        S_old = state.S[:, :state.t].copy() if need_w else None
        f = state.add(j, r)
        if need_w:
            Kf = acc.matvec(f)
            q = Kf - S_old @ (S_old.T @ f)
            state.w += (f @ f) * f * f - 2.0 * f * q
            state.w[j] = 0.0
        idx.append(j)
        gains.append(g)
        if debug:
            exact = objective_eval(K, [i for i in idx if i in state.selected])
            diag.setdefault("debug_objective", []).append(exact)
    if skipped:
        diag["dependent_picks"] = skipped
    res = _result(idx, gains, trace, method, seed=seed, diagnostics=diag)
    object.__setattr__(res, "diagnostics", {**res.diagnostics, "state": state})
    return res


def _diag_only(acc):
    if acc.mat is not None:
        return np.asarray(acc.mat.diagonal(), dtype=float)
    return acc.diags()[0]


def nuclear_max(K, k, guard=PIVOT_GUARD, debug=False):
    """Greedy nuclear maximization (pivot on ``Diag(K̃²) / Diag(K̃)``)."""

    def choose(state):
        ok = candidates(state, guard)
        if not ok.any():
            return None
        sc = np.full(state.n, -np.inf)
        sc[ok] = state.w[ok] / state.d[ok]
        return argmax_lowest(sc)

    return _run(K, k, choose, "nuclear", True, guard=guard, debug=debug)


def diagonal_max(K, k, guard=PIVOT_GUARD):
    """Pivoted Cholesky with the largest residual diagonal as pivot."""

    def choose(state):
        ok = candidates(state, guard)
        if not ok.any():
            return None
        sc = np.where(ok, state.d, -np.inf)
        return argmax_lowest(sc)

    return _run(K, k, choose, "diag-max", False, guard=guard)


def diagonal_sample(K, k, seed, guard=PIVOT_GUARD):
    """Pivoted Cholesky with pivots drawn proportionally to the residual diagonal."""
    rng = make_rng(seed)

    def choose(state):
        ok = candidates(state, guard)
        p = np.where(ok, np.maximum(state.d, 0.0), 0.0)
        tot = p.sum()
        if not tot > 0:
            if state.t == 0:
                raise ValueError("diagonal has no positive mass")
            return None
        return int(rng.choice(state.n, p=p / tot))

    return _run(K, k, choose, "diag-sample", False, seed=seed, guard=guard)


def uniform_indices(n, k, seed):
    if k > n:
        raise ValueError("k cannot exceed n")
    return make_rng(seed).permutation(n)[:k]


def uniform_sample(K, k, seed, guard=PIVOT_GUARD):
    """Uniform k-subset without replacement; gains are objective increments."""
    n = KernelAccess(K).n
    order = iter(uniform_indices(n, k, seed).tolist())
    return _run(K, k, lambda state: next(order), "uniform", False, seed=seed, guard=guard,
                allow_singular=True)


def forced_selection(K, indices, method="forced", guard=PIVOT_GUARD):
    """Objective trajectory of a prescribed index order."""
    order = iter([int(i) for i in indices])
    return _run(K, len(indices), lambda state: next(order), method, False, guard=guard,
                allow_singular=True)


def naive_nuclear_max(K, k):
    """Reference greedy: evaluate the objective for every candidate each step."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    I, vals = [], []
    cur = 0.0
    for _ in range(k):
        best, bj = -np.inf, None
        for j in range(n):
            if j in I:
                continue
            try:
                v = objective_eval(K, I + [j])
            except SingularSubsetError:
                continue
            if v > best + TIE_RTOL * abs(best) if np.isfinite(best) else True:
                best, bj = v, j
        if bj is None:
            break
        I.append(bj)
        vals.append(best - cur)
        cur = best
    return I, np.array(vals)


def optimal_subset_bruteforce(K, s, max_subsets=10**6):
    """Exact maximizer of the objective over all s-subsets."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if math.comb(n, s) > max_subsets:
        raise ValueError(f"C({n},{s}) exceeds the enumeration guard")
    best, arg = -np.inf, None
    for I in itertools.combinations(range(n), s):
        try:
            v = objective_eval(K, I)
        except SingularSubsetError:
            continue
        if v > best + TIE_RTOL * abs(best) if np.isfinite(best) else True:
            best, arg = v, I
    if arg is None:
        raise SingularSubsetError("every subset is singular", None)
    return tuple(arg), float(best)


def select(K, k, method, seed=0):
    """Dispatch by method name (nuclear, diag-max, diag-sample, uniform)."""
    if method == "nuclear":
        return nuclear_max(K, k)
    if method == "diag-max":
        return diagonal_max(K, k)
    if method == "diag-sample":
        return diagonal_sample(K, k, seed)
    if method == "uniform":
        return uniform_sample(K, k, seed)
    raise ValueError(f"unknown method {method!r}")
