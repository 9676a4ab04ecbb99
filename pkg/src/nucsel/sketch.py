"""Randomized diagonal estimation and matrix-free selection.

Only products with K and with a factor C (``K = C Cᵀ``) are used. The
residual diagonals ``Diag(K̃²)`` and ``Diag(K̃)`` are estimated from the row
norms of the projected sketches ``P K Z2`` and ``P C Z1`` where
``P = I - K[:, I] K[I, I]⁻¹ 𝕀[I, :]``.
"""

from dataclasses import dataclass

import numpy as np

from .linops import MatrixOperator, aslinop
from .select import (PIVOT_GUARD, CholeskyState, NumericalBreakdown, _result, argmax_lowest,
                     make_rng)


@dataclass(frozen=True)
class ScoreEstimate:
    """Sketched estimates of ``Diag(K̃²)`` (numerator) and ``Diag(K̃)`` (denominator).

    ``base`` holds the unprojected estimate of ``Diag(K)`` from the same
    sketch, used for the relative pivot guard.
    """

    numerator: np.ndarray | None
    denominator: np.ndarray
    base: np.ndarray
    z: int


def estimate_diag(y_op, z, seed):
    """Unbiased estimate of ``Diag(Y Yᵀ)`` from ``z`` Gaussian probes."""
    y_op = aslinop(y_op)
    if z < 1:
        raise ValueError("z must be positive")
    Z = make_rng(seed).standard_normal((y_op.in_dim, z))
    Y = y_op.apply_block(Z)
    return np.einsum("ij,ij->i", Y, Y) / z


def _gram_root(ops):
    # M with M Mᵀ = CᵀC, cached on the operator
    cache = ops.c_op.__dict__
    if "_gram_root" not in cache:
        C = ops.c_op.matrix
        G = np.asarray(C.T @ C)
        if hasattr(G, "toarray"):
            G = G.toarray()
        lam, V = np.linalg.eigh(0.5 * (G + G.T))
        cache["_gram_root"] = V * np.sqrt(np.maximum(lam, 0.0))
    return cache["_gram_root"]


def _dense_factor(ops):
    c = ops.c_op
    return (ops.exact and isinstance(c, MatrixOperator) and isinstance(c.matrix, np.ndarray)
            and c.matrix.shape[1] < c.matrix.shape[0])


def draw_sketches(ops, z, rng, numerator=True):
    """Return ``(N, D)`` = ``(K Z2, C Z1)`` for fresh Gaussian blocks.

    For an explicit thin dense factor the block ``Cᵀ Z2`` is drawn directly
    from its distribution ``N(0, CᵀC)``, so both sketches cost a single
    product with C.
    """
    m = ops.c_op.in_dim
    Z1 = rng.standard_normal((m, z))
    if not numerator:
        return None, ops.c_op.apply_block(Z1)
    if _dense_factor(ops):
        W = _gram_root(ops) @ rng.standard_normal((m, z))
        both = ops.c_op.apply_block(np.hstack([W, Z1]))
        return both[:, :z], both[:, z:]
    Z2 = rng.standard_normal((ops.n, z))
    return ops.k_op.apply_block(Z2), ops.c_op.apply_block(Z1)


def randomized_scores(state, ops, z, seed_or_rng, numerator=True):
    """Sketched residual diagonals for the current selection state."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    N, D = draw_sketches(ops, z, rng, numerator)
    base = np.einsum("ij,ij->i", D, D) / z
    PD = state.project(D)
    den = np.einsum("ij,ij->i", PD, PD) / z
    num = None
    if numerator:
        PN = state.project(N)
        num = np.einsum("ij,ij->i", PN, PN) / z
    return ScoreEstimate(num, den, base, z)


def _mf_run(ops, k, z, seed, method, score_fn, guard=PIVOT_GUARD):
    n = ops.n
    if k > n:
        raise ValueError("k cannot exceed n")
    if z < 1:
        raise ValueError("z must be positive")
    rng = make_rng(seed)
    state = CholeskyState.empty(n, k, np.zeros(n))
    exhausted = np.zeros(n, dtype=bool)
    idx, gains, diag = [], [], {"rejected_pivots": 0}
    trace = None
    for _ in range(k):
        est = randomized_scores(state, ops, z, rng, numerator=method == "nuclear")
        ok = ~exhausted
        ok[state.selected] = False
        if guard > 0:
            ok &= est.denominator >= guard * est.base
        ok &= est.denominator > 0
        j = None
        while ok.any():
            cand = score_fn(est, ok, rng)
            col = ops.column(cand)
            r = state.residual_column(cand, col)
            p = r[cand]
            if guard > 0 and not p > guard * col[cand]:
                exhausted[cand] = True
                ok[cand] = False
                diag["rejected_pivots"] += 1
                continue
            if not p > 0:
                raise NumericalBreakdown(f"nonpositive pivot {p:.3e} at index {cand}")
            j = cand
            break
        if j is None:
            diag["early_stop"] = f"all candidates excluded after {state.t} selections"
            break
        gains.append(float(r @ r) / p)
        state.add(j, r)
        idx.append(j)
    if trace is None:
        trace = _trace(ops)
    res = _result(idx, gains, trace, method + "-mf", seed=seed, z=z, diagnostics=diag)
    object.__setattr__(res, "diagnostics", {**res.diagnostics, "state": state})
    return res


def _trace(ops):
    if getattr(ops, "trace", None) is not None:
        return float(ops.trace)
    c = ops.c_op
    if isinstance(c, MatrixOperator):
        C = c.matrix
        return float(C.multiply(C).sum()) if hasattr(C, "multiply") else float(np.sum(C * C))
    return float("nan")


def nuclear_max_matrix_free(ops, k, z=200, seed=0, guard=PIVOT_GUARD):
    """Matrix-free nuclear maximization.

    Each step draws fresh sketches, picks the largest estimated ratio
    ``Diag(K̃²)/Diag(K̃)``, then updates the factor with one exact product
    ``K e_j``. Recorded gains are exact.
    """

    def score(est, ok, rng):
        sc = np.full(ok.size, -np.inf)
        sc[ok] = est.numerator[ok] / est.denominator[ok]
        return argmax_lowest(sc)

    return _mf_run(ops, k, z, seed, "nuclear", score, guard)


def diagonal_max_matrix_free(ops, k, z=200, seed=0, guard=PIVOT_GUARD):
    def score(est, ok, rng):
        return argmax_lowest(np.where(ok, est.denominator, -np.inf))

    return _mf_run(ops, k, z, seed, "diag-max", score, guard)


def diagonal_sample_matrix_free(ops, k, z=200, seed=0, guard=PIVOT_GUARD):
    def score(est, ok, rng):
        p = np.where(ok, est.denominator, 0.0)
        return int(rng.choice(p.size, p=p / p.sum()))

    return _mf_run(ops, k, z, seed, "diag-sample", score, guard)
