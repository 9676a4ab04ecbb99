"""CUR decomposition by independent row and column nuclear selection.

Rows are chosen as columns of ``A Aᵀ`` and columns as columns of ``Aᵀ A``;
neither Gram matrix is formed in matrix-free mode. With the selection
factors (``S``, ``U``) of both sides, ``CUR = Q_C Q_Cᵀ A Q_R Q_Rᵀ`` where
``Q_C = A[:, J] U_C[:, J]ᵀ`` and ``Q_Rᵀ = U_R[:, I] A[I, :]`` have orthonormal
columns/rows, which makes the Frobenius error computable from a small
``k_r × k_c`` core.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linops import factored_from_matrix
from .select import SelectionResult, objective_eval, select
from .sketch import (diagonal_max_matrix_free, diagonal_sample_matrix_free,
                     nuclear_max_matrix_free)

ASSEMBLY_GUARD = 10**6


@dataclass(frozen=True)
class CURResult:
    """Selected rows/columns, selection factors and the exact Frobenius error."""

    row_indices: np.ndarray
    col_indices: np.ndarray
    S_R: np.ndarray
    U_R: np.ndarray
    S_C: np.ndarray
    U_C: np.ndarray
    frobenius_error: float
    step_errors: np.ndarray
    row_result: SelectionResult
    col_result: SelectionResult
    norm_A: float

    def core(self, A):
        """``S_Rᵀ A[:, J] U_C[:, J]ᵀ``, the orthonormal-basis coefficients of CUR."""
        return _core(A, self.S_R, self.U_C, self.col_indices)

    def assemble(self, A, guard=ASSEMBLY_GUARD):
        """Dense ``C U R`` (size-guarded)."""
        m, n = A.shape
        if m * n > guard:
            raise ValueError("dense assembly exceeds the size guard")
        A = _dense(A)
        J, I = list(self.col_indices), list(self.row_indices)
        QC = A[:, J] @ self.U_C[:, J].T
        QRt = self.U_R[:, I] @ A[I, :]
        return QC @ (QC.T @ A @ QRt.T) @ QRt


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _core(A, S_R, U_C, J):
    AJ = A[:, list(J)]
    AJ = AJ.toarray() if sp.issparse(AJ) else np.asarray(AJ)
    return S_R.T @ (AJ @ U_C[:, list(J)].T)


def gram_operators(A):
    """``(AᵀA with C = Aᵀ, AAᵀ with C = A)`` as factored operators."""
    A = sp.csr_matrix(A, dtype=float) if sp.issparse(A) else np.asarray(A, dtype=float)
    if (A.nnz if sp.issparse(A) else np.count_nonzero(A)) == 0:
        raise ValueError("A must be nonzero")
    return factored_from_matrix(A.T.tocsr() if sp.issparse(A) else A.T), factored_from_matrix(A)


def _frob2(A):
    if sp.issparse(A):
        return math.fsum(np.asarray(A.data, dtype=float) ** 2)
    return math.fsum(np.ravel(np.asarray(A, dtype=float) ** 2))


def _select_side(G_explicit, ops, k, mode, method, z, seed):
    if mode == "deterministic" or method == "uniform":
        return select(G_explicit if mode == "deterministic" else ops, k, method, seed)
    if mode != "matrix_free":
        raise ValueError(f"unknown mode {mode!r}")
    if method == "nuclear":
        return nuclear_max_matrix_free(ops, k, z, seed)
    if method == "diag-max":
        return diagonal_max_matrix_free(ops, k, z, seed)
    if method == "diag-sample":
        return diagonal_sample_matrix_free(ops, k, z, seed)
    raise ValueError(f"unknown method {method!r}")


def _effective_counts(res):
    sel = set(res.diagnostics["state"].selected)
    return np.cumsum([i in sel for i in res.indices]).astype(int)


def cur_decompose(A, k_rows, k_cols, mode="matrix_free", z=200, seed=0, method="nuclear"):
    """CUR decomposition with rows/columns chosen by ``method``.

    Parameters
    ----------
    A : array or sparse matrix, shape (m, n)
    k_rows, k_cols : int
        Numbers of rows and columns to select (may differ).
    mode : {"matrix_free", "deterministic"}
        Matrix-free mode only multiplies by A and Aᵀ.
    z : int
        Sketch width for matrix-free mode.
    seed : int
        Row side uses ``seed``, column side ``seed + 1``.
    """
    A = sp.csr_matrix(A, dtype=float) if sp.issparse(A) else np.asarray(A, dtype=float)
    m, n = A.shape
    if k_rows > m or k_cols > n:
        raise ValueError("requested rank exceeds matrix size")
    col_ops, row_ops = gram_operators(A)
    if mode == "deterministic":
        Gr, Gc = A @ A.T, A.T @ A
        if sp.issparse(A):
            Gr, Gc = sp.csc_matrix(Gr), sp.csc_matrix(Gc)
    else:
        Gr = Gc = None
    rres = _select_side(Gr, row_ops, k_rows, mode, method, z, seed)
    cres = _select_side(Gc, col_ops, k_cols, mode, method, z, seed + 1)
    rst, cst = rres.diagnostics["state"], cres.diagnostics["state"]
    S_R, U_R = rst.S[:, :rst.t].copy(), rst.U[:rst.t].copy()
    S_C, U_C = cst.S[:, :cst.t].copy(), cst.U[:cst.t].copy()
    I = np.asarray(rst.selected, dtype=int)
    J = np.asarray(cst.selected, dtype=int)
    norm2 = _frob2(A)
    M = _core(A, S_R, U_C, J) if I.size and J.size else np.zeros((I.size, J.size))
    M2 = M * M
    er, ec = _effective_counts(rres), _effective_counts(cres)
    steps = max(rres.k, cres.k)
    errs = np.empty(steps)
    for t in range(steps):
        a = er[min(t, er.size - 1)] if er.size else 0
        b = ec[min(t, ec.size - 1)] if ec.size else 0
        errs[t] = math.sqrt(max(norm2 - math.fsum(M2[:a, :b].ravel()), 0.0))
    res = CURResult(np.asarray(rres.indices), np.asarray(cres.indices), S_R, U_R, S_C, U_C,
                    0.0, errs, rres, cres, math.sqrt(norm2))
    err2 = norm2 - math.fsum(M2.ravel())
    if err2 < 1e-10 * norm2 and m * n <= ASSEMBLY_GUARD:
        # cancellation regime: assemble the residual directly
        err = float(np.linalg.norm(_dense(A) - res.assemble(A)))
    else:
        err = math.sqrt(max(err2, 0.0))
    if errs.size:
        errs[-1] = err
    object.__setattr__(res, "frobenius_error", err)
    return res


def cur_error_direct(A, I, J, U=None):
    """``||A - C U R||_F`` with ``U = C⁺ A R⁺`` unless given explicitly."""
    A = _dense(A)
    C, R = A[:, list(J)], A[list(I), :]
    if U is None:
        U = np.linalg.pinv(C) @ A @ np.linalg.pinv(R)
    return float(np.linalg.norm(A - C @ U @ R))


def cx_error(A, J):
    """``min_B ||A[:, J] B - A||_F²`` as ``Tr[AᵀA] - objective(AᵀA, J)``."""
    J = list(J)
    K = A.T @ A
    K = sp.csc_matrix(K) if sp.issparse(K) else np.asarray(K)
    tr = float(K.diagonal().sum())
    if not J:
        return tr
    return max(tr - objective_eval(K, J), 0.0)


def triangle_bound_check(result, A=None, tol=1e-8):
    """``||A - CUR||_F <= sqrt(E_row) + sqrt(E_col)`` (with ``tol·||A||_F`` slack)."""
    e_row = max(float(result.row_result.residual_trace[-1]), 0.0) if result.row_result.k else result.norm_A ** 2
    e_col = max(float(result.col_result.residual_trace[-1]), 0.0) if result.col_result.k else result.norm_A ** 2
    return bool(result.frobenius_error <= math.sqrt(e_row) + math.sqrt(e_col) + tol * result.norm_A)
