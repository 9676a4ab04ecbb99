"""Matrix and operator substrate.

Dense symmetric matrices are plain ``numpy`` arrays, sparse matrices are
``scipy.sparse`` CSR matrices, and everything matrix-free goes through the
small :class:`LinearOperator` wrapper defined here.
"""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

DEFAULT_BLOCK = 32


class ConvergenceError(RuntimeError):
    """Raised by iterative routines that hit their iteration cap.

    The best iterate found so far is kept in ``best``.
    """

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class LinearOperator:
    """Operator known only through (block) matrix-vector products.

    Parameters
    ----------
    shape : (int, int)
        ``(out_dim, in_dim)``.
    apply_block : callable
        Maps an ``(in_dim, m)`` array to an ``(out_dim, m)`` array.
    rapply_block : callable, optional
        Transpose action; needed when the operator is used as a factor ``C``.
    block_width : int or None
        Number of columns pushed through ``apply_block`` at a time. ``None``
        sends the whole block in one call.
    """

    def __init__(self, shape, apply_block, rapply_block=None, block_width=None):
        self.shape = (int(shape[0]), int(shape[1]))
        self._apply = apply_block
        self._rapply = rapply_block
        self.block_width = block_width

    @property
    def out_dim(self):
        return self.shape[0]

    @property
    def in_dim(self):
        return self.shape[1]

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.in_dim:
            raise ValueError(f"expected vector of length {self.in_dim}, got shape {x.shape}")
        return self._apply(x[:, None])[:, 0]

    def apply_block(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] != self.in_dim:
            raise ValueError(f"expected block with {self.in_dim} rows, got shape {X.shape}")
        w = self.block_width
        if w is None or X.shape[1] <= w:
            return self._apply(X)
        out = np.empty((self.out_dim, X.shape[1]))
        for i in range(0, X.shape[1], w):
            out[:, i:i + w] = self._apply(X[:, i:i + w])
        return out

    @property
    def T(self):
        if self._rapply is None:
            raise NotImplementedError("transpose action not available")
        return LinearOperator(self.shape[::-1], self._rapply, self._apply, self.block_width)

    def __matmul__(self, x):
        x = np.asarray(x)
        return self.apply(x) if x.ndim == 1 else self.apply_block(x)


class MatrixOperator(LinearOperator):
    """Operator backed by an explicit dense or sparse matrix."""

    def __init__(self, A):
        if sp.issparse(A):
            A = sp.csr_matrix(A)
        else:
            A = np.asarray(A, dtype=float)
            if A.ndim != 2:
                raise ValueError("matrix must be 2-D")
        self.matrix = A
        super().__init__(A.shape, self._mul, self._rmul)

    def _mul(self, X):
        return np.asarray(self.matrix @ X)

    def _rmul(self, X):
        return np.asarray(self.matrix.T @ X)


def aslinop(A):
    """Wrap an array, sparse matrix or operator as a :class:`LinearOperator`."""
    if isinstance(A, LinearOperator):
        return A
    return MatrixOperator(A)


def identity_op(n):
    return LinearOperator((n, n), lambda X: X.copy(), lambda X: X.copy())


@dataclass(frozen=True)
class FactoredOperator:
    """A symmetric operator K together with a factor C such that K = C Cᵀ.

    ``exact`` records whether the factorization holds to working precision
    or only approximately (e.g. a truncated Chebyshev factor). ``trace`` may
    carry ``Tr[K]`` when it is known without an explicit factor.
    """

    k_op: LinearOperator
    c_op: LinearOperator
    exact: bool = True
    trace: float | None = None

    @property
    def n(self):
        return self.k_op.out_dim

    def column(self, j):
        e = np.zeros(self.n)
        e[j] = 1.0
        return self.k_op.apply(e)


def factored_from_matrix(C):
    """Build ``K = C Cᵀ`` from an explicit factor without forming K."""
    c_op = aslinop(C)
    n = c_op.out_dim

    def kmul(X):
        return c_op.apply_block(c_op.T.apply_block(X))

    return FactoredOperator(LinearOperator((n, n), kmul, kmul), c_op, True)


class PanelOperator(LinearOperator):
    """Tall factor stored as dense row panels over groups of columns.

    Suited to factors whose columns have localized support (e.g. pivoted
    Cholesky factors of kernels with short length scales): each group of
    columns is kept as the dense block spanning its rows, so products run as
    a few mid-sized GEMMs instead of one large one.
    """

    def __init__(self, F, drop_tol=1e-16, max_cols=64, slack=1.5):
        F = np.asarray(F, dtype=float)
        n, r = F.shape
        mask = np.abs(F) > drop_tol * (np.abs(F).max() if F.size else 0.0)
        nz = mask.any(axis=0)
        lo = np.where(nz, np.argmax(mask, axis=0), 0)
        hi = np.where(nz, n - np.argmax(mask[::-1], axis=0), 0)
        width = np.maximum(hi - lo, 1)
        # group columns of similar support width, then sweep by start row
        order = np.lexsort((lo, np.floor(np.log2(width))))
        self.panels = []
        cur, a, b, wmax = [], 0, 0, 0
        for j in order:
            if not nz[j]:
                continue
            if cur:
                na, nb, nw = min(a, lo[j]), max(b, hi[j]), max(wmax, width[j])
                if len(cur) < max_cols and nb - na <= slack * nw + 16:
                    cur.append(j)
                    a, b, wmax = na, nb, nw
                    continue
                self._close(F, mask, a, b, cur)
            cur, a, b, wmax = [j], lo[j], hi[j], width[j]
        if cur:
            self._close(F, mask, a, b, cur)
        self.frobenius2 = float(sum(np.sum(B * B) for _, _, _, B in self.panels))
        super().__init__((n, r), self._mul, self._rmul)

    def _close(self, F, mask, a, b, cols):
        cols = np.asarray(cols)
        B = np.where(mask[a:b][:, cols], F[a:b][:, cols], 0.0)
        self.panels.append((int(a), int(b), cols, np.ascontiguousarray(B)))

    def _mul(self, X):
        out = np.zeros((self.shape[0], X.shape[1]))
        for a, b, cols, B in self.panels:
            out[a:b] += B @ X[cols]
        return out

    def _rmul(self, Y):
        out = np.zeros((self.shape[1], Y.shape[1]))
        for a, b, cols, B in self.panels:
            out[cols] = B.T @ Y[a:b]
        return out

    def todense(self):
        return self._mul(np.eye(self.shape[1]))


def panel_factored(F, drop_tol=1e-16, max_cols=64):
    """``K = C Cᵀ`` with C a :class:`PanelOperator` built from ``F``.

    Entries of ``F`` below ``drop_tol·max|F|`` are dropped; K is defined by
    the stored factor, so the pair stays exactly consistent.
    """
    c_op = PanelOperator(F, drop_tol, max_cols)
    n = c_op.out_dim

    def kmul(X):
        return c_op.apply_block(c_op.T.apply_block(X))

    return FactoredOperator(LinearOperator((n, n), kmul, kmul), c_op, True, c_op.frobenius2)


def check_dense_sym(K, psd=False, tol_psd=1e-10):
    """Validate a dense symmetric matrix and return it as a float array.

    Symmetry is checked exactly; with ``psd=True`` the smallest eigenvalue
    must be at least ``-tol_psd * ||K||_2``.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {K.shape}")
    if not np.array_equal(K, K.T):
        raise ValueError("matrix is not exactly symmetric")
    if psd and K.size:
        lam = np.linalg.eigvalsh(K)
        if lam[0] < -tol_psd * max(abs(lam[-1]), abs(lam[0])):
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    return K


def symmetrize(K):
    K = np.asarray(K, dtype=float)
    return 0.5 * (K + K.T)


def sparse_from_triplets(rows, cols, vals, shape):
    """Assemble a CSR matrix from triplets; duplicate entries are summed."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= shape[0] or cols.min() < 0 or cols.max() >= shape[1]):
        raise IndexError("triplet index out of range")
    A = sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    return A


def matvec(op, x):
    """Return ``op @ x`` for any supported operator type."""
    return aslinop(op).apply(x)


def diag_and_diag_sq(K):
    """Return ``(Diag(K), Diag(K²))`` for a symmetric matrix.

    ``Diag(K²)_j`` is the squared norm of column ``j``, so no product is formed.
    """
    if isinstance(K, FactoredOperator):
        return factored_diags(K)
    if sp.issparse(K):
        if K.shape[0] != K.shape[1]:
            raise ValueError("matrix must be square")
        K = sp.csc_matrix(K)
        return K.diagonal().astype(float), np.asarray(K.multiply(K).sum(axis=0)).ravel()
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("matrix must be square")
    return np.diag(K).copy(), np.einsum("ij,ij->j", K, K)


def factored_diags(ops):
    """Exact ``(Diag(K), Diag(K²))`` for ``K = C Cᵀ`` with an explicit factor."""
    c_op = ops.c_op
    if isinstance(c_op, MatrixOperator):
        C = c_op.matrix
        if sp.issparse(C):
            d = np.asarray(C.multiply(C).sum(axis=1)).ravel()
            G = (C.T @ C).toarray()
            w = np.asarray(C.multiply(C @ G).sum(axis=1)).ravel()
        else:
            d = np.einsum("ij,ij->i", C, C)
            w = np.einsum("ij,ij->i", C @ (C.T @ C), C)
        return d, w
    # fall back to probing with identity blocks
    n = ops.n
    d = np.empty(n)
    w = np.empty(n)
    for i in range(0, n, DEFAULT_BLOCK):
        E = np.zeros((n, min(DEFAULT_BLOCK, n - i)))
        E[np.arange(i, i + E.shape[1]), np.arange(E.shape[1])] = 1.0
        cols = ops.k_op.apply_block(E)
        d[i:i + E.shape[1]] = cols[np.arange(i, i + E.shape[1]), np.arange(E.shape[1])]
        w[i:i + E.shape[1]] = np.einsum("ij,ij->j", cols, cols)
    return d, w


def top_eigenvalues(op, r, tol=1e-8, max_iter=1000, seed=0):
    """Largest ``r`` eigenvalues of a symmetric operator by subspace iteration.

    Uses a block of ``r + 4`` vectors with Rayleigh-Ritz extraction at every
    step and stops once each of the top ``r`` Ritz values changed by less
    than ``tol`` since the previous iteration.
    """
    op = aslinop(op)
    n = op.in_dim
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    p = min(r + 4, n)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    prev = None
    for _ in range(max_iter):
        Y = op.apply_block(Q)
        H = Q.T @ Y
        lam, V = np.linalg.eigh(0.5 * (H + H.T))
        lam = lam[::-1]
        Q, _ = np.linalg.qr(Y @ V[:, ::-1])
        if prev is not None and np.all(np.abs(lam[:r] - prev[:r]) < tol):
            return lam[:r]
        prev = lam
    raise ConvergenceError(f"subspace iteration did not converge in {max_iter} iterations", prev[:r])


def _deflate(X, v):
    if v is None:
        return X
    return X - np.outer(v, v @ X) if X.ndim == 2 else X - v * (v @ X)


def cg(op, b, tol=1e-12, max_iter=None, null_vec=None, precond=None):
    """Conjugate gradients on a symmetric positive (semi)definite operator.

    ``b`` may be a block; each column is iterated independently. ``null_vec``
    (unit norm) is projected out of the right-hand side and every iterate.
    """
    op = aslinop(op)
    B = np.asarray(b, dtype=float)
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    B = _deflate(B, null_vec)
    n, m = B.shape
    max_iter = 10 * n if max_iter is None else max_iter
    M = precond if precond is not None else (lambda R: R)
    X = np.zeros_like(B)
    R = B.copy()
    bn = np.linalg.norm(B, axis=0)
    active = bn > 0
    Z = _deflate(M(R), null_vec)
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    it = 0
    res = np.zeros(m)
    while True:
        res = np.where(active, np.linalg.norm(R, axis=0) / np.where(bn > 0, bn, 1.0), 0.0)
        active = res > tol
        if not active.any():
            break
        if it >= max_iter:
            out = X[:, 0] if vec else X
            raise ConvergenceError(f"CG hit {max_iter} iterations, residual {res.max():.3e}", out)
        AP = op.apply_block(P)
        pap = np.einsum("ij,ij->j", P, AP)
        alpha = np.where(active & (pap > 0), rz / np.where(pap > 0, pap, 1.0), 0.0)
        X += P * alpha
        R -= AP * alpha
        X = _deflate(X, null_vec)
        R = _deflate(R, null_vec)
        Z = _deflate(M(R), null_vec)
        rz_new = np.einsum("ij,ij->j", R, Z)
        beta = np.where(active & (rz != 0), rz_new / np.where(rz != 0, rz, 1.0), 0.0)
        P = Z + P * beta
        rz = rz_new
        it += 1
    return X[:, 0] if vec else X


def condition_estimate(op, null_vec=None, rtol=1e-10, max_iter=5000, seed=0):
    """Estimate ``λ_max / λ_min⁺`` by power and inverse power iteration.

    Parameters
    ----------
    op : array, sparse matrix or LinearOperator
        Symmetric positive semidefinite.
    null_vec : array, optional
        Known null vector; it is deflated (normalized internally) before
        iterating so that the estimate refers to the image.
    """
    op = aslinop(op)
    n = op.in_dim
    v0 = None
    if null_vec is not None:
        v0 = np.asarray(null_vec, dtype=float)
        v0 = v0 / np.linalg.norm(v0)
    rng = np.random.default_rng(seed)

    def power(apply):
        x = _deflate(rng.standard_normal(n), v0)
        x /= np.linalg.norm(x)
        lam = 0.0
        for _ in range(max_iter):
            y = _deflate(apply(x), v0)
            new = float(x @ y)
            ny = np.linalg.norm(y)
            if ny == 0:
                return 0.0
            x = y / ny
            if abs(new - lam) <= rtol * abs(new):
                return new
            lam = new
        return lam

    lmax = power(op.apply)
    if lmax <= 0:
        raise ValueError("operator has no positive spectrum")
    if n - (v0 is not None) == 1:
        return 1.0

    def inv(x):
        try:
            return cg(op, x, tol=1e-13, max_iter=20 * n, null_vec=v0)
        except ConvergenceError as err:
            raise ValueError("operator appears singular beyond the declared null space") from err

    mu = power(inv)
    if mu <= 0 or not np.isfinite(mu):
        raise ValueError("operator appears singular beyond the declared null space")
    return lmax * mu


def read_matrix(path):
    """Read a Matrix Market file (coordinate → CSR, array → ndarray)."""
    A = scipy.io.mmread(str(path))
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=float)
    return np.asarray(A, dtype=float)


def write_matrix(path, A, comment="", symmetry=None):
    """Write a dense (array format) or sparse (coordinate format) matrix."""
    if sp.issparse(A):
        scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, symmetry=symmetry)
    else:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        scipy.io.mmwrite(str(path), A, comment=comment, field="real", symmetry=symmetry)


def read_vector(path):
    return np.asarray(read_matrix(path)).ravel()


def write_vector(path, v, comment=""):
    write_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1), comment=comment)


def dense(A):
    """Return a dense ndarray copy of an array or sparse matrix."""
    return A.toarray() if sp.issparse(A) else np.array(A, dtype=float)


def solve_psd(A, B):
    """Solve with an SPD matrix via Cholesky."""
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), B)
