import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from nucsel.linops import (ConvergenceError, FactoredOperator, LinearOperator, MatrixOperator, PanelOperator,
                           aslinop, cg, check_dense_sym, condition_estimate, diag_and_diag_sq, factored_diags,
                           factored_from_matrix, identity_op, matvec, panel_factored, read_matrix,
                           sparse_from_triplets, top_eigenvalues, write_matrix, write_vector, read_vector)

from conftest import rand_spsd


def test_matvec_identity_and_row_readoff():
    assert np.array_equal(matvec(identity_op(3), np.array([1.0, 2, 3])), [1, 2, 3])
    assert np.array_equal(matvec(np.array([[2.0, 1], [1, 2]]), np.array([1.0, 0])), [2, 1])


def test_matvec_sparse_matches_dense(rng):
    A = sp.random(50, 50, density=0.1, random_state=1, format="csr")
    x = rng.standard_normal(50)
    ref = A.toarray() @ x
    np.testing.assert_allclose(matvec(A, x), ref, rtol=1e-12, atol=1e-14 * np.abs(ref).max())


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        matvec(identity_op(3), np.ones(4))


def test_apply_block_matches_columnwise(rng):
    A = rng.standard_normal((30, 20))
    op = LinearOperator(A.shape, lambda X: A @ X, lambda X: A.T @ X, block_width=7)
    X = rng.standard_normal((20, 25))
    Y = op.apply_block(X)
    cols = np.column_stack([op.apply(X[:, i]) for i in range(25)])
    np.testing.assert_allclose(Y, cols, rtol=1e-12)
    np.testing.assert_allclose(op.T.apply_block(Y), A.T @ Y, rtol=1e-12)


def test_operator_is_deterministic(rng):
    A = rng.standard_normal((10, 10))
    op = aslinop(A)
    x = rng.standard_normal(10)
    assert np.array_equal(op @ x, op @ x)


def test_wrapped_matrix_probes(rng):
    A = sp.random(40, 30, density=0.2, random_state=3, format="csr")
    op = aslinop(A)
    X = rng.standard_normal((30, 1000))
    np.testing.assert_allclose(op.apply_block(X), A.toarray() @ X, rtol=1e-12, atol=1e-12)


def test_diag_and_diag_sq_examples():
    d, w = diag_and_diag_sq(np.eye(3))
    assert np.array_equal(d, [1, 1, 1]) and np.array_equal(w, [1, 1, 1])
    d, w = diag_and_diag_sq(np.diag([2.0, 3.0]))
    assert np.array_equal(d, [2, 3]) and np.array_equal(w, [4, 9])


def test_diag_and_diag_sq_sparse(rng):
    B = sp.random(30, 30, density=0.1, random_state=5, format="csr")
    K = (B @ B.T).tocsr()
    d, w = diag_and_diag_sq(K)
    Kd = K.toarray()
    np.testing.assert_allclose(d, np.diag(Kd), atol=1e-12)
    np.testing.assert_allclose(w, np.diag(Kd @ Kd), atol=1e-12)
    assert np.all(w >= 0)
    zero_cols = np.flatnonzero(np.abs(Kd).sum(0) == 0)
    assert np.all(w[zero_cols] == 0)


def test_diag_and_diag_sq_rejects_nonsquare():
    with pytest.raises(ValueError):
        diag_and_diag_sq(np.ones((2, 3)))


def test_factored_diags_all_paths(rng):
    C = rng.standard_normal((15, 6))
    K = C @ C.T
    ref = (np.diag(K), np.diag(K @ K))
    for ops in (factored_from_matrix(C), factored_from_matrix(sp.csr_matrix(C))):
        for got, want in zip(factored_diags(ops), ref):
            np.testing.assert_allclose(got, want, rtol=1e-12)
    # generic operator: probing fallback
    gen = FactoredOperator(LinearOperator((15, 15), lambda X: K @ X, lambda X: K @ X),
                           LinearOperator((15, 6), lambda X: C @ X, lambda X: C.T @ X))
    for got, want in zip(factored_diags(gen), ref):
        np.testing.assert_allclose(got, want, rtol=1e-12)


def test_factored_operator_consistency(rng):
    C = rng.standard_normal((25, 8))
    ops = factored_from_matrix(C)
    K = C @ C.T
    for _ in range(20):
        x = rng.standard_normal(25)
        assert np.linalg.norm(ops.k_op @ x - C @ (C.T @ x)) <= 1e-10 * np.linalg.norm(K) * np.linalg.norm(x)
    np.testing.assert_allclose(ops.column(3), K[:, 3], rtol=1e-12)


def test_panel_operator_matches_dense(rng):
    # banded-support factor plus a few dense columns
    n, r = 300, 40
    F = np.zeros((n, r))
    for j in range(r):
        lo = (j * 7) % (n - 30)
        F[lo:lo + 30, j] = rng.standard_normal(30)
    F[:, :3] = rng.standard_normal((n, 3))
    op = PanelOperator(F, max_cols=8)
    X = rng.standard_normal((r, 11))
    Y = rng.standard_normal((n, 11))
    np.testing.assert_allclose(op.apply_block(X), F @ X, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(op.T.apply_block(Y), F.T @ Y, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(op.todense(), F, atol=0)
    ops = panel_factored(F)
    assert ops.trace == pytest.approx(np.sum(F * F), rel=1e-12)


def test_top_eigenvalues_examples(rng):
    np.testing.assert_allclose(top_eigenvalues(np.diag([5.0, 3, 1]), 2), [5, 3], atol=1e-8)
    np.testing.assert_allclose(top_eigenvalues(np.eye(6), 3), [1, 1, 1], atol=1e-8)
    K = rand_spsd(rng, 40)
    lam = np.linalg.eigvalsh(K)[::-1]
    got = top_eigenvalues(K, 5)
    np.testing.assert_allclose(got, lam[:5], atol=1e-7 * lam[0])
    assert np.all(np.diff(got) <= 0) and got[0] <= np.trace(K)


def test_top_eigenvalues_nonconvergence_carries_best(rng):
    K = rand_spsd(rng, 30)
    with pytest.raises(ConvergenceError) as info:
        top_eigenvalues(K, 3, tol=1e-30, max_iter=2)
    assert info.value.best is not None


def test_condition_estimate_examples(rng):
    assert condition_estimate(np.diag([4.0, 1.0])) == pytest.approx(4.0, rel=1e-6)
    assert condition_estimate(np.eye(3)) == pytest.approx(1.0, rel=1e-6)
    K = rand_spsd(rng, 20)
    lam = np.linalg.eigvalsh(K)
    assert condition_estimate(K) == pytest.approx(lam[-1] / lam[0], rel=0.01)


def test_condition_estimate_with_null_vector():
    # path-graph Laplacian: null vector is the constant
    L = np.diag([1.0, 2, 2, 1]) - np.diag([1.0, 1, 1], 1) - np.diag([1.0, 1, 1], -1)
    lam = np.linalg.eigvalsh(L)
    got = condition_estimate(L, np.ones(4) / 2)
    assert got == pytest.approx(lam[-1] / lam[1], rel=0.01)
    with pytest.raises(ValueError):
        condition_estimate(L)


def test_cg_deflated(rng):
    L = np.diag([1.0, 2, 2, 1]) - np.diag([1.0, 1, 1], 1) - np.diag([1.0, 1, 1], -1)
    h = np.ones(4) / 2
    b = rng.standard_normal((4, 2))
    x = cg(L, b, tol=1e-12, null_vec=h)
    bp = b - np.outer(h, h @ b)
    np.testing.assert_allclose(L @ x, bp, atol=1e-10)
    np.testing.assert_allclose(h @ x, 0, atol=1e-12)


def test_sparse_from_triplets_sums_duplicates():
    A = sparse_from_triplets([0, 0, 1], [1, 1, 0], [1.0, 2.0, 5.0], (2, 2))
    assert A.nnz == 2 and A[0, 1] == 3.0


def test_check_dense_sym():
    check_dense_sym(np.eye(2), psd=True)
    with pytest.raises(ValueError):
        check_dense_sym(np.array([[1.0, 2], [0, 1]]))
    with pytest.raises(ValueError):
        check_dense_sym(np.diag([1.0, -1.0]), psd=True)


def test_matrix_market_round_trip(tmp_path, rng):
    A = sp.random(8, 5, density=0.4, random_state=2, format="csr")
    write_matrix(tmp_path / "a.mtx", A)
    B = read_matrix(tmp_path / "a.mtx")
    assert sp.issparse(B) and np.array_equal(B.toarray(), A.toarray())
    D = rng.standard_normal((4, 3))
    write_matrix(tmp_path / "d.mtx", D)
    np.testing.assert_allclose(read_matrix(tmp_path / "d.mtx"), D, rtol=1e-15)
    v = rng.standard_normal(6)
    write_vector(tmp_path / "v.mtx", v)
    np.testing.assert_allclose(read_vector(tmp_path / "v.mtx"), v, rtol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_matrix_operator_property(m, n, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((m, n))
    op = MatrixOperator(A)
    x = r.standard_normal(n)
    y = r.standard_normal(m)
    # adjoint identity <Ax, y> = <x, Aᵀy>
    assert np.isclose((op @ x) @ y, x @ (op.T @ y), rtol=1e-10, atol=1e-10)
