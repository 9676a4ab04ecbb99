import math

import numpy as np
import pytest
import scipy.sparse.csgraph

from nucsel.gen import (GenSpec, adversarial_kernel, point_clouds, random_reversible_laplacian, random_spsd,
                        sq_exp_column, sq_exp_factor, sq_exp_kernel, star_laplacian)


def test_adversarial_kernel():
    K, A = adversarial_kernel(10, 4, 1.5)
    np.testing.assert_allclose(A @ A.T, K)
    lam = np.sort(np.linalg.eigvalsh(K))[::-1]
    np.testing.assert_allclose(lam[:7], [4.0] + [1.5] * 6, atol=1e-12)
    np.testing.assert_allclose(lam[7:], 0, atol=1e-12)
    with pytest.raises(ValueError):
        adversarial_kernel(5, 6)
    with pytest.raises(ValueError):
        adversarial_kernel(5, 2, 1.0)


def test_star_laplacian():
    n, beta = 6, 0.5
    lap = star_laplacian(n, beta)
    h = lap.h
    np.testing.assert_allclose(h, np.r_[beta, np.ones(n - 1)] / math.sqrt(n - 1 + beta ** 2))
    np.testing.assert_allclose(lap.L @ h, 0, atol=1e-13)
    Lbar = (h[:, None] * lap.L.toarray()) * h[None, :]
    # the unscaled star Laplacian has eigenvalues 0, 1 (n-2 times) and n
    np.testing.assert_allclose(np.linalg.eigvalsh(Lbar), [0] + [1] * (n - 2) + [n], atol=1e-12)


def test_sq_exp_examples():
    K = sq_exp_kernel([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], 1.0)
    np.testing.assert_allclose(K[0], [1, math.exp(-0.5), math.exp(-2)])
    np.testing.assert_allclose(sq_exp_column(np.array([[0.0, 0.0], [1.0, 0.0]]), 1, 1.0), [math.exp(-0.5), 1])
    with pytest.raises(ValueError):
        sq_exp_kernel([[0.0]], 0.0)


def test_sq_exp_factor(rng):
    X = rng.standard_normal((200, 2))
    F = sq_exp_factor(X, 0.7, tol=1e-10)
    assert F.shape[1] < 200
    assert np.abs(F @ F.T - sq_exp_kernel(X, 0.7)).max() < 1e-9


def test_point_clouds():
    sp_ = point_clouds("spiral")
    assert sp_.shape == (10_000, 2)
    np.testing.assert_allclose(sp_[0], [1.0, 0.0])
    assert point_clouds("smiley").shape == (10_000, 2)
    assert point_clouds("gaussian", {"n": 50}, 3).shape == (50, 2)
    np.testing.assert_array_equal(point_clouds("smiley", seed=4), point_clouds("smiley", seed=4))
    with pytest.raises(ValueError):
        point_clouds("bogus")


def test_random_reversible_laplacian():
    lap = random_reversible_laplacian(40, 20, 1)
    L = lap.L.toarray()
    assert np.linalg.matrix_rank(L) == 39
    assert scipy.sparse.csgraph.connected_components(lap.L)[0] == 1
    assert np.all(np.diff(np.linalg.eigvalsh(L))[0] > 0)
    a, b = random_reversible_laplacian(15, 5, 2), random_reversible_laplacian(15, 5, 2)
    assert (a.L != b.L).nnz == 0 and np.array_equal(a.h, b.h)


def test_random_spsd():
    np.testing.assert_allclose(np.linalg.eigvalsh(random_spsd(6, decay="flat", seed=1)), 1, atol=1e-12)
    K = random_spsd(8, rank=2, decay=0.5, seed=2)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(K))[::-1][:3], [1, 0.5, 0], atol=1e-12)
    with pytest.raises(ValueError):
        random_spsd(3, rank=4)


@pytest.mark.parametrize("spec", [GenSpec("adversarial", {"n": 30, "n_c": 5}), GenSpec("star", {"n": 9}),
                                  GenSpec("gaussian", {"n": 40, "seed": 1}),
                                  GenSpec("random-laplacian", {"n": 12, "seed": 3}),
                                  GenSpec("random-spsd", {"n": 7, "seed": 5})])
def test_genspec_deterministic(spec):
    a, b = spec.build(), spec.build()
    if isinstance(a, tuple):
        a, b = a[0], b[0]
    if hasattr(a, "L"):
        assert (a.L != b.L).nnz == 0
    else:
        assert np.array_equal(a, b)


def test_genspec_unknown():
    with pytest.raises(ValueError):
        GenSpec("bogus").build()
