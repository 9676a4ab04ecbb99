"""Reproducible generators for test and benchmark inputs."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.stats
from scipy.spatial.distance import cdist

from .laplacian import from_rate_matrix, make_laplacian
from .select import make_rng

FAMILIES = ("adversarial", "star", "gaussian", "spiral", "smiley", "random-laplacian", "random-spsd")


@dataclass(frozen=True)
class GenSpec:
    """Family name plus parameters; equal specs give bit-identical output."""

    family: str
    params: dict = field(default_factory=dict)

    def build(self):
        fam, p = self.family, dict(self.params)
        if fam == "adversarial":
            return adversarial_kernel(p["n"], p["n_c"], p.get("alpha", 1.00001))
        if fam == "star":
            return star_laplacian(p["n"], p.get("beta", 0.9999))
        if fam in ("gaussian", "spiral", "smiley"):
            pts = point_clouds(fam, p, p.get("seed", 0))
            return sq_exp_kernel(pts, p.get("sigma", DEFAULT_SIGMA[fam]))
        if fam == "random-laplacian":
            return random_reversible_laplacian(p["n"], p.get("extra_edges", p["n"]), p.get("seed", 0))
        if fam == "random-spsd":
            return random_spsd(p["n"], p.get("rank", p["n"]), p.get("decay", "exp"), p.get("seed", 0))
        raise ValueError(f"unknown family {fam!r}")


DEFAULT_SIGMA = {"gaussian": 0.4, "spiral": 1e3, "smiley": 2.0}


def adversarial_kernel(n, n_c, alpha=1.00001):
    """Block kernel: ``n - n_c`` isolated entries ``alpha`` and an all-ones block.

    Returns ``(K, A)`` with ``K = A Aᵀ``.
    """
    if not 1 <= n_c <= n:
        raise ValueError("need 1 <= n_c <= n")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    nd = n - n_c
    A = np.zeros((n, nd + 1))
    A[np.arange(nd), np.arange(nd)] = math.sqrt(alpha)
    A[nd:, nd] = 1.0
    K = np.zeros((n, n))
    K[np.arange(nd), np.arange(nd)] = alpha
    K[nd:, nd:] = 1.0
    return K, A


def star_laplacian(n, beta=0.9999):
    """Rescaled star-graph Laplacian with the center (node 0) down-weighted by ``beta``."""
    if n < 2 or not 0 < beta <= 1:
        raise ValueError("need n >= 2 and 0 < beta <= 1")
    rows = np.r_[0, np.zeros(n - 1, int), np.arange(1, n), np.arange(1, n)]
    cols = np.r_[0, np.arange(1, n), np.zeros(n - 1, int), np.arange(1, n)]
    vals = np.r_[n - 1.0, -np.ones(n - 1), -np.ones(n - 1), np.ones(n - 1)]
    Lbar = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    h = np.r_[beta, np.ones(n - 1)] / math.sqrt(n - 1 + beta ** 2)
    Dinv = sp.diags(1.0 / h)
    return make_laplacian(Dinv @ Lbar @ Dinv, h)


def sq_exp_kernel(points, sigma):
    """``K_ij = exp(-|x_i - x_j|² / (2 σ²))``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    X = np.atleast_2d(np.asarray(points, dtype=float))
    D2 = cdist(X, X, "sqeuclidean")
    return np.exp(-D2 / (2 * sigma ** 2))


def sq_exp_column(points, j, sigma):
    X = np.asarray(points, dtype=float)
    return _flush(np.exp(-np.sum((X - X[j]) ** 2, axis=1) / (2 * sigma ** 2)))


def _flush(a):
    # entries below sqrt(tiny) are zero at any useful tolerance, and products
    # of them underflow into subnormals that slow BLAS down severely
    a[np.abs(a) < math.sqrt(np.finfo(float).tiny)] = 0.0
    return a


def sq_exp_factor(points, sigma, tol=1e-12, max_rank=None):
    """Low-rank factor ``F`` with ``F Fᵀ`` equal to the kernel up to ``tol``.

    Diagonally pivoted Cholesky evaluated column by column, stopped once the
    largest residual diagonal drops below ``tol`` (the kernel diagonal is 1).
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    max_rank = n if max_rank is None else max_rank
    cap = min(max_rank, 256)
    F = np.zeros((n, cap))
    d = np.ones(n)
    r = 0
    while r < max_rank:
        j = int(np.argmax(d))
        if d[j] < tol:
            break
        if r == F.shape[1]:
            F = np.hstack([F, np.zeros((n, min(F.shape[1], max_rank - r)))])
        c = sq_exp_column(X, j, sigma) - F[:, :r] @ F[j, :r]
        F[:, r] = c / math.sqrt(c[j])
        d -= F[:, r] ** 2
        d[j] = 0.0
        r += 1
    return _flush(np.ascontiguousarray(F[:, :r]))


def point_clouds(family, params=None, seed=0):
    """2-D point sets: ``gaussian`` (N(0, I)), ``spiral`` or ``smiley``."""
    params = params or {}
    if family == "gaussian":
        n = params.get("n", 1000)
        return make_rng(seed).standard_normal((n, 2))
    if family == "spiral":
        n = params.get("n", 10_000)
        t = np.linspace(0.0, 64.0, n)
        return np.column_stack([np.exp(t / 5) * np.cos(t), np.exp(t / 5) * np.sin(t)])
    if family == "smiley":
        return _smiley(params.get("eye", 50), params.get("smile", 1980), params.get("outline", 7920), seed)
    raise ValueError(f"unknown point family {family!r}")


def _smiley(n_eye, n_smile, n_outline, seed):
    # uniform samples on a face outline, a lower arc and two small disks
    rng = make_rng(seed)
    R = 10.0

    def disk(c, rad, m):
        th = rng.uniform(0, 2 * np.pi, m)
        rr = rad * np.sqrt(rng.uniform(0, 1, m))
        return np.column_stack([c[0] + rr * np.cos(th), c[1] + rr * np.sin(th)])

    def ring(rad, th0, th1, width, m):
        th = rng.uniform(th0, th1, m)
        rr = rad + width * (rng.uniform(0, 1, m) - 0.5)
        return np.column_stack([rr * np.cos(th), rr * np.sin(th)])

    outline = ring(R, 0, 2 * np.pi, 0.5, n_outline)
    smile = ring(0.6 * R, 1.15 * np.pi, 1.85 * np.pi, 0.5, n_smile)
    eyes = np.vstack([disk((-0.35 * R, 0.3 * R), 0.1 * R, n_eye),
                      disk((0.35 * R, 0.3 * R), 0.1 * R, n_eye)])
    return np.vstack([outline, smile, eyes])


def random_reversible_laplacian(n, extra_edges=None, seed=0):
    """Random connected reversible chain converted to a rescaled Laplacian.

    A random spanning tree plus ``extra_edges`` random edges gets symmetric
    positive conductances ``c_ij``; with a Dirichlet stationary law ``π`` the
    rates ``R_ij = c_ij / π_i`` satisfy detailed balance.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = make_rng(seed)
    extra_edges = n if extra_edges is None else extra_edges
    perm = rng.permutation(n)
    edges = {(min(perm[i], perm[p]), max(perm[i], perm[p]))
             for i in range(1, n) for p in [int(rng.integers(0, i))]}
    max_edges = n * (n - 1) // 2
    target = min(len(edges) + extra_edges, max_edges)
    while len(edges) < target:
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.add((min(a, b), max(a, b)))
    e = np.array(sorted(edges))
    cond = rng.uniform(0.1, 1.0, len(e))
    pi = rng.dirichlet(np.ones(n))
    pi = np.maximum(pi, 1e-6)
    pi /= pi.sum()
    rows = np.r_[e[:, 0], e[:, 1]]
    cols = np.r_[e[:, 1], e[:, 0]]
    vals = np.r_[cond, cond] / pi[rows]
    R = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    R = R - sp.diags(np.asarray(R.sum(axis=1)).ravel())
    return from_rate_matrix(R, pi)


def random_spsd(n, rank=None, decay="exp", seed=0):
    """``U diag(λ) Uᵀ`` with Haar-random ``U`` and a prescribed spectrum profile.

    ``decay`` is ``"flat"`` (ones), ``"exp"`` (``0.7^i``), ``"poly"``
    (``1/(i+1)²``) or a float ``q`` giving ``q^i``.
    """
    rank = n if rank is None else rank
    if not 0 <= rank <= n:
        raise ValueError("rank must lie in [0, n]")
    i = np.arange(rank)
    if decay == "flat":
        lam = np.ones(rank)
    elif decay == "exp":
        lam = 0.7 ** i
    elif decay == "poly":
        lam = 1.0 / (i + 1.0) ** 2
    else:
        lam = float(decay) ** i
    U = scipy.stats.ortho_group.rvs(n, random_state=np.random.Generator(np.random.Philox(seed))) if n > 1 \
        else np.ones((1, 1))
    K = (U[:, :rank] * lam) @ U[:, :rank].T
    return 0.5 * (K + K.T)
