"""Elementary symmetric polynomials and the s-DPP expected objective."""

import itertools
import math

import numpy as np

from .linops import check_dense_sym


class RankDeficientError(ValueError):
    pass


def spectrum(K_or_values, tol_psd=1e-10):
    """Return eigenvalues sorted in descending order.

    Accepts either a symmetric matrix or a vector of eigenvalues. Values in
    ``[-tol_psd·max|λ|, 0)`` are clipped to zero; anything more negative is
    rejected.
    """
    a = np.asarray(K_or_values, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (a + a.T)) if a.ndim == 2 else a.copy()
    lam = np.sort(lam)[::-1]
    if lam.size:
        scale = max(abs(lam[0]), abs(lam[-1]))
        if lam[-1] < -tol_psd * scale:
            raise ValueError(f"spectrum has a negative value {lam[-1]:.3e}")
        lam = np.maximum(lam, 0.0)
    return lam


def elem_sym(x, k_max):
    """Elementary symmetric polynomials ``[e_0, ..., e_{k_max}]`` of ``x``.

    Uses the one-row recurrence ``e_k <- e_k + x_i e_{k-1}``; entries past
    ``len(x)`` are zero.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not 0 <= k_max <= x.size + 1:
        raise ValueError("k_max must lie in [0, len(x) + 1]")
    e = np.zeros(k_max + 1)
    e[0] = 1.0
    for xi in x:
        e[1:] += xi * e[:-1].copy()
    return e


def log_elem_sym(x, k_max):
    """Natural logs of ``e_0..e_{k_max}`` for nonnegative ``x``.

    Same recurrence as :func:`elem_sym` carried out with ``logaddexp``; zero
    polynomials come back as ``-inf``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if np.any(x < 0):
        raise ValueError("log-space recurrence needs nonnegative inputs")
    le = np.full(k_max + 1, -np.inf)
    le[0] = 0.0
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    for v in lx:
        le[1:] = np.logaddexp(le[1:], v + le[:-1])
    return le


def _ratio(lam, s, log_space):
    # e_{s+1}/e_s on the spectrum scaled by its largest value
    top = lam[0]
    y = lam / top
    if log_space:
        le = log_elem_sym(y, s + 1)
        if not np.isfinite(le[s]):
            return None
        return top * math.exp(le[s + 1] - le[s]) if np.isfinite(le[s + 1]) else 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        e = elem_sym(y, s + 1)
    if not (np.isfinite(e[s]) and np.isfinite(e[s + 1])):
        # binomial growth overflows even after scaling; redo in log space
        return _ratio(lam, s, True)
    if e[s] <= 0:
        return None
    return top * e[s + 1] / e[s]


def dpp_expectation(lam, s, log_space=False, full_output=False, strict=False):
    """Expected objective of an s-DPP sample, ``e_1 - (s+1) e_{s+1}/e_s``.

    Parameters
    ----------
    lam : array_like
        Eigenvalues (any order, nonnegative up to round-off).
    s : int
        Subset size, ``0 <= s <= n``.
    log_space : bool
        Evaluate the polynomials in log space; useful for long spectra.
    full_output : bool
        Also return a flag telling whether the spectrum had fewer than ``s``
        nonzero values, in which case the trace is returned.
    strict : bool
        Raise :class:`RankDeficientError` instead of flagging.
    """
    lam = spectrum(lam)
    n = lam.size
    if not 0 <= s <= n:
        raise ValueError("s must lie in [0, n]")
    tr = float(lam.sum())
    degenerate = False
    if s == 0 or tr == 0.0:
        val = 0.0 if s == 0 else tr
        degenerate = s > 0
    else:
        r = _ratio(lam, s, log_space)
        if r is None:
            if strict:
                raise RankDeficientError(f"fewer than {s} nonzero eigenvalues")
            val, degenerate = tr, True
        else:
            val = tr - (s + 1) * r
    if degenerate and strict:
        raise RankDeficientError(f"fewer than {s} nonzero eigenvalues")
    return (val, degenerate) if full_output else val


def partial_trace(lam, r):
    """Sum of the ``r`` largest eigenvalues."""
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    if not 0 <= r <= lam.size:
        raise ValueError("r must lie in [0, n]")
    return float(lam[:r].sum())


def dpp_expectation_bruteforce(K, s, max_n=14):
    """Average of the Nyström objective over all s-subsets weighted by det(K_II)."""
    K = check_dense_sym(K)
    n = K.shape[0]
    if n > max_n:
        raise ValueError(f"brute force limited to n <= {max_n}")
    if s == 0:
        return 0.0
    num = den = 0.0
    for I in itertools.combinations(range(n), s):
        I = list(I)
        KII = K[np.ix_(I, I)]
        det = np.linalg.det(KII)
        if det <= 0:
            continue
        KIn = K[I]
        num += det * np.trace(np.linalg.solve(KII, KIn @ KIn.T))
        den += det
    if den == 0:
        raise RankDeficientError("all s-subsets are singular")
    return num / den


def normalized_elem_sym(x, k_max):
    """``E_k = e_k / C(n, k)``, the form used in Newton's inequalities."""
    x = np.asarray(x, dtype=float).ravel()
    e = elem_sym(x, k_max)
    n = x.size
    return np.array([e[k] / math.comb(n, k) if k <= n else 0.0 for k in range(k_max + 1)])
