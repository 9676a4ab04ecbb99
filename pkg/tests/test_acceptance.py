"""Acceptance suite: one PASS/FAIL line per primary criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary. Running the file directly prints them as they complete.
"""

import itertools
import math
import time

import numpy as np
import pytest

from nucsel.cur import cur_decompose
from nucsel.gen import adversarial_kernel, point_clouds, random_reversible_laplacian, sq_exp_factor, star_laplacian
from nucsel.laplacian import (cheb_degree, default_precon, laplacian_objective_eval, laplacian_select,
                              nuclear_max_laplacian_exact, nuclear_max_laplacian_matrix_free, pinv_dense,
                              save_precon)
from nucsel.linops import factored_from_matrix, panel_factored
from nucsel.select import diagonal_max, nuclear_max
from nucsel.sketch import nuclear_max_matrix_free
from nucsel.sympoly import partial_trace
from nucsel.verify import (complement_identity_suite, cur_suite, dpp_discrepancy_suite, dpp_property_suite,
                           laplacian_bound_suite, submodularity_suite)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def report(name, ok, elapsed, limit, detail):
    ok = bool(ok) and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}; {elapsed:.1f}s (limit {limit:g}s)"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def suite_detail(results):
    return ", ".join(f"{r.name} {r.cases - r.violations}/{r.cases} (worst slack {r.worst:.3g})" for r in results)


def test_adversarial_kernel():
    t0 = time.perf_counter()
    n, n_c, alpha = 2000, 45, 1.00001
    K, _ = adversarial_kernel(n, n_c, alpha)
    nuc = nuclear_max(K, 100)
    dia = diagonal_max(K, 1)
    ratio = nuc.gains[0] / dia.gains[0]
    ratio_err = abs(ratio - n_c / alpha) / (n_c / alpha)
    lam = np.r_[n_c, np.full(n - n_c, alpha)]
    tops = np.array([partial_trace(lam, k) for k in range(1, 101)])
    above = np.max(nuc.objective - tops) / tops[-1]
    gap45 = np.max((tops[:45] - nuc.objective[:45]) / tops[:45])
    elapsed = time.perf_counter() - t0
    ok = ratio_err <= 1e-9 and nuc.k == 100 and np.all(nuc.objective <= tops * (1 + 1e-12)) and gap45 <= 0.01
    assert report("adversarial kernel", ok, elapsed, 30,
                  f"gain ratio {ratio:.10g} vs {n_c / alpha:.10g} (rel err {ratio_err:.2e}), "
                  f"max excess over top-k {above:.1e}, max gap k<=45 {gap45:.2e}")


def test_star_laplacian():
    t0 = time.perf_counter()
    n, beta = 100, 0.9999
    lap = star_laplacian(n, beta)
    K = pinv_dense(lap)
    h = lap.h
    nuc = nuclear_max_laplacian_exact(K, h, 1)
    center = laplacian_objective_eval(K, [0], h)
    j_diag = int(laplacian_select(K, h, 1, "diag-max").indices[0])
    r_diag = laplacian_objective_eval(K, [j_diag], h) / center
    r_unif = np.mean([laplacian_objective_eval(K, [j], h) for j in range(n)]) / center
    f_diag = (beta ** 4 + n ** 2 + 2 * beta ** 2 * (n - 2) - 3 * n + 2) / (n - 1)
    f_unif = (beta ** 4 + n ** 2 + 2 * beta ** 2 * (n - 2) - 3 * n + 3) / n
    e1, e2 = abs(r_diag / f_diag - 1), abs(r_unif / f_unif - 1)
    elapsed = time.perf_counter() - t0
    ok = nuc.indices[0] == 0 and e1 <= 1e-9 and e2 <= 1e-9
    assert report("star laplacian", ok, elapsed, 5,
                  f"first pick {nuc.indices[0]}, diag-max ratio {r_diag:.12g} vs {f_diag:.12g} (rel {e1:.1e}), "
                  f"uniform ratio {r_unif:.12g} vs {f_unif:.12g} (rel {e2:.1e})")


def test_chebyshev_degrees():
    t0 = time.perf_counter()
    table = [(73.25, 99), (49.36, 81), (217.1, 176)]
    got = [cheb_degree(kappa, 1e-8) for kappa, _ in table]
    elapsed = time.perf_counter() - t0
    ok = got == [d for _, d in table]
    assert report("chebyshev degrees", ok, elapsed, 1,
                  ", ".join(f"kappa={k:g}: {g} (expected {d})" for (k, d), g in zip(table, got)))


def test_dpp_discrepancy():
    t0 = time.perf_counter()
    res = dpp_discrepancy_suite(100, n=50, s_max=5, k_max=25)
    elapsed = time.perf_counter() - t0
    ok = res[0].cases > 0 and res[0].passed
    assert report("dpp discrepancy", ok, elapsed, 60, suite_detail(res))


def test_dpp_properties():
    t0 = time.perf_counter()
    res = dpp_property_suite(1000, n_max=12, tol=1e-10)
    elapsed = time.perf_counter() - t0
    names = {r.name for r in res}
    ok = len(names) == 4 and all(r.passed and r.cases >= 1000 for r in res)
    assert report("dpp expectation properties", ok, elapsed, 60, suite_detail(res))


def test_complement_and_augmentation_identities():
    t0 = time.perf_counter()
    res = complement_identity_suite(200, 500, n_max=40, rtol=1e-8)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed and r.cases > 0 for r in res)
    assert report("complement/augmentation identities", ok, elapsed, 120, suite_detail(res))


def test_submodularity():
    t0 = time.perf_counter()
    res = submodularity_suite(200, 200, n_max=8, tol=1e-9)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in res) and res[0].cases == 200 * 200
    assert report("submodularity", ok, elapsed, 120, suite_detail(res))


def test_laplacian_bound():
    t0 = time.perf_counter()
    res = laplacian_bound_suite(60, n_max=10, s_max=3)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed and r.cases > 0 for r in res)
    assert report("laplacian greedy bound", ok, elapsed, 120, suite_detail(res))


def _spiral_fidelity(seeds, z=200, k=100, tol=0.05):
    F = sq_exp_factor(point_clouds("spiral"), 1e3)
    ops = panel_factored(F)
    det = nuclear_max(factored_from_matrix(ops.c_op.todense()), k)
    worst = []
    for s in seeds:
        mf = nuclear_max_matrix_free(ops, k, z=z, seed=s)
        m = min(mf.k, det.k)
        dev = np.abs(mf.objective[:m] - det.objective[:m]) / det.objective[:m]
        worst.append(float(dev.max()) if mf.k == det.k else math.inf)
    return np.array(worst), F.shape[1]


def _laplacian_fidelity(seeds, z=200, k=50):
    lap = random_reversible_laplacian(700, 1400, 0)
    K = pinv_dense(lap)
    tr = float(np.trace(K))
    det = nuclear_max_laplacian_exact(K, lap.h, k)
    pre = default_precon(lap, "exact")
    worst, worst_obj = [], []
    for s in seeds:
        mf = nuclear_max_laplacian_matrix_free(lap, pre, k, z=z, seed=s, trace=tr)
        if mf.k != det.k:
            worst.append(math.inf)
            worst_obj.append(math.inf)
            continue
        worst.append(float(np.max(np.abs(mf.residual_trace - det.residual_trace) / det.residual_trace)))
        worst_obj.append(float(np.max(np.abs(mf.objective - det.objective) / np.abs(det.objective))))
    return np.array(worst), np.array(worst_obj)


@pytest.mark.slow
def test_matrix_free_fidelity():
    t0 = time.perf_counter()
    seeds = range(10)
    sp_worst, rank = _spiral_fidelity(seeds)
    lap_worst, lap_obj = _laplacian_fidelity(seeds)
    elapsed = time.perf_counter() - t0
    sp_ok, lap_ok = int(np.sum(sp_worst <= 0.05)), int(np.sum(lap_worst <= 0.05))
    ok = sp_ok >= 9 and lap_ok >= 9
    assert report("matrix-free fidelity", ok, elapsed, 600,
                  f"spiral (factor rank {rank}) {sp_ok}/10 seeds within 5% at every step "
                  f"(per-seed worst {np.round(sp_worst, 4).tolist()}); "
                  f"laplacian residual trace {lap_ok}/10 within 5% "
                  f"(per-seed worst {np.round(lap_worst, 4).tolist()}; "
                  f"signed-objective worst {np.round(lap_obj, 3).tolist()})")


def test_cur():
    t0 = time.perf_counter()
    closed, tri, order = cur_suite(50, m_max=200, rtol=1e-8)
    elapsed = time.perf_counter() - t0
    ok = closed.passed and tri.passed and order.worst >= 45
    assert report("cur", ok, elapsed, 300,
                  f"{suite_detail([closed, tri])}, uniform worst on {int(order.worst)}/50 instances")


def test_substituted_external_factor_path(tmp_path):
    # large-scale inputs are out of reach; the pluggable factor path runs with exact factors
    t0 = time.perf_counter()
    lap = random_reversible_laplacian(200, 400, 11)
    exact = default_precon(lap, "exact")
    save_precon(tmp_path / "R.mtx", exact)
    ext = default_precon(lap, "external", tmp_path / "R.mtx")
    a = nuclear_max_laplacian_matrix_free(lap, exact, 10, z=100, seed=4)
    b = nuclear_max_laplacian_matrix_free(lap, ext, 10, z=100, seed=4)
    K = pinv_dense(lap)
    err = max(abs(b.objective[t] / laplacian_objective_eval(K, b.indices[:t + 1], lap.h) - 1) for t in range(b.k))
    elapsed = time.perf_counter() - t0
    ok = np.array_equal(a.indices, b.indices) and ext.kappa == 1.0 and err <= 1e-8
    assert report("substituted inputs (external factor path)", ok, elapsed, 60,
                  f"external factor kappa {ext.kappa:g}, selections identical to exact mode: "
                  f"{np.array_equal(a.indices, b.indices)}, max objective rel err {err:.1e}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
