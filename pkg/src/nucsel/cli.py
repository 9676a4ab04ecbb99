"""Command-line interface: ``nucsel <subcommand> ...``.

Every output is CSV with ``#``-prefixed header lines carrying the full run
configuration and a build identifier.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__
from .cur import cur_decompose
from .gen import (DEFAULT_SIGMA, adversarial_kernel, point_clouds, random_reversible_laplacian,
                  random_spsd, sq_exp_factor, sq_exp_kernel, star_laplacian)
from .laplacian import (default_precon, laplacian_select, make_laplacian, nuclear_max_laplacian_matrix_free,
                        pinv_dense)
from .linops import FactoredOperator, factored_from_matrix, read_matrix, read_vector, write_matrix, write_vector
from .select import select
from .sketch import (diagonal_max_matrix_free, diagonal_sample_matrix_free,
                     nuclear_max_matrix_free)
from .sympoly import dpp_expectation, spectrum

METHODS = ("nuclear", "diag-max", "diag-sample", "uniform")
DENSE_SPECTRUM_GUARD = 4000


class UsageError(Exception):
    """Bad input path or arguments; maps to exit status 2."""


@dataclass
class RunConfig:
    subcommand: str
    inputs: list = field(default_factory=list)
    method: str = "nuclear"
    k: int = 10
    z: int = 200
    seed: int = 0
    mode: str = "deterministic"
    pcg_tol: float = 1e-10
    cheb_eps: float = 1e-8
    alpha: float | None = None
    beta: float | None = None
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        if self.k < 1 or self.z < 1:
            raise UsageError("--k and --z must be positive")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")
        if self.beta is not None and not 0 < self.beta < 1:
            raise UsageError("--beta must lie in (0, 1)")
        for p in self.inputs:
            if not Path(p).is_file():
                raise UsageError(f"input file not found: {p}")
        return self


def build_id():
    """Short content hash of the installed package sources."""
    h = hashlib.sha1()
    for f in sorted(Path(__file__).parent.glob("*.py")):
        h.update(f.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def thread_count():
    try:
        return max(1, int(os.environ.get("NUCSEL_THREADS", "1")))
    except ValueError:
        return 1


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def write_csv(path, config, header, rows, notes=()):
    fh = _open_out(path)
    try:
        fh.write(f"# config: {json.dumps(asdict(config), sort_keys=True, default=str)}\n")
        fh.write(f"# build: {build_id()}\n")
        for note in notes:
            fh.write(f"# {note}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def read_csv(path):
    """Read back a CSV written by this tool (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def apply_stopping(res, alpha=None, beta=None):
    """Length of the trajectory after applying the optional stopping rules.

    ``alpha``: stop before step t+1 once ``g_{t+1} <= alpha Σ_{i<=t} g_i``.
    ``beta``: stop once ``g_{t+1} <= beta g_1``.
    """
    g = np.asarray(res.gains)
    for t in range(1, g.size):
        if alpha is not None and g[t] <= alpha * g[:t].sum():
            return t
        if beta is not None and g[t] <= beta * g[0]:
            return t
    return g.size


# ---------------------------------------------------------------------------
# kernel selection


def _load_kernel(path, is_factor):
    M = read_matrix(path)
    if is_factor:
        M = M.toarray() if sp.issparse(M) else M
        return factored_from_matrix(M), M
    if sp.issparse(M):
        M = sp.csc_matrix(M)
    return M, None


def _kernel_spectrum(K, F):
    if F is not None:
        if F.shape[1] > DENSE_SPECTRUM_GUARD:
            return None
        lam = spectrum(F.T @ F)
        return np.r_[lam, np.zeros(max(F.shape[0] - lam.size, 0))]
    n = K.shape[0]
    if n > DENSE_SPECTRUM_GUARD:
        return None
    return spectrum(K.toarray() if sp.issparse(K) else K)


def run_kernel_selection(K, cfg):
    if cfg.mode == "matrix-free":
        if not isinstance(K, FactoredOperator):
            raise UsageError("matrix-free mode needs a factor input (--factor)")
        fn = {"nuclear": nuclear_max_matrix_free, "diag-max": diagonal_max_matrix_free,
              "diag-sample": diagonal_sample_matrix_free}.get(cfg.method)
        if fn is None:
            return select(K, cfg.k, cfg.method, cfg.seed)
        return fn(K, cfg.k, cfg.z, cfg.seed)
    return select(K, cfg.k, cfg.method, cfg.seed)


def cmd_kernel_select(args):
    cfg = RunConfig("kernel-select", [args.input], args.method, args.k, args.z, args.seed,
                    "matrix-free" if args.matrix_free else "deterministic", alpha=args.alpha,
                    beta=args.beta, out=args.out, extra={"factor": args.factor}).validate()
    K, F = _load_kernel(args.input, args.factor)
    n = F.shape[0] if F is not None else K.shape[0]
    if cfg.k > n:
        raise UsageError(f"--k exceeds matrix size {n}")
    res = run_kernel_selection(K, cfg)
    lam = _kernel_spectrum(K, F)
    stop = apply_stopping(res, cfg.alpha, cfg.beta)
    rows = []
    for t in range(stop):
        eig = float(lam[:t + 1].sum()) if lam is not None else ""
        dpp = dpp_expectation(lam, t + 1) if lam is not None and t + 1 <= lam.size else ""
        rows.append([t + 1, int(res.indices[t]), repr(float(res.gains[t])), repr(float(res.objective[t])),
                     repr(float(res.residual_trace[t])), eig if eig == "" else repr(eig),
                     dpp if dpp == "" else repr(float(dpp))])
    notes = [f"trace: {res.trace!r}"] + [f"{k}: {v}" for k, v in res.diagnostics.items() if k != "state"]
    write_csv(cfg.out, cfg, ["step", "index", "gain", "objective", "residual_trace", "eig_bound",
                             "dpp_bound"], rows, notes)
    obj = res.objective[:stop]
    tol = 1e-8 * abs(res.trace)
    ok = np.all(np.diff(obj) >= -tol) and np.all(res.residual_trace[:stop] >= -tol)
    if lam is not None:
        ok = ok and all(obj[t] <= lam[:t + 1].sum() + tol for t in range(stop))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# CUR


def cmd_cur(args):
    kr = args.k_rows or args.k
    kc = args.k_cols or args.k
    cfg = RunConfig("cur", [args.input], args.method, args.k, args.z, args.seed,
                    "deterministic" if args.deterministic else "matrix-free", out=args.out,
                    extra={"k_rows": kr, "k_cols": kc}).validate()
    A = read_matrix(args.input)
    m, n = A.shape
    if kr > m or kc > n:
        raise UsageError("requested rank exceeds matrix size")
    res = cur_decompose(A, kr, kc, mode="deterministic" if args.deterministic else "matrix_free",
                        z=cfg.z, seed=cfg.seed, method=cfg.method)
    rr, cr = res.row_result, res.col_result
    rows = []
    all_ok = True
    for t in range(max(rr.k, cr.k)):
        er = math.sqrt(max(rr.residual_trace[min(t, rr.k - 1)], 0.0))
        ec = math.sqrt(max(cr.residual_trace[min(t, cr.k - 1)], 0.0))
        e = float(res.step_errors[t])
        ok = e <= er + ec + 1e-8 * res.norm_A
        all_ok &= ok
        rows.append([t + 1, int(rr.indices[t]) if t < rr.k else "", int(cr.indices[t]) if t < cr.k else "",
                     repr(er), repr(ec), repr(e), str(bool(ok)).lower()])
    write_csv(cfg.out, cfg, ["step", "row_index", "col_index", "row_error", "col_error", "cur_error",
                             "triangle_ok"], rows, [f"frobenius_norm: {res.norm_A!r}"])
    if args.factors_out:
        base = Path(args.factors_out)
        I, J = list(res.row_indices), list(res.col_indices)
        Ad = A.toarray() if sp.issparse(A) else A
        C, R = Ad[:, J], Ad[I, :]
        U = np.linalg.pinv(C) @ (res.assemble(A) if m * n <= 10**6 else Ad) @ np.linalg.pinv(R)
        write_matrix(base.with_suffix(".U.mtx"), U)
        base.with_suffix(".rows.txt").write_text("\n".join(map(str, I)) + "\n")
        base.with_suffix(".cols.txt").write_text("\n".join(map(str, J)) + "\n")
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# Laplacian


def _load_laplacian(args):
    L = read_matrix(args.input)
    h = read_vector(args.h)
    return make_laplacian(L, h)


def cmd_laplacian(args):
    cfg = RunConfig("laplacian-select", [args.input, args.h], args.method, args.k, args.z, args.seed,
                    "matrix-free" if args.matrix_free else "deterministic", args.pcg_tol, args.cheb_eps,
                    args.alpha, args.beta, args.out, {"precon": args.precon}).validate()
    lap = _load_laplacian(args)
    if cfg.k > lap.n:
        raise UsageError("--k exceeds the number of nodes")
    if cfg.mode == "matrix-free":
        if cfg.method != "nuclear":
            raise UsageError("matrix-free Laplacian selection supports --method nuclear only")
        pre = default_precon(lap, args.precon, args.precon_file)
        tr = float(np.trace(pinv_dense(lap))) if lap.n <= 2000 else None
        res = nuclear_max_laplacian_matrix_free(lap, pre, cfg.k, cfg.z, cfg.seed, cfg.pcg_tol,
                                                cfg.cheb_eps, trace=tr)
    else:
        res = laplacian_select(pinv_dense(lap), lap.h, cfg.k, cfg.method, cfg.seed)
    stop = apply_stopping(res, None, None)
    rows = [[t + 1, int(res.indices[t]), repr(float(res.gains[t])), repr(float(res.objective[t])),
             repr(float(res.residual_trace[t]))] for t in range(stop)]
    write_csv(cfg.out, cfg, ["step", "index", "gain", "objective", "residual_trace"], rows,
              [f"trace_pinv: {res.trace!r}"])
    ok = np.all(np.diff(res.objective) >= -1e-8 * abs(res.trace)) if np.isfinite(res.trace) else True
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# generators


def cmd_gen(args):
    cfg = RunConfig("gen", seed=args.seed, out=args.out,
                    extra={k: v for k, v in vars(args).items() if k not in ("func", "out", "seed")})
    out = Path(args.out)
    fam = args.family
    if fam == "star":
        lap = star_laplacian(args.n, args.beta)
        _write_lap(out, lap, cfg)
    elif fam == "random-laplacian":
        lap = random_reversible_laplacian(args.n, args.extra_edges, args.seed)
        _write_lap(out, lap, cfg)
    elif fam == "adversarial":
        K, A = adversarial_kernel(args.n, args.n_c, args.alpha)
        write_matrix(out.with_suffix(".mtx"), sp.csr_matrix(K), comment=_comment(cfg))
        write_matrix(out.with_suffix(".factor.mtx"), A, comment=_comment(cfg))
    elif fam == "random-spsd":
        K = random_spsd(args.n, args.rank, args.decay, args.seed)
        write_matrix(out.with_suffix(".mtx"), K, comment=_comment(cfg))
    elif fam in ("gaussian", "spiral", "smiley"):
        pts = point_clouds(fam, {"n": args.n} if args.n else {}, args.seed)
        sigma = args.sigma or DEFAULT_SIGMA[fam]
        np.savetxt(out.with_suffix(".points.txt"), pts)
        if args.factor:
            write_matrix(out.with_suffix(".factor.mtx"), sq_exp_factor(pts, sigma), comment=_comment(cfg))
        else:
            if len(pts) > DENSE_SPECTRUM_GUARD:
                raise UsageError("dense kernel too large; pass --factor for a low-rank factor")
            write_matrix(out.with_suffix(".mtx"), sq_exp_kernel(pts, sigma), comment=_comment(cfg))
    else:
        raise UsageError(f"unknown family {fam!r}")
    return 0


def _comment(cfg):
    return f"config: {json.dumps(asdict(cfg), sort_keys=True, default=str)} build: {build_id()}"


def _write_lap(out, lap, cfg):
    write_matrix(out.with_suffix(".mtx"), lap.L, comment=_comment(cfg))
    write_vector(out.with_suffix(".h.mtx"), lap.h, comment=_comment(cfg))


# ---------------------------------------------------------------------------
# verify and bench


def cmd_verify(args):
    from .verify import run_suites

    cfg = RunConfig("verify", seed=args.seed, out=args.out, extra={"scale": args.scale})
    results = run_suites(seed=args.seed, scale=args.scale)
    rows = [[r.name, r.cases, r.violations, repr(r.worst), "pass" if r.passed else "FAIL"] for r in results]
    write_csv(cfg.out, cfg, ["check", "cases", "violations", "worst_slack", "status"], rows)
    return 0 if all(r.passed for r in results) else 1


def _bench_problem(args):
    fam = args.family
    if fam == "star":
        lap = star_laplacian(args.n or 100, args.beta)
        return "laplacian", (pinv_dense(lap), lap.h)
    if fam == "random-laplacian":
        lap = random_reversible_laplacian(args.n or 100, None, args.seed)
        return "laplacian", (pinv_dense(lap), lap.h)
    if fam == "adversarial":
        return "kernel", adversarial_kernel(args.n or 2000, args.n_c or 45, args.alpha)[0]
    if fam in ("gaussian", "spiral", "smiley"):
        pts = point_clouds(fam, {"n": args.n} if args.n else {}, args.seed)
        return "kernel", sq_exp_kernel(pts, args.sigma or DEFAULT_SIGMA[fam])
    if fam == "random-spsd":
        return "kernel", random_spsd(args.n or 100, None, "exp", args.seed)
    if args.input:
        return "kernel", _load_kernel(args.input, False)[0]
    raise UsageError(f"unknown family {fam!r}")


def cmd_bench(args):
    quantiles = [float(q) for q in args.quantiles.split(",")]
    cfg = RunConfig("bench", [args.input] if args.input else [], k=args.k, seed=args.seed, out=args.out,
                    extra={"family": args.family, "replicates": args.replicates, "quantiles": quantiles,
                           "methods": args.methods}).validate()
    kind, prob = _bench_problem(args)
    methods = args.methods.split(",")
    jobs = [(m, r) for m in methods for r in range(args.replicates if m in ("diag-sample", "uniform") else 1)]

    def run(job):
        m, r = job
        seed = cfg.seed ^ r
        if kind == "laplacian":
            res = laplacian_select(prob[0], prob[1], cfg.k, m, seed)
        else:
            res = select(prob, cfg.k, m, seed)
        return m, r, res.objective

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        out = list(pool.map(run, jobs))
    rows = [[m, r, t + 1, repr(float(v))] for m, r, obj in out for t, v in enumerate(obj)]
    write_csv(cfg.out, cfg, ["method", "replicate", "step", "objective"], rows)
    summary = []
    for m in methods:
        trajs = [obj for mm, _, obj in out if mm == m]
        L = min(len(t) for t in trajs)
        arr = np.array([t[:L] for t in trajs])
        qs = np.quantile(arr, quantiles, axis=0)
        summary += [[m, t + 1] + [repr(float(q[t])) for q in qs] for t in range(L)]
    spath = (Path(cfg.out).with_suffix(".summary.csv") if cfg.out else None)
    write_csv(spath, cfg, ["method", "step"] + [f"q{q:g}" for q in quantiles], summary)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="nucsel", description="Nuclear-maximization column selection.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, method=True):
        sp_.add_argument("--k", type=int, default=10)
        sp_.add_argument("--z", type=int, default=200)
        sp_.add_argument("--seed", type=int, default=0)
        if method:
            sp_.add_argument("--method", default="nuclear", choices=METHODS)
        sp_.add_argument("--out", default=None)

    g = sub.add_parser("gen", help="write a generated input to Matrix Market files")
    g.add_argument("family", choices=["adversarial", "star", "gaussian", "spiral", "smiley",
                                      "random-laplacian", "random-spsd"])
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--n-c", type=int, default=45)
    g.add_argument("--alpha", type=float, default=1.00001)
    g.add_argument("--beta", type=float, default=0.9999)
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--rank", type=int, default=None)
    g.add_argument("--decay", default="exp")
    g.add_argument("--extra-edges", type=int, default=None)
    g.add_argument("--factor", action="store_true", help="write a low-rank kernel factor instead of K")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output path prefix")
    g.set_defaults(func=cmd_gen)

    ks = sub.add_parser("kernel-select", help="select kernel columns")
    ks.add_argument("input")
    ks.add_argument("--factor", action="store_true", help="input holds C with K = C Cᵀ")
    ks.add_argument("--matrix-free", action="store_true")
    ks.add_argument("--alpha", type=float, default=None)
    ks.add_argument("--beta", type=float, default=None)
    common(ks)
    ks.set_defaults(func=cmd_kernel_select)

    c = sub.add_parser("cur", help="CUR decomposition of a Matrix Market matrix")
    c.add_argument("input")
    c.add_argument("--k-rows", type=int, default=None)
    c.add_argument("--k-cols", type=int, default=None)
    c.add_argument("--deterministic", action="store_true", help="form Gram diagonals explicitly")
    c.add_argument("--matrix-free", action="store_true", help="default; kept for symmetry")
    c.add_argument("--factors-out", default=None)
    common(c)
    c.set_defaults(func=cmd_cur)

    la = sub.add_parser("laplacian-select", help="inverse-Laplacian rank reduction")
    la.add_argument("input")
    la.add_argument("h")
    la.add_argument("--matrix-free", action="store_true")
    la.add_argument("--precon", default="exact", choices=["exact", "identity", "external"])
    la.add_argument("--precon-file", default=None)
    la.add_argument("--pcg-tol", type=float, default=1e-10)
    la.add_argument("--cheb-eps", type=float, default=1e-8)
    la.add_argument("--alpha", type=float, default=None)
    la.add_argument("--beta", type=float, default=None)
    common(la)
    la.set_defaults(func=cmd_laplacian)

    v = sub.add_parser("verify", help="run bound and identity checks on a generated corpus")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", type=float, default=1.0, help="corpus size multiplier")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="compare selection methods over replicates")
    b.add_argument("family", nargs="?", default="star")
    b.add_argument("--input", default=None)
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--n-c", type=int, default=None)
    b.add_argument("--alpha", type=float, default=1.00001)
    b.add_argument("--beta", type=float, default=0.9999)
    b.add_argument("--sigma", type=float, default=None)
    b.add_argument("--methods", default=",".join(METHODS))
    b.add_argument("--replicates", type=int, default=100)
    b.add_argument("--quantiles", default="0.2,0.5,0.8")
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"nucsel: error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError) as err:
        print(f"nucsel: error: {err}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as err:
        print(f"nucsel: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
