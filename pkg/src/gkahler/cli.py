"""Command-line front end.

Every number written here comes from a library call; this module only
parses arguments, dispatches and formats reports.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .bundle import canonical_connection, degree_slope, einstein_residual
from .config import ConfigError, StructureError, load_config
from .solver import Problem, SolverError, continuity_path
from .stability import slope_inequality, subcurvature_identity, weak_holomorphy_residual
from .structures import (
    IndefiniteMetricError,
    NonCommutingError,
    b_transform,
    frame_identity_residuals,
    gcs_from_complex_structure,
    gcs_from_pure_spinor,
    gk_pair,
    type_number,
)
from .suite import format_rows, run_suite
from .torus import Field, dump_field

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGED, EXIT_CONFIG = 0, 2, 3, 4
HOLOMORPHY_TOL = 1e-8
HISTORY_COLUMNS = ["epsilon", "iters", "sup_residual", "m_eps", "det_drift"]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _emit(rows, out, name):
    """Print key = value rows and mirror them to out/name when --out is set."""
    text = "\n".join(f"{k} = {_fmt(v)}" for k, v in rows) + "\n"
    sys.stdout.write(text)
    if out:
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(text)


def _load(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config, args.grid)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    return cfg


def _connection(cfg, bundle):
    return cfg.conn if cfg.conn is not None else canonical_connection(cfg.hs, bundle)


def cmd_validate(cfg, args):
    rows = []
    ok = True

    def check(name, res, tol):
        nonlocal ok
        passed = bool(res < tol)
        ok &= passed
        rows.append((name, f"{res:.3e} ({'pass' if passed else 'FAIL'})"))

    sp = cfg.sp
    rows.append(("omega", "nondegenerate"))
    rows.append(("type", type_number(sp)))
    try:
        J1 = gcs_from_complex_structure(cfg.J)
        Jpsi = gcs_from_pure_spinor(sp)
        pair = gk_pair(J1, sp)
    except (ValueError, NonCommutingError, IndefiniteMetricError) as exc:
        rows.append(("generalized_kaehler", f"FAIL: {exc}"))
        _emit(rows, args.out, "validate.txt")
        return EXIT_VALIDATION
    rows.append(("generalized_kaehler", "pass"))
    K = sp.kernel()
    E = Jpsi.eigenspace(-1j)
    check("kernel_vs_eigenspace", float(np.abs(K @ np.linalg.pinv(K) - E @ np.linalg.pinv(E)).max()), 1e-10)
    fm, fp = frame_identity_residuals(pair)
    check("frame_identity_minus", fm, 1e-10)
    check("frame_identity_plus", fp, 1e-10)
    if np.abs(sp.b).max() > 0:
        rows.append(("b_field", json.dumps(sp.b.tolist())))
        rows.append(("J_psi", json.dumps(np.round(Jpsi.J, 12).tolist())))
        rows.append(("J_J_b_transformed", json.dumps(np.round(b_transform(J1, sp.b).J, 12).tolist())))
        rows.append(("psi", json.dumps({int(k): [v.real, v.imag] for k, v in sorted(sp.psi.terms.items())})))
    f02, hol, ww = cfg.hs.residuals()
    check("holomorphy_F02", f02, HOLOMORPHY_TOL)
    check("holomorphy_Phi", hol, HOLOMORPHY_TOL)
    check("holomorphy_Phi_wedge_Phi", ww, HOLOMORPHY_TOL)
    w = np.linalg.eigvalsh(cfg.bundle().h)
    check("metric_positivity", 0.0 if w.min() > 0 else float(-w.min()), 1e-300)
    rows.append(("result", "pass" if ok else "FAIL"))
    _emit(rows, args.out, "validate.txt")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_curvature(cfg, args):
    bundle = cfg.bundle()
    conn = _connection(cfg, bundle)
    deg, mu, lam = degree_slope(conn, cfg.sp, bundle)
    R, sup, l2 = einstein_residual(conn, cfg.sp, bundle, lam)
    K = R + lam * np.eye(cfg.rank)
    rows = [("lambda", lam), ("einstein_sup_residual", sup), ("einstein_l2_residual", l2),
            ("skew_defect", conn.skew_defect(bundle)), ("K_max_abs", float(np.abs(K).max()))]
    if args.out:
        dump_field(Field(cfg.grid, K), os.path.join(args.out, "curvature.json"))
    _emit(rows, args.out, "curvature.txt")
    return EXIT_OK


def cmd_degree(cfg, args):
    bundle = cfg.bundle()
    deg, mu, lam = degree_slope(_connection(cfg, bundle), cfg.sp, bundle)
    _emit([("rank", cfg.rank), ("degree", deg), ("slope", mu), ("lambda", lam)], args.out, "degree.txt")
    return EXIT_OK


def cmd_solve(cfg, args):
    f02, hol, ww = cfg.hs.residuals()
    if max(f02, hol, ww) > HOLOMORPHY_TOL:
        sys.stderr.write(f"holomorphic structure is not integrable (residuals {f02:.2e}, {hol:.2e}, {ww:.2e})\n")
        return EXIT_VALIDATION
    opts = dict(cfg.solver)
    if args.eps_floor is not None:
        opts["eps_floor"] = args.eps_floor
    if args.tol is not None:
        opts["tol"] = args.tol
    problem = Problem(cfg.hs, cfg.bundle(), cfg.sp, k_offset=cfg.k_offset)
    try:
        res = continuity_path(problem, eps0=opts["eps0"], ratio=opts["ratio"], eps_floor=opts["eps_floor"],
                              tol=opts["tol"], max_iter=int(opts["max_iter"]),
                              growth_factor=opts["growth_factor"], extra_slices=int(opts["extra_slices"]))
    except SolverError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        _emit([("verdict", "non_converged"), ("error", str(exc))], args.out, "summary.txt")
        return EXIT_NONCONVERGED
    if args.out:
        with open(os.path.join(args.out, "history.csv"), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(HISTORY_COLUMNS)
            for row in res.rows:
                wr.writerow([_fmt(row[c]) for c in HISTORY_COLUMNS])
        dump_field(Field(cfg.grid, res.final_metric()), os.path.join(args.out, "metric.json"))
    last = res.rows[-1]
    rows = [("verdict", res.verdict), ("lambda", problem.lam), ("slices", len(res.rows)),
            ("final_epsilon", last["epsilon"]), ("sup_residual", last["sup_residual"]),
            ("max_det_drift", max(r["det_drift"] for r in res.rows)), ("khat0_norm", res.khat0_norm)]
    d = res.destabilizer
    if d is not None:
        rows += [("destabilizer_rank", d["rank"]), ("mu_S", d["mu_S"]), ("mu_E", d["mu_E"]),
                 ("destabilizing", d["destabilizing"]),
                 ("weak_holomorphy_residuals", " ".join(f"{x:.3e}" for x in d["residuals"]))]
        if args.out:
            dump_field(Field(cfg.grid, d["pi"]), os.path.join(args.out, "pi.json"))
    _emit(rows, args.out, "summary.txt")
    return EXIT_NONCONVERGED if res.verdict == "non_converged" else EXIT_OK


def cmd_stability(cfg, args):
    if cfg.projector is None:
        raise ConfigError("projector.pi: required for the stability command")
    bundle = cfg.bundle()
    conn = _connection(cfg, bundle)
    try:
        rep = slope_inequality(cfg.projector, conn, cfg.sp, bundle, k_offset=cfg.k_offset, rank=cfg.projector_rank)
    except ValueError as exc:
        sys.stderr.write(f"invalid projector: {exc}\n")
        return EXIT_VALIDATION
    r1, r2, r3 = weak_holomorphy_residual(cfg.projector, cfg.hs, bundle)
    rows = rep.rows() + [("pi_squared_minus_pi", r1), ("pi_adjoint_minus_pi", r2), ("dbar_pi_defect", r3)]
    if args.tol is not None:
        sub = subcurvature_identity(cfg.projector, conn, cfg.sp, bundle, rank=cfg.projector_rank)
        rows.append(("subcurvature_within_tol", sub.sup < args.tol))
    _emit(rows, args.out, "stability.txt")
    return EXIT_OK


def cmd_identities(cfg, args):
    n = cfg.grid.n if cfg is not None else 1
    N = args.grid or (cfg.grid.N if cfg is not None else None)
    rows = run_suite(seed=args.seed, n=n, N=N, tol=args.tol)
    text = format_rows(rows) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(os.path.join(args.out, "identities.csv"), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["identity", "residual", "tol", "passed"])
            for r in rows:
                wr.writerow([r.name, f"{r.residual:.6e}", f"{r.tol:.1e}", str(r.passed).lower()])
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VALIDATION


COMMANDS = {"validate": cmd_validate, "curvature": cmd_curvature, "degree": cmd_degree,
            "solve": cmd_solve, "stability": cmd_stability, "identities": cmd_identities}


def build_parser():
    p = argparse.ArgumentParser(prog="gkahler", description="Generalized Kaehler bundles on flat tori.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory for reports and field dumps")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    p.add_argument("--grid", type=int, default=None, help="override the grid size N")
    p.add_argument("--eps-floor", type=float, default=None, help="smallest epsilon on the continuity path")
    p.add_argument("--tol", type=float, default=None, help="override tolerances (solver or identity suite)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "identities" and not args.config:
            cfg = None
            if args.out:
                os.makedirs(args.out, exist_ok=True)
        else:
            cfg = _load(args)
        if args.seed is None:
            args.seed = cfg.seed if cfg is not None else 0
        return COMMANDS[args.command](cfg, args)
    except StructureError as exc:
        sys.stderr.write(f"validation failure: {exc}\n")
        return EXIT_VALIDATION
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
