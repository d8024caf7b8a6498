"""Command-line front end.

    roughwave solve CONFIG [--force]
    roughwave verify {greens,specfun,fresnel,jumps,operators,convergence} [--mu --kp --km] [--out DIR]
    roughwave probe {point,hyper,inverse} CONFIG [--out DIR]

Exit codes: 0 pass, 1 failed check, 2 bad config, 3 inadmissible
parameters, 4 numerical failure.
"""

import argparse
import os
import sys

import numpy as np

from . import io, probes, verify
from .model import MediumParams
from .solve import SingularSystemError, admissibility_check, evaluate_field_grid, solve_scattering
from .surface import make_mesh, make_profile

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_INADMISSIBLE, EXIT_NUMERIC = 0, 1, 2, 3, 4

SUITES = ("greens", "specfun", "fresnel", "jumps", "operators", "convergence")


def _err(msg):
    print(f"roughwave: {msg}", file=sys.stderr)


def _gate(params, force=False):
    adm = admissibility_check(params)
    if adm:
        return None
    if force:
        _err(f"warning: inadmissible parameters ({adm.reason}); solving anyway")
        return None
    _err(f"inadmissible parameters: {adm.reason} "
         "(need (mu - 1)(k_plus^2 - mu k_minus^2) >= 0 with k_plus^2 != mu k_minus^2)")
    return EXIT_INADMISSIBLE


def _outpath(cfg, name):
    return os.path.join(cfg.base_dir, cfg.outputs["dir"], name)


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------

def cmd_solve(args):
    try:
        cfg = io.load_config(args.config)
    except io.ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    code = _gate(cfg.params, args.force)
    if code is not None:
        return code
    h = cfg.config_hash
    try:
        mesh = make_mesh(cfg.profile, cfg.A, cfg.A_core, cfg.N, cfg.rule)
        sol = solve_scattering(mesh, cfg.params, cfg.incidence, cfg.method, cfg.tol)
        table = None
        grid = cfg.outputs.get("grid")
        if grid:
            table = evaluate_field_grid(sol, grid["x1"], grid["x2"], int(grid["n1"]), int(grid["n2"]))
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (SingularSystemError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _err(f"solver failure: {exc}")
        return EXIT_NUMERIC
    io.write_csv(_outpath(cfg, cfg.outputs["densities"]), io.DENSITY_HEADER, io.density_rows(sol), h)
    if table is not None:
        io.write_csv(_outpath(cfg, grid["path"]), io.FIELD_HEADER, io.field_rows(table), h)
    diag = dict(sol.diagnostics)
    diag["admissibility_reason"] = admissibility_check(cfg.params).reason
    io.write_json(_outpath(cfg, cfg.outputs["diagnostics"]), diag, h)
    print(f"solved N={mesh.n}: residual {diag['residual']:.3e}, "
          f"condition estimate {diag['condition_estimate']:.3e}")
    return EXIT_OK


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def _suite_payload(res):
    checks = [{"name": c.name, "value": c.value, "tolerance": c.tolerance, "passed": c.passed,
               "detail": c.detail} for c in res.checks]
    return {"suite": res.name, "pass": res.passed, "checks": checks}


def _run_suite(name, args):
    if name == "greens":
        return verify.greens_suite()
    if name == "specfun":
        return verify.specfun_suite()
    if name == "jumps":
        return verify.jump_suite()
    if name == "operators":
        return verify.operator_suite()
    if name == "convergence":
        return verify.convergence_suite()
    # fresnel: wrap the report as a suite
    prof = make_profile("flat")
    params = MediumParams.for_profile(prof, args.kp, args.km, args.mu)
    rep = verify.run_fresnel_acceptance(params, (0.0, -1.0))
    res = verify.SuiteResult("fresnel")
    res.add("max_error", rep.max_errors[-1], 1e-3, rep.checks["max_error"])
    res.add("order", rep.order, 2.0, rep.checks["order"], "lower bound")
    res.add("energy_identity", rep.energy_residual, 1e-12, rep.checks["energy_identity"])
    res.add("window_nesting", rep.nesting_change, 5e-4, rep.checks["window_nesting"])
    res.tables["convergence"] = rep.table()
    return res


def cmd_verify(args):
    opts = {"suite": args.suite, "mu": args.mu, "kp": args.kp, "km": args.km}
    if args.suite == "fresnel":
        code = _gate(MediumParams.for_profile(make_profile("flat"), args.kp, args.km, args.mu))
        if code is not None:
            return code
    h = io.config_hash(opts)
    try:
        res = _run_suite(args.suite, args)
    except (SingularSystemError, np.linalg.LinAlgError) as exc:
        _err(f"solver failure: {exc}")
        return EXIT_NUMERIC
    io.write_json(os.path.join(args.out, f"{args.suite}.json"), _suite_payload(res), h)
    for tname, (header, rows) in sorted(res.tables.items()):
        io.write_csv(os.path.join(args.out, f"{args.suite}_{tname}.csv"), header, rows, h)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} (tol {c.tolerance:g})")
    if not res.passed:
        _err("failed checks: " + ", ".join(c.name for c in res.failures()))
        return EXIT_CHECK
    return EXIT_OK


# --------------------------------------------------------------------------
# probe
# --------------------------------------------------------------------------

def _norm_rows(rep):
    d = rep.to_json()
    cols = ["j", "h1_remainder", "h1_reference"] + (["l2_corrector"] if "l2_corrector" in d else [])
    return cols, [list(r) for r in zip(*(d[c] for c in cols))]


def cmd_probe(args):
    try:
        cfg = io.load_config(args.config, need_incidence=False)
        if not cfg.probe:
            raise io.ConfigError("config has no 'probe' block")
        decoy = None
        if args.kind == "inverse":
            if cfg.probe.get("decoy_profile") is None:
                raise io.ConfigError("probe inverse needs probe.decoy_profile")
            base = os.path.dirname(os.path.abspath(args.config))
            decoy = io.build_profile(cfg.probe["decoy_profile"], base)
    except io.ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    code = _gate(cfg.params)
    if code is not None:
        return code
    p, h = cfg.probe, cfg.config_hash
    out = args.out or os.path.join(cfg.base_dir, cfg.outputs["dir"])
    mesh_kw = {"A": p["A"], "N": p["N"], "growth": p["growth"], "max_spacing": p["max_spacing"]}
    try:
        if args.kind == "inverse":
            c, d = p["segment"]
            params_decoy = MediumParams.for_profile(decoy, cfg.params.k_plus, cfg.params.k_minus,
                                                    cfg.params.mu)
            # both interfaces must share strip heights that clear them
            lo = min(cfg.params.h_minus, params_decoy.h_minus)
            hi = max(cfg.params.h_plus, params_decoy.h_plus)
            pt = MediumParams(cfg.params.k_plus, cfg.params.k_minus, cfg.params.mu, lo, hi)
            rep = verify.inverse_discrimination_demo(cfg.profile, decoy, pt, pt, segment=(c, d),
                                                     j_max=p["j_max"], n=p["n"], x0_param=p["x0"],
                                                     delta=p["delta"])
            io.write_json(os.path.join(out, "probe_inverse.json"), rep, h)
            if "j" in rep:
                io.write_csv(os.path.join(out, "probe_inverse_norms.csv"), ["j", "h1_true", "h1_decoy"],
                             [list(r) for r in zip(rep["j"], rep["h1_true"], rep["h1_decoy"])], h)
            extra = f", contrast {rep['contrast']:.3f}" if "contrast" in rep else ""
            print(f"misfit {rep['misfit']:.3e}{extra}")
            passed = rep["pass"]
        else:
            fn = probes.singularity_probe if args.kind == "point" else probes.hypersingular_probe
            rep = fn(cfg.profile, cfg.params, p["x0"], p["delta"], p["j_max"], **mesh_kw)
            io.write_json(os.path.join(out, f"probe_{args.kind}.json"), rep.to_json(), h)
            cols, rows = _norm_rows(rep)
            io.write_csv(os.path.join(out, f"probe_{args.kind}_norms.csv"), cols, rows, h)
            print(f"fitted coefficient {rep.fitted_coefficient:.4f} (target {rep.coefficient_target:.4f})")
            passed = rep.passed
    except probes.MeshTooCoarseError as exc:
        _err(str(exc))
        return EXIT_NUMERIC
    except verify.SegmentTooLowError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (SingularSystemError, np.linalg.LinAlgError) as exc:
        _err(f"solver failure: {exc}")
        return EXIT_NUMERIC
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return EXIT_OK if passed else EXIT_CHECK


# --------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="roughwave", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve one scenario from a JSON config")
    s.add_argument("config")
    s.add_argument("--force", action="store_true", help="solve even if the parameters are inadmissible")
    s.set_defaults(func=cmd_solve)
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--mu", type=float, default=2.0)
    v.add_argument("--kp", type=float, default=3.0)
    v.add_argument("--km", type=float, default=1.0)
    v.add_argument("--out", default="verify_out")
    v.set_defaults(func=cmd_verify)
    p = sub.add_parser("probe", help="run a singularity probe or the inverse demo")
    p.add_argument("kind", choices=("point", "hyper", "inverse"))
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (default: outputs.dir of the config)")
    p.set_defaults(func=cmd_probe)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
