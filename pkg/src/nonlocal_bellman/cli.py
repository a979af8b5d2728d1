"""Command-line front end: ``nonlocal-bellman <command> --config cfg.json --out dir``.

Every command writes ``report.json`` (sorted keys, the resolved configuration and seed
embedded) into the output directory; tables and grids go to CSV with unit headers.

Exit status: 0 success, 1 acceptance failure, 2 validation error, 3 solver non-convergence
(the partial report is still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .controls import ControlSetSpec, build_control_set, refine
from .core.config import ControlSet, OperatorConfig
from .core.functions import AnalyticTerm, Box, make_grid_function
from .core.nonlinearity import Nonlinearity
from .core.problem import Geometry, ProblemSpec, ValidationError

EXIT_OK, EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2, 3

SCHEME_KEYS = ("n_angle", "n_panels", "order", "check_far")
OPERATORS = ("Fs", "L_A", "frac_laplacian", "Ds")


# --- config helpers ----------------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"--config: cannot read {path}: {e.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"config: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise ValidationError("config: top level must be a JSON object")
    return d


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if np.isfinite(o) else None
    return o


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_table(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if v is None else (f"{v:.17g}" if isinstance(v, float) else v) for v in r])


def _scheme(cfg: dict, config: OperatorConfig):
    from .quadrature import QuadratureScheme
    sc = cfg.get("scheme", {}) or {}
    bad = sorted(set(sc) - set(SCHEME_KEYS))
    if bad:
        raise ValidationError(f"scheme.{bad[0]}: unknown key (expected one of {SCHEME_KEYS})")
    try:
        return QuadratureScheme(config, **sc)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"scheme: {e}") from None


def _operator_config(cfg: dict) -> OperatorConfig:
    d = cfg.get("problem", {}).get("config", cfg.get("config", {}))
    try:
        return OperatorConfig(**d)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"problem.config: {e}") from None


def _controls(cfg: dict, n: int) -> ControlSet:
    c = dict(cfg.get("problem", {}).get("controls", cfg.get("controls", {"kind": "bellman_box"})))
    refines = int(c.pop("refine", 0))
    try:
        if "matrices" in c:
            cs = ControlSet.from_json(c["matrices"])
        else:
            c.setdefault("n", n)
            cs = build_control_set(ControlSetSpec(**c))
    except (TypeError, ValueError) as e:
        raise ValidationError(f"controls: {e}") from None
    for _ in range(refines):
        cs = refine(cs)
    return cs


def _problem(cfg: dict) -> ProblemSpec:
    if "problem" not in cfg:
        raise ValidationError("problem: missing section")
    try:
        return ProblemSpec.from_dict(cfg["problem"])
    except ValidationError as e:
        raise ValidationError(f"problem.{e}") from None


def _function(cfg: dict, config: OperatorConfig):
    fd = cfg.get("function")
    if fd is None:
        raise ValidationError("function: missing section")
    try:
        terms = [AnalyticTerm(t["tag"], dict(t.get("params", {}))) for t in fd.get("terms", [])]
        if not terms:
            raise ValueError("need at least one term")
        box = fd.get("box", Box.cube(4.0, config.n).to_list())
        return make_grid_function(box, float(fd.get("h", 0.05)), terms=terms)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"function: {e}") from None


def _points(cfg: dict, n: int, key: str = "points"):
    pts = cfg.get(key)
    if pts is None:
        raise ValidationError(f"{key}: missing list of points")
    try:
        arr = np.asarray(pts, dtype=float).reshape(-1, n)
    except ValueError:
        raise ValidationError(f"{key}: expected a list of {n}-vectors") from None
    return [p for p in arr]


# --- commands ----------------------------------------------------------------------------

def cmd_eval(cfg, args, out: Path) -> tuple:
    from .quadrature import eval_Ds, eval_fractional_laplacian, eval_L_A_detail, evaluate_many
    config = _operator_config(cfg)
    scheme = _scheme(cfg, config)
    u = _function(cfg, config)
    op = cfg.get("operator", "Fs")
    if op not in OPERATORS:
        raise ValidationError(f"operator: expected one of {OPERATORS}, got {op!r}")
    pts = _points(cfg, config.n)
    if op == "Fs" or op == "L_A":
        cs = _controls(cfg, config.n) if op == "Fs" else ControlSet([np.eye(config.n)])

        def one(x):
            best, k = None, -1
            for i, A in enumerate(cs):
                e = eval_L_A_detail(u, A, x, scheme)
                if best is None or e.value < best.value:
                    best, k = e, i
            return {"x": x.tolist(), **best.to_dict(), "argmin": cs[k].entries.tolist()}
    elif op == "frac_laplacian":
        def one(x):
            return {"x": x.tolist(), "value": eval_fractional_laplacian(u, x, scheme)}
    else:
        theta = config.theta

        def one(x):
            v, A = eval_Ds(u, theta, x, scheme)
            return {"x": x.tolist(), "value": v, "argmin": A.entries.tolist()}
    try:
        rows = evaluate_many(one, pts, args.threads)
    except ValueError as e:
        raise ValidationError(f"points: {e}") from None
    cols = ["x0 [length]", "x1 [length]", "value [length^-2s]", "error_bar [length^-2s]"]
    table = [[r["x"][0], r["x"][1] if len(r["x"]) > 1 else None, r["value"], r.get("error_bar")]
             for r in rows]
    return {"operator": op, "evaluations": rows}, {"evaluations": (cols, table)}, EXIT_OK


def cmd_solve(cfg, args, out: Path) -> tuple:
    from .solver import solve_dirichlet
    problem = _problem(cfg)
    sv = cfg.get("solver", {})
    try:
        u, rep = solve_dirichlet(problem, tol=float(sv.get("tol", 1e-8)),
                                 max_iter=int(sv.get("max_iter", 200)))
    except ValueError as e:
        raise ValidationError(str(e)) from None
    u.to_csv(out / "solution.csv", "u [1]")
    status = EXIT_OK if rep.converged else EXIT_NONCONVERGED
    return {"solve": rep.to_dict(), "u_max": u.sup_norm(), "files": ["solution.csv"]}, {}, status


def cmd_eigen(cfg, args, out: Path) -> tuple:
    from .solver import eigenpair_ball
    config = _operator_config(cfg)
    cs = _controls(cfg, config.n)
    e = cfg.get("eigen", {})
    R = float(e.get("R", 1.0))
    try:
        ep = eigenpair_ball(R, config, cs, tol=float(e.get("tol", 1e-10)),
                            h=e.get("h"), max_iter=int(e.get("max_iter", 500)))
    except ValueError as err:
        raise ValidationError(f"eigen: {err}") from None
    ep.psi.to_csv(out / "psi.csv", "psi [1]")
    status = EXIT_OK if ep.converged else EXIT_NONCONVERGED
    return {"eigen": ep.to_dict(), "files": ["psi.csv"]}, {}, status


def _solved(cfg):
    from .solver import solve_dirichlet
    problem = _problem(cfg)
    sv = cfg.get("solver", {})
    u, rep = solve_dirichlet(problem, tol=float(sv.get("tol", 1e-8)), max_iter=int(sv.get("max_iter", 200)))
    return problem, u, rep


def cmd_diagnose(cfg, args, out: Path) -> tuple:
    from . import diagnostics as dg
    mode = args.mode
    d = cfg.get("diagnose", {})
    if mode in ("ma-limit", "decay"):
        if mode == "ma-limit":
            config = _operator_config(cfg)
            r = dg.ma_limit_sweep(d.get("s_list", [0.6, 0.8, 0.95]),
                                  _points(d, config.n), theta=float(d.get("theta", 0.2)),
                                  h=float(d.get("h", 0.05)))
            rows = [[x["s"], *x["x"], x["Ds"], x["r"]] for x in r["rows"]]
            cols = ["s [1]", "x0 [length]", "x1 [length]", "Ds [length^-2s]", "r [1]"]
            return {"ma_limit": r}, {"ma_limit": (cols, rows)}, EXIT_OK
        config = _operator_config(cfg)
        cs = _controls(cfg, config.n)
        r = dg.decay_exponent_fit(cs, config.s, radii=d.get("radii"), n=config.n, h=float(d.get("h", 0.05)))
        rows = [[a, b, c, bool(k)] for a, b, c, k in zip(r["radii"], r["values"], r["errors"], r["used"])]
        cols = ["radius [length]", "Fs [length^-2s]", "error_bar [length^-2s]", "used"]
        return {"decay": r}, {"decay": (cols, rows)}, EXIT_OK
    problem, u, rep = _solved(cfg)
    u.to_csv(out / "solution.csv", "u [1]")
    result = {"solve": rep.to_dict()}
    tables = {}
    tol = d.get("tol")
    if mode == "planes":
        for i in range(problem.geometry.n):
            direction = np.eye(problem.geometry.n)[i]
            pr = dg.moving_planes_sweep(u, problem.geometry, direction, f=problem.f, tol=tol)
            result[f"planes_axis{i}"] = pr.to_dict()
            cols, rows = pr.table()
            tables[f"planes_axis{i}"] = ([c + (" [length]" if c.startswith(("lambda", "argmin")) else
                                           " [1]" if c != "count" else "") for c in cols], rows)
    elif mode == "slide":
        taus = d.get("taus", [0.25, 0.5, 1.0])
        sr = dg.sliding_sweep(u, problem.geometry, taus, f=problem.f, tol=tol, top=d.get("top"))
        result["slide"] = sr.to_dict()
        cols, rows = sr.table()
        tables["slide"] = (["tau [length]", "min_w [1]", "argmin_x [length]", "argmin_y [length]"], rows)
    elif mode == "radial":
        rr = dg.radial_symmetry_check(u, center=d.get("center"), domain=problem.geometry)
        result["radial"] = rr.to_dict()
        rows = [[a, b, c] for a, b, c in zip(rr.radii, rr.shell_means, rr.shell_spreads)]
        tables["radial"] = (["radius [length]", "shell_mean [1]", "shell_spread [1]"], rows)
    else:  # asymptotic
        ar = dg.asymptotic_sweep(u, problem.geometry, problem.f, bins=d.get("bins"), M0=d.get("M0"),
                                 top=d.get("top"), tol=tol)
        result["asymptotic"] = ar.to_dict()
        cols, rows = ar.table()
        tables["asymptotic"] = (["dist_lo [length]", "dist_hi [length]", "u_min [1]", "u_max [1]"], rows)
    status = EXIT_OK if rep.converged else EXIT_NONCONVERGED
    return result, tables, status


def cmd_controls(cfg, args, out: Path) -> tuple:
    config = _operator_config(cfg)
    cs = _controls(cfg, config.n)
    rows = []
    for i, A in enumerate(cs):
        ev = np.linalg.eigvalsh(A.entries)
        rows.append([i, *A.entries.ravel().tolist(), float(ev[0]), float(ev[-1]), A.det])
    n = config.n
    cols = (["index"] + [f"a{i}{j} [1]" for i in range(n) for j in range(n)]
            + ["lambda_min [1]", "lambda_max [1]", "det [1]"])
    return {"size": len(cs), "matrices": cs.to_json()}, {"controls": (cols, rows)}, EXIT_OK


def cmd_oracle(cfg, args, out: Path) -> tuple:
    from .oracle import oracle_eval
    config = _operator_config(cfg)
    o = cfg.get("oracle", {})
    tag = o.get("operator", "frac_laplacian_fourier")
    try:
        terms = [AnalyticTerm(t["tag"], dict(t.get("params", {}))) for t in cfg["function"]["terms"]]
    except KeyError as e:
        raise ValidationError(f"function: missing {e}") from None
    except ValueError as e:
        raise ValidationError(f"function: {e}") from None
    vals = []
    for x in _points(cfg, config.n):
        try:
            v = oracle_eval(terms, tag, x, config.s, A=o.get("A"))
        except ValueError as e:
            raise ValidationError(f"oracle: {e}") from None
        vals.append({"x": x.tolist(), "value": v})
    rows = [[*r["x"], r["value"]] for r in vals]
    cols = [f"x{i} [length]" for i in range(config.n)] + ["value [length^-2s]"]
    return {"operator": tag, "evaluations": vals}, {"oracle": (cols, rows)}, EXIT_OK


def cmd_acceptance(cfg, args, out: Path) -> tuple:
    from .acceptance import reproduce_acceptance, summary_table
    crit = args.criteria or cfg.get("criteria")
    results = reproduce_acceptance(crit, mutation=args.mutation, tol_factor=args.tol_factor,
                                   seed=args.seed, echo=print)
    status = EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE
    return ({"results": [r.to_dict() for r in results], "mutation": args.mutation,
             "tol_factor": args.tol_factor}, {"acceptance": summary_table(results)}, status)


COMMANDS = {"eval": cmd_eval, "solve": cmd_solve, "eigen": cmd_eigen, "diagnose": cmd_diagnose,
            "controls": cmd_controls, "oracle": cmd_oracle, "acceptance": cmd_acceptance}


# --- entry point -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="csv: tables also as CSV files; json: tables embedded in report.json only")
    p = argparse.ArgumentParser(prog="nonlocal-bellman", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "diagnose":
            sp.add_argument("mode", choices=("planes", "slide", "radial", "asymptotic", "ma-limit", "decay"))
        if name == "acceptance":
            sp.add_argument("--criteria", type=int, nargs="*")
            sp.add_argument("--mutation", choices=("c_ns_double", "nonmonotone"))
            sp.add_argument("--tol-factor", type=float, default=1.0)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    report = {"command": args.command, "seed": args.seed, "format": args.format}
    if args.command == "diagnose":
        report["mode"] = args.mode
    try:
        cfg = load_config(args.config)
        report["config"] = cfg
        out.mkdir(parents=True, exist_ok=True)
        np.random.seed(args.seed)
        result, tables, status = COMMANDS[args.command](cfg, args, out)
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_INVALID
    report["config"] = _resolved(report["config"], args.command)
    report["result"] = result
    report["status"] = {EXIT_OK: "ok", EXIT_ACCEPTANCE: "acceptance_failed",
                        EXIT_NONCONVERGED: "not_converged"}[status]
    if args.format == "json":
        report["tables"] = {k: {"columns": c, "rows": r} for k, (c, r) in tables.items()}
    else:
        for k, (c, r) in tables.items():
            write_table(out / f"{k}.csv", c, r)
    write_json(out / "report.json", report)
    if status == EXIT_NONCONVERGED:
        print("solver did not converge; partial report written", file=sys.stderr)
    return status


def _resolved(cfg: dict, command: str) -> dict:
    """The configuration with defaults filled in where a section was given."""
    out = dict(cfg)
    if "problem" in cfg:
        try:
            out["problem"] = ProblemSpec.from_dict(cfg["problem"]).to_dict()
        except ValidationError:
            pass
    for key in ("config",):
        if key in cfg:
            out[key] = OperatorConfig(**cfg[key]).to_dict()
    return out


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
