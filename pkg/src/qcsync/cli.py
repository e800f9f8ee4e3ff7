"""Command-line driver: ``qcsync {state,amps,pipeline,sweep}``.

Exit codes: 0 success, 1 invariant violation, 2 bad arguments,
3 solver / optimizer / purification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shlex
import sys

import numpy as np

from . import __version__
from . import qstate as qs
from .errors import error_sweep
from .noise import dephase_sweep
from .optimize import BoundViolation, OptimizerError, scan_n4
from .pipeline import PipelineConfig, report_json, run_pipeline
from .protocol import ProtocolError, all_tables, amplitude_closed_form, route_disagreement
from .purify import PurificationError, purify_sweep
from .spin import (SingletRankError, SolverError, dicke_state, random_singlet,
                   singlet_residual_report, solve_homogeneous_singlet, supersinglet_in_basis)

EXIT_OK, EXIT_INVARIANT, EXIT_ARGS, EXIT_SOLVER = 0, 1, 2, 3
ROUTE_TOL = 1e-10


class UsageError(ValueError):
    pass


def parse_angle(text: str) -> float:
    """Float radians, or a multiple of pi such as ``0.9pi`` / ``pi/2``."""
    s = str(text).strip().lower().replace(" ", "")
    try:
        if "pi" in s:
            num, _, den = s.partition("/")
            coef = num.replace("*", "").replace("pi", "")
            val = (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
            return val / float(den) if den else val
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from None


def read_config(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            k, v = (x.strip() for x in line.split("=", 1))
            out[k.lstrip("-").replace("-", "_")] = v
    return out


# -- output ---------------------------------------------------------------------

def header(args) -> dict:
    return {"tool": "qcsync", "version": __version__,
            "command": " ".join(["qcsync"] + [shlex.quote(a) for a in args.argv]),
            "seed": args.seed}


def write_output(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def table_text(args, columns: list[str], rows: list, extra: dict | None = None) -> str:
    h = header(args)
    if args.format == "json":
        doc = {"header": h, "columns": columns, "rows": [list(r) for r in rows]}
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for k, v in h.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


# -- commands -------------------------------------------------------------------

def cmd_state(args) -> int:
    rng = qs.make_rng(args.seed)
    info = {}
    if args.kind == "supersinglet":
        psi = supersinglet_in_basis(args.n, args.basis)
    elif args.kind == "dicke":
        k = args.n // 2 if args.k is None else args.k
        psi = dicke_state(args.n, k)
        info["k"] = k
    elif args.kind == "random-singlet":
        psi = random_singlet(args.n, rng)
    else:
        sol = solve_homogeneous_singlet(args.n, rng, restarts=args.restarts)
        psi = sol.state
        info.update(phase_residual=sol.residual, restarts_used=sol.restarts)
    rep = {"norm": float(np.linalg.norm(psi))}
    if args.kind != "dicke":
        rep.update({k: float(v) for k, v in singlet_residual_report(psi).items() if k != "norm"})
    rep.update(info)
    for k, v in rep.items():
        print(f"{k}: {fmt(v)}", file=sys.stderr)
    doc = {"header": header(args), "kind": args.kind, "report": rep, **json.loads(qs.state_to_json(psi))}
    write_output(json.dumps(doc) + "\n", args.out)
    return EXIT_OK


def cmd_amps(args) -> int:
    rng = qs.make_rng(args.seed)
    if args.kind == "supersinglet":
        psi = supersinglet_in_basis(args.n, "z")
    elif args.kind == "homogeneous":
        psi = solve_homogeneous_singlet(args.n, rng, restarts=args.restarts).state
    else:
        psi = random_singlet(args.n, rng)
    tables = all_tables(psi)
    if args.kind == "supersinglet":
        tables["closed-form"] = amplitude_closed_form(args.n)
    names = list(tables)
    ref = tables[names[0]]
    rows = [[n, ref.group(n)] + [tables[m][n] for m in names] for n in ref.parties]
    rows.append(["sum", ""] + [tables[m].total() for m in names])
    dis = route_disagreement(tables.values())
    text = table_text(args, ["party", "group"] + names, rows, {"max_route_disagreement": dis})
    write_output(text, args.out)
    bad = dis > ROUTE_TOL or abs(ref.total() + 1) > ROUTE_TOL
    if bad:
        print(f"route disagreement {dis:.3e} or sum rule violated", file=sys.stderr)
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig(args.n, args.phi, args.rounds, args.shots, args.t, args.omega,
                         args.seed, args.check_shots, args.distill_fidelity)
    rep = run_pipeline(cfg)
    doc = {"header": header(args), **rep}
    write_output(report_json(doc) + "\n", args.out)
    if not rep["purification"]["converged"]:
        print("purification did not converge; see purification trace", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.kind == "purify":
        grid = args.grid or 33
        phis = np.linspace(0, math.pi, grid)
        rows = [r for tr in purify_sweep(phis, args.rounds) for r in tr.rows()]
        text = table_text(args, ["phi", "round", "fidelity", "success_prob", "zz"], rows)
    elif args.kind == "dephase":
        grid = args.grid or 21
        rows = dephase_sweep(args.n_list or [4, 6, 8], np.linspace(0, 1, grid))
        text = table_text(args, ["N", "p", "party", "group", "amplitude"], rows)
    elif args.kind == "error":
        grid = args.grid or 61
        rows = error_sweep(np.logspace(0, 6, grid), args.fidelities, args.omega)
        text = table_text(args, ["M", "F", "dt_omega", "dt_cs_ps", "dt_sr_fs"], rows)
    else:
        grid = args.grid or 64
        res = scan_n4(grid, grid)
        rows = [(res.thetas[i], res.phis[j], res.values[i, j])
                for i in range(len(res.thetas)) for j in range(len(res.phis))]
        text = table_text(args, ["theta", "phi", "objective"], rows,
                          {"maxima": json.loads(res.maxima_json())})
    write_output(text, args.out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--config", default=None, help="key = value file; flags win")

    p = argparse.ArgumentParser(prog="qcsync", description="Multiparty clock synchronization simulator")
    p.add_argument("--version", action="version", version=f"qcsync {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}

    s = sub.add_parser("state", parents=[common], help="construct and serialize a singlet state")
    s.add_argument("--kind", choices=["supersinglet", "homogeneous", "dicke", "random-singlet"],
                   default="supersinglet")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--k", type=int, default=None, help="excitations for dicke (default n/2)")
    s.add_argument("--basis", choices=["z", "x", "y"], default="z")
    s.add_argument("--restarts", type=int, default=50)
    s.set_defaults(func=cmd_state)
    subs["state"] = s

    a = sub.add_parser("amps", parents=[common], help="signal amplitudes from every route")
    a.add_argument("--n", type=int, default=4)
    a.add_argument("--kind", choices=["supersinglet", "homogeneous", "random-singlet"],
                   default="supersinglet")
    a.add_argument("--restarts", type=int, default=50)
    a.set_defaults(func=cmd_amps)
    subs["amps"] = a

    q = sub.add_parser("pipeline", parents=[common], help="full distribute-purify-synchronize run")
    q.add_argument("--n", type=int, default=4)
    q.add_argument("--phi", type=parse_angle, default=0.0, help="Preskill phase, e.g. 0.9pi")
    q.add_argument("--rounds", type=int, default=10)
    q.add_argument("--shots", type=int, default=10_000)
    q.add_argument("--t", type=float, default=1.0, help="true time offset")
    q.add_argument("--omega", type=float, default=1.0)
    q.add_argument("--check-shots", type=int, default=1000)
    q.add_argument("--distill-fidelity", type=float, default=None)
    q.set_defaults(func=cmd_pipeline)
    subs["pipeline"] = q

    w = sub.add_parser("sweep", parents=[common], help="figure data sweeps")
    w.add_argument("kind", choices=["purify", "dephase", "error", "optimize"])
    w.add_argument("--grid", type=int, default=None, help="points per axis")
    w.add_argument("--rounds", type=int, default=10)
    w.add_argument("--n", dest="n_list", type=int_list, default=None, help="e.g. 4,6,8")
    w.add_argument("--omega", type=float, default=1.0)
    w.add_argument("--fidelities", type=float_list, default=[1.0, 0.999, 0.99, 0.95, 0.9])
    w.set_defaults(func=cmd_sweep)
    subs["sweep"] = w
    return p, subs


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as e:
            parser.error(f"cannot read config: {e}")
        except UsageError as e:
            parser.error(str(e))
        sp = subs[args.command]
        known = {a.dest: a for a in sp._actions}
        unknown = set(cfg) - set(known)
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        defaults = {}
        for k, v in cfg.items():
            conv = known[k].type
            try:
                defaults[k] = conv(v) if conv else v
            except (ValueError, argparse.ArgumentTypeError) as e:
                parser.error(f"config key {k}: {e}")
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    args.argv = list(argv)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (SolverError, OptimizerError, SingletRankError, PurificationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (BoundViolation, ProtocolError) as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, qs.StateError) as e:
        print(f"bad arguments: {e}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
