"""Command-line interface.

Exit codes: 0 ok, 1 I/O, schema or invalid data, 2 hypothesis or
verification failure, 3 unsupported dimensions.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import extension as ext
from .cauchy import CauchyProblem
from .errors import ConstRankError, ProblemFileError
from .io import load, obj_mesh, rulings_csv, samples_csv

EXIT_OK, EXIT_IO, EXIT_HYPOTHESIS, EXIT_DIMS = 0, 1, 2, 3


class _Settings:
    def __init__(self, problem: CauchyProblem, args):
        grid = problem.overrides.get("grid", {})
        self.grid = args.grid or grid.get("points", ext.DEFAULT_GRID)
        self.b_points = args.bpoints or grid.get("b_points", ext.DEFAULT_B_POINTS)
        self.b_max = args.bmax if args.bmax is not None else grid.get("b_max")
        self.tolerances = dict(ext.DEFAULT_TOLERANCES)
        self.tolerances.update(problem.overrides.get("tolerances", {}))
        if args.tol is not None:
            self.tolerances["hypothesis"] = args.tol
        self.workers = max(1, args.threads)


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def _hypothesis_report(records: list, verdict: dict) -> list[str]:
    ok = [r for r in records if "error" not in r]
    lines = [f"grid points: {len(records)}"]
    if ok:
        worst_ns = min(ok, key=lambda r: (r["nonsingular"]["sigma_min"], r["index"]))
        worst_sol = max(ok, key=lambda r: (r["solvability"]["excess_rank"], -r["index"]))
        lines.append(
            f"smallest sigma_min(A*): {worst_ns['nonsingular']['sigma_min']:.6e} "
            f"(largest {worst_ns['nonsingular']['sigma_max']:.6e}) at point {worst_ns['index']} "
            f"a={worst_ns['a']}")
        lines.append(f"largest excess rank: {worst_sol['solvability']['excess_rank']} "
                     f"at point {worst_sol['index']} a={worst_sol['a']}")
    if verdict["status"] == "passed":
        lines.append("hypotheses: PASS")
    else:
        extra = {k: v for k, v in verdict.items() if k not in ("status", "reason")}
        lines.append(f"hypotheses: FAIL ({verdict['reason']}) {extra}")
    return lines


def _load(args):
    try:
        return load(args.problem)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def _hypotheses(problem, st, args):
    records, verdict = ext.check_hypotheses(problem, st.grid, st.tolerances["hypothesis"], st.workers)
    _say(args, *_hypothesis_report(records, verdict))
    if verdict["status"] == "passed":
        return None
    return EXIT_IO if verdict["reason"] == "data" else EXIT_HYPOTHESIS


def _ruling_jets(problem, st):
    points = problem.grid(st.grid)
    rjs = ext._parallel_map(lambda a: ext.ruling_jets(problem, a), points, st.workers)
    b_max = st.b_max if st.b_max is not None else ext.default_b_max(rjs)
    return rjs, b_max


def cmd_check(args) -> int:
    problem = _load(args)
    if problem is None:
        return EXIT_IO
    st = _Settings(problem, args)
    code = _hypotheses(problem, st, args)
    return EXIT_OK if code is None else code


def cmd_solve(args) -> int:
    problem = _load(args)
    if problem is None:
        return EXIT_IO
    st = _Settings(problem, args)
    code = _hypotheses(problem, st, args)
    if code is not None:
        return code
    try:
        rjs, b_max = _ruling_jets(problem, st)
    except ConstRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    bs = ext.b_grid(problem.dims.fiber, b_max, st.b_points)
    ruling_rows = [{"index": i, "a": rj.a, "E": rj.pd.frame.E, "phi_star": rj.pd.phi_star, "X": rj.X}
                   for i, rj in enumerate(rjs)]
    sample_rows = [(i, j, rj.a, b, ext.sigma(rj, b))
                   for i, rj in enumerate(rjs) for j, b in enumerate(bs)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rulings.csv").write_text(rulings_csv(ruling_rows, problem.dims), encoding="utf-8")
    (out / "samples.csv").write_text(samples_csv(sample_rows, problem.dims), encoding="utf-8")
    _say(args, f"b_max: {b_max:.6g}", f"wrote {out / 'rulings.csv'} and {out / 'samples.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    problem = _load(args)
    if problem is None:
        return EXIT_IO
    st = _Settings(problem, args)
    cert = ext.certify(problem, st.grid, st.b_points, st.b_max, st.tolerances, st.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "certificate.json").write_text(cert.to_json(), encoding="utf-8")
    _say(args, f"verdict: {cert.verdict}", f"wrote {out / 'certificate.json'}")
    if cert.certified:
        return EXIT_OK
    return EXIT_IO if cert.verdict.get("reason") == "data" else EXIT_HYPOTHESIS


def cmd_export_obj(args) -> int:
    problem = _load(args)
    if problem is None:
        return EXIT_IO
    d = problem.dims
    if not (d.m == 2 and d.c == 1):
        print(f"error: OBJ export needs a surface in R^3 (m=2, c=1); got s={d.s}, m={d.m}, c={d.c}",
              file=sys.stderr)
        return EXIT_DIMS
    st = _Settings(problem, args)
    code = _hypotheses(problem, st, args)
    if code is not None:
        return code
    try:
        rjs, b_max = _ruling_jets(problem, st)
    except ConstRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    bs = ext.b_grid(d.fiber, b_max, st.b_points)
    verts = np.array([ext.sigma(rj, b) for rj in rjs for b in bs])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "mesh.obj").write_text(obj_mesh(verts, len(rjs), len(bs)), encoding="utf-8")
    _say(args, f"wrote {out / 'mesh.obj'} ({len(verts)} vertices)")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "export-obj": cmd_export_obj,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="constrank",
        description="Solve and certify the Cauchy problem for constant-rank submanifolds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("check", "check the hypotheses on the grid"),
        ("solve", "write rulings.csv and samples.csv"),
        ("verify", "write certificate.json; exit 0 iff certified"),
        ("export-obj", "write mesh.obj (surfaces in R^3 only)"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("problem", help="problem file (JSON)")
        p.add_argument("--grid", type=int, default=None, help="grid points per chart axis")
        p.add_argument("--bpoints", type=int, default=None, help="samples per ruling axis")
        p.add_argument("--tol", type=float, default=None, help="relative hypothesis tolerance")
        p.add_argument("--bmax", type=float, default=None, help="ruling half-length")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
