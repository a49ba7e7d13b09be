"""Problem files (JSON) and exporters (CSV tables, OBJ meshes, certificates)."""

from __future__ import annotations

import csv
import io as _io
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .cauchy import CauchyProblem
from .errors import ParseError, ProblemFileError
from .expr import parse, to_text
from .linalg import Dims

FORMAT_VERSION = 1


@lru_cache(maxsize=None)
def problem_schema() -> dict:
    text = resources.files("constrank").joinpath("schemas/problem.schema.json").read_text("utf-8")
    return json.loads(text)


def _field_path(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _parse_list(texts, s: int, where: str) -> tuple:
    out = []
    for k, text in enumerate(texts):
        try:
            out.append(parse(text, s))
        except ParseError as exc:
            raise ProblemFileError(f"{where}[{k}]", str(exc)) from exc
    return tuple(out)


def problem_from_document(doc: dict) -> CauchyProblem:
    """Validate a decoded problem document and build the :class:`CauchyProblem`."""
    try:
        jsonschema.validate(doc, problem_schema())
    except jsonschema.ValidationError as exc:
        raise ProblemFileError(_field_path(exc.absolute_path), exc.message) from exc
    d = doc["dims"]
    try:
        dims = Dims(d["s"], d["m"], d["c"])
    except ValueError as exc:
        raise ProblemFileError("dims", str(exc)) from exc
    s, n, k = dims.s, dims.ambient, dims.fiber
    if len(doc["domain"]) != s:
        raise ProblemFileError("domain", f"expected {s} intervals, got {len(doc['domain'])}")
    for i, (lo, hi) in enumerate(doc["domain"]):
        if not lo < hi:
            raise ProblemFileError(f"domain[{i}]", f"empty interval [{lo}, {hi}]")
    for name in ("xi", "nstar", "nstar_alt"):
        if name in doc and len(doc[name]) != n:
            raise ProblemFileError(name, f"expected {n} components, got {len(doc[name])}")
    if len(doc["d_extra"]) != k:
        raise ProblemFileError("d_extra", f"expected {k} fields, got {len(doc['d_extra'])}")
    for j, fld in enumerate(doc["d_extra"]):
        if len(fld) != n:
            raise ProblemFileError(f"d_extra[{j}]", f"expected {n} components, got {len(fld)}")
    overrides = {}
    if "tolerances" in doc:
        overrides["tolerances"] = dict(doc["tolerances"])
    if "grid" in doc:
        overrides["grid"] = dict(doc["grid"])
    return CauchyProblem(
        dims=dims,
        xi=_parse_list(doc["xi"], s, "xi"),
        d_extra=tuple(_parse_list(f, s, f"d_extra[{j}]") for j, f in enumerate(doc["d_extra"])),
        nstar=_parse_list(doc["nstar"], s, "nstar"),
        domain=tuple(tuple(iv) for iv in doc["domain"]),
        nstar_alt=_parse_list(doc["nstar_alt"], s, "nstar_alt") if "nstar_alt" in doc else None,
        overrides=overrides,
    )


def load(path) -> CauchyProblem:
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise ProblemFileError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError("<file>", f"invalid JSON: {exc}") from exc
    return problem_from_document(doc)


def to_document(problem: CauchyProblem) -> dict:
    """Canonical document; ``problem_from_document(to_document(p)) == p``."""
    dims = problem.dims
    doc = {
        "format_version": FORMAT_VERSION,
        "dims": {"s": dims.s, "m": dims.m, "c": dims.c},
        "domain": [[lo, hi] for lo, hi in problem.domain],
        "xi": [to_text(e) for e in problem.xi],
        "d_extra": [[to_text(e) for e in f] for f in problem.d_extra],
        "nstar": [to_text(e) for e in problem.nstar],
    }
    if problem.nstar_alt is not None:
        doc["nstar_alt"] = [to_text(e) for e in problem.nstar_alt]
    for key in ("tolerances", "grid"):
        if key in problem.overrides:
            doc[key] = dict(problem.overrides[key])
    return doc


def canonical_json(problem: CauchyProblem) -> str:
    return json.dumps(to_document(problem), indent=2, sort_keys=True) + "\n"


def dump(problem: CauchyProblem, path) -> None:
    Path(path).write_text(canonical_json(problem), encoding="utf-8")


def shipped_problem_path(name: str) -> Path:
    """Path of a bundled problem file, e.g. ``shipped_problem_path("cylinder")``."""
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("constrank").joinpath("problems", name)))


def shipped_problems() -> list[str]:
    root = resources.files("constrank").joinpath("problems")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


# --------------------------------------------------------------------------
# exporters


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def rulings_csv(rows: list[dict], dims: Dims) -> str:
    """One row per grid point: a, E frame, phi_star, ruling vectors (ambient)."""
    s, m, n, k = dims.s, dims.m, dims.ambient, dims.fiber
    header = ["index"] + [f"a{i + 1}" for i in range(s)]
    header += [f"E{i + 1}_{q + 1}" for i in range(m) for q in range(n)]
    header += [f"phi{i + 1}_{q + 1}" for i in range(s) for q in range(m)]
    header += [f"X{j + 1}_{q + 1}" for j in range(k) for q in range(n)]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        vals = [str(r["index"])] + [_fmt(x) for x in r["a"]]
        vals += [_fmt(x) for x in np.ravel(r["E"])]
        vals += [_fmt(x) for x in np.ravel(r["phi_star"])]
        vals += [_fmt(x) for x in np.ravel(r["X"])]
        w.writerow(vals)
    return buf.getvalue()


def samples_csv(rows: list[tuple], dims: Dims) -> str:
    """Rows of (a index, b index, a, b, sigma(a, b))."""
    s, n, k = dims.s, dims.ambient, dims.fiber
    header = ["a_index", "b_index"] + [f"a{i + 1}" for i in range(s)]
    header += [f"b{j + 1}" for j in range(k)] + [f"x{q + 1}" for q in range(n)]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for ia, ib, a, b, x in rows:
        w.writerow([str(ia), str(ib)] + [_fmt(v) for v in a] + [_fmt(v) for v in b]
                   + [_fmt(v) for v in x])
    return buf.getvalue()


def obj_mesh(vertices: np.ndarray, rows: int, cols: int) -> str:
    """OBJ text for a rows x cols vertex grid (row-major) with quad faces."""
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in np.asarray(vertices)]
    for i in range(rows - 1):
        for j in range(cols - 1):
            v00 = i * cols + j + 1
            lines.append(f"f {v00} {v00 + cols} {v00 + cols + 1} {v00 + 1}")
    return "\n".join(lines) + "\n"


def read_obj_vertices(text: str) -> np.ndarray:
    return np.array([[float(t) for t in line.split()[1:4]]
                     for line in text.splitlines() if line.startswith("v ")])
