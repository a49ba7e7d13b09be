"""The ruled extension sigma(a, b) = xi(a) + sum_j b_j X_j(a) and its certification.

Derivatives of xi come from jets.  The ruling field X is defined pointwise by
linear algebra, so its chart derivatives are taken by central differences
with step ``h``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cauchy import CauchyProblem, chart_jets
from .errors import ConstRankError, ImmersionFailure
from .linalg import Subspace, max_angle, numerical_rank, orthonormalize
from .nullity import (
    DEFAULT_HYPOTHESIS_TOL,
    PhiData,
    check_nonsingular,
    check_solvability,
    phi_data,
)
from .rulings import (
    fiber_nullspace_oracle,
    ruling_frame_cofactor,
    ruling_frame_cross,
    section_fiber,
)

DEFAULT_GRID = 17
DEFAULT_B_POINTS = 5
DEFAULT_STEP = 1e-4
# relative rank threshold for the sigma Jacobian; ruling derivatives carry
# O(step^2) ~ 1e-9 central-difference error, so 1e-9 would be too tight
SIGMA_RANK_TOL = 1e-7
BMAX_FRACTION = 0.25
# caps b_max when the rulings barely turn (e.g. cylinders)
FIBER_SCALE_CAP = 4.0

DEFAULT_TOLERANCES = {
    "hypothesis": DEFAULT_HYPOTHESIS_TOL,
    "tangency": 1e-7,
    "constant_tangent": 1e-6,
    "nullity_rank": 1e-6,
    "spectral_gap": 1e-6,
    "fiber_angle": 1e-8,
}

# maps the phi data at a point to the ruling vectors (rows, ambient coordinates)
RulingProvider = Callable[[PhiData], np.ndarray]


def cross_rulings(pd: PhiData) -> np.ndarray:
    return ruling_frame_cross(pd).X


@dataclass(frozen=True)
class RulingJets:
    """xi and the ruling field at a chart point, to second order."""

    a: np.ndarray
    p: np.ndarray
    jac: np.ndarray  # (n, s)
    hess: np.ndarray  # (n, s, s)
    X: np.ndarray  # (k, n)
    dX: np.ndarray  # (s, k, n)
    ddX: np.ndarray  # (s, s, k, n)
    pd: PhiData


def ruling_jets(problem: CauchyProblem, a, h: float = DEFAULT_STEP,
                ruling: RulingProvider = cross_rulings, nstar=None) -> RulingJets:
    a = np.asarray(a, dtype=float).reshape(-1)
    s = problem.dims.s
    cj = chart_jets(problem, a)
    pd = phi_data(problem, a, nstar)
    X0 = np.asarray(ruling(pd))
    cache = {}

    def X_at(offset: tuple) -> np.ndarray:
        if offset not in cache:
            shift = np.array(offset, dtype=float) * h
            cache[offset] = np.asarray(ruling(phi_data(problem, a + shift, nstar)))
        return cache[offset]

    def unit(k: int, sign: int) -> tuple:
        e = [0] * s
        e[k] = sign
        return tuple(e)

    def pair(k: int, sk: int, l: int, sl: int) -> tuple:
        e = [0] * s
        e[k] += sk
        e[l] += sl
        return tuple(e)

    dX = np.empty((s,) + X0.shape)
    ddX = np.empty((s, s) + X0.shape)
    for k in range(s):
        plus, minus = X_at(unit(k, 1)), X_at(unit(k, -1))
        dX[k] = (plus - minus) / (2 * h)
        ddX[k, k] = (plus - 2 * X0 + minus) / (h * h)
    for k, l in itertools.combinations(range(s), 2):
        mixed = (X_at(pair(k, 1, l, 1)) - X_at(pair(k, 1, l, -1))
                 - X_at(pair(k, -1, l, 1)) + X_at(pair(k, -1, l, -1))) / (4 * h * h)
        ddX[k, l] = ddX[l, k] = mixed
    return RulingJets(a, cj.p, cj.jac, cj.hess, X0, dX, ddX, pd)


def sigma(problem_or_rj, X=None, b=None) -> np.ndarray:
    """sigma(a, b) = xi(a) + sum_j b_j X_j(a).

    Call as ``sigma(rj, b)`` with :class:`RulingJets`, or ``sigma(p, X, b)``.
    """
    if isinstance(problem_or_rj, RulingJets):
        rj, b = problem_or_rj, X
        p, X = rj.p, rj.X
    else:
        p = np.asarray(problem_or_rj, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    return p + b @ np.asarray(X)


def sigma_jacobian(rj: RulingJets, b) -> np.ndarray:
    """(n, m) matrix of partials: chart directions first, then ruling coordinates."""
    b = np.asarray(b, dtype=float).reshape(-1)
    da = rj.jac + np.einsum("j,kjn->nk", b, rj.dX)
    return np.hstack([da, rj.X.T])


def sigma_hessian(rj: RulingJets, b) -> np.ndarray:
    """(m, m, n) second partials of sigma in the same variable order."""
    b = np.asarray(b, dtype=float).reshape(-1)
    s, k, n = rj.dX.shape
    m = s + k
    out = np.zeros((m, m, n))
    out[:s, :s] = np.transpose(rj.hess, (1, 2, 0)) + np.einsum("j,kljn->kln", b, rj.ddX)
    out[:s, s:] = rj.dX
    out[s:, :s] = np.transpose(rj.dX, (1, 0, 2))
    return out


def tangent_space(rj: RulingJets, b) -> Subspace:
    jac = sigma_jacobian(rj, b)
    m = jac.shape[1]
    if numerical_rank(jac, SIGMA_RANK_TOL) < m:
        raise ImmersionFailure(f"sigma is not immersive at a={rj.a.tolist()}, b={list(b)}")
    basis, r = orthonormalize(list(jac.T), tol=1e-12 * float(np.abs(jac).max()))
    if r < m:
        raise ImmersionFailure(f"sigma is not immersive at a={rj.a.tolist()}, b={list(b)}")
    return basis


@dataclass(frozen=True)
class SecondForm:
    tangent: np.ndarray  # (m, n) rows, orthonormalized jacobian columns in order
    normal: np.ndarray  # (c, n)
    R: np.ndarray  # jacobian = tangent.T @ R
    form: np.ndarray  # (m, m, c): <alpha(E'_i, E'_l), N'_beta>


def second_fundamental_form(jacobian: np.ndarray, hessian: np.ndarray) -> SecondForm:
    """Second fundamental form of an immersion from its first and second partials.

    ``jacobian`` is (n, m); ``hessian`` is (m, m, n).
    """
    n, m = jacobian.shape
    if numerical_rank(jacobian, 1e-9) < m:
        raise ImmersionFailure("jacobian is rank deficient")
    tan, r = orthonormalize(list(jacobian.T), tol=1e-12 * float(np.abs(jacobian).max()))
    if r < m:
        raise ImmersionFailure("jacobian is rank deficient")
    T = np.array(tan.basis)
    full, _ = orthonormalize(list(T) + list(np.eye(n)), tol=1e-6)
    N = np.array(full.basis[m:])
    R = T @ jacobian
    Rinv = np.linalg.solve(R, np.eye(m))
    coords = np.einsum("pqn,bn->pqb", hessian, N)
    form = np.einsum("pi,pqb,ql->ilb", Rinv, coords, Rinv)
    return SecondForm(T, N, R, form)


@dataclass(frozen=True)
class NullityResult:
    index: int
    spectrum: np.ndarray
    min_nonzero_sv: float
    max_null_sv: float
    form: SecondForm

    @property
    def gap_ratio(self) -> float:
        if self.min_nonzero_sv == 0.0:
            return float("inf") if self.max_null_sv > 0 else 0.0
        return self.max_null_sv / self.min_nonzero_sv


def nullity_from_form(sf: SecondForm, tol: float) -> NullityResult:
    m, _, c = sf.form.shape
    B = sf.form.reshape(m, m * c)
    sv = np.linalg.svd(B, compute_uv=False)
    rank = numerical_rank(B, tol)
    min_nz = float(sv[rank - 1]) if rank > 0 else 0.0
    max_null = float(sv[rank]) if rank < len(sv) else 0.0
    return NullityResult(m - rank, sv, min_nz, max_null, sf)


def relative_nullity_index(rj: RulingJets, b, tol: float = DEFAULT_TOLERANCES["nullity_rank"]) -> NullityResult:
    """Dimension of the kernel of the second fundamental form at sigma(a, b)."""
    sf = second_fundamental_form(sigma_jacobian(rj, b), sigma_hessian(rj, b))
    return nullity_from_form(sf, tol)


def nullity_from_jets(jacobian, hessian, tol: float = DEFAULT_TOLERANCES["nullity_rank"]) -> NullityResult:
    """Relative nullity of an arbitrary immersion, given (n, m) and (n, m, m) jets."""
    hessian = np.asarray(hessian, dtype=float)
    return nullity_from_form(second_fundamental_form(np.asarray(jacobian, dtype=float),
                                                     np.transpose(hessian, (1, 2, 0))), tol)


def verify_constant_tangent(rj: RulingJets, b_samples) -> float:
    """Largest principal angle between the tangent at (a, b) and at (a, 0)."""
    base = tangent_space(rj, np.zeros(rj.X.shape[0]))
    worst = 0.0
    for b in b_samples:
        worst = max(worst, max_angle(base, tangent_space(rj, b)))
    return worst


def shape_operator_block(rj: RulingJets, b) -> np.ndarray:
    """s x s matrix -<alpha(E_i, E_k), N*> at sigma(a, b), E_i from the frame at (a, 0).

    On a rank-s extension the tangent space along a ruling does not change,
    so E_1..E_s and N* remain tangent and normal there.
    """
    s = rj.jac.shape[1]
    jac = sigma_jacobian(rj, b)
    hes = sigma_hessian(rj, b)
    E = rj.pd.frame.E[:s]
    y = np.linalg.lstsq(jac, E.T, rcond=None)[0]  # (m, s)
    T, _ = orthonormalize(list(jac.T), tol=1e-12)
    P_normal = np.eye(jac.shape[0]) - T.basis.T @ T.basis
    nstar = rj.pd.frame.nstar_unit
    block = np.empty((s, s))
    for i in range(s):
        for k in range(s):
            alpha = P_normal @ np.einsum("p,pqn,q->n", y[:, i], hes, y[:, k])
            block[i, k] = -alpha @ nstar
    return block


def b_grid(k: int, b_max: float, points: int) -> list[np.ndarray]:
    axis = np.linspace(-b_max, b_max, points) if points > 1 else np.array([0.0])
    return [np.array(b) for b in itertools.product(axis, repeat=k)]


def fiber_scale(rjs: list[RulingJets]) -> float:
    """min over the grid of the smallest singular value of the sigma Jacobian at b = 0,
    divided by the largest ruling-derivative norm over the grid."""
    sv_min = min(float(np.linalg.svd(sigma_jacobian(rj, np.zeros(rj.X.shape[0])),
                                     compute_uv=False)[-1]) for rj in rjs)
    dmax = max(float(np.max(np.linalg.norm(rj.dX, axis=-1))) if rj.dX.size else 0.0 for rj in rjs)
    if dmax <= sv_min / FIBER_SCALE_CAP:
        return FIBER_SCALE_CAP
    return sv_min / dmax


def default_b_max(rjs: list[RulingJets]) -> float:
    return BMAX_FRACTION * fiber_scale(rjs)


# --------------------------------------------------------------------------
# certification


def _num(x: float) -> float:
    """Round to 12 significant digits so reports are stable and readable."""
    x = float(x)
    if not np.isfinite(x):
        return x
    return float(f"{x:.12g}")


def problem_digest(problem: CauchyProblem) -> str:
    from .io import canonical_json

    return hashlib.sha256(canonical_json(problem).encode("utf-8")).hexdigest()


@dataclass
class Certificate:
    problem_digest: str
    grid: dict
    tolerances: dict
    hypotheses: list = field(default_factory=list)
    verification: list = field(default_factory=list)
    verdict: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict.get("status") == "certified"

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "problem_digest": self.problem_digest,
            "grid": self.grid,
            "tolerances": self.tolerances,
            "hypotheses": self.hypotheses,
            "verification": self.verification,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _parallel_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def hypothesis_record(problem: CauchyProblem, index: int, a, tol: float) -> dict:
    rec = {"index": index, "a": [_num(x) for x in a]}
    try:
        pd = phi_data(problem, a, tol=tol)
    except ConstRankError as exc:
        rec.update(error=f"{type(exc).__name__}: {exc}", passed=False)
        return rec
    ns = check_nonsingular(pd, tol)
    sol = check_solvability(pd, tol)
    rec["nonsingular"] = {
        "passed": ns.passed,
        "sigma_min": _num(pd.sigma_min_astar),
        "sigma_max": _num(pd.sigma_max_astar),
    }
    rec["solvability"] = {"passed": sol.passed, "excess_rank": int(sol.witness)}
    rec["passed"] = ns.passed and sol.passed
    return rec


def check_hypotheses(problem: CauchyProblem, grid_points: int = DEFAULT_GRID,
                     tol: float = DEFAULT_HYPOTHESIS_TOL, workers: int = 1) -> tuple[list, dict]:
    """Hypothesis records over the grid and a verdict dict (status, reason, worst point)."""
    points = problem.grid(grid_points)
    records = _parallel_map(lambda ia: hypothesis_record(problem, ia[0], ia[1], tol),
                            list(enumerate(points)), workers)
    return records, _hypothesis_verdict(records)


def _hypothesis_verdict(records: list) -> dict:
    errors = [r for r in records if "error" in r]
    if errors:
        return {"status": "failed", "reason": "data", "worst_point": errors[0]["index"],
                "detail": errors[0]["error"]}
    bad_ns = [r for r in records if not r["nonsingular"]["passed"]]
    if bad_ns:
        worst = min(bad_ns, key=lambda r: (r["nonsingular"]["sigma_min"] / r["nonsingular"]["sigma_max"]
                                           if r["nonsingular"]["sigma_max"] > 0 else 0.0, r["index"]))
        return {"status": "failed", "reason": "nonsingularity", "worst_point": worst["index"],
                "sigma_min": worst["nonsingular"]["sigma_min"]}
    bad_sol = [r for r in records if not r["solvability"]["passed"]]
    if bad_sol:
        worst = max(bad_sol, key=lambda r: (r["solvability"]["excess_rank"], -r["index"]))
        return {"status": "failed", "reason": "solvability", "worst_point": worst["index"],
                "excess_rank": worst["solvability"]["excess_rank"]}
    return {"status": "passed"}


_CHECK_ORDER = ("containment", "tangency", "constant_tangent", "nullity", "fiber", "uniqueness")


def _verify_point(problem: CauchyProblem, index: int, rj: RulingJets, bs: list, tols: dict,
                  nstar_alt) -> dict:
    s, m = problem.dims.s, problem.dims.m
    zero = np.zeros(problem.dims.fiber)
    rec = {"index": index, "a": [_num(x) for x in rj.a]}
    failed = []
    try:
        containment = float(np.max(np.abs(sigma(rj, zero) - rj.p)))
        d_span = Subspace(rj.pd.frame.E, problem.dims.ambient)
        tangency = max_angle(tangent_space(rj, zero), d_span)
        const = verify_constant_tangent(rj, bs)
        indices, gaps = [], []
        for b in bs:
            nr = relative_nullity_index(rj, b, tols["nullity_rank"])
            indices.append(nr.index)
            gaps.append(nr.gap_ratio)
    except ImmersionFailure as exc:
        rec.update(error=f"ImmersionFailure: {exc}", failed=["immersion"])
        return rec
    rec["containment"] = _num(containment)
    rec["tangency_angle"] = _num(tangency)
    rec["constant_tangent_angle"] = _num(const)
    rec["nullity_indices"] = sorted(set(indices))
    rec["max_gap_ratio"] = _num(max(gaps))
    if containment != 0.0:
        failed.append("containment")
    if tangency >= tols["tangency"]:
        failed.append("tangency")
    if const > tols["constant_tangent"]:
        failed.append("constant_tangent")
    if any(i != m - s for i in indices) or max(gaps) >= tols["spectral_gap"]:
        failed.append("nullity")

    pd = rj.pd
    try:
        oracle = fiber_nullspace_oracle(pd).span
        produced = Subspace.span(rj.X)
        cof = ruling_frame_cofactor(pd).span
        fiber_angle = max(max_angle(produced, oracle), max_angle(cof, oracle),
                          0.0 if produced.dim == oracle.dim else np.pi / 2)
    except ConstRankError as exc:
        rec["fiber_error"] = f"{type(exc).__name__}: {exc}"
        fiber_angle = float(np.pi / 2)
    rec["fiber_angle"] = _num(fiber_angle)
    if fiber_angle >= tols["fiber_angle"]:
        failed.append("fiber")

    if nstar_alt is not None:
        try:
            pd_alt = phi_data(problem, rj.a, nstar_alt, tol=pd.tol)
            fiber = section_fiber(pd)
            fiber_alt = section_fiber(pd_alt)
            uniq = max(max_angle(fiber, fiber_alt), max_angle(fiber_alt, oracle)
                       if "fiber_error" not in rec else np.pi / 2)
            if fiber.dim != fiber_alt.dim:
                uniq = float(np.pi / 2)
        except ConstRankError as exc:
            rec["uniqueness_error"] = f"{type(exc).__name__}: {exc}"
            uniq = float(np.pi / 2)
        rec["uniqueness_angle"] = _num(uniq)
        if uniq >= tols["fiber_angle"]:
            failed.append("uniqueness")
    rec["failed"] = failed
    return rec


def certify(problem: CauchyProblem, grid_points: int = DEFAULT_GRID,
            b_points: int = DEFAULT_B_POINTS, b_max: float | None = None,
            tolerances: dict | None = None, workers: int = 1, h: float = DEFAULT_STEP,
            ruling: RulingProvider = cross_rulings) -> Certificate:
    """Check the hypotheses and, if they hold, verify the extension over the grid."""
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(tolerances or {})
    cert = Certificate(
        problem_digest(problem),
        {"points_per_axis": grid_points, "b_points": b_points, "b_max": None, "step": h},
        {k: _num(v) for k, v in sorted(tols.items())},
    )
    points = problem.grid(grid_points)
    records, hv = check_hypotheses(problem, grid_points, tols["hypothesis"], workers)
    cert.hypotheses = records
    if hv["status"] != "passed":
        cert.verdict = hv
        return cert

    def build(a):
        try:
            return ruling_jets(problem, a, h, ruling)
        except ConstRankError as exc:
            return exc

    rjs = _parallel_map(build, points, workers)
    broken = [(i, r) for i, r in enumerate(rjs) if isinstance(r, Exception)]
    if broken:
        i, exc = broken[0]
        cert.verdict = {"status": "failed", "reason": "rulings", "worst_point": i,
                        "detail": f"{type(exc).__name__}: {exc}"}
        return cert

    if b_max is None:
        b_max = default_b_max(rjs)
    cert.grid["b_max"] = _num(b_max)
    bs = b_grid(problem.dims.fiber, b_max, b_points)
    cert.verification = _parallel_map(
        lambda ir: _verify_point(problem, ir[0], ir[1], bs, tols, problem.nstar_alt),
        list(enumerate(rjs)), workers)

    failures = [r for r in cert.verification if r["failed"]]
    if not failures:
        cert.verdict = {"status": "certified"}
        return cert
    reasons = sorted({f for r in failures for f in r["failed"]},
                     key=lambda f: _CHECK_ORDER.index(f) if f in _CHECK_ORDER else -1)
    reason = reasons[0]
    worst = _worst(failures, reason)
    cert.verdict = {"status": "failed", "reason": reason, "reasons": reasons,
                    "worst_point": worst["index"]}
    if reason == "constant_tangent":
        cert.verdict["constant_tangent_angle"] = worst["constant_tangent_angle"]
    return cert


def _worst(failures: list, reason: str) -> dict:
    key = {
        "tangency": "tangency_angle",
        "constant_tangent": "constant_tangent_angle",
        "nullity": "max_gap_ratio",
        "fiber": "fiber_angle",
        "uniqueness": "uniqueness_angle",
        "containment": "containment",
    }.get(reason)
    hits = [r for r in failures if reason in r["failed"]]
    if key is None:
        return hits[0]
    return max(hits, key=lambda r: (r.get(key, 0.0), -r["index"]))
