"""The map phi_p(v, n) = tangential part of the derivative of a normal section.

phi is computed exactly from jets.  The orthogonal projector P onto D is
differentiated in closed form: for a generator matrix G with P = G G^+,

    dP = (I - P) dG G^+ + ((I - P) dG G^+)^T

so a section N of the normal bundle extended as ``(I - P(a)) n`` has
derivative ``-dP n``.  Any other extension gives the same phi; see
:func:`well_definedness_probe`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cauchy import AdaptedFramePoint, CauchyProblem, ChartJets, chart_jets, frame_from_jets
from .errors import ConstRankError, NotNormalError
from .linalg import Subspace, numerical_rank, range_basis

DEFAULT_HYPOTHESIS_TOL = 1e-7
NORMAL_RESIDUAL_TOL = 1e-9

# value and chart jacobian (n,), (n, s) of an ambient vector field near a point
Extension = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]


@dataclass(frozen=True)
class LocalChart:
    """Frame plus first-order data needed to differentiate sections at one point."""

    frame: AdaptedFramePoint
    jets: ChartJets
    P: np.ndarray  # projector onto D, (n, n)
    dP: np.ndarray  # (s, n, n), derivative of P along each chart axis
    U: np.ndarray  # (s, s): jac @ U[:, i] = E_i

    def direction(self, i: int) -> np.ndarray:
        """Chart vector whose image under d(xi) is E_i."""
        return self.U[:, i]


def local_chart(problem: CauchyProblem, a, nstar=None) -> LocalChart:
    cj = chart_jets(problem, a, nstar)
    frame = frame_from_jets(problem.dims, cj)
    n, s = problem.dims.ambient, problem.dims.s
    P = frame.E.T @ frame.E
    G = cj.generators
    G_pinv = np.linalg.pinv(G)
    Q = np.eye(n) - P
    dP = np.empty((s, n, n))
    for k in range(s):
        half = Q @ cj.generator_derivative(k) @ G_pinv
        dP[k] = half + half.T
    U = np.linalg.lstsq(cj.jac, frame.E[:s].T, rcond=None)[0]
    return LocalChart(frame, cj, P, dP, U)


def projected_extension(problem: CauchyProblem, vector) -> Extension:
    """Extend a normal vector as its normalized projection onto each normal space."""
    vector = np.asarray(vector, dtype=float)
    length = np.linalg.norm(vector)

    def ext(a):
        lc = local_chart(problem, a)
        return _unit_projection(lc, vector, np.zeros((vector.shape[0], problem.dims.s)), length)

    return ext


def nstar_extension(problem: CauchyProblem, nstar=None) -> Extension:
    """The canonical extension of N*: unit projection of the nstar field."""

    def ext(a):
        lc = local_chart(problem, a, nstar)
        return _unit_projection(lc, lc.jets.nstar, lc.jets.nstar_grad, 1.0)

    return ext


def _unit_projection(lc: LocalChart, v, dv, length: float):
    n = v.shape[0]
    Q = np.eye(n) - lc.P
    raw = Q @ v
    draw = np.stack([-lc.dP[k] @ v + Q @ dv[:, k] for k in range(lc.dP.shape[0])], axis=1)
    r = np.linalg.norm(raw)
    if r == 0.0:
        raise ConstRankError("section has no normal component")
    unit = raw / r
    dunit = (draw - np.outer(unit, unit @ draw)) / r
    return length * unit, length * dunit


def phi_from_extension(lc: LocalChart, i: int, jac: np.ndarray) -> np.ndarray:
    """pi^T of the derivative of a section along E_i, given its chart jacobian."""
    return lc.P @ (jac @ lc.direction(i))


def _check_normal(lc: LocalChart, normal) -> np.ndarray:
    normal = np.asarray(normal, dtype=float)
    resid = np.linalg.norm(lc.P @ normal)
    if resid > NORMAL_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(normal))):
        raise NotNormalError(f"vector is not normal to D (tangential residual {resid:.3e})")
    return normal


def phi(problem: CauchyProblem, a, i: int, normal, extension: Extension | None = None) -> np.ndarray:
    """phi_p(E_i, normal) as an ambient vector in D_p (``i`` is 0-based)."""
    if not problem.in_domain(a):
        raise ConstRankError(f"point {np.asarray(a).tolist()} outside the domain")
    lc = local_chart(problem, a)
    normal = _check_normal(lc, normal)
    if extension is None:
        extension = projected_extension(problem, normal)
    value, jac = extension(np.asarray(a, dtype=float))
    if np.linalg.norm(value - normal) > 1e-9 * max(1.0, float(np.linalg.norm(normal))):
        raise ConstRankError("extension does not pass through the given normal vector")
    return phi_from_extension(lc, i, jac)


def well_definedness_probe(problem: CauchyProblem, a, i: int, ext1: Extension,
                           ext2: Extension) -> float:
    """Norm of the difference of phi computed through two extensions of one vector."""
    a = np.asarray(a, dtype=float)
    lc = local_chart(problem, a)
    v1, j1 = ext1(a)
    v2, j2 = ext2(a)
    if np.linalg.norm(v1 - v2) > 1e-9 * max(1.0, float(np.linalg.norm(v1))):
        raise ValueError("extensions disagree at the base point")
    _check_normal(lc, v1)
    return float(np.linalg.norm(phi_from_extension(lc, i, j1) - phi_from_extension(lc, i, j2)))


@dataclass(frozen=True)
class PhiData:
    frame: AdaptedFramePoint
    phi_star: np.ndarray  # (s, m): <phi(E_i, N*), E_k>
    phi_full: np.ndarray  # (c, s, m): <phi(E_i, N_beta), E_k>
    a_star: np.ndarray  # (s, s)
    sigma_min_astar: float
    sigma_max_astar: float
    image_phi: Subspace
    image_phi_star: Subspace
    tol: float = DEFAULT_HYPOTHESIS_TOL

    @property
    def dims(self) -> tuple[int, int, int]:
        c, s, m = self.phi_full.shape
        return s, m, c

    def to_ambient(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs) @ self.frame.E


def phi_data(problem: CauchyProblem, a, nstar=None, tol: float = DEFAULT_HYPOTHESIS_TOL) -> PhiData:
    """Everything the hypothesis checks and the ruling constructions need at ``a``.

    ``nstar`` optionally replaces the problem's N* expressions (used for the
    uniqueness probe with a second section).
    """
    lc = local_chart(problem, a, nstar)
    s, m, c = problem.dims.s, problem.dims.m, problem.dims.c
    E = lc.frame.E
    _, jac_star = _unit_projection(lc, lc.jets.nstar, lc.jets.nstar_grad, 1.0)
    star_vecs = np.array([phi_from_extension(lc, i, jac_star) for i in range(s)])
    full_vecs = np.empty((c, s, problem.dims.ambient))
    zero = np.zeros((problem.dims.ambient, s))
    for b, nb in enumerate(lc.frame.N):
        _, jac_b = _unit_projection(lc, nb, zero, 1.0)
        for i in range(s):
            full_vecs[b, i] = phi_from_extension(lc, i, jac_b)
    phi_star = star_vecs @ E.T
    phi_full = full_vecs @ E.T
    a_star = phi_star[:, :s].copy()
    sv = np.linalg.svd(a_star, compute_uv=False)
    n = problem.dims.ambient
    image_phi = Subspace(range_basis(full_vecs.reshape(c * s, n), tol), n)
    image_star = Subspace(range_basis(star_vecs, tol), n)
    return PhiData(lc.frame, phi_star, phi_full, a_star, float(sv[-1]), float(sv[0]),
                   image_phi, image_star, tol)


@dataclass(frozen=True)
class Decision:
    """Outcome of a hypothesis check; ``witness`` is always reported."""

    check: str
    passed: bool
    witness: float

    def __bool__(self) -> bool:
        return self.passed


def check_nonsingular(pd_or_astar, tol: float = DEFAULT_HYPOTHESIS_TOL) -> Decision:
    """Pass iff the smallest singular value of A* exceeds ``tol`` times the largest."""
    a_star = pd_or_astar.a_star if isinstance(pd_or_astar, PhiData) else np.atleast_2d(pd_or_astar)
    sv = np.linalg.svd(np.asarray(a_star, dtype=float), compute_uv=False)
    smin, smax = float(sv[-1]), float(sv[0])
    return Decision("nonsingularity", smax > 0.0 and smin > tol * smax, smin)


def check_solvability(pd: PhiData, tol: float = DEFAULT_HYPOTHESIS_TOL) -> Decision:
    """Pass iff every phi(E_i, N_beta) lies in phi(TS, N*); witness is the excess rank."""
    s, m, c = pd.dims
    star_basis = pd.image_phi_star.basis @ pd.frame.E.T
    stacked = np.vstack([star_basis, pd.phi_full.reshape(c * s, m)])
    excess = numerical_rank(stacked, tol) - s
    return Decision("solvability", excess == 0, float(excess))
