"""Cauchy data ``(S, D, N*)`` on a single chart and adapted orthonormal frames."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import jets as _jets
from .errors import (
    DistributionRankFailure,
    ImmersionFailure,
    NormalSectionVanishes,
)
from .expr import Expr
from .linalg import Dims, null_space, numerical_rank, orthonormalize

IMMERSION_TOL = 1e-9
NSTAR_VANISH_TOL = 1e-10


@dataclass(frozen=True)
class CauchyProblem:
    """Symbolic Cauchy data.

    ``xi`` parametrizes S, ``d_extra`` holds the m-s generator fields that
    complete TS to D, and ``nstar`` is any ambient field whose projection to
    the normal bundle of D is the section N*.
    """

    dims: Dims
    xi: tuple
    d_extra: tuple
    nstar: tuple
    domain: tuple
    nstar_alt: tuple | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.dims.ambient
        object.__setattr__(self, "xi", tuple(self.xi))
        object.__setattr__(self, "nstar", tuple(self.nstar))
        object.__setattr__(self, "d_extra", tuple(tuple(d) for d in self.d_extra))
        object.__setattr__(self, "domain", tuple((float(lo), float(hi)) for lo, hi in self.domain))
        if self.nstar_alt is not None:
            object.__setattr__(self, "nstar_alt", tuple(self.nstar_alt))
        if len(self.xi) != n or len(self.nstar) != n:
            raise ValueError(f"xi and nstar need {n} components")
        if len(self.d_extra) != self.dims.fiber or any(len(d) != n for d in self.d_extra):
            raise ValueError(f"d_extra needs {self.dims.fiber} fields of {n} components")
        if len(self.domain) != self.dims.s:
            raise ValueError(f"domain needs {self.dims.s} intervals")
        if self.nstar_alt is not None and len(self.nstar_alt) != n:
            raise ValueError(f"nstar_alt needs {n} components")

    def with_nstar(self, nstar) -> "CauchyProblem":
        return replace(self, nstar=tuple(nstar))

    def in_domain(self, a, slack: float = 0.0) -> bool:
        a = np.asarray(a, dtype=float).reshape(-1)
        return all(lo - slack <= x <= hi + slack for x, (lo, hi) in zip(a, self.domain))

    def grid(self, points: int) -> list[np.ndarray]:
        """Tensor grid over the domain box in lexicographic index order."""
        axes = [np.linspace(lo, hi, points) if points > 1 else np.array([0.5 * (lo + hi)])
                for lo, hi in self.domain]
        return [np.array(p) for p in itertools.product(*axes)]


@dataclass(frozen=True)
class ChartJets:
    """Raw derivatives of the data at one chart point."""

    a: np.ndarray
    p: np.ndarray
    jac: np.ndarray  # (n, s)
    hess: np.ndarray  # (n, s, s)
    d_val: np.ndarray  # (n, m-s)
    d_grad: np.ndarray  # (n, m-s, s)
    nstar: np.ndarray
    nstar_grad: np.ndarray  # (n, s)

    @property
    def generators(self) -> np.ndarray:
        """Columns spanning D: the chart tangents followed by the extra fields."""
        return np.hstack([self.jac, self.d_val])

    def generator_derivative(self, k: int) -> np.ndarray:
        return np.hstack([self.hess[:, :, k], self.d_grad[:, :, k]])


def chart_jets(problem: CauchyProblem, a, nstar=None) -> ChartJets:
    a = np.asarray(a, dtype=float).reshape(-1)
    p, jac, hess = _jets.eval_vector(problem.xi, a)
    n, s = problem.dims.ambient, problem.dims.s
    k = problem.dims.fiber
    d_val = np.empty((n, k))
    d_grad = np.empty((n, k, s))
    for l, field_ in enumerate(problem.d_extra):
        v, g, _ = _jets.eval_vector(field_, a)
        d_val[:, l] = v
        d_grad[:, l, :] = g
    nv, ng, _ = _jets.eval_vector(problem.nstar if nstar is None else nstar, a)
    return ChartJets(a, p, jac, hess, d_val, d_grad, nv, ng)


@dataclass(frozen=True)
class AdaptedFramePoint:
    a: np.ndarray
    p: np.ndarray
    E: np.ndarray  # (m, n) rows; first s span T_pS
    N: np.ndarray  # (c, n) rows spanning D_p^perp
    nstar_unit: np.ndarray
    jacobian_xi: np.ndarray  # (n, s)

    @property
    def full(self) -> np.ndarray:
        return np.vstack([self.E, self.N])


def frame_from_jets(dims: Dims, cj: ChartJets) -> AdaptedFramePoint:
    n, s, m = dims.ambient, dims.s, dims.m
    gens = cj.generators
    scale = max(float(np.max(np.linalg.norm(gens, axis=0))), 1e-300)
    if numerical_rank(cj.jac, IMMERSION_TOL) < s or np.linalg.norm(cj.jac) == 0.0:
        raise ImmersionFailure(f"chart Jacobian has rank < {s} at a={cj.a.tolist()}")
    if numerical_rank(gens, IMMERSION_TOL) < m:
        raise DistributionRankFailure(f"TS + d_extra has rank < {m} at a={cj.a.tolist()}")
    E, r = orthonormalize(list(gens.T), tol=1e-12 * scale)
    if r != m:
        raise DistributionRankFailure(f"TS + d_extra has rank {r} != {m} at a={cj.a.tolist()}")
    complement = null_space(E.basis, 1e-9)  # (c, n) orthonormal basis of D^perp
    proj = complement.T @ (complement @ cj.nstar)
    norm = np.linalg.norm(proj)
    if norm < NSTAR_VANISH_TOL * max(1.0, float(np.linalg.norm(cj.nstar))):
        raise NormalSectionVanishes(f"N* has no normal component at a={cj.a.tolist()}")
    nstar_unit = proj / norm
    N = _normal_frame(E.basis, complement, nstar_unit)
    return AdaptedFramePoint(cj.a, cj.p, np.array(E.basis), N, nstar_unit, cj.jac)


def _normal_frame(E: np.ndarray, complement: np.ndarray, nstar_unit: np.ndarray) -> np.ndarray:
    """N_1 = N*, the rest by Gram-Schmidt of the complement, last sign by orientation.

    Both choices vary continuously with the data when c <= 2.
    """
    c = complement.shape[0]
    rest, _ = orthonormalize([nstar_unit] + list(complement), tol=1e-6)
    N = np.array(rest.basis[:c])
    if c >= 2 and np.linalg.det(np.vstack([E, N])) < 0:
        N[-1] *= -1.0
    return N


def adapted_frame(problem: CauchyProblem, a) -> AdaptedFramePoint:
    """Orthonormal frame (E, N) at ``xi(a)`` with E_1..E_s spanning TS."""
    return frame_from_jets(problem.dims, chart_jets(problem, a))
