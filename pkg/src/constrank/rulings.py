"""Ruling directions X_1..X_{m-s} spanning D_p ∩ (Im phi_p)^perp.

Three independent constructions:

* ``cross``    -- X_j = phi(E_1,N*) x ... x phi(E_s,N*) x E_{s+1} x ... (E_{s+j} omitted) x ... x E_m
* ``cofactor`` -- the expanded permutation-sum formula; for I = {1..s, s+j},
  the coefficient of E_i is (-1)^h det(phi_star[:, I minus {i}]) with h = i for i <= s
  and h = s + 1 for i = s + j.  Equal to the cross route up to one sign per j.
* ``oracle``   -- kernel of x -> (<x, phi(E_i, N_beta)>) on D_p, by SVD.

The formula routes return unit vectors with the sign the formula produces
(continuous in the data); the oracle returns an orthonormal basis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cauchy import AdaptedFramePoint
from .errors import DegenerateRuling, WrongFiberDimension
from .linalg import Subspace, cross_product, null_space, numerical_rank
from .nullity import PhiData

DEGENERATE_TOL = 1e-10
# the permutation sum is enumerated literally up to this s
PERMUTATION_MAX_S = 6


@dataclass(frozen=True)
class RulingFrame:
    frame_point: AdaptedFramePoint
    X: np.ndarray  # (m-s, n) unit ambient vectors
    X_coeffs: np.ndarray  # (m-s, m) the same in the E basis
    raw_coeffs: np.ndarray  # (m-s, m) unnormalized formula output (oracle: = X_coeffs)
    method: str

    @property
    def span(self) -> Subspace:
        return Subspace.span(self.X)


def _finish(pd: PhiData, raw: np.ndarray, method: str) -> RulingFrame:
    norms = np.linalg.norm(raw, axis=1)
    if raw.shape[0] and norms.min() < DEGENERATE_TOL:
        j = int(np.argmin(norms))
        raise DegenerateRuling(f"|X_{j + 1}| = {norms[j]:.3e} ({method}); A* is numerically singular")
    coeffs = raw / norms[:, None]
    return RulingFrame(pd.frame, coeffs @ pd.frame.E, coeffs, raw, method)


def cross_coefficients(phi_star: np.ndarray) -> np.ndarray:
    """Raw cross-product rulings in E coordinates for an (s, m) coefficient matrix."""
    phi_star = np.atleast_2d(np.asarray(phi_star, dtype=float))
    s, m = phi_star.shape
    eye = np.eye(m)
    out = np.empty((m - s, m))
    for j in range(m - s):
        others = [eye[k] for k in range(s, m) if k != s + j]
        args = np.vstack([phi_star] + others) if others else phi_star
        out[j] = cross_product(args)
    return out


@lru_cache(maxsize=None)
def _signed_permutations(s: int) -> tuple:
    perms = []
    for perm in itertools.permutations(range(s)):
        inversions = sum(1 for x, y in itertools.combinations(perm, 2) if x > y)
        perms.append((perm, -1.0 if inversions % 2 else 1.0))
    return tuple(perms)


def _permutation_sum(phi_star: np.ndarray, columns: list[int]) -> float:
    # sum over bijections lambda: rows -> columns of sign(lambda) * prod phi[l, lambda(l)]
    total = 0.0
    for perm, sign in _signed_permutations(len(columns)):
        prod = sign
        for row, k in enumerate(perm):
            prod *= phi_star[row, columns[k]]
        total += prod
    return total


def cofactor_coefficients(phi_star: np.ndarray, use_permutations: bool | None = None) -> np.ndarray:
    """Raw rulings from the expanded permutation formula, in E coordinates."""
    phi_star = np.atleast_2d(np.asarray(phi_star, dtype=float))
    s, m = phi_star.shape
    if use_permutations is None:
        use_permutations = s <= PERMUTATION_MAX_S
    out = np.zeros((m - s, m))
    for j in range(m - s):
        index_set = list(range(s)) + [s + j]
        for i in index_set:
            h = i + 1 if i < s else s + 1
            columns = [k for k in index_set if k != i]
            if use_permutations:
                minor = _permutation_sum(phi_star, columns)
            else:
                minor = float(np.linalg.det(phi_star[:, columns]))
            out[j, i] = (-1) ** h * minor
    return out


def ruling_frame_cross(pd: PhiData) -> RulingFrame:
    return _finish(pd, cross_coefficients(pd.phi_star), "cross")


def ruling_frame_cofactor(pd: PhiData) -> RulingFrame:
    return _finish(pd, cofactor_coefficients(pd.phi_star), "cofactor")


def _sign_fix(rows: np.ndarray, thresh: float = 1e-8) -> np.ndarray:
    rows = rows.copy()
    for r in rows:
        big = np.flatnonzero(np.abs(r) > thresh * max(np.abs(r).max(), 1e-300))
        if big.size and r[big[0]] < 0:
            r *= -1.0
    return rows


def fiber_nullspace_oracle(pd: PhiData, tol: float | None = None) -> RulingFrame:
    """Orthonormal basis of D_p ∩ (Im phi_p)^perp computed directly by SVD."""
    s, m, c = pd.dims
    tol = pd.tol if tol is None else tol
    kernel = null_space(pd.phi_full.reshape(c * s, m), tol)
    if kernel.shape[0] != m - s:
        raise WrongFiberDimension(kernel.shape[0], m - s)
    coeffs = _sign_fix(kernel)
    return RulingFrame(pd.frame, coeffs @ pd.frame.E, coeffs, coeffs, "oracle")


def section_fiber(pd: PhiData, tol: float | None = None) -> Subspace:
    """D_p ∩ phi_p(T_pS, N*)^perp: the fiber selected by one particular section."""
    tol = pd.tol if tol is None else tol
    kernel = null_space(pd.phi_star, tol)
    return Subspace.span(kernel @ pd.frame.E)


def ruling_frame(pd: PhiData, method: str = "cross") -> RulingFrame:
    if method == "cross":
        return ruling_frame_cross(pd)
    if method == "cofactor":
        return ruling_frame_cofactor(pd)
    if method == "oracle":
        return fiber_nullspace_oracle(pd)
    raise ValueError(f"unknown method {method!r}")


def ruling_residuals(rf: RulingFrame, pd: PhiData) -> dict:
    """Numerical residuals of the properties every ruling frame should have."""
    E = pd.frame.E
    X = rf.X
    in_d = float(np.max(np.linalg.norm(X - (X @ E.T) @ E, axis=1))) if X.size else 0.0
    phi_vecs = pd.phi_star @ E
    orth_phi = float(np.max(np.abs(X @ phi_vecs.T))) if X.size else 0.0
    gram = X @ X.T
    pairwise = float(np.max(np.abs(gram - np.diag(np.diag(gram))))) if X.shape[0] > 1 else 0.0
    s = pd.dims[0]
    transversal_rank = numerical_rank(np.vstack([E[:s], X]), 1e-9)
    return {
        "in_D": in_d,
        "orthogonal_to_phi_star": orth_phi,
        "pairwise_inner": pairwise,
        "transversal_rank": transversal_rank,
    }
