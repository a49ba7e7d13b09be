"""Dense linear algebra and exterior-algebra primitives.

Vectors are plain 1-d ``numpy`` arrays.  Subspaces carry their basis as the
rows of a 2-d array.  Everything here is dimension generic and pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_RANK_TOL = 1e-9
# cofactor expansion of the cross product is used up to this dimension
CROSS_COFACTOR_MAX_DIM = 8


@dataclass(frozen=True)
class Dims:
    """Dimension triple: ``s = dim S``, ``m = rank D``, ``c = corank``."""

    s: int
    m: int
    c: int

    def __post_init__(self):
        for name in ("s", "m", "c"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not self.s < self.m:
            raise ValueError(f"need s < m, got s={self.s}, m={self.m}")

    @property
    def ambient(self) -> int:
        return self.m + self.c

    @property
    def fiber(self) -> int:
        return self.m - self.s


@dataclass(frozen=True)
class Subspace:
    """Span of the rows of ``basis``; ``ambient`` is needed for the empty case."""

    basis: np.ndarray
    ambient: int
    orthonormal: bool = field(default=True)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float).reshape(-1, self.ambient)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return self.dim

    @classmethod
    def span(cls, vectors, tol: float = DEFAULT_RANK_TOL) -> "Subspace":
        """Orthonormal basis of the span of ``vectors`` (rows), rank decided relatively."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(range_basis(vectors, tol), vectors.shape[1])


def orthonormalize(vectors, tol: float = 1e-10) -> tuple[Subspace, int]:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    A vector whose residual norm falls below ``tol`` is dropped; earlier inputs
    always take priority over later ones.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim == 2 and arr.shape[0] == 0:
        return Subspace(np.zeros((0, arr.shape[1])), arr.shape[1]), 0
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if not vectors:
        raise ValueError("cannot infer the ambient dimension of an empty list")
    n = vectors[0].shape[0]
    if any(v.shape != (n,) for v in vectors):
        raise ValueError("all vectors must have the same length")
    kept: list[np.ndarray] = []
    for v in vectors:
        w = v.copy()
        for _ in range(2):
            for q in kept:
                w -= (q @ w) * q
        norm = np.linalg.norm(w)
        if norm < tol:
            continue
        kept.append(w / norm)
    basis = np.array(kept) if kept else np.zeros((0, n))
    return Subspace(basis, n), len(kept)


def numerical_rank(matrix, tol: float = DEFAULT_RANK_TOL) -> int:
    """Count singular values above ``tol`` times the largest one."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def range_basis(vectors, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning the row space of ``vectors``."""
    a = np.atleast_2d(np.asarray(vectors, dtype=float))
    if a.size == 0:
        return np.zeros((0, a.shape[-1]))
    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    if sv[0] == 0.0:
        return np.zeros((0, a.shape[1]))
    r = int(np.sum(sv > tol * sv[0]))
    return vt[:r].copy()


def null_space(matrix, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning ``{x : matrix @ x = 0}`` (relative tolerance)."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = a.shape[1]
    if a.size == 0:
        return np.eye(n)
    _, sv, vt = np.linalg.svd(a, full_matrices=True)
    if sv[0] == 0.0:
        return np.eye(n)
    r = int(np.sum(sv > tol * sv[0]))
    return vt[r:].copy()


def gram_determinant(vectors) -> float:
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    return float(np.linalg.det(v @ v.T))


def cross_product(vectors, method: str = "auto") -> np.ndarray:
    """(m-1)-fold vector cross product in an oriented orthonormal m-space.

    ``vectors`` is an (m-1) x m array of coefficient rows.  The result is
    orthogonal to every row, its squared norm equals the Gram determinant of
    the rows, and appending it as the last row gives a nonnegative determinant.

    ``method`` is ``"cofactor"`` (expansion along the missing last row),
    ``"svd"`` (scaled kernel vector) or ``"auto"``.
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    k, m = v.shape
    if k != m - 1:
        raise ValueError(f"need m-1 = {m - 1} vectors of length {m}, got {k}")
    if method == "auto":
        method = "cofactor" if m <= CROSS_COFACTOR_MAX_DIM else "svd"
    if method == "cofactor":
        return _cross_cofactor(v)
    if method == "svd":
        return _cross_svd(v)
    raise ValueError(f"unknown method {method!r}")


def _cross_cofactor(v: np.ndarray) -> np.ndarray:
    k, m = v.shape
    if m == 1:
        return np.ones(1)
    w = np.empty(m)
    cols = np.arange(m)
    for j in range(m):
        minor = v[:, cols != j]
        # cofactor of entry (m-1, j) of the m x m matrix [v; w]
        w[j] = (-1) ** (k + j) * np.linalg.det(minor)
    return w


def _cross_svd(v: np.ndarray) -> np.ndarray:
    k, m = v.shape
    if numerical_rank(v, 1e-13) < k:
        return np.zeros(m)
    gram = np.linalg.det(v @ v.T)
    if gram <= 0.0:
        return np.zeros(m)
    _, _, vt = np.linalg.svd(v, full_matrices=True)
    w = vt[-1] * np.sqrt(gram)
    if np.linalg.det(np.vstack([v, w])) < 0:
        w = -w
    return w


def principal_angles(u: Subspace, v: Subspace) -> np.ndarray:
    """Principal angles (ascending, radians) between two orthonormal subspaces.

    Small angles come from sines of the residual, large ones from cosines, so
    both ends of [0, pi/2] keep full relative accuracy.
    """
    if u.ambient != v.ambient:
        raise ValueError(f"ambient dimension mismatch: {u.ambient} vs {v.ambient}")
    if u.dim == 0 or v.dim == 0:
        return np.zeros(0)
    if v.dim > u.dim:
        u, v = v, u
    a, b = u.basis, v.basis
    cos = np.linalg.svd(a @ b.T, compute_uv=False)
    cos = np.clip(np.sort(cos)[::-1], 0.0, 1.0)
    resid = b - (b @ a.T) @ a
    sin = np.linalg.svd(resid, compute_uv=False)
    sin = np.clip(np.sort(sin), 0.0, 1.0)
    from_cos = np.arccos(cos)
    from_sin = np.arcsin(sin)
    angles = np.where(from_cos < np.pi / 4, from_sin, from_cos)
    return np.clip(np.sort(angles), 0.0, np.pi / 2)


def max_angle(u: Subspace, v: Subspace) -> float:
    ang = principal_angles(u, v)
    return float(ang[-1]) if ang.size else 0.0


def project(u: Subspace, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the orthonormal subspace ``u``."""
    v = np.asarray(v, dtype=float)
    if u.dim == 0:
        return np.zeros_like(v)
    return u.basis.T @ (u.basis @ v)
