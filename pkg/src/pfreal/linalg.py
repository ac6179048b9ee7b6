"""Dense complex linear algebra: LU solves, kernel vectors and Newton refinement."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from pfreal import _kernels

SINGULAR_REL_TOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class RankError(ValueError):
    """The matrix has no kernel (full column rank)."""


def _as_complex_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def lu_solve(A, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` by partial-pivot LU.

    Raises SingularMatrixError when a pivot falls below ``1e-14`` times the
    largest entry of its row.
    """
    A = _as_complex_matrix(A)
    rhs = np.asarray(rhs, dtype=np.complex128)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if rhs.shape != (A.shape[0],):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({A.shape[0]},)")
    x, ok = _kernels.lu_solve(A, rhs, SINGULAR_REL_TOL)
    if not ok:
        raise SingularMatrixError("matrix is numerically singular")
    return x


def _rref(A, tol):
    """Row echelon form by column-pivoted elimination; returns (R, pivot_cols)."""
    R = A.copy()
    r, c = R.shape
    scale = np.max(np.abs(R), initial=0.0)
    pivots: list[int] = []
    row = 0
    for col in range(c):
        if row == r:
            break
        p = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[p, col]) <= tol * max(scale, 1e-300):
            continue
        R[[row, p]] = R[[p, row]]
        R[row] /= R[row, col]
        others = np.arange(r) != row
        R[others] -= np.outer(R[others, col], R[row])
        pivots.append(col)
        row += 1
    return R, pivots


def kernel_basis(A, tol: float = 1e-10) -> np.ndarray:
    """Columns spanning the numerical kernel of ``A``."""
    A = _as_complex_matrix(A)
    r, c = A.shape
    if not np.any(A):
        return np.eye(c, dtype=np.complex128)
    R, pivots = _rref(A, tol)
    free = [j for j in range(c) if j not in pivots]
    basis = np.zeros((c, len(free)), dtype=np.complex128)
    for i, f in enumerate(free):
        basis[f, i] = 1.0
        for row, pc in enumerate(pivots):
            basis[pc, i] = -R[row, f]
    return basis


def _random_complex(rng, size):
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def nullspace_vector(A, rng: np.random.Generator) -> np.ndarray:
    """Random unit vector in the kernel of a wide matrix."""
    A = _as_complex_matrix(A)
    r, c = A.shape
    if r >= c:
        raise ValueError(f"need more columns than rows, got {A.shape}")
    basis = kernel_basis(A)
    if basis.shape[1] == 0:
        raise RankError("matrix has full column rank; kernel is trivial")
    v = basis @ _random_complex(rng, basis.shape[1])
    v /= np.linalg.norm(v)
    resid = np.max(np.abs(A @ v), initial=0.0)
    if resid > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise RankError(f"kernel vector residual {resid:.2e} too large")
    return v


def particular_solution(A, rhs, rng: np.random.Generator) -> np.ndarray:
    """A solution of the wide system ``A x = rhs`` plus a random kernel component."""
    A = _as_complex_matrix(A)
    rhs = np.asarray(rhs, dtype=np.complex128)
    aug = np.hstack((A, rhs[:, None]))
    R, pivots = _rref(aug, 1e-10)
    c = A.shape[1]
    if c in pivots:
        raise RankError("system A x = rhs is inconsistent")
    x = np.zeros(c, dtype=np.complex128)
    for row, pc in enumerate(pivots):
        x[pc] = R[row, c]
    basis = kernel_basis(A)
    if basis.shape[1]:
        x = x + basis @ (0.5 * _random_complex(rng, basis.shape[1]))
    return x


class NewtonResult(NamedTuple):
    point: np.ndarray
    residual: float
    converged: bool
    iterations: int
    singular: bool


def newton_refine(system, b, x0, tol: float = 1e-12, max_iter: int = 20) -> NewtonResult:
    """Newton's method on ``system`` at parameters ``b`` starting from ``x0``."""
    z0 = np.asarray(x0, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if not np.all(np.isfinite(z0)):
        raise ValueError("start point is not finite")
    z, res, it, flag = _kernels.newton(z0, b, system.edge_array, system.n,
                                       system.injection_array, tol, max_iter,
                                       SINGULAR_REL_TOL)
    return NewtonResult(z, float(res), flag == 0, int(it), flag == 2)


def newton_trace(system, b, x0, max_iter: int = 8) -> list[float]:
    """Residual after each plain Newton step (diagnostics and tests)."""
    z = np.asarray(x0, dtype=np.complex128).copy()
    out = [system.residual(z, b)]
    for _ in range(max_iter):
        try:
            dz = lu_solve(system.jacobian(z, b), system.evaluate(z, b))
        except SingularMatrixError:
            break
        z = z - dz
        out.append(system.residual(z, b))
        if out[-1] == 0.0:
            break
    return out
