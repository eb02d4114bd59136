"""Compressed-row symmetric systems and a Jacobi-preconditioned conjugate gradient solver."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class SolverDivergedError(ArithmeticError):
    """PCG produced a non-finite iterate or residual."""


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Linear system ``A x = b`` with ``A`` in compressed row storage.

    Columns are strictly increasing within each row.  Matrices built by the
    solver are symmetric with a positive, dominant diagonal.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.indptr) - 1
        if n < 0 or len(self.rhs) != n:
            raise ValueError("rhs length does not match the number of rows")
        if len(self.indices) != len(self.data) or self.indptr[-1] != len(self.data):
            raise ValueError("inconsistent compressed row arrays")

    @classmethod
    def from_dense(cls, matrix, rhs) -> SparseSystem:
        csr = sp.csr_matrix(np.asarray(matrix, dtype=np.float64))
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, np.asarray(rhs, dtype=np.float64))

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        a = self.matrix
        diff = abs(a - a.T)
        scale = max(abs(a).max(), 1e-300) if a.nnz else 1.0
        return diff.nnz == 0 or diff.max() <= rtol * scale

    def off_diagonal_abs_row_sums(self) -> np.ndarray:
        a = abs(self.matrix)
        return np.asarray(a.sum(axis=1)).ravel() - a.diagonal()

    def is_strictly_diagonally_dominant(self) -> bool:
        diag = self.diagonal()
        return bool(np.all(diag > 0) and np.all(diag > self.off_diagonal_abs_row_sums()))

    def columns_sorted(self) -> bool:
        for row in range(self.n):
            cols = self.indices[self.indptr[row]:self.indptr[row + 1]]
            if np.any(np.diff(cols) <= 0):
                return False
        return True


def spmv(system_or_matrix, x) -> np.ndarray:
    """Sparse matrix-vector product."""
    a = system_or_matrix.matrix if isinstance(system_or_matrix, SparseSystem) else system_or_matrix
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: matrix is {a.shape}, vector has shape {x.shape}")
    return a @ x


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def pcg_solve(system: SparseSystem, x0=None, tol: float = 1e-6, max_iters: int = 2000) -> PcgResult:
    """Solve ``A x = b`` by conjugate gradients with a diagonal preconditioner.

    Stops when ``||b - A x|| <= tol * ||b||``.  After ``max_iters`` the
    iterate with the smallest residual is returned with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = system.matrix
    b = np.asarray(system.rhs, dtype=np.float64)
    n = system.n
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return PcgResult(np.zeros(n), 0, 0.0, True)
    if not np.isfinite(norm_b):
        raise SolverDivergedError("right-hand side is not finite")

    diag = a.diagonal()
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise SolverDivergedError("matrix diagonal must be positive and finite")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64).ravel()
    if x.shape != (n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({n},)")
    r = b - a @ x
    rel = np.linalg.norm(r) / norm_b
    best_x, best_rel = x.copy(), rel
    if rel <= tol:
        return PcgResult(x, 0, rel, True)

    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iters + 1):
        ap = a @ p
        pap = p @ ap
        if not np.isfinite(pap) or pap <= 0:
            raise SolverDivergedError(f"non-positive curvature p'Ap={pap!r} at iteration {it}")
        step = rz / pap
        x += step * p
        r -= step * ap
        rel = np.linalg.norm(r) / norm_b
        if not np.isfinite(rel):
            raise SolverDivergedError(f"non-finite residual at iteration {it}")
        if rel < best_rel:
            best_x, best_rel = x.copy(), rel
        if rel <= tol:
            return PcgResult(x, it, rel, True)
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return PcgResult(best_x, max_iters, best_rel, False)
