"""Direct sparse solves with residual certification and pivot inertia.

Systems are symmetrically permuted with reverse Cuthill-McKee and then
factored without row pivoting (threshold 0, natural column order), so the
U diagonal holds the pivots of a symmetric elimination. By Sylvester's
law their signs give the inertia, which doubles as the positive
definiteness check for Nitsche systems and the saddle-structure check for
the multiplier systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

SPD_RESIDUAL_TOL = 1e-10
INDEFINITE_RESIDUAL_TOL = 1e-9
ZERO_PIVOT_REL_TOL = 1e-12
# Bunch-Kaufman fallback (dense) kicks in only when the no-pivot path
# hits an exactly zero pivot; cap its dimension (a few seconds of work).
DENSE_FALLBACK_MAX_DIM = 6000


class SolverError(Exception):
    """Factorization or residual certification failed."""


class NotPositiveDefiniteError(SolverError):
    """A nonpositive pivot appeared where an SPD matrix was required."""


class SingularSystemError(SolverError):
    """A pivot vanished beyond tolerance."""


@dataclass(frozen=True)
class SolveResult:
    """Solution vector with its certified relative residual and inertia."""

    x: np.ndarray
    residual: float
    inertia: tuple[int, int, int]


def _pivot_factorization(matrix: sp.csc_matrix):
    """LU without row exchanges, or None on no-pivot breakdown.

    A zero pivot makes SuperLU either swap rows or give up; both mean the
    unpivoted elimination broke down, not that the matrix is singular.
    """
    try:
        lu = spla.splu(
            matrix,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return None
    n = matrix.shape[0]
    if not np.array_equal(lu.perm_r, np.arange(n)) or not np.array_equal(
        lu.perm_c, np.arange(n)
    ):
        return None
    return lu


def _dense_inertia(matrix: sp.csr_matrix) -> tuple[int, int, int]:
    """Inertia via Bunch-Kaufman LDL^T; D is (block) tridiagonal."""
    import scipy.linalg as sla

    n = matrix.shape[0]
    if n > DENSE_FALLBACK_MAX_DIM:
        raise SolverError(
            f"inertia fallback limited to dimension {DENSE_FALLBACK_MAX_DIM}, got {n}"
        )
    _, d, _ = sla.ldl(matrix.toarray())
    eigs = sla.eigvalsh_tridiagonal(np.diag(d), np.diag(d, k=-1))
    scale = np.max(np.abs(eigs)) if n else 0.0
    n_zero = int(np.sum(np.abs(eigs) <= ZERO_PIVOT_REL_TOL * scale))
    if n_zero:
        raise SingularSystemError(f"{n_zero} vanishing pivots")
    return int(np.sum(eigs > 0.0)), int(np.sum(eigs < 0.0)), 0


def _solve_symmetric(matrix, rhs, tol, require_spd):
    matrix = matrix.tocsr()
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    perm = reverse_cuthill_mckee(matrix, symmetric_mode=True)
    permuted = matrix[perm][:, perm].tocsc()
    lu = _pivot_factorization(permuted)

    if lu is not None:
        pivots = lu.U.diagonal()
        scale = np.max(np.abs(pivots))
        n_zero = int(np.sum(np.abs(pivots) <= ZERO_PIVOT_REL_TOL * scale))
        if n_zero:
            raise SingularSystemError(f"{n_zero} vanishing pivots")
        inertia = (int(np.sum(pivots > 0.0)), int(np.sum(pivots < 0.0)), 0)
        x = np.empty(n)
        x[perm] = lu.solve(rhs[perm])
    else:
        # SuperLU was forced off the diagonal, i.e. a pivot of the
        # symmetric elimination vanished exactly. SPD matrices never do
        # that, so for them this is already the verdict.
        if require_spd:
            raise NotPositiveDefiniteError(
                "not positive definite: zero pivot in symmetric elimination"
            )
        inertia = _dense_inertia(matrix)
        try:
            x = spla.splu(matrix.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise SingularSystemError(f"singular system: {exc}") from exc

    if require_spd and inertia[1]:
        raise NotPositiveDefiniteError(
            f"not positive definite: {inertia[1]} negative pivots (penalty too small?)"
        )

    def refine(x):
        if lu is None:
            return x
        correction = np.empty(n)
        correction[perm] = lu.solve((rhs - matrix @ x)[perm])
        return x + correction

    rhs_norm = np.linalg.norm(rhs)
    residual = np.inf
    for _ in range(4):  # iterative refinement against the certification bound
        defect = np.linalg.norm(matrix @ x - rhs)
        residual = defect / rhs_norm if rhs_norm > 0.0 else defect
        if residual <= tol:
            break
        x = refine(x)
    if residual > tol:
        raise SolverError(f"residual {residual:.3e} exceeds tolerance {tol:.1e}")
    return SolveResult(x=x, residual=float(residual), inertia=inertia)


def solve_spd(system) -> SolveResult:
    """Solve a symmetric positive definite LinearSystem.

    Raises NotPositiveDefiniteError when a pivot turns nonpositive, which
    is how an undersized Nitsche penalty surfaces.
    """
    return _solve_symmetric(system.matrix, system.rhs, SPD_RESIDUAL_TOL, require_spd=True)


def solve_sym_indefinite(system) -> SolveResult:
    """Solve a symmetric indefinite SaddleSystem, reporting pivot inertia."""
    return _solve_symmetric(
        system.matrix, system.rhs, INDEFINITE_RESIDUAL_TOL, require_spd=False
    )
