"""Small dense linear-solve helpers (LU with partial pivoting)."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import SingularJacobianError

PIVOT_RTOL = 1e-12


class LU:
    """LU factorisation of a square matrix with a relative pivot check."""

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        scale = float(np.max(np.abs(A))) if A.size else 0.0
        if scale == 0.0:
            raise SingularJacobianError("zero matrix")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self._lu, self._piv = scipy.linalg.lu_factor(A, check_finite=False)
        pivots = np.abs(np.diag(self._lu))
        if pivots.min() < PIVOT_RTOL * scale:
            raise SingularJacobianError(
                f"smallest pivot {pivots.min():.3e} below {PIVOT_RTOL:g} * {scale:.3e}")
        # ratio of extreme pivots; cheap proxy for the condition number
        self.condition = float(pivots.max() / pivots.min())

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve((self._lu, self._piv), b, check_finite=False)


def solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return LU(A).solve(b)


def solve_removable(A: np.ndarray, b: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Solve ``A x = b``; on a singular ``A`` accept a consistent right-hand side.

    When ``b`` lies in the range of ``A`` the minimum-norm least-squares
    solution is returned, which recovers removable singularities such as
    ``(grad F)^-1 F`` at a degenerate critical point. Inconsistent systems
    still raise :class:`SingularJacobianError`.
    """
    try:
        return solve(A, b)
    except SingularJacobianError:
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        resid = float(np.max(np.abs(A @ x - b))) if b.size else 0.0
        if resid <= rtol * (1.0 + float(np.max(np.abs(b)))):
            return x
        raise
