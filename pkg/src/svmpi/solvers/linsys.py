from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg


class SingularSystemError(np.linalg.LinAlgError):
    pass


def solve_linear_system(m, rhs, tol: float = 1e-8) -> np.ndarray:
    """Solve ``m @ x = rhs`` by LU with partial pivoting.

    Raises SingularSystemError (carrying the reciprocal condition estimate)
    when the matrix is numerically singular or the residual check fails.
    """
    m = np.asarray(m, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if rhs.shape[0] != m.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match matrix size {m.shape[0]}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(rhs))):
        raise ValueError("non-finite entries in linear system")
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below through the condition estimate
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    anorm = np.linalg.norm(m, 1)
    (rcond, info) = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond < np.finfo(float).eps:
        raise SingularSystemError(f"matrix is numerically singular (reciprocal condition number {rcond:.3e})")
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    bound = tol * (1.0 + np.max(np.abs(rhs), initial=0.0))
    resid = rhs - m @ x
    for _ in range(3):
        if np.max(np.abs(resid), initial=0.0) <= bound:
            break
        # iterative refinement on the same factorisation
        x = x + scipy.linalg.lu_solve((lu, piv), resid, check_finite=False)
        resid = rhs - m @ x
    err = np.max(np.abs(resid), initial=0.0)
    if err > bound:
        raise SingularSystemError(
            f"residual {err:.3e} exceeds tolerance {bound:.3e} (rcond={rcond:.3e})")
    return x
