"""
Symmetric Eigensolvers - Building Block: eig_topk_symmetric / jacobi_eigh

Purpose:
    Top eigenpair of the small K x K reduced Fisher matrix by power
    iteration, and a cyclic Jacobi dense eigensolver used as the
    verification oracle for it.

Input Data:
    - M: symmetric positive semi-definite matrix (symmetric within 1e-9)

Output Data:
    - (eigenvalue, unit eigenvector) / (ascending eigenvalues, eigenvector columns)

Errors:
    - ShapeError: M not square
    - ValueError: M not symmetric
    - ConvergenceError: iteration cap reached (carries the iteration count)
"""

from typing import Tuple

import numpy as np

from ..errors import ConvergenceError, ShapeError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000


def _check_symmetric(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return m


def _power_iterate(m: np.ndarray, start: np.ndarray, tol: float,
                   max_iter: int) -> Tuple[float, np.ndarray, int]:
    v = start / np.linalg.norm(start)
    scale = max(float(np.abs(m).max(initial=0.0)), np.finfo(np.float64).tiny)
    lam = float(v @ m @ v)
    for iteration in range(1, max_iter + 1):
        y = m @ v
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, v, iteration
        v = y / norm
        lam = float(v @ m @ v)
        residual = np.linalg.norm(m @ v - lam * v)
        if residual <= tol * scale:
            return lam, v, iteration
    raise ConvergenceError("power iteration did not converge", max_iter)


def eig_topk_symmetric(m: np.ndarray, tol: float = POWER_TOL,
                       max_iter: int = POWER_MAX_ITER) -> Tuple[float, np.ndarray]:
    """
    Largest eigenvalue and its unit eigenvector of a symmetric PSD matrix.

    Starts from the all-ones vector. If that start is (numerically)
    orthogonal to the top eigenspace the iteration settles on a smaller
    eigenvalue; a second run on the deflated matrix detects this and
    restarts from a shifted deterministic vector.

    Example:
        >>> eig_topk_symmetric(np.diag([1.0, 2.0, 5.0]))[0]
        5.0
    """
    m = _check_symmetric(m)
    n = m.shape[0]
    lam, v, iterations = _power_iterate(m, np.ones(n), tol, max_iter)

    if n > 1:
        restart = np.random.default_rng(0).standard_normal(n)
        restart -= (restart @ v) * v
        if np.linalg.norm(restart) > 0:
            deflated = m - lam * np.outer(v, v)
            other, w, _ = _power_iterate(deflated, restart, tol, max_iter)
            scale = max(float(np.abs(m).max(initial=0.0)), np.finfo(np.float64).tiny)
            if other > lam + 1e-8 * scale:
                logger.debug("Power iteration restart", extra={"first": lam, "deflated": other})
                lam, v, iterations = _power_iterate(m, w + 1e-3 * v, tol, max_iter)

    # deterministic sign: largest-magnitude component positive
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    logger.debug("Power iteration converged", extra={"iterations": iterations, "lambda": lam})
    return max(lam, 0.0), v


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13,
                max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns:
        (eigenvalues ascending, eigenvectors as columns)
    """
    a = _check_symmetric(a).copy()
    n = a.shape[0]
    vectors = np.eye(n)
    norm = max(float(np.linalg.norm(a)), np.finfo(np.float64).tiny)

    for sweep in range(max_sweeps):
        off = np.sqrt(max(float((a ** 2).sum() - (np.diag(a) ** 2).sum()), 0.0))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= np.finfo(np.float64).tiny:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
    else:
        raise ConvergenceError("Jacobi eigensolver did not converge", max_sweeps)

    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return values[order], vectors[:, order]
