"""Nearest correlation matrix by alternating projections with Dykstra's correction (Higham 2002)."""
import numpy as np

from .errors import ConvergenceError


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0])


def is_psd(a: np.ndarray, tol: float = 1e-12) -> bool:
    return min_eigenvalue(a) >= -tol * a.shape[0]


def _project_psd(a):
    w, v = np.linalg.eigh(a)
    return (v * np.maximum(w, 0.0)) @ v.T


def nearest_correlation(a: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Closest (Frobenius) symmetric PSD matrix with unit diagonal."""
    a = 0.5 * (np.asarray(a, dtype=float) + np.asarray(a, dtype=float).T)
    y = a.copy()
    ds = np.zeros_like(a)
    for _ in range(max_iter):
        r = y - ds
        x = _project_psd(r)
        ds = x - r
        y_new = x.copy()
        np.fill_diagonal(y_new, 1.0)
        done = np.linalg.norm(y_new - y, "fro") <= tol * max(1.0, np.linalg.norm(y_new, "fro"))
        y = y_new
        if done:
            break
    else:
        raise ConvergenceError("nearest correlation projection did not converge")
    # final clean-up: clip residual negative eigenvalues, restore the unit diagonal
    x = _project_psd(y)
    d = np.sqrt(np.diag(x))
    out = x / np.outer(d, d)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return np.clip(out, -1.0, 1.0)
