"""Dense real-matrix utilities shared by every other module.

Everything operates on plain ``numpy`` arrays; ``as_matrix`` /
``as_symmetric`` are the validation gates that give those arrays the
invariants the rest of the toolkit relies on (finite entries, enforced
symmetry).  Tolerances are relative, scaled by ``max(1, norm)``, so tiny
and huge matrices classify consistently.
"""

from __future__ import annotations

import enum

import numpy as np

__all__ = [
    "MatrixError",
    "DefinitenessError",
    "Definiteness",
    "as_matrix",
    "as_symmetric",
    "definiteness",
    "psd_sqrt",
    "row_rank",
]

SYM_RTOL = 1e-12
DEFAULT_TOL = 1e-9


class MatrixError(ValueError):
    """Invalid matrix input (wrong shape, non-finite entries, asymmetry)."""


class DefinitenessError(ValueError):
    """Operation applied to a matrix outside its definiteness domain."""


class Definiteness(enum.Enum):
    PD = "PD"
    PSD = "PSD"
    ND = "ND"
    NSD = "NSD"
    ZERO = "ZERO"
    INDEFINITE = "INDEFINITE"


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return ``m`` as a 2-D float array with finite entries."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise MatrixError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise MatrixError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise MatrixError(f"{name} contains non-finite entries")
    return arr


def as_symmetric(m, name: str = "matrix", rtol: float = SYM_RTOL) -> np.ndarray:
    """Validate symmetry of ``m`` (Frobenius test) and return it symmetrized.

    The asymmetry tolerance is ``rtol * max(1, ||m||_F)``.
    """
    arr = as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise MatrixError(f"{name} must be square, got shape {arr.shape}")
    scale = max(1.0, float(np.linalg.norm(arr)))
    skew = float(np.linalg.norm(arr - arr.T))
    if skew > rtol * scale:
        raise MatrixError(
            f"{name} is not symmetric: ||M - M^T||_F = {skew:.3e} "
            f"exceeds {rtol:.1e} * max(1, ||M||_F)"
        )
    return 0.5 * (arr + arr.T)


def definiteness(m, tol: float = DEFAULT_TOL) -> Definiteness:
    """Classify a symmetric matrix by its eigenvalue signs.

    Thresholds are relative: an eigenvalue counts as positive if it exceeds
    ``tol * max(1, ||m||_2)``, as negative below the mirrored threshold.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    sym = as_symmetric(m)
    eigs = np.linalg.eigvalsh(sym)
    s = max(1.0, float(np.abs(eigs).max()))
    lo, hi = float(eigs.min()), float(eigs.max())
    thr = tol * s
    if lo > thr:
        return Definiteness.PD
    if hi < -thr:
        return Definiteness.ND
    if max(abs(lo), abs(hi)) <= thr:
        return Definiteness.ZERO
    if lo >= -thr:
        return Definiteness.PSD
    if hi <= thr:
        return Definiteness.NSD
    return Definiteness.INDEFINITE


def psd_sqrt(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues at or below the classification threshold are clamped to
    zero, so PSD inputs with slightly negative numerical eigenvalues are
    accepted.  Raises :class:`DefinitenessError` for matrices with a
    genuinely negative eigenvalue.
    """
    sym = as_symmetric(m)
    cls = definiteness(sym, tol)
    if cls not in (Definiteness.PD, Definiteness.PSD, Definiteness.ZERO):
        eigs = np.linalg.eigvalsh(sym)
        raise DefinitenessError(
            f"psd_sqrt requires a PSD matrix; classification is {cls.value} "
            f"(most negative eigenvalue {eigs.min():.6e})"
        )
    eigs, vecs = np.linalg.eigh(sym)
    thr = tol * max(1.0, float(np.abs(eigs).max()))
    clamped = np.where(eigs > thr, eigs, 0.0)
    root = (vecs * np.sqrt(clamped)) @ vecs.T
    return 0.5 * (root + root.T)


def row_rank(m, tol: float = DEFAULT_TOL) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    arr = as_matrix(m)
    sigma = np.linalg.svd(arr, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol * sigma[0]))
