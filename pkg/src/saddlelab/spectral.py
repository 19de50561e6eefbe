"""Spectral utilities for Hessians at critical points.

The central object is the matrix absolute value |H| (same eigenvectors as
H, eigenvalues replaced by their magnitudes) and the quadratic-form
distance it induces, sqrt(x^T |H| x). That distance is equivalent to the
Euclidean norm with constants sqrt(min|eig|) and sqrt(max|eig|), which is
what :func:`inclusion_check` verifies sample by sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotCriticalError
from .objectives import ObjectiveFunction

Array = np.ndarray

__all__ = [
    "CriticalPointInfo",
    "InclusionReport",
    "classify_critical_point",
    "matrix_abs",
    "modified_distance",
    "inclusion_check",
]

#: classification is "degenerate" when min|eig| <= this fraction of max|eig|
DEGENERACY_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class CriticalPointInfo:
    """Classification data for one critical point.

    ``eigenvalues`` are sorted descending by value, with ``eigenvectors``
    as the matching orthonormal columns. ``kappa`` is the ratio
    max|eig| / min|eig| (None when degenerate).
    """

    location: Array
    eigenvalues: Array
    classification: str
    kappa: float | None
    eigenvectors: Array | None = None

    @property
    def abs_eig_max(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def abs_eig_min(self) -> float:
        return float(np.min(np.abs(self.eigenvalues)))


def _descending_order(eigs: Array) -> Array:
    # stable sort so equal eigenvalues keep their original relative order
    return np.argsort(-eigs, kind="stable")


def classify_critical_point(
    f: ObjectiveFunction,
    x_star: Array,
    tol: float = 1e-8,
) -> CriticalPointInfo:
    """Classify a critical point of ``f`` from its Hessian spectrum.

    Raises NotCriticalError (reporting the offending norm) when the
    gradient norm at ``x_star`` exceeds ``tol``.
    """
    x_star = np.asarray(x_star, dtype=float)
    grad_norm = float(np.linalg.norm(f.gradient(x_star)))
    if grad_norm > tol:
        raise NotCriticalError(grad_norm, tol)
    H = np.asarray(f.hessian(x_star), dtype=float)
    raw_eigs, raw_vecs = np.linalg.eigh(H)
    order = _descending_order(raw_eigs)
    eigs = raw_eigs[order]
    vecs = raw_vecs[:, order]
    # canonical sign: the largest-magnitude entry of each column is positive
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    classification = _classify_eigs(eigs)
    if classification == "degenerate":
        kappa = None
    else:
        abs_eigs = np.abs(eigs)
        kappa = float(abs_eigs.max() / abs_eigs.min())
    return CriticalPointInfo(x_star, eigs, classification, kappa, vecs)


def _classify_eigs(eigs: Array) -> str:
    abs_eigs = np.abs(eigs)
    top = abs_eigs.max()
    if top == 0.0 or abs_eigs.min() <= DEGENERACY_RTOL * top:
        return "degenerate"
    if np.all(eigs > 0):
        return "minimum"
    if np.all(eigs < 0):
        return "maximum"
    return "saddle"


def matrix_abs(H: Array) -> Array:
    """Matrix absolute value: same eigenvectors, eigenvalues |lambda_i|.

    The input must be symmetric. The result is symmetric positive
    semidefinite.
    """
    H = np.asarray(H, dtype=float)
    eigs, vecs = np.linalg.eigh(H)
    out = (vecs * np.abs(eigs)) @ vecs.T
    return (out + out.T) / 2.0


def modified_distance(H: Array, x: Array) -> float:
    """sqrt(x^T |H| x), the distance induced by the absolute Hessian."""
    x = np.asarray(x, dtype=float)
    q = float(x @ (matrix_abs(H) @ x))
    return float(np.sqrt(max(q, 0.0)))


@dataclass(frozen=True)
class InclusionReport:
    """Outcome of the ball-inclusion check between the Euclidean and
    modified distances."""

    passed: bool
    worst_margin: float
    n_samples: int


def inclusion_check(H: Array, samples: Array, slack: float = 1e-9) -> InclusionReport:
    """Verify both inclusion implications on a batch of sample points.

    For each sample x and threshold a drawn from the sample itself:
      * if ||x|| <= a / sqrt(max|eig|) then dtilde(x) <= a
      * if dtilde(x) <= a then ||x|| <= a / sqrt(min|eig|)

    The report's worst margin is the largest amount by which a conclusion
    overshoots its bound when its premise holds (negative margins mean
    the conclusion held with room to spare). ``slack`` absorbs floating
    point rounding; the implications are exact in real arithmetic.
    """
    H = np.asarray(H, dtype=float)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    abs_eigs = np.abs(np.linalg.eigvalsh(H))
    sq_max = float(np.sqrt(abs_eigs.max()))
    sq_min = float(np.sqrt(abs_eigs.min()))
    Habs = matrix_abs(H)

    worst = -np.inf
    for x in samples:
        norm = float(np.linalg.norm(x))
        dt = float(np.sqrt(max(x @ (Habs @ x), 0.0)))
        scale = max(1.0, norm, dt)
        # threshold a = sqrt(max|eig|) * ||x|| makes the first premise tight
        a1 = sq_max * norm
        if norm <= a1 / sq_max + slack * scale:
            worst = max(worst, (dt - a1) / scale)
        # threshold a = dtilde(x) makes the second premise tight
        a2 = dt
        if dt <= a2 + slack * scale:
            worst = max(worst, (norm - a2 / sq_min) / scale) if sq_min > 0 else worst
    passed = bool(worst <= slack)
    return InclusionReport(passed, float(worst), samples.shape[0])
