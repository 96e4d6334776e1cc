"""Dense complex Hermitian matrix kernel.

Eigendecomposition with a deterministic phase convention, plus matrix
exponentials and logarithms of Hermitian operators computed spectrally.
Every routine validates hermiticity up front; tolerances come from the
module-wide ``POLICY`` record so callers and tests share one set of knobs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class NumericPolicy:
    """Single source of truth for numerical tolerances."""

    hermitian_atol: float = 1e-12    # allowed |m[i,j] - conj(m[j,i])|
    psd_atol: float = 1e-10          # eigenvalues below -psd_atol are rejected
    log_floor: float = 1e-12         # default eigenvalue floor inside logs
    phase_atol: float = 1e-12        # component treated as zero when fixing phases
    lam_zero_atol: float = 1e-14     # |lam_1k| below this takes the diagonal branch
    population_floor: float = 1e-12  # x11 below this makes the prediction undefined
    feasibility_atol: float = 1e-12  # x11 + xkk within this of 1 is infeasible
    record_atol: float = 1e-9        # slack on measurement-record invariants


POLICY = NumericPolicy()


class EigenSystem(NamedTuple):
    eigenvalues: np.ndarray   # real, ascending
    eigenvectors: np.ndarray  # orthonormal columns, one per eigenvalue


def require_hermitian(m, atol: float = POLICY.hermitian_atol) -> np.ndarray:
    """Validate that ``m`` is square and Hermitian; return its Hermitian part.

    Raises ValidationError naming the worst offending entry pair.
    """
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    dev = np.abs(a - a.conj().T)
    worst = float(dev.max())
    if worst > atol:
        i, j = np.unravel_index(int(dev.argmax()), dev.shape)
        raise ValidationError(
            f"matrix is not Hermitian: entries ({i},{j}) and ({j},{i}) "
            f"differ by {worst:.3e} (tolerance {atol:.1e})"
        )
    return 0.5 * (a + a.conj().T)


def hermitian_eig(m) -> EigenSystem:
    """Eigendecompose a Hermitian matrix.

    Eigenvalues are returned in ascending order. Each eigenvector is
    rescaled so its first component of magnitude above the phase
    tolerance is real and positive, which makes the output reproducible.
    """
    h = require_hermitian(m)
    w, v = np.linalg.eigh(h)
    v = v.copy()
    for col in range(v.shape[1]):
        lead = np.flatnonzero(np.abs(v[:, col]) > POLICY.phase_atol)
        if lead.size:
            pivot = v[lead[0], col]
            v[:, col] *= pivot.conjugate() / abs(pivot)
    return EigenSystem(w, v)


def matrix_exp_hermitian(m) -> np.ndarray:
    """exp(m) for Hermitian m via eigendecomposition; Hermitian PD result."""
    w, v = hermitian_eig(m)
    out = (v * np.exp(w)) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def matrix_log_psd(m, floor: float = POLICY.log_floor) -> np.ndarray:
    """log(m) for Hermitian PSD m, flooring eigenvalues at ``floor``.

    Eigenvalues in [-psd_atol, floor) are clamped up to ``floor`` before
    taking logarithms; anything below -psd_atol is a domain error.
    """
    if floor <= 0:
        raise ValidationError(f"floor must be positive, got {floor}")
    w, v = hermitian_eig(m)
    if w.min() < -POLICY.psd_atol:
        raise DomainError(
            f"matrix has negative eigenvalue {w.min():.3e}; log undefined"
        )
    out = (v * np.log(np.maximum(w, floor))) @ v.conj().T
    return 0.5 * (out + out.conj().T)
