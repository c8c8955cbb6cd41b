"""Small dense complex linear algebra: density matrices, norms, sampling.

Matrices are plain ``numpy`` complex arrays. A :class:`DensityMatrix` wraps a
validated, read-only copy so it can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, NotPSD, ShapeMismatch, TraceNotOne

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace ``dim x dim`` matrix."""

    dim: int
    mat: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)

    def __getitem__(self, idx):
        return self.mat[idx]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)


def hermiticity_violation(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def validate_density(m) -> DensityMatrix:
    """Check the three density-matrix invariants and wrap ``m``.

    Raises the specific :class:`~qtransfer.errors.InvalidDensityMatrix`
    subclass for the first violated invariant, carrying the measured
    violation.
    """
    if isinstance(m, DensityMatrix):
        m = m.mat
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"density matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ShapeMismatch("density matrix has non-finite entries")
    herm = hermiticity_violation(m)
    if herm > HERMITIAN_TOL:
        raise NotHermitian(herm)
    tr = abs(np.trace(m) - 1.0)
    if tr > TRACE_TOL:
        raise TraceNotOne(tr)
    lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    if lo < PSD_TOL:
        raise NotPSD(-lo)
    return DensityMatrix(m.shape[0], _frozen(m))


def sample_density(n: int, seed: int) -> DensityMatrix:
    """Hilbert-Schmidt random state: ``G G^dagger / tr`` with Ginibre ``G``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return validate_density(rho)


def maximally_mixed(n: int) -> DensityMatrix:
    return DensityMatrix(n, _frozen(np.eye(n) / n))


def frobenius_norm(m) -> float:
    """``sqrt(tr(A A^dagger))``."""
    m = np.asarray(m)
    return float(np.sqrt(np.sum(np.abs(m) ** 2)))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    # QR of a Ginibre matrix with the phase fix gives Haar measure
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def complex_to_json(z):
    """Encode complex scalars (possibly nested in arrays) as ``[re, im]`` pairs."""
    arr = np.asarray(z, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ShapeMismatch("complex values must be encoded as [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
