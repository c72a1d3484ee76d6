"""Validated state types and the spectral primitives used throughout irbkit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NotHermitian, NotPSD, NotSymmetric, TraceNotOne

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
SIGN_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite matrix.

    Build instances through :func:`validate_density`; the constructor itself
    does not check anything.
    """

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues, descending."""
        return np.linalg.eigvalsh(self.entries)[::-1]


@dataclass(frozen=True, eq=False)
class HermitianObservable:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(x) -> np.ndarray:
    """Return a complex 2-D array view of a state, observable or array-like."""
    if isinstance(x, (DensityOperator, HermitianObservable)):
        return x.entries
    return np.asarray(x, dtype=complex)


def _square(m: np.ndarray) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def validate_density(raw) -> DensityOperator:
    """Check a candidate density matrix and wrap it.

    Asymmetry below ``1e-12`` is removed by averaging with the conjugate
    transpose; anything larger is rejected.

    Raises:
        NotHermitian, TraceNotOne, NotPSD: with the offending magnitude in the
            message.
    """
    m = _square(np.array(as_matrix(raw), dtype=complex))
    asym = float(np.max(np.abs(m - m.conj().T)))
    if asym > HERMITIAN_TOL:
        raise NotHermitian(f"max |rho - rho^dagger| = {asym:.3e} exceeds {HERMITIAN_TOL:g}")
    m = 0.5 * (m + m.conj().T)
    tr = float(np.trace(m).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceNotOne(f"|Tr rho - 1| = {abs(tr - 1.0):.3e} exceeds {TRACE_TOL:g}")
    lam_min = float(np.linalg.eigvalsh(m)[0])
    if lam_min < -PSD_TOL:
        raise NotPSD(f"smallest eigenvalue {lam_min:.3e} below {-PSD_TOL:g}")
    return DensityOperator(_frozen(m))


def hermitian_observable(raw) -> HermitianObservable:
    m = _square(np.array(as_matrix(raw), dtype=complex))
    asym = float(np.max(np.abs(m - m.conj().T)))
    if asym > HERMITIAN_TOL:
        raise NotHermitian(f"max |H - H^dagger| = {asym:.3e} exceeds {HERMITIAN_TOL:g}")
    return HermitianObservable(_frozen(0.5 * (m + m.conj().T)))


def eig_sym(S) -> SpectralDecomposition:
    """Ordered eigendecomposition of a real symmetric matrix.

    Eigenvalues come out descending. Each eigenvector column has its first
    component of magnitude above ``1e-12`` made positive, after which the last
    column is negated if needed so that ``det Q = +1``. Together these rules
    make ``Q`` a deterministic function of ``S`` away from degeneracies.
    """
    S = _square(np.asarray(S, dtype=float))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > HERMITIAN_TOL:
        raise NotSymmetric(f"max |S - S^T| = {asym:.3e} exceeds {HERMITIAN_TOL:g}")
    S = 0.5 * (S + S.T)
    w, v = np.linalg.eigh(S)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    for k in range(v.shape[1]):
        col = v[:, k]
        lead = np.flatnonzero(np.abs(col) > SIGN_TOL)
        if lead.size and col[lead[0]] < 0:
            v[:, k] = -col
    if np.linalg.det(v) < 0:
        v[:, -1] = -v[:, -1]
    return SpectralDecomposition(_frozen(w), _frozen(v))


def von_neumann_entropy(rho) -> float:
    """-Tr(rho ln rho) in nats."""
    lam = np.clip(np.linalg.eigvalsh(as_matrix(rho)), 0.0, 1.0)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} and {b.shape} differ")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def random_density(dim: int, seed: int) -> DensityOperator:
    """Ginibre (Hilbert-Schmidt) random state, deterministic for a given seed."""
    if dim < 1:
        raise DimMismatch(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    m = g @ g.conj().T
    m = 0.5 * (m + m.conj().T)
    return validate_density(m / np.trace(m).real)
