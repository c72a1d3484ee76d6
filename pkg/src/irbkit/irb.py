"""Intrinsic reference basis (IRB) construction.

The conjugation ``K`` is fixed as entrywise complex conjugation in the basis
the state is supplied in. To use a different physical real structure (position
basis, quantization axis, energy eigenbasis) rotate the input into the basis
where ``K`` acts by conjugation before calling :func:`construct_irb`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityOperator, _frozen, as_matrix, eig_sym, validate_density
from .errors import DimMismatch, NotSorted

DELTA_SUPPORT = 1e-12
DELTA_DEGEN = 1e-9


@dataclass(frozen=True, eq=False)
class RealSplit:
    S: np.ndarray
    T: np.ndarray


@dataclass(frozen=True)
class BlockPartition:
    clusters: tuple[tuple[int, ...], ...]

    def __iter__(self):
        return iter(self.clusters)

    def __len__(self):
        return len(self.clusters)

    @property
    def nontrivial(self) -> bool:
        return any(len(c) > 1 for c in self.clusters)

    def block_of(self, i: int) -> int | None:
        for k, c in enumerate(self.clusters):
            if i in c:
                return k
        return None


@dataclass(frozen=True, eq=False)
class IRBFrame:
    """Gauge-fixed frame of a state.

    Attributes:
        Q: real orthogonal matrix, ``det Q = +1``; columns are the IRB vectors.
        populations: intrinsic populations ``a_i``, descending.
        N: real antisymmetric coherence matrix ``Q^T T Q``.
        active_support: indices with ``a_i > delta_support``.
        blocks: degeneracy clusters of the active populations.
    """

    Q: np.ndarray
    populations: np.ndarray
    N: np.ndarray
    active_support: tuple[int, ...]
    blocks: BlockPartition
    delta_support: float = DELTA_SUPPORT
    delta_degen: float = DELTA_DEGEN

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def d_act(self) -> int:
        return len(self.active_support)

    @property
    def rho_O(self) -> np.ndarray:
        """``A + iN`` assembled from the frame data."""
        return np.diag(self.populations).astype(complex) + 1j * self.N

    def active_pairs(self):
        act = self.active_support
        for p, i in enumerate(act):
            for j in act[p + 1:]:
                yield i, j

    def to_json(self) -> dict:
        return {
            "Q": self.Q.tolist(),
            "a": self.populations.tolist(),
            "N": self.N.tolist(),
            "active": list(self.active_support),
            "blocks": [list(c) for c in self.blocks.clusters],
        }

    @classmethod
    def from_json(cls, obj: dict, delta_support=DELTA_SUPPORT, delta_degen=DELTA_DEGEN) -> "IRBFrame":
        return cls(
            Q=_frozen(np.asarray(obj["Q"], dtype=float)),
            populations=_frozen(np.asarray(obj["a"], dtype=float)),
            N=_frozen(np.asarray(obj["N"], dtype=float)),
            active_support=tuple(int(i) for i in obj["active"]),
            blocks=BlockPartition(tuple(tuple(int(i) for i in c) for c in obj["blocks"])),
            delta_support=delta_support,
            delta_degen=delta_degen,
        )


def split_real_imag(rho) -> RealSplit:
    """``rho = S + iT`` with ``S`` real symmetric and ``T`` real antisymmetric."""
    m = as_matrix(rho)
    return RealSplit(_frozen(m.real), _frozen(m.imag))


def detect_blocks(populations, delta_degen: float = DELTA_DEGEN) -> BlockPartition:
    """Greedy clustering of a descending vector.

    Neighbours ``a_i, a_{i+1}`` share a cluster iff ``a_i - a_{i+1} <= delta_degen``.
    Indices are 0-based.
    """
    a = np.asarray(populations, dtype=float)
    if a.size == 0:
        return BlockPartition(())
    if np.any(np.diff(a) > 0):
        raise NotSorted("populations must be sorted descending")
    clusters = [[0]]
    for i in range(1, a.size):
        if a[i - 1] - a[i] <= delta_degen:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return BlockPartition(tuple(tuple(c) for c in clusters))


def construct_irb(rho, delta_support: float = DELTA_SUPPORT,
                  delta_degen: float = DELTA_DEGEN) -> IRBFrame:
    """Diagonalize the real symmetric part of ``rho`` and express the rest in that frame."""
    split = split_real_imag(rho)
    decomp = eig_sym(split.S)
    Q = decomp.eigenvectors
    N = Q.T @ split.T @ Q
    N = 0.5 * (N - N.T)
    a = decomp.eigenvalues
    active = tuple(int(i) for i in np.flatnonzero(a > delta_support))
    blocks = detect_blocks(a[list(active)], delta_degen)
    return IRBFrame(Q, a, _frozen(N), active, blocks, delta_support, delta_degen)


def to_irb(rho, frame: IRBFrame) -> DensityOperator:
    """``Q^T rho Q`` as a validated state."""
    m = as_matrix(rho)
    if m.shape != frame.Q.shape:
        raise DimMismatch(f"state shape {m.shape} vs frame {frame.Q.shape}")
    Q = frame.Q
    return validate_density(Q.T @ m @ Q)


def from_irb(rho_O, frame: IRBFrame) -> DensityOperator:
    """Inverse of :func:`to_irb`."""
    m = as_matrix(rho_O)
    if m.shape != frame.Q.shape:
        raise DimMismatch(f"state shape {m.shape} vs frame {frame.Q.shape}")
    Q = frame.Q
    return validate_density(Q @ m @ Q.T)


def dephase_irb(rho_O) -> DensityOperator:
    """Complete dephasing in the current basis: keep the diagonal only."""
    m = as_matrix(rho_O)
    return validate_density(np.diag(np.diag(m).real).astype(complex))
