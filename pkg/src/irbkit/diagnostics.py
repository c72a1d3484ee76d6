"""Scalar functionals of an IRB-decomposed state.

All entropies are in nats. A cohesion index that cannot be defined (fewer than
two nonzero populations) is represented by ``None``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .density import as_matrix, von_neumann_entropy
from .errors import (BadLambda, EmptySector, IndexOutOfRange, InvalidInput,
                     NotAntisymmetric, NotNormalized, UmaxDegenerate)
from .irb import DELTA_DEGEN, DELTA_SUPPORT, IRBFrame, construct_irb

UMAX_FLOOR = 1e-12
NORM_TOL = 1e-10

CSV_HEADER = ("t", "Sp", "U", "Umax", "Pc", "Dcoh", "Crel", "hs", "trbound", "Alambda")


@dataclass(frozen=True)
class DiagnosticsReport:
    S_p: float
    U: float
    U_max: float
    P_c: float | None
    Delta_coh: float | None
    C_rel: float
    hs_dist: float
    trace_dist_bound: float
    A_lambda: float | None
    lam: float = 1.0
    t: float = 0.0
    d_act: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def csv_values(self) -> tuple:
        return (self.t, self.S_p, self.U, self.U_max, self.P_c, self.Delta_coh,
                self.C_rel, self.hs_dist, self.trace_dist_bound, self.A_lambda)


def _probabilities(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise NotNormalized("expected a non-empty probability vector")
    if np.any(a < -NORM_TOL):
        raise NotNormalized(f"negative entry {a.min():.3e}")
    if abs(a.sum() - 1.0) > NORM_TOL:
        raise NotNormalized(f"entries sum to {a.sum():.12g}")
    return np.clip(a, 0.0, None)


def population_entropy(a) -> float:
    """Shannon entropy of the intrinsic populations, with 0 ln 0 = 0."""
    p = _probabilities(a)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def coherence_U(N) -> float:
    """Sum of squared strict-upper entries of the antisymmetric coherence matrix."""
    N = np.asarray(N, dtype=float)
    asym = float(np.max(np.abs(N + N.T))) if N.size else 0.0
    if asym > 1e-12:
        raise NotAntisymmetric(f"max |N + N^T| = {asym:.3e}")
    return float(np.sum(np.triu(N, 1) ** 2))


def coherence_Umax(a) -> float:
    """``sum_{i<j} a_i a_j``."""
    p = _probabilities(a)
    return float(np.sum(np.triu(np.outer(p, p), 1)))


def cohesion_index(U: float, Umax: float) -> float:
    """Normalized coherence ``sqrt(U / Umax)`` clamped to [0, 1].

    Raises:
        UmaxDegenerate: if ``Umax < 1e-12`` (single-sector support).
    """
    if U < 0:
        raise InvalidInput(f"U must be >= 0, got {U}")
    if Umax < UMAX_FLOOR:
        raise UmaxDegenerate(f"U_max = {Umax:.3e} below {UMAX_FLOOR:g}")
    return min(1.0, math.sqrt(U / Umax))


def hs_distance_to_diagonal(U: float) -> float:
    return math.sqrt(2.0 * U)


def trace_distance_bound(U: float, d_act: int) -> float:
    """Cauchy-Schwarz upper bound on the trace distance to the dephased state."""
    return math.sqrt(d_act / 2.0) * math.sqrt(U)


def rel_entropy_coherence(rho_O) -> float:
    """``S(dephased) - S(rho)`` in nats."""
    m = as_matrix(rho_O)
    # the dephased state is diagonal, so its entropy is the Shannon entropy of the diagonal
    p = np.clip(np.diag(m).real, 0.0, None)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p))) - von_neumann_entropy(m)


def arrow_functional(S_p: float, P_c: float, lam: float = 1.0) -> float:
    """``S_p + lam * (1 - P_c**2)``; ``lam`` must be positive."""
    if not (lam > 0 and math.isfinite(lam)):
        raise BadLambda(f"lambda must be > 0, got {lam}")
    if not 0.0 <= P_c <= 1.0:
        raise InvalidInput(f"P_c must lie in [0, 1], got {P_c}")
    return S_p + lam * (1.0 - P_c * P_c)


def interferogram(rho_O, i: int, j: int, phi):
    """Detected probability of an ideal balanced two-path readout of sectors ``i, j``."""
    m = as_matrix(rho_O)
    d = m.shape[0]
    if not (0 <= i < j < d):
        raise IndexOutOfRange(f"need 0 <= i < j < {d}, got ({i}, {j})")
    phi = np.asarray(phi, dtype=float)
    p = 0.5 * (m[i, i].real + m[j, j].real) + np.real(m[i, j] * np.exp(1j * phi))
    return float(p) if p.ndim == 0 else p


def visibility(rho_O, i: int, j: int) -> float:
    m = as_matrix(rho_O)
    d = m.shape[0]
    if not (0 <= i < j < d):
        raise IndexOutOfRange(f"need 0 <= i < j < {d}, got ({i}, {j})")
    denom = m[i, i].real + m[j, j].real
    if denom <= 1e-12:
        raise EmptySector(f"rho_ii + rho_jj = {denom:.3e}")
    return float(2.0 * abs(m[i, j]) / denom)


def _report(t, a, U, rho_O, d_act, lam) -> DiagnosticsReport:
    if not (lam > 0 and math.isfinite(lam)):
        raise BadLambda(f"lambda must be > 0, got {lam}")
    S_p = population_entropy(a)
    Umax = coherence_Umax(a)
    if Umax < UMAX_FLOOR:
        P_c = dcoh = A = None
    else:
        P_c = cohesion_index(U, Umax)
        dcoh = 1.0 - P_c * P_c
        A = arrow_functional(S_p, P_c, lam)
    return DiagnosticsReport(
        S_p=S_p, U=U, U_max=Umax, P_c=P_c, Delta_coh=dcoh,
        C_rel=rel_entropy_coherence(rho_O), hs_dist=hs_distance_to_diagonal(U),
        trace_dist_bound=trace_distance_bound(U, d_act), A_lambda=A,
        lam=float(lam), t=float(t), d_act=int(d_act))


def diagnose(rho, lam: float = 1.0, delta_support: float = DELTA_SUPPORT,
             delta_degen: float = DELTA_DEGEN, frame: IRBFrame | None = None,
             t: float = 0.0) -> DiagnosticsReport:
    """Build the IRB of ``rho`` (unless given) and evaluate every diagnostic."""
    if frame is None:
        frame = construct_irb(rho, delta_support, delta_degen)
    Q = frame.Q
    rho_O = Q.T @ as_matrix(rho) @ Q
    return _report(t, frame.populations, coherence_U(frame.N), rho_O, frame.d_act, lam)


def report_in_frame(rho_O, t: float = 0.0, lam: float = 1.0,
                    delta_support: float = DELTA_SUPPORT) -> DiagnosticsReport:
    """Diagnostics of a state already expressed in a fixed (possibly stale) IRB frame.

    Populations are read off the diagonal and the coherence functional is
    ``sum_{i<j} |rho_ij|**2``. In a freshly built frame this equals
    ``||N||_F**2 / 2``; along a trajectory carried in the initial frame it also
    absorbs the real off-diagonal parts produced by Hamiltonian phase rotation.
    """
    m = as_matrix(rho_O)
    a = np.diag(m).real
    U = float(np.sum(np.abs(np.triu(m, 1)) ** 2))
    d_act = int(np.count_nonzero(a > delta_support))
    return _report(t, a, U, m, d_act, lam)
