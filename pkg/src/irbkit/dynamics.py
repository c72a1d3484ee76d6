"""GKSL generators, IRB-selectivity certification and time evolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import DensityOperator, _frozen, as_matrix, hermitian_observable, validate_density
from .diagnostics import DiagnosticsReport, report_in_frame
from .errors import (DimMismatch, InvalidInput, NegativeRate, NonMonotoneTimes,
                     NotDoublyStochastic, NotPSD, NotSelective, StepTooCoarse)
from .irb import DELTA_SUPPORT, IRBFrame, construct_irb

SELECTIVITY_TOL = 1e-12
RATE_FLOOR = 1e-12
TRACE_DRIFT_MAX = 1e-9
HERMITIAN_DRIFT_MAX = 1e-9
STOCHASTIC_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GKSLGenerator:
    """Hamiltonian plus weighted jump channels ``[(gamma, L), ...]``."""

    H: np.ndarray
    channels: tuple[tuple[float, np.ndarray], ...] = ()

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([g for g, _ in self.channels], dtype=float)

    def norm(self) -> float:
        """``||H|| + sum gamma ||L||**2`` with spectral norms."""
        total = np.linalg.norm(self.H, 2)
        for g, L in self.channels:
            total += g * np.linalg.norm(L, 2) ** 2
        return float(total)

    def in_frame(self, Q) -> "GKSLGenerator":
        """Express all operators in the basis given by the columns of ``Q``."""
        Q = np.asarray(Q)
        Qd = Q.conj().T
        return GKSLGenerator(_frozen(Qd @ self.H @ Q),
                             tuple((g, _frozen(Qd @ L @ Q)) for g, L in self.channels))

    def to_json(self) -> dict:
        from .serialize import matrix_to_json
        return {"H": matrix_to_json(self.H),
                "channels": [{"gamma": g, "L": matrix_to_json(L)} for g, L in self.channels]}


def gksl_generator(H, channels=()) -> GKSLGenerator:
    """Validate and build a generator.

    Raises:
        NegativeRate: if any ``gamma < 0``.
        DimMismatch: if operator shapes disagree.
    """
    Hm = hermitian_observable(H).entries
    chans = []
    for g, L in channels:
        g = float(g)
        if g < 0 or not math.isfinite(g):
            raise NegativeRate(f"gamma = {g} must be >= 0")
        L = np.array(L, dtype=complex)
        if L.shape != Hm.shape:
            raise DimMismatch(f"L shape {L.shape} vs H shape {Hm.shape}")
        chans.append((g, _frozen(L)))
    return GKSLGenerator(Hm, tuple(chans))


def minimal_dephasing(gammas, dim: int | None = None, H=None) -> GKSLGenerator:
    """Projector channels ``(gamma_i, |i><i|)``; ``H = 0`` unless given."""
    gammas = np.asarray(gammas, dtype=float)
    dim = gammas.size if dim is None else dim
    if gammas.size != dim:
        raise DimMismatch(f"{gammas.size} rates for dim {dim}")
    if np.any(gammas < 0):
        raise NegativeRate(f"rates must be >= 0, got {gammas.tolist()}")
    chans = []
    for i, g in enumerate(gammas):
        P = np.zeros((dim, dim), dtype=complex)
        P[i, i] = 1.0
        chans.append((g, P))
    return gksl_generator(np.zeros((dim, dim)) if H is None else H, chans)


def perturbed_generator(gen_diag: GKSLGenerator, perturbations, epsilon: float) -> GKSLGenerator:
    """Replace every ``L_a`` by ``L_a + epsilon * M_a``."""
    perturbations = list(perturbations)
    if len(perturbations) != len(gen_diag.channels):
        raise DimMismatch(f"{len(perturbations)} perturbations for "
                          f"{len(gen_diag.channels)} channels")
    chans = []
    for (g, L), M in zip(gen_diag.channels, perturbations):
        M = np.asarray(M, dtype=complex)
        if M.shape != L.shape:
            raise DimMismatch(f"perturbation shape {M.shape} vs {L.shape}")
        chans.append((g, L + epsilon * M))
    return gksl_generator(gen_diag.H, chans)


# --- rates and certification ------------------------------------------------

@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Pairwise dephasing rates and phase-rotation frequencies.

    ``omega_ij = H_ii - H_jj - sum_a gamma_a Im(l_ai conj(l_aj))``; the second term
    vanishes for real Lindblad diagonals.
    """

    Gamma: np.ndarray
    omega: np.ndarray
    gamma_min_active: float
    undamped_pairs: tuple[tuple[int, int], ...] = ()

    @property
    def dim(self) -> int:
        return self.Gamma.shape[0]

    def scaled(self, factor: float) -> "RateMatrix":
        return rates_from_matrices(self.Gamma * factor, self.omega * factor)


def rates_from_matrices(Gamma, omega=None) -> RateMatrix:
    Gamma = np.asarray(Gamma, dtype=float)
    omega = np.zeros_like(Gamma) if omega is None else np.asarray(omega, dtype=float)
    if np.any(Gamma < 0):
        raise NegativeRate("dephasing rates must be >= 0")
    d = Gamma.shape[0]
    iu = np.triu_indices(d, 1)
    upper = Gamma[iu]
    damped = upper[upper > RATE_FLOOR]
    gmin = float(damped.min()) if damped.size else 0.0
    undamped = tuple((int(i), int(j)) for i, j, g in zip(*iu, upper) if g <= RATE_FLOOR)
    return RateMatrix(_frozen(Gamma), _frozen(omega), gmin, undamped)


@dataclass(frozen=True)
class SelectivityCertificate:
    is_selective: bool
    max_commutator_norm: float
    per_channel_deviation: tuple[float, ...]
    epsilon_estimate: float
    hamiltonian_commutator_norm: float = 0.0
    near_selective: bool = False
    tol: float = SELECTIVITY_TOL

    @property
    def supports_analytic(self) -> bool:
        """Selective dissipator and a Hamiltonian diagonal in the same frame."""
        return self.is_selective and self.hamiltonian_commutator_norm <= self.tol

    def to_json(self) -> dict:
        return {
            "is_selective": self.is_selective,
            "max_commutator_norm": self.max_commutator_norm,
            "per_channel_deviation": list(self.per_channel_deviation),
            "epsilon_estimate": self.epsilon_estimate,
            "hamiltonian_commutator_norm": self.hamiltonian_commutator_norm,
            "near_selective": self.near_selective,
            "tol": self.tol,
        }


def _max_projector_commutator(X: np.ndarray) -> float:
    # [X, P_i] has row i equal to -X[i, :] off the diagonal and column i equal to
    # X[:, i]; its spectral norm is evaluated directly.
    d = X.shape[0]
    worst = 0.0
    for i in range(d):
        P = np.zeros((d, d))
        P[i, i] = 1.0
        worst = max(worst, float(np.linalg.norm(X @ P - P @ X, 2)))
    return worst


def _diag_rates(gammas, diags, H) -> RateMatrix:
    d = H.shape[0]
    Gamma = np.zeros((d, d))
    shift = np.zeros((d, d))
    for g, ell in zip(gammas, diags):
        diff = ell[:, None] - ell[None, :]
        Gamma += 0.5 * g * np.abs(diff) ** 2
        shift += g * np.imag(ell[:, None] * ell[None, :].conj())
    h = np.diag(H).real
    omega = h[:, None] - h[None, :] - shift
    return rates_from_matrices(Gamma, omega)


def _certify(gen: GKSLGenerator, tol: float) -> SelectivityCertificate:
    per = []
    off_mass = diag_mass = 0.0
    for _, L in gen.channels:
        per.append(_max_projector_commutator(L))
        off = L - np.diag(np.diag(L))
        off_mass += float(np.linalg.norm(off, "fro") ** 2)
        diag_mass += float(np.linalg.norm(np.diag(L)) ** 2)
    max_norm = max(per) if per else 0.0
    if off_mass == 0.0:
        eps = 0.0
    elif diag_mass == 0.0:
        eps = math.inf
    else:
        eps = math.sqrt(off_mass / diag_mass)
    h_norm = _max_projector_commutator(gen.H)
    rates = _diag_rates(gen.gammas, [np.diag(L) for _, L in gen.channels], gen.H)
    gsum = float(gen.gammas.sum())
    near = bool(gsum > 0 and rates.gamma_min_active > 0
                and eps < 0.1 * rates.gamma_min_active / gsum)
    return SelectivityCertificate(
        is_selective=max_norm <= tol, max_commutator_norm=max_norm,
        per_channel_deviation=tuple(per), epsilon_estimate=eps,
        hamiltonian_commutator_norm=h_norm, near_selective=near, tol=tol)


def check_selectivity(gen: GKSLGenerator, frame: IRBFrame | None = None,
                      tol: float = SELECTIVITY_TOL) -> SelectivityCertificate:
    """Test ``[L_a, Pi_i] = 0`` for every channel and IRB projector.

    Each ``L_a`` is first rotated into the frame (``Q^T L Q``). With
    ``frame=None`` the generator is tested in its own basis.
    """
    if frame is not None:
        if frame.Q.shape != gen.H.shape:
            raise DimMismatch(f"frame {frame.Q.shape} vs generator {gen.H.shape}")
        gen = gen.in_frame(frame.Q)
    return _certify(gen, tol)


def dephasing_rates(gen: GKSLGenerator, tol: float = SELECTIVITY_TOL) -> RateMatrix:
    """Dephasing rates ``Gamma_ij = 1/2 sum_a gamma_a |l_ai - l_aj|**2`` of a diagonal generator.

    The generator must already be expressed in the IRB frame.

    Raises:
        NotSelective: if some ``L_a`` or ``H`` has off-diagonal spectral norm
            above ``tol``; the certificate is attached to the exception.
    """
    cert = _certify(gen, tol)
    if not cert.supports_analytic:
        raise NotSelective(
            f"generator not diagonal: max commutator {cert.max_commutator_norm:.3e}, "
            f"Hamiltonian {cert.hamiltonian_commutator_norm:.3e} (tol {tol:g})", cert)
    return _diag_rates(gen.gammas, [np.diag(L) for _, L in gen.channels], gen.H)


# --- trajectories -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states with diagnostics.

    ``states`` are in the basis the evolution ran in; ``Q`` maps them to the
    fixed frame where ``reports`` were evaluated (identity when the evolution
    itself ran in that frame).
    """

    times: np.ndarray
    states: tuple[DensityOperator, ...]
    reports: tuple[DiagnosticsReport, ...]
    Q: np.ndarray | None = field(default=None)

    def __len__(self):
        return len(self.times)

    def frame_states(self) -> list[np.ndarray]:
        if self.Q is None:
            return [s.entries for s in self.states]
        Q = self.Q
        return [Q.T @ s.entries @ Q for s in self.states]

    def column(self, name: str) -> np.ndarray:
        """One diagnostic as an array; undefined values become NaN."""
        vals = [getattr(r, name) for r in self.reports]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def pair_moduli(self) -> tuple[list[tuple[int, int]], np.ndarray]:
        """``|rho_ij(t)|`` in the report frame for every pair ``i < j``."""
        mats = np.array(self.frame_states())
        d = mats.shape[1]
        pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
        vals = np.array([[abs(m[i, j]) for i, j in pairs] for m in mats])
        return pairs, vals.reshape(len(mats), len(pairs))


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        raise NonMonotoneTimes("empty time grid")
    if np.any(np.diff(times) <= 0):
        raise NonMonotoneTimes("sample times must be strictly increasing")
    return times


def evolve_analytic(rho0_O, rates: RateMatrix, times, lam: float = 1.0,
                    delta_support: float = DELTA_SUPPORT) -> Trajectory:
    """Exact propagation of a state held in its IRB frame under selective dynamics.

    Populations stay fixed and ``rho_ij(t) = rho_ij(t0) exp(-(Gamma_ij + i omega_ij)(t - t0))``.
    """
    times = _check_times(times)
    rho0 = as_matrix(rho0_O)
    if rho0.shape != rates.Gamma.shape:
        raise DimMismatch(f"state {rho0.shape} vs rates {rates.Gamma.shape}")
    rate = rates.Gamma + 1j * rates.omega
    states, reports = [], []
    for t in times:
        m = rho0 * np.exp(-rate * (t - times[0]))
        s = validate_density(m)
        states.append(s)
        reports.append(report_in_frame(s.entries, t, lam, delta_support))
    return Trajectory(times, tuple(states), tuple(reports))


def liouvillian(gen: GKSLGenerator) -> np.ndarray:
    """Superoperator of the GKSL right-hand side acting on row-major ``vec(rho)``."""
    d = gen.dim
    eye = np.eye(d)
    # row-major: vec(A X B) = kron(A, B^T) vec(X)
    Lsup = -1j * (np.kron(gen.H, eye) - np.kron(eye, gen.H.T))
    for g, L in gen.channels:
        if g == 0:
            continue
        LdL = L.conj().T @ L
        Lsup = Lsup + g * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye)
                           - 0.5 * np.kron(eye, LdL.T))
    return Lsup


def _rk4_propagator(Lsup: np.ndarray, h: float) -> np.ndarray:
    # One classical RK4 step of the linear autonomous ODE dv/dt = Lsup v is the
    # degree-4 Taylor polynomial of exp(h Lsup); build it once per step size.
    A = h * Lsup
    eye = np.eye(A.shape[0], dtype=complex)
    return eye + A @ (eye + A @ (eye / 2 + A @ (eye / 6 + A / 24)))


def evolve_numeric(rho0, gen: GKSLGenerator, times, step: float = 1e-2, lam: float = 1.0,
                   frame: IRBFrame | None = None,
                   delta_support: float = DELTA_SUPPORT) -> Trajectory:
    """Integrate the GKSL equation with classical fixed-step RK4.

    The internal step is ``h <= min(step, 0.1 / gen.norm())``, shrunk so each
    sampling interval holds a whole number of steps. After every step the
    trace is renormalized (drift above ``1e-9`` is an error) and the state is
    re-symmetrized. Diagnostics are evaluated in ``frame`` (default: the IRB
    of ``rho0``), held fixed over the run.

    Raises:
        StepTooCoarse: on trace or hermiticity drift beyond tolerance, or loss
            of positivity at a sample time.
        NonMonotoneTimes: if ``times`` is not strictly increasing.
    """
    if not step > 0:
        raise InvalidInput(f"step must be > 0, got {step}")
    times = _check_times(times)
    rho = np.array(as_matrix(rho0), dtype=complex)
    d = gen.dim
    if rho.shape != (d, d):
        raise DimMismatch(f"state {rho.shape} vs generator dim {d}")
    if frame is None:
        frame = construct_irb(rho, delta_support)
    Q = frame.Q
    gnorm = gen.norm()
    h_max = min(step, 0.1 / gnorm) if gnorm > 0 else step
    Lsup = liouvillian(gen)
    cache: dict[int, np.ndarray] = {}

    def sample(m, t):
        try:
            s = validate_density(m)
        except NotPSD as exc:
            raise StepTooCoarse(f"positivity lost at t = {t:g}: {exc}") from exc
        return s, report_in_frame(Q.T @ s.entries @ Q, t, lam, delta_support)

    s, r = sample(rho, times[0])
    states, reports = [s], [r]
    v = s.entries.reshape(-1).copy()
    for k in range(1, times.size):
        dt = times[k] - times[k - 1]
        n = max(1, math.ceil(dt / h_max - 1e-9))
        P = cache.get(n)
        if P is None:
            P = cache.setdefault(n, _rk4_propagator(Lsup, dt / n))
        for _ in range(n):
            v = P @ v
            m = v.reshape(d, d)
            tr = np.trace(m).real
            if abs(tr - 1.0) > TRACE_DRIFT_MAX:
                raise StepTooCoarse(f"trace drift {abs(tr - 1.0):.3e} in one step")
            asym = np.max(np.abs(m - m.conj().T))
            if asym > HERMITIAN_DRIFT_MAX:
                raise StepTooCoarse(f"hermiticity drift {asym:.3e} in one step")
            m = 0.5 * (m + m.conj().T) / tr
            v = m.reshape(-1)
        s, r = sample(v.reshape(d, d), times[k])
        states.append(s)
        reports.append(r)
    return Trajectory(times, tuple(states), tuple(reports), _frozen(Q))


def classical_mixing_step(a, M, sort: bool = True) -> np.ndarray:
    """Apply a doubly stochastic matrix to a population vector.

    The result is re-sorted descending unless ``sort=False``.
    """
    a = np.asarray(a, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.shape != (a.size, a.size):
        raise DimMismatch(f"matrix {M.shape} vs vector length {a.size}")
    if (np.any(M < 0) or np.any(np.abs(M.sum(0) - 1) > STOCHASTIC_TOL)
            or np.any(np.abs(M.sum(1) - 1) > STOCHASTIC_TOL)):
        raise NotDoublyStochastic("rows and columns must be nonnegative and sum to 1")
    out = M @ a
    return np.sort(out)[::-1] if sort else out
