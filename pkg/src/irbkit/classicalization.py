"""Classicality thresholds, classicalization times and the falsifiable experiments.

Each experiment returns a plain report object; nothing here mutates its
inputs, so independent runs can be scanned in parallel.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (arrow_functional, coherence_U, coherence_Umax, cohesion_index,
                          population_entropy)
from .dynamics import (GKSLGenerator, RateMatrix, Trajectory, check_selectivity,
                       classical_mixing_step, dephasing_rates, evolve_analytic,
                       evolve_numeric)
from .errors import (AlreadyClassical, BadEpsilon, BadLambda, DegenerateGap, InvalidInput,
                     NotSelective, UndefinedPc, ZeroRate)
from .irb import DELTA_DEGEN, DELTA_SUPPORT, construct_irb, to_irb

GAP_FLOOR = 1e-9
BOUND_SLACK = 1e-10


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise BadEpsilon(f"epsilon must lie in (0, 1), got {epsilon}")


def tcl_bound(U0: float, Umax0: float, Gamma_min: float, epsilon: float) -> float:
    """Logarithmic lower estimate of the classicalization time.

    ``(1 / 2 Gamma_min) ln(U0 / (epsilon**2 Umax0))``, or 0 if the state already
    satisfies ``U0 <= epsilon**2 Umax0``.
    """
    _check_epsilon(epsilon)
    if not Gamma_min > 0:
        raise ZeroRate(f"Gamma_min must be > 0, got {Gamma_min}")
    if not Umax0 > 0:
        raise InvalidInput(f"Umax0 must be > 0, got {Umax0}")
    if U0 <= epsilon ** 2 * Umax0:
        return 0.0
    return math.log(U0 / (epsilon ** 2 * Umax0)) / (2.0 * Gamma_min)


def tcl_qubit(n0: float, a: float, gamma1: float, gamma2: float, epsilon: float) -> float:
    """Threshold-crossing time of a qubit under minimal dephasing.

    The coherence decays as ``n0 exp(-(gamma1 + gamma2) t / 2)``, so the crossing
    of ``|n| = epsilon sqrt(a (1 - a))`` happens at
    ``2 / (gamma1 + gamma2) * ln(|n0| / (epsilon sqrt(a (1 - a))))``.
    """
    _check_epsilon(epsilon)
    if not 0.0 < a < 1.0:
        raise InvalidInput(f"a must lie in (0, 1), got {a}")
    rate = gamma1 + gamma2
    if not rate > 0:
        raise ZeroRate("gamma1 + gamma2 must be > 0")
    threshold = epsilon * math.sqrt(a * (1.0 - a))
    if abs(n0) <= threshold:
        raise AlreadyClassical(f"|n0| = {abs(n0):g} already below {threshold:g}")
    return 2.0 / rate * math.log(abs(n0) / threshold)


@dataclass(frozen=True)
class ClassicalityVerdict:
    epsilon: float
    t_cl_measured: float | None  # None: threshold not reached on the trajectory
    t_cl_bound: float | None
    gamma_min: float | None

    @property
    def reached(self) -> bool:
        return self.t_cl_measured is not None


def _crossing_time(times, pc, epsilon):
    t0 = times[0]
    for k, p in enumerate(pc):
        if np.isnan(p):
            raise UndefinedPc(f"P_c undefined at t = {times[k]:g}")
        if p <= epsilon:
            if k == 0:
                return 0.0
            p0, p1 = pc[k - 1], p
            ta, tb = times[k - 1], times[k]
            if p1 > 0:
                frac = (math.log(p0) - math.log(epsilon)) / (math.log(p0) - math.log(p1))
            else:
                frac = (p0 - epsilon) / (p0 - p1)
            return ta + frac * (tb - ta) - t0
    return None


def detect_threshold_crossing(traj: Trajectory, epsilon: float,
                              gamma_min: float | None = None) -> ClassicalityVerdict:
    """First time ``P_c <= epsilon``, interpolated linearly in ``ln P_c``.

    Times are measured from the first sample. When ``gamma_min`` is given the
    closed-form bound is evaluated from the first report as well.

    Raises:
        UndefinedPc: if ``P_c`` is undefined before the crossing.
    """
    _check_epsilon(epsilon)
    pc = traj.column("P_c")
    t_meas = _crossing_time(np.asarray(traj.times), pc, epsilon)
    bound = None
    if gamma_min is not None and gamma_min > 0:
        r0 = traj.reports[0]
        if r0.U_max > 0:
            bound = tcl_bound(r0.U, r0.U_max, gamma_min, epsilon)
    return ClassicalityVerdict(float(epsilon), t_meas, bound, gamma_min)


@dataclass(frozen=True)
class EpsilonScan:
    rows: tuple[ClassicalityVerdict, ...]
    slope: float | None

    def csv_rows(self):
        for r in self.rows:
            yield (r.epsilon, r.t_cl_measured, r.t_cl_bound, self.slope)


SCAN_HEADER = ("epsilon", "t_cl_measured", "t_cl_bound", "slope")


def epsilon_scan(traj: Trajectory, epsilons, gamma_min: float | None = None) -> EpsilonScan:
    """Crossing times for decreasing tolerances and the slope of ``t_cl`` vs ``ln(1/eps)``.

    The slope is ``None`` unless at least two tolerances are reached.
    """
    eps = np.asarray(epsilons, dtype=float).ravel()
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise BadEpsilon("epsilons must be positive and strictly decreasing")
    rows = tuple(detect_threshold_crossing(traj, e, gamma_min) for e in eps)
    reached = [(r.epsilon, r.t_cl_measured) for r in rows if r.reached]
    slope = None
    if len(reached) >= 2:
        x = np.log(1.0 / np.array([e for e, _ in reached]))
        y = np.array([t for _, t in reached])
        slope = float(np.polyfit(x, y, 1)[0])
    return EpsilonScan(rows, slope)


def scan_workers() -> int:
    """Parallelism cap for scans, from ``IRB_NUM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("IRB_NUM_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over independent jobs, honouring :func:`scan_workers`."""
    items = list(items)
    workers = scan_workers()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- frame consistency ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrameConsistencyReport:
    """Outcome of evolving in the fixed initial IRB frame.

    Attributes:
        max_bound_violation: ``max(|Re rho_ij(t)| - |N_ij(0)| e^{-Gamma_ij t})``
            over samples and active pairs, floored at 0.
        population_gap: smallest gap between active populations.
        max_angle_bound: largest ``max_ij |Re rho_ij(t)| / g`` over the horizon,
            ``None`` for degenerate gaps.
        angle_bounds: the per-sample values of that bound.
        envelope: ``max_ij |rho_ij(t)| / g``, the modulus envelope of the bound.
        initial_scale: ``max_ij |N_ij(0)| / g``.
    """

    max_bound_violation: float
    population_gap: float
    max_angle_bound: float | None
    times: np.ndarray
    angle_bounds: np.ndarray | None
    envelope: np.ndarray | None
    initial_scale: float | None
    gamma_min: float
    blocks: tuple[tuple[int, ...], ...] = ()

    def max_decay_violation(self) -> float:
        """Worst excess of the angle bound over ``initial_scale e^{-Gamma_min t}``."""
        if self.angle_bounds is None:
            return 0.0
        ref = self.initial_scale * np.exp(-self.gamma_min * (self.times - self.times[0]))
        return float(max(0.0, np.max(self.angle_bounds - ref)))

    def to_json(self) -> dict:
        return {
            "max_bound_violation": self.max_bound_violation,
            "population_gap": self.population_gap,
            "max_angle_bound": self.max_angle_bound,
            "initial_scale": self.initial_scale,
            "gamma_min": self.gamma_min,
            "blocks": [list(b) for b in self.blocks],
        }


def frame_consistency_experiment(rho0, gen: GKSLGenerator, horizon: float, samples: int,
                                 engine: str = "analytic", step: float = 1e-3,
                                 tol: float = 1e-12,
                                 delta_support: float = DELTA_SUPPORT,
                                 delta_degen: float = DELTA_DEGEN) -> FrameConsistencyReport:
    """Check the real off-diagonal bound in the frozen initial frame.

    The generator is given in the same basis as ``rho0`` and must be
    selective, with a diagonal Hamiltonian, in the IRB of ``rho0``.

    Raises:
        NotSelective: if the generator fails certification.
        DegenerateGap: if two active populations are closer than ``1e-9``; the
            block-level report is attached to the exception.
    """
    frame = construct_irb(rho0, delta_support, delta_degen)
    gen_O = gen.in_frame(frame.Q)
    cert = check_selectivity(gen_O, None, tol)
    if not cert.supports_analytic:
        raise NotSelective("generator is not IRB-selective in the initial frame", cert)
    rates = dephasing_rates(gen_O, tol)
    times = np.linspace(0.0, horizon, samples)
    if engine == "analytic":
        traj = evolve_analytic(to_irb(rho0, frame), rates, times, delta_support=delta_support)
    elif engine == "numeric":
        traj = evolve_numeric(rho0, gen, times, step, frame=frame, delta_support=delta_support)
    else:
        raise InvalidInput(f"unknown engine {engine!r}")
    mats = np.array(traj.frame_states())
    pairs = list(frame.active_pairs())
    N0 = frame.N
    a = frame.populations
    violation = 0.0
    s_max = np.zeros(times.size)
    mod_max = np.zeros(times.size)
    for i, j in pairs:
        bound = abs(N0[i, j]) * np.exp(-rates.Gamma[i, j] * times)
        s = np.abs(mats[:, i, j].real)
        violation = max(violation, float(np.max(s - bound)))
        s_max = np.maximum(s_max, s)
        mod_max = np.maximum(mod_max, np.abs(mats[:, i, j]))
    gap = min((abs(a[i] - a[j]) for i, j in pairs), default=math.inf)
    n_scale = max((abs(N0[i, j]) for i, j in pairs), default=0.0)
    blocks = frame.blocks.clusters
    if gap < GAP_FLOOR:
        report = FrameConsistencyReport(violation, gap, None, times, None, None, None,
                                        rates.gamma_min_active, blocks)
        raise DegenerateGap(f"population gap {gap:.3e} below {GAP_FLOOR:g}", report)
    angles = s_max / gap
    return FrameConsistencyReport(
        max_bound_violation=violation, population_gap=gap,
        max_angle_bound=float(angles.max()) if angles.size else 0.0,
        times=times, angle_bounds=angles, envelope=mod_max / gap,
        initial_scale=n_scale / gap, gamma_min=rates.gamma_min_active, blocks=blocks)


# --- arrow of time ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ArrowResult:
    values: np.ndarray
    hypothesis_ok: np.ndarray
    max_decrease: float
    decreases: int

    @property
    def hypothesis_holds(self) -> bool:
        return bool(np.all(self.hypothesis_ok))

    @property
    def monotone(self) -> bool:
        return self.decreases == 0


def _arrow_value(a, N, lam):
    Umax = coherence_Umax(a)
    return arrow_functional(population_entropy(a), cohesion_index(coherence_U(N), Umax), lam)


def arrow_monotonicity_experiment(a0, N0, M, rates: RateMatrix, steps: int, dt: float,
                                  lam: float = 1.0, tol: float = 1e-10) -> ArrowResult:
    """Alternate population mixing with coherence decay and track ``A_lambda``.

    Each step applies ``M`` to the populations (kept in frame order, not
    re-sorted) and then multiplies ``N_ij`` by ``exp(-Gamma_ij dt)``. The
    stationarity hypothesis ``|dU_max| <= 2 Gamma_min dt U_max`` is evaluated per
    step and reported, not enforced.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise BadLambda(f"lambda must be > 0, got {lam}")
    a = np.asarray(a0, dtype=float)
    N = np.asarray(N0, dtype=float)
    decay = np.exp(-np.asarray(rates.Gamma) * dt)
    gmin = rates.gamma_min_active
    values = [_arrow_value(a, N, lam)]
    ok = []
    for _ in range(steps):
        umax_old = coherence_Umax(a)
        a = classical_mixing_step(a, M, sort=False)
        umax_new = coherence_Umax(a)
        ok.append(abs(umax_new - umax_old) <= 2.0 * gmin * dt * umax_old)
        N = N * decay
        values.append(_arrow_value(a, N, lam))
    values = np.array(values)
    drops = values[:-1] - values[1:]
    max_drop = float(max(0.0, drops.max())) if drops.size else 0.0
    return ArrowResult(values, np.array(ok, dtype=bool), max_drop, int(np.sum(drops > tol)))


# --- robustness -------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessReport:
    t_cl_unperturbed: float | None
    t_cl_perturbed: float | None
    relative_shift: float | None
    predicted_scale: float
    U_monotone: bool
    max_U_increase: float


def robustness_experiment(rho0_O, gen_diag: GKSLGenerator, perturbations, epsilon: float,
                          threshold: float, horizon: float, samples: int = 501,
                          step: float = 1e-3, monotone_tol: float = 1e-10) -> RobustnessReport:
    """Compare classicalization with and without an off-diagonal perturbation.

    ``gen_diag`` and ``rho0_O`` are expressed in the IRB frame of the state.
    Both runs use the numeric integrator; the predicted scale of the relative
    ``t_cl`` shift is ``epsilon * sum(gamma) * max||M|| / Gamma_min**2``.
    """
    from .dynamics import perturbed_generator

    frame = construct_irb(rho0_O)
    rates = dephasing_rates(gen_diag)
    if not rates.gamma_min_active > 0:
        raise ZeroRate("unperturbed generator has no damped pair")
    times = np.linspace(0.0, horizon, samples)
    base = evolve_numeric(rho0_O, gen_diag, times, step, frame=frame)
    gen_p = perturbed_generator(gen_diag, perturbations, epsilon)
    pert = evolve_numeric(rho0_O, gen_p, times, step, frame=frame)
    t0 = detect_threshold_crossing(base, threshold).t_cl_measured
    t1 = detect_threshold_crossing(pert, threshold).t_cl_measured
    shift = None
    if t0 is not None and t1 is not None and t0 > 0:
        shift = abs(t1 - t0) / t0
    mnorm = max(float(np.linalg.norm(np.asarray(M), 2)) for M in perturbations)
    predicted = epsilon * float(gen_diag.gammas.sum()) * mnorm / rates.gamma_min_active ** 2
    U = pert.column("U")
    rise = float(max(0.0, np.max(np.diff(U)))) if U.size > 1 else 0.0
    return RobustnessReport(t0, t1, shift, predicted, rise <= monotone_tol, rise)
