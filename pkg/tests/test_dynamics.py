import math

import numpy as np
import pytest
from scipy.linalg import expm

from irbkit import dynamics
from irbkit.density import random_density, validate_density
from irbkit.diagnostics import population_entropy
from irbkit.dynamics import (check_selectivity, classical_mixing_step, dephasing_rates,
                             evolve_analytic, evolve_numeric, gksl_generator, liouvillian,
                             minimal_dephasing, perturbed_generator, rates_from_matrices)
from irbkit.errors import (DimMismatch, NegativeRate, NonMonotoneTimes, NotDoublyStochastic,
                           NotSelective, StepTooCoarse)
from irbkit.irb import construct_irb, to_irb

from .helpers import qubit_irb, random_rotation, random_selective_generator

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def test_minimal_dephasing_rates():
    r = dephasing_rates(minimal_dephasing([1.0, 1.0]))
    assert r.Gamma[0, 1] == pytest.approx(1.0)
    assert r.gamma_min_active == pytest.approx(1.0)
    r = dephasing_rates(minimal_dephasing([0.0, 0.0, 0.0]))
    assert np.all(r.Gamma == 0) and r.gamma_min_active == 0.0
    assert r.undamped_pairs == ((0, 1), (0, 2), (1, 2))
    r = dephasing_rates(minimal_dephasing([2.0, 0.0, 0.0]))
    assert r.Gamma[0, 1] == pytest.approx(1.0)
    assert r.Gamma[0, 2] == pytest.approx(1.0)
    assert r.Gamma[1, 2] == 0.0
    assert r.undamped_pairs == ((1, 2),)
    with pytest.raises(NegativeRate):
        minimal_dephasing([1.0, -0.1])
    with pytest.raises(DimMismatch):
        minimal_dephasing([1.0, 1.0], dim=3)


def test_dephasing_rates_examples():
    assert dephasing_rates(gksl_generator(np.zeros((2, 2)), [(1.0, SZ)])).Gamma[0, 1] == \
        pytest.approx(2.0)
    assert dephasing_rates(gksl_generator(np.zeros((2, 2)), [(1.0, np.eye(2))])).Gamma[0, 1] == 0
    with pytest.raises(NotSelective) as info:
        dephasing_rates(gksl_generator(np.zeros((2, 2)), [(1.0, SX)]))
    assert info.value.certificate.max_commutator_norm == pytest.approx(1.0)
    with pytest.raises(NotSelective):
        dephasing_rates(gksl_generator(SX, [(1.0, SZ)]))


def test_dephasing_rates_symmetric_and_match_formula():
    rng = np.random.default_rng(5)
    for _ in range(30):
        d = int(rng.integers(2, 6))
        gen, r = random_selective_generator(d, rng)
        assert np.allclose(r.Gamma, r.Gamma.T)
        assert np.allclose(r.omega, -r.omega.T)
        for i in range(d):
            for j in range(d):
                want = 0.5 * sum(g * abs(L[i, i] - L[j, j]) ** 2 for g, L in gen.channels)
                assert r.Gamma[i, j] == pytest.approx(want, abs=1e-12)


def test_check_selectivity():
    cert = check_selectivity(minimal_dephasing([1.0, 0.5]))
    assert cert.is_selective and cert.max_commutator_norm == 0 and cert.epsilon_estimate == 0
    cert = check_selectivity(gksl_generator(np.zeros((2, 2)), [(1.0, SX)]))
    assert not cert.is_selective
    assert cert.max_commutator_norm == pytest.approx(1.0)
    L = SZ + 0.01 * SX
    cert = check_selectivity(gksl_generator(np.zeros((2, 2)), [(1.0, L)]))
    assert cert.epsilon_estimate == pytest.approx(0.01, rel=1e-12)
    assert cert.max_commutator_norm == pytest.approx(0.01, rel=1e-12)
    assert not cert.is_selective


def test_check_selectivity_in_frame():
    rng = np.random.default_rng(1)
    rho = random_density(3, 2)
    f = construct_irb(rho)
    gen_O, _ = random_selective_generator(3, rng)
    lab = gen_O.in_frame(f.Q.T)
    assert not check_selectivity(lab).is_selective
    assert check_selectivity(lab, f).is_selective
    assert check_selectivity(lab, f).max_commutator_norm < 1e-12


def test_perturbed_generator():
    base = minimal_dephasing([1.0, 1.0])
    pert = perturbed_generator(base, [SX, SX], 0.1)
    for (_, L0), (_, L1) in zip(base.channels, pert.channels):
        assert np.allclose(L1 - L0, 0.1 * SX)
    with pytest.raises(DimMismatch):
        perturbed_generator(base, [SX], 0.1)


def test_evolve_analytic_examples():
    rates = dephasing_rates(minimal_dephasing([1.0, 1.0]))
    traj = evolve_analytic(qubit_irb(0.5, 0.25), rates, [0.0, 1.0])
    assert traj.states[1].entries[0, 1].imag == pytest.approx(0.25 * math.exp(-1), abs=1e-15)
    assert np.allclose(traj.states[0].entries, qubit_irb(0.5, 0.25))
    assert np.allclose(np.diag(traj.states[1].entries), [0.5, 0.5])

    spin = dephasing_rates(gksl_generator(np.diag([2.5, -2.5]), []))
    assert spin.omega[0, 1] == pytest.approx(5.0)
    traj = evolve_analytic(qubit_irb(0.6, 0.2), spin, np.linspace(0, 3, 31))
    assert np.allclose([abs(s.entries[0, 1]) for s in traj.states], 0.2, atol=1e-15)
    assert np.allclose(traj.column("U"), 0.04, atol=1e-15)


def test_times_validated():
    rates = dephasing_rates(minimal_dephasing([1.0, 1.0]))
    for bad in ([0.0, 1.0, 1.0], [1.0, 0.5], []):
        with pytest.raises(NonMonotoneTimes):
            evolve_analytic(qubit_irb(0.5, 0.25), rates, bad)
        with pytest.raises(NonMonotoneTimes):
            evolve_numeric(qubit_irb(0.5, 0.25), minimal_dephasing([1.0, 1.0]), bad)


def test_evolve_numeric_null_generator():
    rho = random_density(3, 8)
    traj = evolve_numeric(rho, gksl_generator(np.zeros((3, 3))), [0.0, 2.0])
    assert np.allclose(traj.states[-1].entries, rho.entries, atol=1e-15)


def test_evolve_numeric_phase_rotation():
    gen = gksl_generator(SZ)
    traj = evolve_numeric(qubit_irb(0.6, 0.2), gen, np.linspace(0, 2, 21), step=1e-3)
    for t, s in zip(traj.times, traj.states):
        c = s.entries[0, 1]
        assert abs(c) == pytest.approx(0.2, abs=1e-9)
        assert c == pytest.approx(0.2j * np.exp(-2j * t), abs=1e-9)


def test_liouvillian_matches_direct_rhs():
    rng = np.random.default_rng(3)
    d = 3
    H = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    H = H + H.conj().T
    Ls = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(2)]
    gen = gksl_generator(H, [(0.7, Ls[0]), (0.3, Ls[1])])
    rho = random_density(d, 1).entries
    rhs = -1j * (H @ rho - rho @ H)
    for g, L in gen.channels:
        LdL = L.conj().T @ L
        rhs += g * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    assert np.allclose((liouvillian(gen) @ rho.reshape(-1)).reshape(d, d), rhs, atol=1e-12)


def test_evolve_numeric_matches_expm():
    rng = np.random.default_rng(4)
    d = 3
    H = rng.standard_normal((d, d))
    H = H + H.T
    L = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    gen = gksl_generator(H, [(0.5, L)])
    rho = random_density(d, 6)
    T = 1.0
    traj = evolve_numeric(rho, gen, [0.0, T], step=1e-3)
    exact = (expm(T * liouvillian(gen)) @ rho.entries.reshape(-1)).reshape(d, d)
    assert np.allclose(traj.states[-1].entries, exact, atol=1e-10)


def test_numeric_agrees_with_analytic():
    rng = np.random.default_rng(10)
    for _ in range(10):
        d = int(rng.integers(2, 5))
        gen_O, rates = random_selective_generator(d, rng)
        rho = random_density(d, int(rng.integers(1 << 30)))
        f = construct_irb(rho)
        lab = gen_O.in_frame(f.Q.T)
        times = np.linspace(0, 2, 11)
        ana = evolve_analytic(to_irb(rho, f), rates, times)
        num = evolve_numeric(rho, lab, times, step=1e-3, frame=f)
        for A, B in zip(ana.frame_states(), num.frame_states()):
            assert np.max(np.abs(A - B)) < 1e-9


def test_rate_recovered_from_log_slope():
    rates = dephasing_rates(minimal_dephasing([0.8, 0.4]))
    times = np.linspace(0, 3, 31)
    rho = qubit_irb(0.7, 0.3)
    for traj, tol in ((evolve_analytic(rho, rates, times), 1e-6),
                      (evolve_numeric(rho, minimal_dephasing([0.8, 0.4]), times, step=1e-2),
                       1e-4)):
        _, mods = traj.pair_moduli()
        slope = np.polyfit(times, np.log(mods[:, 0]), 1)[0]
        assert -slope == pytest.approx(0.6, abs=tol)


def test_undamped_pair_constant():
    gen = minimal_dephasing([2.0, 0.0, 0.0])
    rho = random_density(3, 12)
    f = construct_irb(rho)
    rates = dephasing_rates(gen)
    traj = evolve_analytic(to_irb(rho, f), rates, np.linspace(0, 4, 9))
    _, mods = traj.pair_moduli()
    assert np.allclose(mods[:, 2], mods[0, 2], atol=1e-15)
    assert mods[-1, 0] < mods[0, 0]


def test_step_too_coarse(monkeypatch):
    monkeypatch.setattr(dynamics, "_rk4_propagator",
                        lambda Lsup, h: 1.01 * np.eye(Lsup.shape[0], dtype=complex))
    with pytest.raises(StepTooCoarse):
        evolve_numeric(qubit_irb(0.5, 0.2), minimal_dephasing([1.0, 1.0]), [0.0, 1.0])


def test_numeric_trace_preserved():
    rng = np.random.default_rng(2)
    gen, _ = random_selective_generator(4, rng)
    rho = random_density(4, 2)
    traj = evolve_numeric(rho, gen.in_frame(random_rotation(4, rng)), np.linspace(0, 3, 7))
    for s in traj.states:
        assert abs(np.trace(s.entries) - 1) < 1e-12


def test_classical_mixing_step():
    M = np.array([[0.9, 0.1], [0.1, 0.9]])
    a = classical_mixing_step([0.8, 0.2], M)
    assert np.allclose(a, [0.74, 0.26])
    assert population_entropy([0.8, 0.2]) == pytest.approx(0.5004024235381879, abs=1e-12)
    assert population_entropy(a) == pytest.approx(0.5730569171314204, abs=1e-12)
    u = classical_mixing_step([0.6, 0.3, 0.1], np.full((3, 3), 1 / 3))
    assert population_entropy(u) == pytest.approx(math.log(3), abs=1e-12)
    assert np.allclose(classical_mixing_step([0.2, 0.8], np.eye(2), sort=False), [0.2, 0.8])
    with pytest.raises(NotDoublyStochastic):
        classical_mixing_step([0.5, 0.5], [[0.9, 0.2], [0.1, 0.8]])
    with pytest.raises(NotDoublyStochastic):
        classical_mixing_step([0.5, 0.5], [[1.1, -0.1], [-0.1, 1.1]])


def test_rates_scaled():
    r = rates_from_matrices([[0, 1.0], [1.0, 0]]).scaled(2.0)
    assert r.gamma_min_active == 2.0
    with pytest.raises(NegativeRate):
        rates_from_matrices([[0, -1.0], [-1.0, 0]])


def test_generator_validation():
    with pytest.raises(NegativeRate):
        gksl_generator(np.zeros((2, 2)), [(-1.0, SZ)])
    with pytest.raises(DimMismatch):
        gksl_generator(np.zeros((2, 2)), [(1.0, np.eye(3))])
    rho = validate_density(qubit_irb(0.5, 0.1))
    with pytest.raises(DimMismatch):
        evolve_numeric(rho, minimal_dephasing([1.0, 1.0, 1.0]), [0.0, 1.0])
