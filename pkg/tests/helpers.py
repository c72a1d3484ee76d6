"""Ensembles and independent oracles shared by the test modules."""

import numpy as np

from irbkit.dynamics import dephasing_rates, gksl_generator


def qubit_irb(a, n):
    return np.array([[a, 1j * n], [-1j * n, 1 - a]])


def random_rotation(d, rng):
    """Haar-random element of SO(d)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_selective_generator(d, rng, max_tries=200, min_ratio=0.05):
    """Generator diagonal in the computational frame with every pair damped.

    Complex Lindblad diagonals are included on purpose. ``Gamma_min`` is kept
    above ``min_ratio * norm`` so fixed-step integration stays affordable.
    """
    for _ in range(max_tries):
        k = rng.integers(1, 4)
        chans = []
        for _ in range(k):
            ell = rng.standard_normal(d) + 1j * rng.standard_normal(d) * rng.integers(0, 2)
            chans.append((rng.uniform(0.2, 1.5), np.diag(ell)))
        H = np.diag(rng.uniform(-2, 2, d))
        gen = gksl_generator(H, chans)
        rates = dephasing_rates(gen)
        if rates.undamped_pairs or rates.gamma_min_active < min_ratio * gen.norm():
            continue
        return gen, rates
    raise RuntimeError("could not draw a well-conditioned generator")


def random_doubly_stochastic(d, rng, strength):
    """``(1 - s) I + s * (convex combination of permutations)``."""
    mix = np.zeros((d, d))
    w = rng.dirichlet(np.ones(4))
    for wk in w:
        mix += wk * np.eye(d)[rng.permutation(d)]
    return (1 - strength) * np.eye(d) + strength * mix


def jacobi_eigenvalues(S, sweeps=100, tol=1e-15):
    """Cyclic Jacobi rotations; independent of LAPACK's symmetric driver."""
    A = np.array(S, dtype=float)
    d = A.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off < tol:
            break
        for p in range(d):
            for q in range(p + 1, d):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2 * A[p, q], A[q, q] - A[p, p])
                c, s = np.cos(theta), np.sin(theta)
                J = np.eye(d)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))[::-1]


def trace_norm_svd(X):
    return float(np.sum(np.linalg.svd(X, compute_uv=False)))


def sweep_visibility(rho, i, j, points=10_000):
    phi = np.linspace(0, 2 * np.pi, points, endpoint=False)
    p = 0.5 * (rho[i, i].real + rho[j, j].real) + np.real(rho[i, j] * np.exp(1j * phi))
    return (p.max() - p.min()) / (p.max() + p.min())


def shannon(p):
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))
