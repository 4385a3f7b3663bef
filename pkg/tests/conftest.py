"""Shared fixtures and an independent dense reference for the master equation."""

import warnings

import numpy as np
import pytest

from qdcavity import preset, solve, choose_cutoff


def reference_operators(n_max):
    """Cavity and emitter operators built directly with np.kron (emitter slot first)."""
    f = n_max + 1
    a_f = np.zeros((f, f), dtype=complex)
    for n in range(n_max):
        a_f[n, n + 1] = np.sqrt(n + 1)
    sm_e = np.array([[0, 1], [0, 0]], dtype=complex)
    sz_e = np.diag([-1.0, 1.0]).astype(complex)
    a = np.kron(np.eye(2), a_f)
    sm = np.kron(sm_e, np.eye(f))
    sz = np.kron(sz_e, np.eye(f))
    return a, sm, sz


def reference_rhs(p, n_max, rho):
    """Right-hand side of the master equation evaluated by plain matrix algebra."""
    a, sm, sz = reference_operators(n_max)
    ad, sp = a.conj().T, sm.conj().T
    h = (p.delta_c * ad @ a + p.delta_qd * sp @ sm + 1j * p.g * (sp @ a - ad @ sm)
         + 1j * np.sqrt(p.kappa1) * p.a_in * (a - ad))

    def d(x):
        xd = x.conj().T
        return x @ rho @ xd - 0.5 * (xd @ x @ rho + rho @ xd @ x)

    return (-1j * (h @ rho - rho @ h) + p.kappa * d(a) + p.gamma_par * d(sm)
            + 0.5 * p.gamma_star * (sz @ rho @ sz - rho))


def random_density(dim, rng):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


@pytest.fixture(scope="session")
def symmetric_weak():
    """symmetric preset at Omega = 0.1 Gamma with its steady state."""
    p = preset("symmetric").with_rabi_ratio(0.1)
    n = choose_cutoff(p)
    L, rho = solve(p, n)
    return p, L, rho


@pytest.fixture(scope="session")
def device_hom():
    p = preset("device").with_rabi_ratio(0.13)
    n = choose_cutoff(p)
    L, rho = solve(p, n)
    return p, L, rho


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
