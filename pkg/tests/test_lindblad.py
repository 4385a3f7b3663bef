import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from conftest import random_density, reference_rhs
from qdcavity.analytic import reflection_coefficient
from qdcavity.errors import CutoffOverflowError, DegenerateSteadyStateError
from qdcavity.hilbert import CompositeSpace, composite_operators
from qdcavity.lindblad import (
    DensityMatrix,
    choose_cutoff,
    hamiltonian,
    liouvillian,
    propagate,
    propagate_vector,
    solve,
    unvec,
    vec,
)
from qdcavity.params import SystemParams, preset


def _cavity_only(**kw):
    base = dict(g=0.0, kappa1=1.0, kappa2=1.0, kappa_s=0.5, gamma_par=0.3)
    base.update(kw)
    return SystemParams(**base)


def test_vectorization_is_column_stacking():
    m = np.arange(9).reshape(3, 3)
    np.testing.assert_array_equal(vec(m), [0, 3, 6, 1, 4, 7, 2, 5, 8])
    np.testing.assert_array_equal(unvec(vec(m), 3), m)


def test_hamiltonian_bare_interaction():
    space = CompositeSpace(3)
    h = hamiltonian(preset("symmetric"), space).entries
    assert h[0, 0] == 0
    assert np.allclose(h, h.conj().T)


def test_hamiltonian_decoupled_limit():
    space = CompositeSpace(3)
    h = hamiltonian(_cavity_only(a_in=2.0, delta_c=0.7), space).entries
    f = space.fock_dim
    np.testing.assert_array_equal(h[:f, f:], 0)
    np.testing.assert_array_equal(h[f:, :f], 0)


def test_vacuum_rabi_splitting():
    p = preset("symmetric")
    space = CompositeSpace(2)
    h = hamiltonian(p, space).entries
    idx = [space.index(False, 1), space.index(True, 0)]
    block = h[np.ix_(idx, idx)]
    np.testing.assert_allclose(np.linalg.eigvalsh(block), [-p.g, p.g], rtol=1e-14)
    full = np.linalg.eigvalsh(h)
    assert np.min(np.abs(full - p.g)) < 1e-12 and np.min(np.abs(full + p.g)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(
    n_max=st.integers(1, 4),
    rates=st.lists(st.floats(0.0, 50.0), min_size=6, max_size=6),
    det=st.lists(st.floats(-20.0, 20.0), min_size=2, max_size=2),
    a_in=st.floats(0.0, 5.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_generator_matches_reference(n_max, rates, det, a_in, seed):
    g, k1, k2, ks, gpar, gstar = rates
    p = SystemParams(g, k1 + 0.1, k2, ks, gpar, gstar, det[0], det[1], a_in)
    space = CompositeSpace(n_max)
    L = liouvillian(p, space)
    rho = random_density(space.dim, np.random.default_rng(seed))
    got = L.apply(rho)
    want = reference_rhs(p, n_max, rho)
    assert np.abs(got - want).max() <= 1e-10 * max(1.0, np.abs(want).max())


def test_trace_and_hermiticity_preservation():
    p = preset("symmetric").with_rabi_ratio(0.3).replace(delta_c=1.0, delta_qd=-2.0)
    space = CompositeSpace(4)
    L = liouvillian(p, space)
    rng = np.random.default_rng(11)
    trace_row = vec(np.eye(space.dim))
    for _ in range(100):
        m = rng.normal(size=(space.dim,) * 2) + 1j * rng.normal(size=(space.dim,) * 2)
        h = m + m.conj().T
        out = L.apply(h)
        assert abs(trace_row @ vec(out)) < 1e-10 * L.norm()
        assert np.abs(out - out.conj().T).max() < 1e-10 * L.norm()


def test_vacuum_is_stationary_without_drive():
    space = CompositeSpace(3)
    L = liouvillian(preset("symmetric"), space)
    assert np.abs(L.apply(space.basis_projector(False, 0))).max() == 0


def test_one_photon_decay_rate():
    p = _cavity_only()
    space = CompositeSpace(2)
    rho = space.basis_projector(False, 1)
    d = liouvillian(p, space).apply(rho)
    i = space.index(False, 1)
    assert d[i, i].real == pytest.approx(-p.kappa, rel=1e-14)


def test_dephasing_prefactor():
    p = SystemParams(0.0, 1.0, 0.0, 0.0, 0.0, gamma_star=0.8)
    space = CompositeSpace(1)
    plus = np.zeros((space.dim, space.dim), dtype=complex)
    g0, e0 = space.index(False, 0), space.index(True, 0)
    plus[np.ix_([g0, e0], [g0, e0])] = 0.5
    d = liouvillian(p, space).apply(plus)
    # coherence decays at gamma_star from (gamma*/2)(sz rho sz - rho)
    assert d[g0, e0].real == pytest.approx(-0.8 * 0.5, rel=1e-14)


def test_steady_state_undriven_is_vacuum():
    L, rho = solve(preset("symmetric"), 3)
    np.testing.assert_allclose(rho.entries, L.space.basis_projector(False, 0), atol=1e-12)


def test_steady_state_residual_and_null_space(symmetric_weak):
    p, L, rho = symmetric_weak
    assert np.linalg.norm(L.apply(rho.entries)) <= 1e-10 * L.norm()
    ns = sla.null_space(L.dense())
    assert ns.shape[1] == 1
    ref = unvec(ns[:, 0], L.space.dim)
    ref = ref / np.trace(ref)
    assert rho.trace_distance(DensityMatrix(ref, L.space, atol=1e-8)) < 1e-9


def test_weak_drive_asymptotics():
    p = preset("symmetric").with_rabi_ratio(0.05)
    L, rho = solve(p, choose_cutoff(p))
    ops = composite_operators(L.space)
    pe = rho.expect(ops.sigma_plus.entries @ ops.sigma_minus.entries).real
    sz = rho.expect(ops.sigma_z.entries).real
    assert pe < 0.01
    assert sz == pytest.approx(-1 + 2 * pe, abs=1e-12)


def test_low_drive_cavity_amplitude_matches_semiclassics():
    p = preset("symmetric").with_rabi_ratio(0.01)
    L, rho = solve(p, choose_cutoff(p))
    amp = np.sqrt(p.kappa1) * rho.expect(composite_operators(L.space).a.entries) / p.a_in
    C = p.cooperativity
    assert amp.real == pytest.approx(-(2 * p.kappa1 / p.kappa) / (1 + C), abs=1e-3)
    assert abs(amp - (reflection_coefficient(p) - 1)) < 1e-3


def test_degenerate_kernel_reported():
    p = SystemParams(0.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    with pytest.raises(DegenerateSteadyStateError):
        solve(p, 2)


def test_two_steady_state_paths_agree():
    p = preset("symmetric").with_rabi_ratio(0.2)
    L, rho = solve(p, 4)
    start = DensityMatrix.pure(L.space, False, 0)
    late = propagate(L, start, [0.0, 200.0])[-1]
    assert rho.trace_distance(late) < 1e-7


@pytest.mark.parametrize("method", ["rk", "expm"])
def test_cavity_decay_propagation(method):
    p = _cavity_only()
    space = CompositeSpace(2)
    L = liouvillian(p, space)
    times = np.linspace(0, 2, 21)
    states = propagate(L, DensityMatrix.pure(space, False, 1), times, method=method)
    pop = [s.entries[space.index(False, 1), space.index(False, 1)].real for s in states]
    np.testing.assert_allclose(pop, np.exp(-p.kappa * times), atol=1e-8)


def test_propagation_converges_monotonically(symmetric_weak):
    p, L, rho = symmetric_weak
    times = np.linspace(0, 5, 11)
    states = propagate(L, DensityMatrix.pure(L.space, True, 0), times)
    dist = [rho.trace_distance(s) for s in states]
    assert all(b <= a + 1e-9 for a, b in zip(dist[3:], dist[4:]))
    assert dist[-1] < 1e-6
    for s in states:
        assert abs(np.trace(s.entries) - 1) < 1e-8


def test_propagate_vector_rejects_bad_grid():
    L = liouvillian(_cavity_only(), CompositeSpace(1))
    x0 = vec(CompositeSpace(1).basis_projector(False, 0))
    with pytest.raises(ValueError):
        propagate_vector(L.generator, x0, [1.0, 0.5])
    with pytest.raises(ValueError):
        propagate_vector(L.generator, x0, [-1.0, 0.5])


def test_density_matrix_validation():
    space = CompositeSpace(1)
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(np.triu(np.ones((4, 4))) / 4, space)
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(np.eye(4) / 2, space)
    with pytest.raises(ValueError, match="negative eigenvalue"):
        DensityMatrix(np.diag([1.5, -0.5, 0, 0]), space)
    with pytest.raises(ValueError, match="4x4"):
        DensityMatrix(np.eye(3) / 3, space)


def test_cutoff_choices():
    assert choose_cutoff(preset("symmetric")) == 1
    weak = preset("symmetric").with_rabi_ratio(0.1)
    assert choose_cutoff(weak) <= 6
    strong = preset("symmetric").with_rabi_ratio(5.0)
    n = choose_cutoff(strong)
    assert 6 < n <= 48
    _, rho = solve(strong, n)
    assert rho.fock_populations()[-2:].sum() < 1e-10


def test_cutoff_overflow():
    with pytest.raises(CutoffOverflowError):
        choose_cutoff(preset("symmetric").with_rabi_ratio(5.0), cap=8)
