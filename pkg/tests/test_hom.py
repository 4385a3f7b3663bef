import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdcavity.correlations import CorrelationTrace, g1, g2
from qdcavity.detection import make_field
from qdcavity.errors import (
    AlignmentError,
    DegenerateSplitterError,
    InvalidParamsError,
    UndefinedVisibilityError,
)
from qdcavity.hom import ExtrapolationWarning, HomConfig, g1_mixture, g2_cross, g2_parallel, visibility

TAUS = np.linspace(0, 10, 1001)


def _trace(values, kind):
    values = np.broadcast_to(np.asarray(values, dtype=complex if kind == "g1" else float), TAUS.shape)
    return CorrelationTrace(TAUS, values, 1.0, None, None, kind, 1.0)


def _antibunched(width=0.2):
    return _trace(1 - np.exp(-TAUS / width), "g2")


@pytest.fixture(scope="module")
def reflected_traces(device_hom):
    p, L, rho = device_hom
    field = make_field("reflected", p)
    taus = np.linspace(0, 5, 2501)
    return g2(L, rho, field, taus), g1(L, rho, field, taus)


def test_config_validation():
    with pytest.raises(InvalidParamsError):
        HomConfig(0.6, 0.6, 0.5, 0.5, 1.0)
    with pytest.raises(InvalidParamsError):
        HomConfig(0.5, 0.5, 0.5, 0.5, -1.0)
    with pytest.raises(InvalidParamsError):
        HomConfig.balanced(1.0, V0=1.5)


def test_poissonian_cross_is_flat():
    out = g2_cross(_trace(1.0, "g2"), HomConfig.balanced(2.0), np.linspace(-3, 3, 61))
    np.testing.assert_allclose(out.values, 1, atol=1e-14)


def test_ideal_single_photons():
    cfg = HomConfig.balanced(2.0)
    g2t = _trace(np.where(TAUS == 0, 0.0, 1.0), "g2")
    cross = g2_cross(g2t, cfg, [0.0])
    par = g2_parallel(g2t, _trace(1.0, "g1"), cfg, [0.0])
    assert cross.values[0] == pytest.approx(0.5, abs=1e-14)
    assert par.values[0] == pytest.approx(0.0, abs=1e-14)
    assert visibility(cross, par) == pytest.approx(1.0, abs=1e-14)


def test_poissonian_dip_depth():
    cfg = HomConfig.balanced(2.0)
    g2t, g1t = _trace(1.0, "g2"), _trace(1.0, "g1")
    taus = np.array([-0.5, 0.0, 0.5])
    par = g2_parallel(g2t, g1t, cfg, taus)
    cross = g2_cross(g2t, cfg, taus)
    assert par.values[1] == pytest.approx(0.5, abs=1e-14)
    assert visibility(cross, par) == pytest.approx(0.5, abs=1e-14)


def test_no_overlap_removes_interference():
    cfg = HomConfig.balanced(2.0, V0=0.0)
    taus = np.linspace(-4, 4, 81)
    par = g2_parallel(_antibunched(), _trace(0.9, "g1"), cfg, taus)
    np.testing.assert_array_equal(par.values, g2_cross(_antibunched(), cfg, taus).values)
    assert visibility(par, par) == 0


@settings(max_examples=60, deadline=None)
@given(ra=st.floats(0.05, 0.95), rb=st.floats(0.05, 0.95), v0=st.floats(0, 1),
       dt=st.floats(0, 4), width=st.floats(0.05, 1), coh=st.floats(0, 1), bunch=st.floats(0, 5))
def test_parallel_below_cross(ra, rb, v0, dt, width, coh, bunch):
    cfg = HomConfig(ra, 1 - ra, rb, 1 - rb, dt, v0)
    taus = np.linspace(-5, 5, 101)
    g1t = _trace(coh + (1 - coh) * np.exp(-TAUS / width), "g1")
    g2t = _trace(1 + bunch * np.exp(-TAUS / width), "g2")
    par = g2_parallel(g2t, g1t, cfg, taus).values
    cross = g2_cross(g2t, cfg, taus).values
    assert np.all(par <= cross + 1e-12)


def test_cross_even_for_balanced_splitters():
    cfg = HomConfig.balanced(1.5)
    taus = np.linspace(-4, 4, 161)
    v = g2_cross(_antibunched(), cfg, taus).values
    np.testing.assert_allclose(v, v[::-1], atol=1e-13)


def test_zero_delay_recovers_input():
    cfg = HomConfig.balanced(0.0, V0=0.0)
    taus = np.linspace(0, 3, 31)
    np.testing.assert_allclose(g2_cross(_antibunched(), cfg, taus).values,
                               _antibunched().at(taus), atol=1e-14)


def test_errors():
    cfg = HomConfig(0.0, 1.0, 0.0, 1.0, 1.0)
    with pytest.raises(DegenerateSplitterError):
        g2_cross(_trace(1.0, "g2"), cfg, [0.0])
    short = CorrelationTrace(TAUS[:10], np.ones(10), 1.0, None, None, "g1", 1.0)
    with pytest.raises(AlignmentError):
        g2_parallel(_trace(1.0, "g2"), short, HomConfig.balanced(1.0), [0.0])
    with pytest.raises(ValueError):
        g2_cross(_trace(1.0, "g1"), HomConfig.balanced(1.0), [0.0])
    zero = _trace(0.0, "g2")
    with pytest.raises(UndefinedVisibilityError):
        visibility(zero, zero)


def test_extrapolation_warns():
    with pytest.warns(ExtrapolationWarning):
        out = g2_cross(_antibunched(), HomConfig.balanced(5.0), [8.0])
    assert out.values[0] == pytest.approx(1.0)


def test_g1_mixture():
    laser = _trace(1.0, "g1")
    inc = _trace(np.exp(-TAUS), "g1")
    np.testing.assert_array_equal(g1_mixture(1.0, 0.0, laser, inc).values, laser.values)
    half = g1_mixture(1.0, 1.0, laser, inc)
    assert half.values[-1].real == pytest.approx(0.5, abs=1e-4)
    s = 1.0
    i_coh = 1.0
    sat = g1_mixture(i_coh, s * i_coh, laser, inc)
    assert sat.values[-1].real == pytest.approx(0.5, abs=1e-4)
    with pytest.raises(InvalidParamsError):
        g1_mixture(0.0, 0.0, laser, inc)
    with pytest.raises(InvalidParamsError):
        g1_mixture(-1.0, 1.0, laser, inc)
    with pytest.raises(AlignmentError):
        g1_mixture(1.0, 1.0, laser, CorrelationTrace(TAUS[:3], np.ones(3), 1.0, None, None, "g1"))


def test_reflected_field_visibility(reflected_traces):
    g2t, g1t = reflected_traces
    cfg = HomConfig.balanced(2.0)
    taus = np.linspace(-3, 3, 1201)
    cross = g2_cross(g2t, cfg, taus)
    par = g2_parallel(g2t, g1t, cfg, taus)
    v0 = visibility(cross, par)
    assert v0 >= 0.94
    assert np.all(par.values <= cross.values + 1e-12)
    # halving the delay step changes the zero-delay visibility negligibly
    coarse = visibility(g2_cross(g2t, cfg, taus[::2]), g2_parallel(g2t, g1t, cfg, taus[::2]))
    assert abs(coarse - v0) < 1e-6


def test_long_delay_stationarity(reflected_traces):
    g2t, _ = reflected_traces
    taus = np.linspace(-1, 1, 41)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        out = g2_cross(g2t, HomConfig.balanced(5000.0, V0=0.0), taus)
    # at microsecond delays the shifted terms are uncorrelated
    expected = (0.25 * g2t.at(taus) + 0.125 + 0.125) / 0.5
    np.testing.assert_allclose(out.values, expected, atol=1e-12)
