import math

import pytest
from hypothesis import given, strategies as st

from qdcavity.errors import InvalidParamsError
from qdcavity.params import PRESETS, TWO_PI, SystemParams, preset

_rate = st.floats(0.01, 100, allow_nan=False)


@given(g=_rate, k1=_rate, k2=_rate, ks=_rate, gpar=_rate, gstar=st.floats(0, 10))
def test_derived_formulas(g, k1, k2, ks, gpar, gstar):
    p = SystemParams(g, k1, k2, ks, gpar, gstar)
    kappa = k1 + k2 + ks
    gperp = gpar / 2 + gstar
    assert p.kappa == pytest.approx(kappa, rel=1e-14)
    assert p.gamma_perp == pytest.approx(gperp, rel=1e-14)
    assert p.cooperativity == pytest.approx(2 * g**2 / (kappa * gperp), rel=1e-13)
    assert p.critical_photon_number == pytest.approx(gperp * gpar / (4 * g**2), rel=1e-13)
    assert p.purcell_factor == pytest.approx(4 * g**2 / (kappa * gpar), rel=1e-13)
    assert p.gamma_par_enh == pytest.approx((p.purcell_factor + 1) * gpar, rel=1e-13)


def test_presets_share_caption_values():
    for name in PRESETS:
        p = preset(name).to_ghz()
        assert p["g"] == pytest.approx(4.7)
        assert p["kappa1"] + p["kappa2"] + p["kappa_s"] == pytest.approx(36.8)
        assert p["gamma_par"] == pytest.approx(0.35)
        assert p["gamma_par"] / 2 + p["gamma_star"] == pytest.approx(0.18)
    assert preset("symmetric").kappa_s == pytest.approx(0.08 * preset("symmetric").kappa)
    assert preset("symmetric").kappa1 == preset("symmetric").kappa2
    assert preset("device").kappa1 == pytest.approx(preset("device").kappa / 2)


def test_unknown_preset():
    with pytest.raises(InvalidParamsError, match="unknown preset"):
        preset("nope")


@pytest.mark.parametrize("field", ["g", "kappa1", "gamma_par", "gamma_star", "a_in"])
def test_negative_rates_rejected(field):
    kwargs = dict(g=1.0, kappa1=1.0, kappa2=1.0, kappa_s=0.0, gamma_par=1.0)
    kwargs[field] = -1.0
    with pytest.raises(InvalidParamsError):
        SystemParams(**kwargs)


def test_zero_kappa_and_nonfinite_rejected():
    with pytest.raises(InvalidParamsError):
        SystemParams(1.0, 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidParamsError):
        SystemParams(float("nan"), 1.0, 1.0, 0.0, 1.0)


def test_ghz_round_trip():
    p = SystemParams.from_ghz(g=4.7, kappa1=1.0, kappa2=2.0, kappa_s=0.5, gamma_par=0.35,
                              delta_c=-3.0, a_in=2.5)
    assert p.g == pytest.approx(TWO_PI * 4.7)
    assert p.a_in == 2.5
    back = p.to_ghz()
    assert back["delta_c"] == pytest.approx(-3.0)
    assert back["a_in"] == 2.5


def test_drive_convention():
    p = preset("symmetric").replace(a_in=3.0)
    assert p.rabi_frequency == pytest.approx(4 * p.g * math.sqrt(p.kappa1) * 3.0 / p.kappa)
    q = p.with_rabi_ratio(0.37)
    assert q.rabi_ratio == pytest.approx(0.37, rel=1e-14)
    with pytest.raises(InvalidParamsError):
        p.replace(g=0.0).drive_for_rabi(1.0)


def test_laser_detuning_moves_both():
    p = preset("symmetric").replace(delta_c=1.0, delta_qd=2.0).with_laser_detuning(0.5)
    assert (p.delta_c, p.delta_qd) == (0.5, 1.5)
