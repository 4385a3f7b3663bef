"""Acceptance checks with pinned tolerances.

Each ``check_*`` function runs one criterion end to end and returns a
:class:`CheckResult` with the measured values that decided it.  The CLI
``validate`` command and ``tests/test_acceptance.py`` both consume these.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .analytic import (
    BlochParams,
    bloch_steady,
    g1_closed_form,
    g2_closed_form,
    reflection_coefficient,
    reflectivity_from_rho,
    scattering_rates,
    spectrum_closed_form,
)
from .correlations import (
    CorrelationTrace,
    convolve_irf,
    g1,
    g1_until_decayed,
    g2,
    g2_zero,
    spectrum,
)
from .detection import make_field, sweep_filter, sweep_lo
from .hilbert import CompositeSpace, composite_operators
from .hom import HomConfig, g2_cross, g2_parallel, visibility
from .lindblad import choose_cutoff, solve
from .mcwf import TrajectoryConfig, g2_zero_from_moments, run_trajectories
from .params import TWO_PI, SystemParams, preset


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    measured: dict = dc_field(default_factory=dict)
    failures: list = dc_field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        values = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        text = f"[{status}] {self.number:2d} {self.title} ({self.seconds:.1f}s): {values}"
        if self.failures:
            text += " | failed: " + "; ".join(self.failures)
        return text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


class _Recorder:
    def __init__(self, number, title):
        self.result = CheckResult(number, title, True)
        self._t0 = time.perf_counter()

    def measure(self, key, value):
        self.result.measured[key] = value
        return value

    def require(self, ok: bool, what: str):
        if not ok:
            self.result.passed = False
            self.result.failures.append(what)

    def done(self) -> CheckResult:
        self.result.seconds = time.perf_counter() - self._t0
        return self.result


def _rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------


def check_derived_constants() -> CheckResult:
    rec = _Recorder(1, "derived constants")
    p = preset("symmetric")
    c = rec.measure("C", p.cooperativity)
    fp = rec.measure("F_P", p.purcell_factor)
    n0 = rec.measure("n0", p.critical_photon_number)
    gam = rec.measure("Gamma_par_enh/2pi_GHz", p.gamma_par_enh / TWO_PI)
    rec.require(_rel(c, 6.9) <= 0.05, "C within 5% of 6.9")
    rec.require(_rel(fp, 6.9) <= 0.05, "F_P within 5% of 6.9")
    rec.require(_rel(n0, 6.9e-4) <= 0.10, "n0 within 10% of 6.9e-4")
    rec.require(_rel(gam, 2.8) <= 0.02, "Gamma_par_enh/2pi within 2% of 2.8 GHz")
    return rec.done()


LO_ANCHOR_DRIVE = 0.05


def lo_anchors(p: SystemParams) -> dict:
    c = p.cooperativity
    ratios = [0.0, 1 / (1 + c), 1.0, -1.0, 10.0, -10.0]
    res = sweep_lo(p, ratios)
    keys = ["transmitted", "peak", "reflected", "antiphase", "plus10", "minus10"]
    return dict(zip(keys, res.g2_zero))


def check_lo_anchors() -> CheckResult:
    rec = _Recorder(2, "superimposed-field anchors")
    base = preset("symmetric")
    full = lo_anchors(base.with_rabi_ratio(LO_ANCHOR_DRIVE))
    half = lo_anchors(base.with_rabi_ratio(LO_ANCHOR_DRIVE / 2))
    for k, v in full.items():
        rec.measure(f"g2[{k}]", v)
    rec.require(_rel(full["transmitted"], 182) <= 0.20, "ratio 0 within 20% of 182")
    rec.require(_rel(full["peak"], 600) <= 0.25, "ratio 1/(1+C) within 25% of 600")
    rec.require(full["reflected"] <= 0.01, "ratio 1 at most 0.01")
    rec.require(_rel(full["antiphase"], 0.47) <= 0.15, "ratio -1 within 15% of 0.47")
    for k in ("plus10", "minus10"):
        rec.require(abs(full[k] - 1) <= 0.01, f"{k} within 1% of 1")
    shifts = {k: _rel(half[k], full[k]) for k in full}
    worst = max(shifts, key=shifts.get)
    rec.measure("max_shift_on_halving", shifts[worst])
    rec.measure("max_shift_anchor", worst)
    rec.require(shifts[worst] < 0.05, "anchors shift < 5% when Omega halves")
    return rec.done()


def check_reflection_consistency() -> CheckResult:
    rec = _Recorder(3, "semiclassical reflection")
    p = preset("symmetric").with_rabi_ratio(0.01)
    deltas = np.linspace(-TWO_PI * 60, TWO_PI * 60, 201)
    worst = 0.0
    for d in deltas:
        q = p.with_laser_detuning(d)
        _, rho = solve(q, 3)
        sz = rho.expect(composite_operators(rho.space).sigma_z).real
        r_me = reflectivity_from_rho(q, rho)
        r_cf = reflection_coefficient(q, 0.0, min(sz, 0.0))
        worst = max(worst, abs(r_me - r_cf))
    rec.measure("max|r_ME-r_semiclassical|", worst)
    rec.require(worst <= 1e-3, "detuning grid agreement within 1e-3")

    lossless = preset("symmetric-lossless")
    c = lossless.cooperativity
    target = c / (1 + c)
    cf_gap = rec.measure("closed_form_gap", abs(reflection_coefficient(lossless) - target))
    rec.require(cf_gap <= 1e-6, "closed form equals C/(1+C) within 1e-6")
    q = lossless.with_rabi_ratio(1e-4)
    _, rho = solve(q, 2)
    me_gap = rec.measure("master_equation_gap", abs(reflectivity_from_rho(q, rho) - target))
    rec.require(me_gap <= 1e-6, "master equation equals C/(1+C) within 1e-6 at vanishing drive")
    return rec.done()


def _half_time(taus, values, level=0.5):
    idx = int(np.argmax(values >= level))
    if values[idx] < level:
        return float("nan")
    if idx == 0:
        return float(taus[0])
    t0, t1 = taus[idx - 1], taus[idx]
    v0, v1 = values[idx - 1], values[idx]
    return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))


def check_bloch() -> CheckResult:
    rec = _Recorder(4, "Bloch cross-check")
    base = preset("symmetric")
    worst = 0.0
    for ratio in (0.02, 0.05, 0.1, 0.2, 0.3):
        p = base.with_rabi_ratio(ratio)
        _, rho = solve(p, choose_cutoff(p))
        pe_me = rho.expect(composite_operators(rho.space).sigma_plus
                           @ composite_operators(rho.space).sigma_minus).real
        pe_bloch = bloch_steady(BlochParams.from_system(p)).rho_ee
        worst = max(worst, _rel(pe_me, pe_bloch))
    rec.measure("max_rel_rho_ee_gap", worst)
    rec.require(worst <= 0.10, "rho_ee within 10% for Omega <= 0.3 Gamma")

    device = preset("device").with_rabi_ratio(0.1)
    L, rho = solve(device, choose_cutoff(device))
    taus = np.linspace(0, 1.0, 2001)
    me = g2(L, rho, make_field("reflected", device), taus)
    gamma = TWO_PI * 2.8
    b7 = g2_closed_form(BlochParams(0.1 * gamma, gamma, 0.03 * gamma), taus)
    rec.measure("g2_ME(0)", me.values[0])
    rec.measure("g2_closed(0)", b7.values[0])
    h_me = rec.measure("half_recovery_ME_ns", _half_time(taus, me.values))
    h_cf = rec.measure("half_recovery_closed_ns", _half_time(taus, b7.values))
    rec.require(me.values[0] <= 0.01 and b7.values[0] <= 0.01, "both g2(0) <= 0.01")
    rec.require(_rel(h_me, h_cf) <= 0.20, "half-recovery times within 20%")
    return rec.done()


def check_bloch_identities(seed: int = 2024) -> CheckResult:
    rec = _Recorder(5, "Bloch identities")
    gamma = TWO_PI * 2.8
    worst_ratio = worst_total = 0.0
    for omega in gamma * np.logspace(-3, 2, 60):
        bp = BlochParams(omega, gamma)
        s = bp.saturation
        i_coh, i_incoh = scattering_rates(bp)
        total = gamma * s / (1 + s)
        worst_ratio = max(worst_ratio, abs(i_incoh - s * i_coh) / max(abs(i_incoh), 1e-300))
        worst_total = max(worst_total, abs(i_coh + i_incoh - total) / total)
    rec.measure("max_rel_I_incoh-S*I_coh", worst_ratio)
    rec.measure("max_rel_total_gap", worst_total)
    rec.require(worst_ratio <= 1e-12, "I_incoh = S I_coh to 1e-12")
    rec.require(worst_total <= 1e-12, "I_coh + I_incoh = Gamma S/(1+S) to 1e-12")
    rng = np.random.default_rng(seed)
    worst_g1 = 0.0
    for _ in range(100):
        g = rng.uniform(0.5, 50.0)
        gs = rng.uniform(0.0, 0.45) * g
        omega = rng.uniform(0.0, 1.0) * abs(g - 2 * gs) / 4
        trace = g1_closed_form(BlochParams(omega, g, gs), [0.0])
        worst_g1 = max(worst_g1, abs(trace.values[0] - 1))
    rec.measure("max|g1(0)-1|", worst_g1)
    rec.require(worst_g1 <= 1e-9, "g1(0) = 1 to 1e-9")
    return rec.done()


SPECTRUM_DT = 0.002
MOLLOW_RATIOS = (3.0, 5.0, 8.0)


def sideband_positions(spec, gap: float) -> tuple[float, float]:
    """Frequencies of the density maxima beyond ``+-gap`` from the drive."""
    om, dens = spec.omegas, spec.density
    plus = om > gap
    minus = om < -gap
    return float(om[plus][np.argmax(dens[plus])]), float(om[minus][np.argmax(dens[minus])])


def mollow_spectrum(ratio: float, base: SystemParams | None = None):
    p = (base or preset("symmetric")).with_rabi_ratio(ratio)
    L, rho = solve(p, choose_cutoff(p))
    trace = g1_until_decayed(L, rho, make_field("transmitted", p), dt=SPECTRUM_DT)
    return p, spectrum(trace, omega_max=2 * p.rabi_frequency)


def check_spectrum() -> CheckResult:
    rec = _Recorder(6, "spectrum")
    p = preset("symmetric").with_rabi_ratio(0.1)
    L, rho = solve(p, choose_cutoff(p))
    trace = g1_until_decayed(L, rho, make_field("reflected", p), dt=SPECTRUM_DT)
    spec = spectrum(trace, omega_max=np.pi / (4 * SPECTRUM_DT))
    total = rec.measure("total_weight", spec.total_weight())
    rec.require(abs(total - 1) <= 0.01, "coherent + integrated density within 1% of 1")

    gamma = p.gamma_par_enh
    window = np.abs(spec.omegas) <= 2 * gamma
    closed = spectrum_closed_form(BlochParams.from_system(p), spec.omegas)
    rel_gap = np.abs(spec.density[window] - closed.density[window]) / closed.density[window]
    rec.measure("coherent_weight_ME", spec.coherent_weight)
    rec.measure("coherent_weight_closed", closed.coherent_weight)
    gap = rec.measure("max_rel_gap_|w|<=2Gamma", float(rel_gap.max()))
    rec.require(gap <= 0.03, "closed form vs regression within 3% pointwise")

    omegas, plus, minus, steps = [], [], [], []
    for ratio in MOLLOW_RATIOS:
        q, sp_ = mollow_spectrum(ratio)
        step = sp_.omegas[1] - sp_.omegas[0]
        w_p, w_m = sideband_positions(sp_, q.rabi_frequency / 2)
        omegas.append(q.rabi_frequency)
        plus.append(w_p)
        minus.append(w_m)
        steps.append(step)
        rec.require(abs(sp_.total_weight() - 1) <= 0.01, f"Mollow {ratio:g} total weight")
        rec.require(abs(w_p - q.rabi_frequency) <= step and abs(w_m + q.rabi_frequency) <= step,
                    f"sidebands at +-Omega within one grid step for Omega = {ratio:g} Gamma")
    rec.measure("Omega", omegas)
    rec.measure("sideband_plus", plus)
    rec.measure("sideband_minus", minus)
    rec.measure("grid_step", steps)
    fit = np.polyfit(omegas, plus, 1)
    resid = np.asarray(plus) - np.polyval(fit, omegas)
    r2 = rec.measure("R2", 1 - np.sum(resid**2) / np.sum((plus - np.mean(plus)) ** 2))
    rec.require(r2 >= 0.999, "sideband position linear in Omega (R^2 >= 0.999)")
    return rec.done()


FILTER_DRIVE = 0.14


def check_filter() -> CheckResult:
    rec = _Recorder(7, "filter sweep")
    p = preset("device").with_rabi_ratio(FILTER_DRIVE)
    n = choose_cutoff(p)
    grid = np.linspace(0, 1, 101)
    res = sweep_filter(p, grid, n_max=n)
    diffs = np.diff(res.g2_zero)
    rec.measure("min_step", float(diffs.min()))
    rec.require(bool(np.all(diffs >= 0)), "monotone non-decreasing in T_F")
    at63 = sweep_filter(p, [0.63], n_max=n).g2_zero[0]
    rec.measure("g2(T_F=0.63)", at63)
    rec.require(at63 >= 41, "g2(0) at T_F = 0.63 is at least 41")
    _, rho = solve(p, n)
    refl = g2_zero(make_field("reflected", p), rho)
    trans = g2_zero(make_field("transmitted", p), rho)
    rec.measure("g2(T_F=0)", res.g2_zero[0])
    rec.measure("g2(T_F=1)", res.g2_zero[-1])
    rec.measure("argmax_T_F", float(grid[np.argmax(res.g2_zero)]))
    rec.require(abs(res.g2_zero[0] - refl) <= 1e-9 * max(1, refl), "T_F = 0 equals reflected")
    rec.require(abs(res.g2_zero[-1] - trans) <= 1e-9 * max(1, trans), "T_F = 1 equals transmitted")
    return rec.done()


HOM_DRIVE = 0.13


def _constant_trace(taus, value, kind):
    return CorrelationTrace(taus, np.full(len(taus), value), 1.0, None, None, kind, 1.0)


def check_hom() -> CheckResult:
    rec = _Recorder(8, "two-photon interference")
    taus = np.linspace(0, 10.0, 5001)
    cfg = HomConfig.balanced(2.0, 1.0)
    at0 = np.array([0.0])
    g2p = _constant_trace(taus, 1.0, "g2")
    g1p = _constant_trace(taus, 1.0, "g1")
    cross = g2_cross(g2p, cfg, at0)
    par = g2_parallel(g2p, g1p, cfg, at0)
    rec.measure("poisson_g2_par(0)", par.values[0])
    rec.measure("poisson_V(0)", visibility(cross, par))
    rec.require(par.values[0] == 0.5, "Poissonian g2_par(0) = 0.5 exactly")
    rec.require(abs(visibility(cross, par) - 0.5) <= 1e-12, "Poissonian V(0) = 0.5")

    single = np.where(taus == 0, 0.0, 1.0)
    g2s = CorrelationTrace(taus, single, 1.0, None, None, "g2", 0.0)
    vs = visibility(g2_cross(g2s, cfg, at0), g2_parallel(g2s, g1p.with_values(
        np.where(taus == 0, 1.0, 0.0)), cfg, at0))
    rec.measure("single_photon_V(0)", vs)
    rec.require(abs(vs - 1) <= 1e-12, "ideal single photons give V(0) = 1")

    p = preset("device").with_rabi_ratio(HOM_DRIVE)
    L, rho = solve(p, choose_cutoff(p))
    fld = make_field("reflected", p)
    grid = np.linspace(0, 3.0, 3001)
    tr2 = g2(L, rho, fld, grid)
    tr1 = g1(L, rho, fld, grid)
    v = visibility(g2_cross(tr2, cfg, at0), g2_parallel(tr2, tr1, cfg, at0))
    rec.measure("reflected_V(0)", v)
    rec.require(v >= 0.94, "simulated reflected field V(0) >= 0.94")
    return rec.done()


MCWF_DRIVE = 0.2


def check_oracle(n_traj: int = 10_000, seed: int = 7, workers: int | None = None) -> CheckResult:
    rec = _Recorder(9, "trajectory oracle")
    p = preset("symmetric").with_rabi_ratio(MCWF_DRIVE)
    n = choose_cutoff(p)
    space = CompositeSpace(n)
    _, rho = solve(p, n)
    ops = composite_operators(space)
    cfg = TrajectoryConfig(n_traj, 10.0, 0.01, seed=seed)
    est = run_trajectories(p, space, cfg, workers=workers)
    ref = {
        "n": rho.expect(ops.a.dag() @ ops.a).real,
        "sz": rho.expect(ops.sigma_z).real,
    }
    for name, target in ref.items():
        value, err = est.mean(name).real, est.stderr(name).real
        z = (value - target) / err
        rec.measure(f"z[{name}]", z)
        rec.require(abs(z) <= 3, f"<{name}> within 3 sigma")
    for kind in ("reflected", "transmitted"):
        fld = make_field(kind, p)
        value, err = g2_zero_from_moments(est, fld)
        z = (value - g2_zero(fld, rho)) / err
        rec.measure(f"z[g2 {kind}]", z)
        rec.require(abs(z) <= 3, f"{kind} g2(0) within 3 sigma")
    small = TrajectoryConfig(600, 2.0, 0.01, seed=seed)
    a = run_trajectories(p, space, small, workers=1)
    b = run_trajectories(p, space, small, workers=2)
    same = bool(np.array_equal(a.samples, b.samples) and np.array_equal(a.jump_rates, b.jump_rates))
    rec.measure("bit_identical", same)
    rec.require(same, "seeded runs bit-identical")
    return rec.done()


IRF_SIGMA = 0.020


def check_documented_limits() -> CheckResult:
    rec = _Recorder(10, "model-side bounds and IRF fill")
    p = preset("device").with_rabi_ratio(HOM_DRIVE)
    L, rho = solve(p, choose_cutoff(p))
    taus = np.linspace(0, 1.0, 1001)
    raw = g2(L, rho, make_field("reflected", p), taus)
    smooth = convolve_irf(raw, IRF_SIGMA)
    rec.measure("g2(0)", raw.values[0])
    rec.measure("g2_irf(0)", smooth.values[0])
    rec.require(smooth.values[0] > raw.values[0] and smooth.values[0] > 0,
                "20 ps response fills the dip")
    rec.measure("experimental_values_reproduced", False)
    return rec.done()


CHECKS = {
    1: check_derived_constants,
    2: check_lo_anchors,
    3: check_reflection_consistency,
    4: check_bloch,
    5: check_bloch_identities,
    6: check_spectrum,
    7: check_filter,
    8: check_hom,
    9: check_oracle,
    10: check_documented_limits,
}


def run_all(numbers=None) -> list[CheckResult]:
    return [CHECKS[k]() for k in (numbers or sorted(CHECKS))]
