"""Closed-form results used as fast paths and independent cross-checks.

Two families live here:

* the semiclassical reflection and transmission coefficients of the
  emitter-cavity system, obtained by factorizing emitter-field moments;
* the optical Bloch model of an emitter with cavity-enhanced decay rate
  ``Gamma_par_enh`` and pure dephasing, driven at Rabi frequency ``Omega``.

Bloch closed forms for ``g1``, the spectrum and ``g2`` are resonant
(``delta = 0``) and valid for ``Omega <= |Gamma - 2 gamma_star| / 4`` where
``lam = sqrt((Gamma - 2 gamma_star)^2 / 16 - Omega^2)`` is real.  Near
``lam = 0`` the paired ``+-lam`` terms are evaluated by their series
expansion to avoid a removable ``0/0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .correlations import CorrelationTrace, SpectrumTrace
from .errors import DomainError, InvalidParamsError, PropagationError, UndefinedRatioError
from .hilbert import composite_operators
from .lindblad import DensityMatrix
from .params import SystemParams

LAMBDA_SERIES_RTOL = 1e-6
BLOCH_STATE_ATOL = 1e-9


# ---------------------------------------------------------------------------
# semiclassical reflection / transmission


def _rt_denominator(p: SystemParams, laser_detuning, sigma_z_avg):
    dq = 1j * (p.delta_qd - laser_detuning) + p.gamma_perp
    dc = 1j * (p.delta_c - laser_detuning) + p.kappa / 2
    return dq, dq * dc - p.g**2 * sigma_z_avg


def _check_sigma_z(sigma_z_avg):
    sz = np.asarray(sigma_z_avg, dtype=float)
    if np.any(sz < -1 - 1e-12) or np.any(sz > 1e-12):
        raise InvalidParamsError("<sigma_z> must lie in [-1, 0]")


def reflection_coefficient(p: SystemParams, laser_detuning=0.0, sigma_z_avg=-1.0):
    """Semiclassical amplitude reflection coefficient.

    Parameters
    ----------
    p : SystemParams
        Detunings in ``p`` set the reference frame.
    laser_detuning : float or array_like
        Extra shift ``omega - omega_ref`` of the laser in rad/ns; it moves
        both the cavity and the emitter detuning.
    sigma_z_avg : float or array_like
        Emitter inversion closure, ``-1`` for the weak-drive limit.
    """
    _check_sigma_z(sigma_z_avg)
    dq, den = _rt_denominator(p, np.asarray(laser_detuning, dtype=float), sigma_z_avg)
    return 1 - p.kappa1 * dq / den


def transmission_coefficient(p: SystemParams, laser_detuning=0.0, sigma_z_avg=-1.0):
    """Semiclassical amplitude transmission coefficient; see :func:`reflection_coefficient`."""
    _check_sigma_z(sigma_z_avg)
    dq, den = _rt_denominator(p, np.asarray(laser_detuning, dtype=float), sigma_z_avg)
    return -np.sqrt(p.kappa1 * p.kappa2) * dq / den


def _cavity_mean_ratio(p: SystemParams, rho: DensityMatrix) -> complex:
    if p.a_in == 0:
        raise UndefinedRatioError("reflectivity is undefined without a drive (a_in = 0)")
    return rho.expect(composite_operators(rho.space).a) / p.a_in


def reflectivity_from_rho(p: SystemParams, rho: DensityMatrix) -> complex:
    """Amplitude reflection ``1 + sqrt(kappa1) <a> / a_in`` from a steady state."""
    return 1 + np.sqrt(p.kappa1) * _cavity_mean_ratio(p, rho)


def transmission_from_rho(p: SystemParams, rho: DensityMatrix) -> complex:
    """Amplitude transmission ``sqrt(kappa2) <a> / a_in`` from a steady state."""
    return np.sqrt(p.kappa2) * _cavity_mean_ratio(p, rho)


# ---------------------------------------------------------------------------
# Bloch model


@dataclass(frozen=True)
class BlochParams:
    """Resonance-fluorescence parameters of the dressed emitter (rad/ns)."""

    omega_rabi: float
    gamma_par_enh: float
    gamma_star: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.gamma_par_enh > 0:
            raise InvalidParamsError("gamma_par_enh must be > 0")
        if self.omega_rabi < 0 or self.gamma_star < 0:
            raise InvalidParamsError("omega_rabi and gamma_star must be >= 0")

    @classmethod
    def from_system(cls, p: SystemParams) -> "BlochParams":
        return cls(p.rabi_frequency, p.gamma_par_enh, p.gamma_star, p.delta_qd)

    @property
    def gamma2(self) -> float:
        """Coherence decay rate ``Gamma/2 + gamma_star``."""
        return self.gamma_par_enh / 2 + self.gamma_star

    @property
    def saturation(self) -> float:
        g = self.gamma_par_enh
        return (self.omega_rabi**2 * (0.5 + self.gamma_star / g)
                / (self.detuning**2 + self.gamma2**2))


@dataclass(frozen=True)
class BlochState:
    rho_gg: float
    rho_ee: float
    rho_ge: complex
    rho_eg: complex

    def __post_init__(self):
        for name in ("rho_gg", "rho_ee"):
            value = complex(getattr(self, name))
            if abs(value.imag) > BLOCH_STATE_ATOL:
                raise ValueError(f"{name} must be real")
            object.__setattr__(self, name, value.real)
        object.__setattr__(self, "rho_ge", complex(self.rho_ge))
        object.__setattr__(self, "rho_eg", complex(self.rho_eg))
        if abs(self.rho_gg + self.rho_ee - 1) > BLOCH_STATE_ATOL:
            raise ValueError("populations must sum to 1")
        if abs(self.rho_eg - self.rho_ge.conjugate()) > BLOCH_STATE_ATOL:
            raise ValueError("coherences must be complex conjugates")
        if abs(self.rho_ge) ** 2 > self.rho_gg * self.rho_ee + 1e-12:
            raise ValueError("coherence exceeds the positivity bound")

    @classmethod
    def ground(cls) -> "BlochState":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def excited(cls) -> "BlochState":
        return cls(0.0, 1.0, 0.0, 0.0)

    def vector(self) -> np.ndarray:
        return np.array([self.rho_gg, self.rho_ee, self.rho_ge, self.rho_eg], dtype=complex)


def bloch_matrix(p: BlochParams) -> np.ndarray:
    """Generator of the Bloch equations on ``(rho_gg, rho_ee, rho_ge, rho_eg)``."""
    w = p.omega_rabi / 2
    g = p.gamma_par_enh
    d = p.detuning
    return np.array([
        [0, g, 1j * w, -1j * w],
        [0, -g, -1j * w, 1j * w],
        [1j * w, -1j * w, 1j * d - p.gamma2, 0],
        [-1j * w, 1j * w, 0, -1j * d - p.gamma2],
    ], dtype=complex)


def bloch_steady(p: BlochParams) -> BlochState:
    """Stationary solution with ``rho_ee = (S/2)/(1+S)``."""
    s = p.saturation
    rho_ee = 0.5 * s / (1 + s)
    rho_ge = 1j * (p.omega_rabi / 2) * (2 * rho_ee - 1) / (1j * p.detuning - p.gamma2)
    return BlochState(1 - rho_ee, rho_ee, rho_ge, np.conj(rho_ge))


def scattering_rates(p: BlochParams) -> tuple[float, float]:
    """Coherent and incoherent scattering rates ``(I_coh, I_incoh)`` in photons/ns."""
    g = p.gamma_par_enh
    gs = p.gamma_star
    s = p.saturation
    common = s / ((g + 2 * gs) * (1 + s) ** 2)
    return g * g * common, g * (g * s + 2 * gs * (1 + s)) * common


def bloch_integrate(p: BlochParams, s0: BlochState, times) -> list[BlochState]:
    """Integrate the Bloch equations from ``s0`` onto the grid ``times``."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be an ascending grid starting at t >= 0")
    m = bloch_matrix(p)
    if times[-1] == 0:
        return [s0 for _ in times]
    sol = solve_ivp(lambda _t, y: m @ y, (0.0, float(times[-1])), s0.vector(),
                    method="DOP853", t_eval=times, rtol=1e-11, atol=1e-13)
    if sol.status != 0:
        raise PropagationError(f"Bloch integration failed: {sol.message}",
                               t_reached=float(sol.t[-1]) if len(sol.t) else 0.0)
    out = []
    for y in sol.y.T:
        # symmetrize away integrator round-off before validation
        ee = y[1].real
        ge = 0.5 * (y[2] + np.conj(y[3]))
        out.append(BlochState(1 - ee, ee, ge, np.conj(ge)))
    return out


def _resonant_lambda(p: BlochParams) -> float:
    if p.detuning != 0:
        raise DomainError("closed-form coherence functions are resonant only (detuning = 0)")
    diff = abs(p.gamma_par_enh - 2 * p.gamma_star) / 4
    if p.omega_rabi > diff:
        raise DomainError(
            f"Omega = {p.omega_rabi:.4g} exceeds |Gamma - 2 gamma_star|/4 = {diff:.4g}; "
            "only the real-lambda branch is available"
        )
    return float(np.sqrt(max(diff**2 - p.omega_rabi**2, 0.0)))


def _rates(p: BlochParams):
    g = p.gamma_par_enh
    gs = p.gamma_star
    a = g / 2 - gs
    c = 0.75 * g + gs / 2
    coherent = (g / 2) / (g / 2 + gs + p.omega_rabi**2 / g)
    return a, c, coherent


def _closed_trace(p: BlochParams, taus, values, kind) -> CorrelationTrace:
    i_coh, i_incoh = scattering_rates(p)
    total = i_coh + i_incoh
    return CorrelationTrace(
        taus, values, total if total > 0 else 1.0, None, None, kind,
        np.sqrt(i_coh) if total > 0 else 1.0, {"source": "bloch", "bloch": p},
    )


def g1_closed_form(p: BlochParams, taus) -> CorrelationTrace:
    """Resonant first-order coherence of the Bloch model in the rotating frame."""
    lam = _resonant_lambda(p)
    a, c, coherent = _rates(p)
    taus = np.asarray(taus, dtype=float)
    b = 2 * c
    vals = coherent + 0.5 * np.exp(-p.gamma2 * taus)
    if lam < LAMBDA_SERIES_RTOL * p.gamma_par_enh:
        h1 = ((4 * a + taus * a * a) * b + 2 * a * a) / b**2
        vals = vals - np.exp(-c * taus) * 2 * h1 / 8
    else:
        for s in (lam, -lam):
            amp = -(a + 2 * s) ** 2 / (8 * s * (b - 2 * s))
            vals = vals + amp * np.exp(-(c - s) * taus)
    return _closed_trace(p, taus, vals.astype(complex), "g1")


def spectrum_closed_form(p: BlochParams, omegas) -> SpectrumTrace:
    """Resonant spectrum: coherent weight plus a Lorentzian combination.

    The density is per rad/ns and integrates to ``1 - coherent_weight``.
    """
    lam = _resonant_lambda(p)
    a, c, coherent = _rates(p)
    w = np.asarray(omegas, dtype=float)
    dens = (p.gamma2 / (2 * np.pi)) / (w**2 + p.gamma2**2)
    if lam < LAMBDA_SERIES_RTOL * p.gamma_par_enh:
        d0 = w**2 + c**2
        k1 = (4 * a * d0 + 2 * a * a * c) / d0**2
        dens = dens - 2 * k1 / (16 * np.pi)
    else:
        for s in (lam, -lam):
            dens = dens - (a + 2 * s) ** 2 / (16 * np.pi * s * (w**2 + (c - s) ** 2))
    return SpectrumTrace(w, dens, coherent, {"source": "bloch"})


def g2_closed_form(p: BlochParams, taus) -> CorrelationTrace:
    """Resonant second-order coherence of the Bloch model; ``g2(0) = 0``."""
    lam = _resonant_lambda(p)
    _, c, _ = _rates(p)
    taus = np.asarray(taus, dtype=float)
    if lam < LAMBDA_SERIES_RTOL * p.gamma_par_enh:
        bracket_decay = (1 + (lam * taus) ** 2 / 2 + c * taus * (1 + (lam * taus) ** 2 / 6)) \
            * np.exp(-c * taus)
    else:
        # cosh and sinh expanded into decaying exponentials to avoid overflow
        up = np.exp(-(c - lam) * taus)
        down = np.exp(-(c + lam) * taus)
        bracket_decay = 0.5 * (up + down) + (c / lam) * 0.5 * (up - down)
    return _closed_trace(p, taus, 1 - bracket_decay, "g2")
