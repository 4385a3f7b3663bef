"""Physical parameters of the driven emitter-cavity system and named presets.

Units
-----
Rates and detunings are angular frequencies in rad/ns, so a value quoted as
``nu/2pi = 4.7 GHz`` is stored as ``2*pi*4.7``.  Times are in ns and the
drive amplitude ``a_in`` is in sqrt(photons/ns).  :meth:`SystemParams.from_ghz`
and :meth:`SystemParams.to_ghz` convert to and from the ``nu/2pi`` form used
in configuration files.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import InvalidParamsError

TWO_PI = 2.0 * math.pi

RATE_FIELDS = ("g", "kappa1", "kappa2", "kappa_s", "gamma_par", "gamma_star")
FREQUENCY_FIELDS = RATE_FIELDS + ("delta_c", "delta_qd")


@dataclass(frozen=True)
class SystemParams:
    """Coupling, loss rates, detunings and drive of the emitter-cavity system.

    ``delta_c = omega_c - omega`` and ``delta_qd = omega_QD - omega`` are the
    cavity and emitter detunings from the drive.
    """

    g: float
    kappa1: float
    kappa2: float
    kappa_s: float
    gamma_par: float
    gamma_star: float = 0.0
    delta_c: float = 0.0
    delta_qd: float = 0.0
    a_in: float = 0.0

    def __post_init__(self):
        for name in FREQUENCY_FIELDS + ("a_in",):
            value = getattr(self, name)
            if isinstance(value, complex) or not math.isfinite(float(value)):
                raise InvalidParamsError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in RATE_FIELDS:
            if getattr(self, name) < 0:
                raise InvalidParamsError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.a_in < 0:
            raise InvalidParamsError("a_in is real and non-negative by convention")
        if self.kappa <= 0:
            raise InvalidParamsError("total cavity decay kappa1 + kappa2 + kappa_s must be > 0")

    @classmethod
    def from_ghz(cls, **kwargs) -> "SystemParams":
        """Build from ``nu/2pi`` values in GHz; ``a_in`` is passed through."""
        converted = {}
        for key, value in kwargs.items():
            converted[key] = TWO_PI * value if key in FREQUENCY_FIELDS else value
        return cls(**converted)

    def to_ghz(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = value / TWO_PI if f.name in FREQUENCY_FIELDS else value
        return out

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def kappa(self) -> float:
        return self.kappa1 + self.kappa2 + self.kappa_s

    @property
    def gamma_perp(self) -> float:
        """Emitter polarization decay rate, gamma_par/2 + gamma_star."""
        return self.gamma_par / 2 + self.gamma_star

    @property
    def cooperativity(self) -> float:
        return 2 * self.g**2 / (self.kappa * self.gamma_perp)

    @property
    def critical_photon_number(self) -> float:
        return self.gamma_perp * self.gamma_par / (4 * self.g**2)

    @property
    def purcell_factor(self) -> float:
        return 4 * self.g**2 / (self.kappa * self.gamma_par)

    @property
    def gamma_par_enh(self) -> float:
        """Cavity-enhanced emitter decay rate (F_P + 1) * gamma_par."""
        return (self.purcell_factor + 1) * self.gamma_par

    # Drive convention: the Rabi frequency is 2g times the empty-cavity
    # intracavity amplitude 2 sqrt(kappa1) a_in / kappa.
    @property
    def rabi_frequency(self) -> float:
        return 4 * self.g * math.sqrt(self.kappa1) * self.a_in / self.kappa

    @property
    def rabi_ratio(self) -> float:
        return self.rabi_frequency / self.gamma_par_enh

    def drive_for_rabi(self, omega: float) -> float:
        if self.g == 0 or self.kappa1 == 0:
            raise InvalidParamsError("Rabi frequency is undefined for g = 0 or kappa1 = 0")
        return omega * self.kappa / (4 * self.g * math.sqrt(self.kappa1))

    def with_rabi_ratio(self, ratio: float) -> "SystemParams":
        """Copy with ``a_in`` set so that Omega / Gamma_par_enh equals ``ratio``."""
        return self.replace(a_in=self.drive_for_rabi(ratio * self.gamma_par_enh))

    def with_laser_detuning(self, delta: float) -> "SystemParams":
        """Copy with the drive shifted by ``delta = omega - omega_0``.

        Both the cavity and the emitter detunings move together.
        """
        return self.replace(delta_c=self.delta_c - delta, delta_qd=self.delta_qd - delta)


def _split_preset(kappa_ghz, k1_frac, k2_frac, ks_frac, gamma_perp_ghz=0.18, gamma_par_ghz=0.35):
    kappa = TWO_PI * kappa_ghz
    gamma_par = TWO_PI * gamma_par_ghz
    return SystemParams(
        g=TWO_PI * 4.7,
        kappa1=k1_frac * kappa,
        kappa2=k2_frac * kappa,
        kappa_s=ks_frac * kappa,
        gamma_par=gamma_par,
        gamma_star=TWO_PI * gamma_perp_ghz - gamma_par / 2,
    )


PRESETS = {
    # symmetric double-sided cavity, side leakage 0.08 kappa
    "symmetric": lambda: _split_preset(36.8, 0.46, 0.46, 0.08),
    # asymmetric mirrors with kappa1 = kappa2 + kappa_s
    "device": lambda: _split_preset(36.8, 0.50, 0.42, 0.08),
    # idealized symmetric cavity without side leakage
    "symmetric-lossless": lambda: _split_preset(36.8, 0.50, 0.50, 0.0),
}


def preset(name: str) -> SystemParams:
    """Undriven parameter set by name; see :data:`PRESETS`."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise InvalidParamsError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
