"""Detection-field variants and the interference sweeps built on them.

Field kinds, with ``O = offset + weight * a``:

=============  ==============================  ====================
kind           offset                          weight
=============  ==============================  ====================
SL             ``E_LO``                        ``sqrt(kappa2)``
reflected      ``a_in``                        ``sqrt(kappa1)``
transmitted    0                               ``sqrt(kappa2)``
filtered       ``sqrt(1 - T_F) * a_in``        ``sqrt(kappa1)``
=============  ==============================  ====================

A real positive ``E_LO`` is in phase with the drive and a negative one is
in antiphase.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .analytic import reflectivity_from_rho, transmission_from_rho
from .correlations import DetectionField, flux, g2_zero
from .errors import InvalidFilterError, InvalidParamsError, UndefinedNormalizationError
from .lindblad import choose_cutoff, solve
from .params import SystemParams

FIELD_KINDS = ("SL", "reflected", "transmitted", "filtered")
LOW_DRIVE_RATIO = 0.1


def make_field(kind: str, p: SystemParams, extra: float | None = None) -> DetectionField:
    """Detection field of the given kind.

    ``extra`` is ``E_LO`` in sqrt(photons/ns) for ``"SL"`` and the filter
    transmission ``T_F`` for ``"filtered"``.
    """
    if kind == "SL":
        if extra is None:
            raise InvalidParamsError("SL field needs E_LO")
        return DetectionField(extra, math.sqrt(p.kappa2), "SL")
    if kind == "reflected":
        return DetectionField(p.a_in, math.sqrt(p.kappa1), "reflected")
    if kind == "transmitted":
        return DetectionField(0.0, math.sqrt(p.kappa2), "transmitted")
    if kind == "filtered":
        if extra is None or not 0 <= extra <= 1:
            raise InvalidFilterError(f"filter transmission must lie in [0, 1], got {extra!r}")
        return DetectionField(math.sqrt(1 - extra) * p.a_in, math.sqrt(p.kappa1), "filtered")
    raise InvalidParamsError(f"unknown field kind {kind!r}; choose from {FIELD_KINDS}")


@dataclass(frozen=True, eq=False)
class SweepResult:
    """``g2(0)`` and flux along one swept axis.

    ``reflectivity`` and ``transmissivity`` are intensity ratios ``|r|^2``
    and ``|t|^2`` and are present for sweeps that change the drive point.
    """

    axis: np.ndarray
    axis_name: str
    axis_unit: str
    g2_zero: np.ndarray
    flux: np.ndarray
    params: SystemParams
    kind: str
    reflectivity: np.ndarray | None = None
    transmissivity: np.ndarray | None = None
    cutoffs: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        n = len(self.axis)
        for name in ("axis", "g2_zero", "flux", "reflectivity", "transmissivity", "cutoffs"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have the axis length {n}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.g2_zero < -1e-9):
            raise ValueError("g2(0) must be non-negative")

    def columns(self) -> dict[str, np.ndarray]:
        cols = {self.axis_name: self.axis, "g2_zero": self.g2_zero, "flux": self.flux}
        if self.reflectivity is not None:
            cols["reflectivity"] = self.reflectivity
        if self.transmissivity is not None:
            cols["transmissivity"] = self.transmissivity
        if self.cutoffs is not None:
            cols["n_max"] = self.cutoffs
        return cols


def _map(fn, items, workers: int | None):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _warn_drive(p: SystemParams):
    if p.rabi_ratio > LOW_DRIVE_RATIO:
        warnings.warn(
            f"Omega/Gamma = {p.rabi_ratio:.3g} is outside the weak-drive regime", stacklevel=3
        )


def _solve(p: SystemParams, n_max: int | None):
    n = choose_cutoff(p) if n_max is None else n_max
    return n, solve(p, n)[1]


def sweep_lo(p: SystemParams, ratios, n_max: int | None = None) -> SweepResult:
    """``g2(0)`` of the superimposed field versus ``E_LO / a_in``."""
    _warn_drive(p)
    if p.a_in <= 0:
        raise InvalidParamsError("LO sweep needs a driven system (a_in > 0)")
    ratios = np.asarray(ratios, dtype=float)
    n, rho = _solve(p, n_max)
    fields = [make_field("SL", p, r * p.a_in) for r in ratios]
    return SweepResult(
        ratios, "lo_ratio", "E_LO/a_in",
        np.array([g2_zero(f, rho) for f in fields]),
        np.array([flux(f, rho) for f in fields]),
        p, "SL", cutoffs=np.full(len(ratios), n),
    )


def _drive_point(p: SystemParams, kind: str, n_max: int | None, extra=None):
    n, rho = _solve(p, n_max)
    fld = make_field(kind, p, extra)
    try:
        g2 = g2_zero(fld, rho)
    except UndefinedNormalizationError:
        g2 = float("nan")
    if p.a_in > 0:
        r = abs(reflectivity_from_rho(p, rho)) ** 2
        t = abs(transmission_from_rho(p, rho)) ** 2
    else:
        r = t = float("nan")
    return g2, flux(fld, rho), r, t, n


def _collect(axis, name, unit, points, p, kind, **meta) -> SweepResult:
    arr = np.array(points, dtype=float).reshape(len(axis), 5)
    return SweepResult(
        np.asarray(axis, dtype=float), name, unit, arr[:, 0], arr[:, 1], p, kind,
        reflectivity=arr[:, 2], transmissivity=arr[:, 3], cutoffs=arr[:, 4], meta=meta,
    )


def sweep_detuning(p: SystemParams, deltas, kind: str = "reflected", n_max: int | None = None,
                   extra: float | None = None, workers: int | None = None) -> SweepResult:
    """``g2(0)``, flux and channel intensities versus laser detuning.

    ``deltas`` are ``omega - omega_ref`` in rad/ns; cavity and emitter
    detunings move together.
    """
    deltas = np.asarray(deltas, dtype=float)
    pts = _map(lambda d: _drive_point(p.with_laser_detuning(d), kind, n_max, extra),
               list(deltas), workers)
    return _collect(deltas, "detuning", "rad/ns", pts, p, kind)


def sweep_power(p: SystemParams, omega_ratios, kind: str = "reflected",
                n_max: int | None = None, extra: float | None = None,
                workers: int | None = None) -> SweepResult:
    """``g2(0)``, flux and channel intensities versus ``Omega / Gamma_par_enh``.

    The Fock cutoff is chosen per point unless ``n_max`` is given.
    """
    ratios = np.asarray(omega_ratios, dtype=float)
    pts = _map(lambda r: _drive_point(p.with_rabi_ratio(r), kind, n_max, extra),
               list(ratios), workers)
    return _collect(ratios, "rabi_ratio", "Omega/Gamma_par_enh", pts, p, kind)


def sweep_filter(p: SystemParams, tf_grid, n_max: int | None = None) -> SweepResult:
    """``g2(0)`` of the filtered reflected field versus filter transmission ``T_F``."""
    tf = np.asarray(tf_grid, dtype=float)
    if np.any((tf < 0) | (tf > 1)):
        raise InvalidFilterError("filter transmissions must lie in [0, 1]")
    n, rho = _solve(p, n_max)
    fields = [make_field("filtered", p, x) for x in tf]
    return SweepResult(
        tf, "filter_transmission", "T_F",
        np.array([g2_zero(f, rho) for f in fields]),
        np.array([flux(f, rho) for f in fields]),
        p, "filtered", cutoffs=np.full(len(tf), n),
    )


@dataclass(frozen=True)
class TwoPhotonToyState:
    """Two-photon truncated picture of the superimposed field.

    ``alpha**2 = E_LO**2 / Gamma`` is the laser amplitude and
    ``xi = a_in**2 / Gamma`` the two-photon amplitude of the incoherent
    cavity output, both dimensionless.
    """

    alpha: float
    xi: float

    def __post_init__(self):
        if self.alpha < 0 or self.xi < 0:
            raise InvalidParamsError("alpha and xi must be >= 0")

    @classmethod
    def from_drive(cls, e_lo: float, a_in: float, gamma: float) -> "TwoPhotonToyState":
        return cls(abs(e_lo) / math.sqrt(gamma), a_in**2 / gamma)

    @property
    def outside_weak_regime(self) -> bool:
        """True when ``alpha^2 + xi > 0.2`` and the truncation is questionable."""
        return self.alpha**2 + self.xi > 0.2

    def amplitudes(self) -> np.ndarray:
        """Unnormalized ``(c0, c1, c2)``."""
        return np.array([1.0, self.alpha, (self.alpha**2 - self.xi) / math.sqrt(2)])


def toy_g2_zero(t: TwoPhotonToyState) -> float:
    """``g2(0)`` of the normalized state ``c0|0> + c1|1> + c2|2>``."""
    c0, c1, c2 = t.amplitudes()
    p1, p2 = c1**2, c2**2
    if p1 == 0 and p2 == 0:
        raise UndefinedNormalizationError("toy state carries no photons")
    norm = c0**2 + p1 + p2
    return 2 * p2 * norm / (p1 + 2 * p2) ** 2
