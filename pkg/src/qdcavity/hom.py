"""Two-photon interference in an asymmetric Mach-Zehnder interferometer.

Input correlation traces are sampled on ``tau >= 0`` and extended to
negative delays by stationarity.  Evaluations at ``tau +- delta_t`` use
linear interpolation.  Beyond the sampled range ``g2`` is taken as 1 and
``g1`` as its last sample, with an :class:`ExtrapolationWarning`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .correlations import CorrelationTrace
from .errors import (
    AlignmentError,
    DegenerateSplitterError,
    InvalidParamsError,
    SolverError,
    UndefinedVisibilityError,
)

SPLIT_ATOL = 1e-12
NEG_TOL = 1e-9


class ExtrapolationWarning(UserWarning):
    """A correlation trace was evaluated beyond its sampled delay range."""


@dataclass(frozen=True)
class HomConfig:
    """Intensity coefficients of the two splitters, path delay and mode overlap.

    ``delta_t`` is in ns and ``V0`` is the wave-packet overlap on the second
    splitter.
    """

    R_A: float
    T_A: float
    R_B: float
    T_B: float
    delta_t: float
    V0: float = 1.0

    def __post_init__(self):
        for name in ("R_A", "T_A", "R_B", "T_B", "V0"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidParamsError(f"{name} must lie in [0, 1]")
        if abs(self.R_A + self.T_A - 1) > SPLIT_ATOL or abs(self.R_B + self.T_B - 1) > SPLIT_ATOL:
            raise InvalidParamsError("splitter coefficients must satisfy R + T = 1")
        if self.delta_t < 0:
            raise InvalidParamsError("delta_t must be >= 0")

    @classmethod
    def balanced(cls, delta_t: float, V0: float = 1.0) -> "HomConfig":
        return cls(0.5, 0.5, 0.5, 0.5, delta_t, V0)

    @property
    def weights(self) -> tuple[float, float, float, float]:
        """Coefficients of ``g2(tau)``, ``g2(tau + dt)``, ``g2(tau - dt)`` and
        ``V0 |g1(tau)|^2`` before normalization."""
        ra, ta, rb, tb = self.R_A, self.T_A, self.R_B, self.T_B
        return (
            (ra**2 + ta**2) * rb * tb,
            rb**2 * ra * ta,
            tb**2 * ra * ta,
            2 * ra * ta * rb * tb,
        )

    @property
    def normalization(self) -> float:
        ra, ta, rb, tb = self.R_A, self.T_A, self.R_B, self.T_B
        return (ra**2 + ta**2) * rb * tb + (rb**2 + tb**2) * ra * ta


def _g2_at(trace: CorrelationTrace, taus: np.ndarray) -> np.ndarray:
    out = trace.at(taus)
    beyond = np.abs(taus) > trace.taus[-1]
    if np.any(beyond):
        warnings.warn(
            f"g2 evaluated beyond tau_max = {trace.taus[-1]:g} ns; using 1 there",
            ExtrapolationWarning, stacklevel=3,
        )
        out = np.where(beyond, 1.0, out)
    return out


def _g1_abs2_at(trace: CorrelationTrace, taus: np.ndarray) -> np.ndarray:
    if np.any(np.abs(taus) > trace.taus[-1]):
        warnings.warn(
            f"g1 evaluated beyond tau_max = {trace.taus[-1]:g} ns; holding the last value",
            ExtrapolationWarning, stacklevel=3,
        )
    return np.abs(trace.at(taus)) ** 2


def _cross_values(g2: CorrelationTrace, cfg: HomConfig, taus: np.ndarray) -> np.ndarray:
    n = cfg.normalization
    if n == 0:
        raise DegenerateSplitterError("splitter normalization vanishes")
    w0, wp, wm, _ = cfg.weights
    return (w0 * _g2_at(g2, taus) + wp * _g2_at(g2, taus + cfg.delta_t)
            + wm * _g2_at(g2, taus - cfg.delta_t)) / n


def _trace(template: CorrelationTrace, taus, values, **meta) -> CorrelationTrace:
    return CorrelationTrace(taus, values, template.flux, template.field, template.params,
                            "g2", template.mean, {**template.meta, **meta})


def g2_cross(g2: CorrelationTrace, cfg: HomConfig, taus) -> CorrelationTrace:
    """Cross-polarized output correlation (no interference)."""
    if g2.kind != "g2":
        raise ValueError("g2_cross needs a g2 trace")
    taus = np.asarray(taus, dtype=float)
    return _trace(g2, taus, _cross_values(g2, cfg, taus), hom="cross")


def g2_parallel(g2: CorrelationTrace, g1: CorrelationTrace, cfg: HomConfig, taus
                ) -> CorrelationTrace:
    """Co-polarized output correlation including the ``V0 |g1|^2`` interference term."""
    if g2.kind != "g2" or g1.kind != "g1":
        raise ValueError("g2_parallel needs a g2 and a g1 trace")
    if g1.taus.shape != g2.taus.shape or not np.array_equal(g1.taus, g2.taus):
        raise AlignmentError("g1 and g2 traces must share the same delay grid")
    taus = np.asarray(taus, dtype=float)
    _, _, _, wi = cfg.weights
    values = _cross_values(g2, cfg, taus) - wi * cfg.V0 * _g1_abs2_at(g1, taus) / cfg.normalization
    if np.any(values < -NEG_TOL):
        raise SolverError(f"parallel correlation negative down to {values.min():.3e}")
    return _trace(g2, taus, np.clip(values, 0.0, None), hom="parallel")


def visibility(cross: CorrelationTrace, parallel: CorrelationTrace, tau: float = 0.0) -> float:
    """Two-photon interference visibility ``(g2_cross - g2_par) / g2_cross`` at ``tau``."""
    c = float(np.interp(tau, cross.taus, cross.values))
    p = float(np.interp(tau, parallel.taus, parallel.values))
    if c <= 0:
        raise UndefinedVisibilityError(f"cross correlation is {c:g} at tau = {tau:g} ns")
    return (c - p) / c


def g1_mixture(i_coh: float, i_incoh: float, g1_laser: CorrelationTrace,
               g1_incoherent: CorrelationTrace) -> CorrelationTrace:
    """Intensity-weighted ``g1`` of a coherent plus an incoherent component."""
    if i_coh < 0 or i_incoh < 0:
        raise InvalidParamsError("intensities must be >= 0")
    total = i_coh + i_incoh
    if total == 0:
        raise InvalidParamsError("at least one intensity must be positive")
    if not np.array_equal(g1_laser.taus, g1_incoherent.taus):
        raise AlignmentError("g1 traces must share the same delay grid")
    values = (i_coh * g1_laser.values + i_incoh * g1_incoherent.values) / total
    return CorrelationTrace(g1_laser.taus, values, total, None, None, "g1", np.sqrt(i_coh),
                            {"mixture": (i_coh, i_incoh)})
