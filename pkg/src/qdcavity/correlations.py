"""Two-time correlation functions and spectra of detection fields.

A detection field is ``O = c + s a`` with a complex offset ``c`` (a laser
amplitude) and a complex weight ``s`` on the cavity mode.  Correlations use
the quantum regression theorem, propagating ``O rho`` or ``O rho O^dag``
under the Lindblad generator instead of forming ``exp(L tau)``:

``g1(tau) = Tr[O^dag e^{L tau}(O rho)] / <O^dag O>``

``g2(tau) = Tr[O^dag O e^{L tau}(O rho O^dag)] / <O^dag O>^2``

Negative delays follow from stationarity, ``g2(-tau) = g2(tau)`` and
``g1(-tau) = g1(tau)^*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.sparse.linalg import expm_multiply

from .errors import (
    InvalidParamsError,
    SolverError,
    UndefinedNormalizationError,
    WindowError,
)
from .hilbert import CompositeSpace, composite_operators
from .lindblad import DensityMatrix, Liouvillian, propagate_vector, vec
from .params import SystemParams

FLUX_FLOOR = 1e-14
G2_NEG_TOL = 1e-9
G2_IMAG_TOL = 1e-9
DECAY_TOL = 1e-6
DENSITY_NEG_RTOL = 1e-6
ROUNDOFF_ATOL = 1e-13


@dataclass(frozen=True)
class DetectionField:
    """Field operator ``O = offset + cavity_weight * a``.

    ``offset`` is in sqrt(photons/ns) and ``cavity_weight`` in sqrt(rad/ns),
    so that ``<O^dag O>`` is a photon flux in photons/ns.
    """

    offset: complex
    cavity_weight: complex
    label: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "offset", complex(self.offset))
        object.__setattr__(self, "cavity_weight", complex(self.cavity_weight))
        if self.offset == 0 and self.cavity_weight == 0:
            raise InvalidParamsError("detection field needs a nonzero offset or cavity weight")

    def operator(self, space: CompositeSpace) -> np.ndarray:
        ops = composite_operators(space)
        return self.offset * ops.identity.entries + self.cavity_weight * ops.a.entries


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    """Normalized correlation samples on an ascending delay grid.

    Attributes
    ----------
    taus : ndarray
        Delays in ns.
    values : ndarray
        Complex ``g1`` or real ``g2`` samples.
    flux : float
        ``<O^dag O>`` in photons/ns.
    mean : complex
        ``<O>``, used to split off the coherent part.
    kind : str
        ``"g1"`` or ``"g2"``.
    """

    taus: np.ndarray
    values: np.ndarray
    flux: float
    field: DetectionField | None
    params: SystemParams | None
    kind: str
    mean: complex = 0.0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=complex if self.kind == "g1" else float)
        if taus.ndim != 1 or values.shape != taus.shape:
            raise ValueError("taus and values must be 1-D arrays of equal length")
        if len(taus) > 1 and np.any(np.diff(taus) <= 0):
            raise ValueError("taus must be strictly ascending")
        if self.kind not in ("g1", "g2"):
            raise ValueError(f"kind must be 'g1' or 'g2', got {self.kind!r}")
        if self.kind == "g2" and np.any(values < -G2_NEG_TOL):
            raise SolverError(f"g2 has negative samples down to {values.min():.3e}")
        taus.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)

    @property
    def coherent_fraction(self) -> float:
        """``|<O>|^2 / <O^dag O>``, the long-delay limit of ``g1``."""
        return abs(self.mean) ** 2 / self.flux

    def with_values(self, values, **meta) -> "CorrelationTrace":
        return CorrelationTrace(
            self.taus, values, self.flux, self.field, self.params, self.kind, self.mean,
            {**self.meta, **meta},
        )

    def at(self, taus) -> np.ndarray:
        """Linear interpolation at arbitrary real delays using stationarity."""
        taus = np.asarray(taus, dtype=float)
        mag = np.abs(taus)
        if self.kind == "g2":
            return np.interp(mag, self.taus, self.values)
        re = np.interp(mag, self.taus, self.values.real)
        im = np.interp(mag, self.taus, self.values.imag)
        return re + 1j * np.where(taus < 0, -im, im)


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    """Continuous spectral density plus a separately reported coherent weight.

    ``omegas`` are angular frequencies relative to the drive in rad/ns.  The
    density is normalized so that ``coherent_weight + integral(density)``
    is 1 for a complete frequency window.
    """

    omegas: np.ndarray
    density: np.ndarray
    coherent_weight: float
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if om.shape != dens.shape or om.ndim != 1:
            raise ValueError("omegas and density must be 1-D arrays of equal length")
        if not -1e-9 <= self.coherent_weight <= 1 + 1e-9:
            raise ValueError(f"coherent weight {self.coherent_weight} outside [0, 1]")
        om.setflags(write=False)
        dens.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "density", dens)

    def total_weight(self) -> float:
        return self.coherent_weight + float(np.trapezoid(self.density, self.omegas))


def _trace_functional(op: np.ndarray) -> np.ndarray:
    # Tr[A X] = vec(A^T) . vec(X)
    return vec(op.T)


def flux(field: DetectionField, rho: DensityMatrix) -> float:
    """Photon flux ``<O^dag O>`` in photons/ns."""
    o = field.operator(rho.space)
    return max(rho.expect(o.conj().T @ o).real, 0.0)


def mean(field: DetectionField, rho: DensityMatrix) -> complex:
    return rho.expect(field.operator(rho.space))


def _checked_flux(field: DetectionField, rho: DensityMatrix) -> float:
    f = flux(field, rho)
    if f < FLUX_FLOOR:
        raise UndefinedNormalizationError(f"flux {f:.3e} photons/ns is below {FLUX_FLOOR:g}")
    return f


def g2_zero(field: DetectionField, rho: DensityMatrix) -> float:
    """Zero-delay ``<O^dag O^dag O O> / <O^dag O>^2`` evaluated directly on ``rho``."""
    f = _checked_flux(field, rho)
    o = field.operator(rho.space)
    od = o.conj().T
    return rho.expect(od @ od @ o @ o).real / f**2


def g1(L: Liouvillian, rho: DensityMatrix, field: DetectionField, taus, method: str = "expm"
       ) -> CorrelationTrace:
    """First-order coherence on the delay grid ``taus`` (must start at 0)."""
    taus = _check_grid(taus)
    f = _checked_flux(field, rho)
    o = field.operator(rho.space)
    states = propagate_vector(L.generator, vec(o @ rho.entries), taus, method=method)
    values = states @ _trace_functional(o.conj().T) / f
    values[0] = 1.0
    return CorrelationTrace(taus, values, f, field, L.params, "g1", mean(field, rho))


def g2(L: Liouvillian, rho: DensityMatrix, field: DetectionField, taus, method: str = "expm"
       ) -> CorrelationTrace:
    """Second-order coherence on the delay grid ``taus`` (must start at 0)."""
    taus = _check_grid(taus)
    f = _checked_flux(field, rho)
    o = field.operator(rho.space)
    od = o.conj().T
    states = propagate_vector(L.generator, vec(o @ rho.entries @ od), taus, method=method)
    values = states @ _trace_functional(od @ o) / f**2
    scale = max(1.0, float(np.max(np.abs(values.real))))
    if np.max(np.abs(values.imag)) > G2_IMAG_TOL * scale:
        raise SolverError(f"g2 has an imaginary part of {np.max(np.abs(values.imag)):.3e}")
    return CorrelationTrace(taus, values.real, f, field, L.params, "g2", mean(field, rho))


def _check_grid(taus) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) < 1 or taus[0] != 0:
        raise ValueError("delay grid must be 1-D and start at tau = 0")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("delay grid must be strictly ascending")
    return taus


def g1_until_decayed(
    L: Liouvillian,
    rho: DensityMatrix,
    field: DetectionField,
    dt: float,
    tol: float = DECAY_TOL,
    chunk: float = 1.0,
    tau_cap: float = 200.0,
) -> CorrelationTrace:
    """``g1`` on a uniform grid of step ``dt`` extended until it has decayed.

    The grid grows in blocks of ``chunk`` ns until the connected part
    ``g1 - |<O>|^2/<O^dag O>`` stays below ``tol`` over a whole block.

    Raises
    ------
    WindowError
        If the decay is not reached before ``tau_cap`` ns.
    """
    f = _checked_flux(field, rho)
    o = field.operator(rho.space)
    m = mean(field, rho)
    weight = abs(m) ** 2 / f
    functional = _trace_functional(o.conj().T)
    per_chunk = max(int(round(chunk / dt)), 2)
    x = vec(o @ rho.entries)
    blocks = [np.array([1.0 + 0j])]
    t_end = 0.0
    while True:
        states = expm_multiply(L.generator, x, start=0.0, stop=per_chunk * dt,
                               num=per_chunk + 1, endpoint=True)
        vals = states[1:] @ functional / f
        blocks.append(vals)
        x = states[-1]
        t_end += per_chunk * dt
        residual = float(np.max(np.abs(vals - weight)))
        if residual < tol:
            break
        if t_end >= tau_cap:
            raise WindowError(
                f"g1 connected part still {residual:.2e} at tau = {t_end:g} ns", residual=residual
            )
    values = np.concatenate(blocks)
    taus = dt * np.arange(len(values))
    return CorrelationTrace(taus, values, f, field, L.params, "g1", m)


def fourier_grid(trace: CorrelationTrace, omega_max: float) -> np.ndarray:
    """Symmetric frequency grid with the natural step ``pi / tau_max``.

    The Hermitian extension of ``g1`` spans ``[-tau_max, tau_max]``, which
    fixes the resolution of its Fourier transform at ``pi / tau_max``.
    """
    step = np.pi / trace.taus[-1]
    n = int(np.floor(omega_max / step))
    return step * np.arange(-n, n + 1)


def _linear_fourier(taus: np.ndarray, f: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """Exact ``int f(t) exp(-i w t) dt`` over the piecewise-linear interpolant."""
    h = np.diff(taus)
    f0, f1 = f[:-1], f[1:]
    slope = (f1 - f0) / h
    out = np.empty(len(omegas), dtype=complex)
    for start in range(0, len(omegas), 64):
        w = omegas[start:start + 64, None]
        small = np.abs(w * h) < 1e-4
        iw = 1j * np.where(small, 1.0, w)
        e0 = np.exp(-1j * w * taus[:-1])
        e1 = np.exp(-1j * w * taus[1:])
        # int_{t0}^{t1} (f0 + slope (t - t0)) e^{-iwt} dt by parts
        exact = (f0 * e0 - f1 * e1) / iw + slope * (e0 - e1) / iw**2
        trap = 0.5 * h * (f0 * e0 + f1 * e1)
        out[start:start + 64] = np.sum(np.where(small, trap, exact), axis=1)
    return out


def spectrum(trace: CorrelationTrace, omegas=None, omega_max: float | None = None,
             tol: float = DECAY_TOL) -> SpectrumTrace:
    """Incoherent spectral density from a ``g1`` trace.

    The coherent weight ``|<O>|^2 / <O^dag O>`` is reported as a scalar.  The
    connected part of ``g1`` is transformed as
    ``S(w) = (1/pi) Re int_0^inf g1c(tau) exp(-i w tau) dtau``
    with an exponential tail fitted to the last samples and continued
    analytically beyond ``tau_max``.

    Parameters
    ----------
    trace : CorrelationTrace
        ``g1`` trace whose connected part has decayed below ``tol``.
    omegas : array_like, optional
        Frequencies relative to the drive in rad/ns.  Defaults to
        :func:`fourier_grid` up to ``omega_max``.
    omega_max : float, optional
        Half-width of the default grid; defaults to a quarter of the
        sampling Nyquist frequency.
    """
    if trace.kind != "g1":
        raise ValueError("spectrum needs a g1 trace")
    weight = trace.coherent_fraction
    conn = trace.values - weight
    if np.max(np.abs(conn)) <= ROUNDOFF_ATOL:
        conn = np.zeros_like(conn)
    residual = float(np.max(np.abs(conn[-min(5, len(conn)):])))
    if residual > tol:
        raise WindowError(f"g1 connected part is {residual:.2e} at tau_max", residual=residual)
    if omegas is None:
        dt = trace.taus[1] - trace.taus[0]
        omegas = fourier_grid(trace, omega_max if omega_max else np.pi / (4 * dt))
    omegas = np.asarray(omegas, dtype=float)

    integral = _linear_fourier(trace.taus, conn, omegas)
    tail_rate = None
    if len(conn) >= 3 and abs(conn[-2]) > 0:
        ratio = conn[-1] / conn[-2]
        if 0 < abs(ratio) < 1:
            tail_rate = -np.log(ratio) / (trace.taus[-1] - trace.taus[-2])
            t_end = trace.taus[-1]
            integral += conn[-1] * np.exp(-1j * omegas * t_end) / (tail_rate + 1j * omegas)
    density = integral.real / np.pi
    # the scale covers fields whose connected part vanishes to rounding
    scale = max(float(np.max(density)) if len(density) else 0.0,
                float(np.max(np.abs(conn))) * trace.taus[-1] / np.pi, 1e-300)
    if len(density) and density.min() < -DENSITY_NEG_RTOL * scale:
        raise SolverError(f"spectral density negative down to {density.min():.3e}")
    density = np.clip(density, 0.0, None)
    meta = {"residual": residual, "tau_max": float(trace.taus[-1])}
    if tail_rate is not None:
        meta["tail_rate"] = complex(tail_rate)
    return SpectrumTrace(omegas, density, min(max(weight, 0.0), 1.0), meta)


def convolve_irf(trace: CorrelationTrace, sigma: float) -> CorrelationTrace:
    """Gaussian convolution of ``g2`` with a detector response of width ``sigma`` ns.

    The trace is extended evenly about ``tau = 0`` before smoothing.  The
    grid must be uniform.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if trace.kind != "g2":
        raise ValueError("IRF convolution applies to g2 traces")
    if sigma == 0 or len(trace.taus) < 2:
        return trace
    steps = np.diff(trace.taus)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("IRF convolution needs a uniform delay grid")
    smoothed = gaussian_filter1d(trace.values, sigma / steps[0], mode="mirror")
    return trace.with_values(smoothed, irf_sigma_ns=sigma)
