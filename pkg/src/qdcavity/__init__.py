"""Driven emitter-cavity simulator: steady states, correlations, spectra and HOM interference."""

__version__ = "0.1.0"

from .analytic import (
    BlochParams,
    BlochState,
    bloch_steady,
    g1_closed_form,
    g2_closed_form,
    reflection_coefficient,
    scattering_rates,
    spectrum_closed_form,
    transmission_coefficient,
)
from .correlations import (
    CorrelationTrace,
    DetectionField,
    SpectrumTrace,
    convolve_irf,
    g1,
    g1_until_decayed,
    g2,
    g2_zero,
    spectrum,
)
from .detection import make_field, sweep_detuning, sweep_filter, sweep_lo, sweep_power
from .hilbert import CompositeSpace, composite_operators
from .hom import HomConfig, g2_cross, g2_parallel, visibility
from .lindblad import DensityMatrix, Liouvillian, choose_cutoff, liouvillian, propagate, solve, steady_state
from .mcwf import TrajectoryConfig, g2_zero_from_moments, run_trajectories
from .params import PRESETS, SystemParams, preset

__all__ = [
    "BlochParams",
    "BlochState",
    "CompositeSpace",
    "CorrelationTrace",
    "DensityMatrix",
    "DetectionField",
    "HomConfig",
    "Liouvillian",
    "PRESETS",
    "SpectrumTrace",
    "SystemParams",
    "TrajectoryConfig",
    "bloch_steady",
    "choose_cutoff",
    "composite_operators",
    "convolve_irf",
    "g1",
    "g1_closed_form",
    "g1_until_decayed",
    "g2",
    "g2_closed_form",
    "g2_cross",
    "g2_parallel",
    "g2_zero",
    "g2_zero_from_moments",
    "liouvillian",
    "make_field",
    "preset",
    "propagate",
    "reflection_coefficient",
    "run_trajectories",
    "scattering_rates",
    "solve",
    "spectrum",
    "spectrum_closed_form",
    "steady_state",
    "sweep_detuning",
    "sweep_filter",
    "sweep_lo",
    "sweep_power",
    "transmission_coefficient",
    "visibility",
]
