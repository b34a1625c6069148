"""Analytic quantum-Langevin engine for vibronic cavity-polariton spectroscopy.

Computes linear absorption, heterodyne-detected two-dimensional coherent
spectra and pump-probe spectra of N identical vibronically coupled molecules
in a lossy single-mode cavity, with brute-force oracles for every fast path.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateBright,
    DivergentTransform,
    MalformedGrid,
    NegativeTime,
    NegativeWaitingTime,
    ParameterError,
    TooLarge,
    TruncationWarning,
)
from .model import (
    RAD_PER_CM_FS,
    PulseSchedule,
    SystemParams,
    derived_quantities,
    time_phase,
    validate_params,
)
from .propagator import (
    DynamicsMatrix,
    ModeDecomposition,
    build_matrix,
    decompose,
    expm_propagator,
    fourier_conj_entries,
    fourier_entries,
    matrix_exp,
    propagator_G,
    propagator_fourier,
    quadrature_fourier,
)
from .signals import (
    Axis,
    IndexClass,
    SpectrumGrid,
    index_classes,
    linear_absorption,
    peak_ratios,
    pump_probe,
    pump_probe_direct,
    pump_probe_slices,
    pump_probe_values,
    twod_signal,
    twod_signal_direct,
    twod_signal_point,
    twod_values,
)
from .vibrations import (
    TimeQuadruple,
    VibKernel,
    fock_correlator,
    four_point_correlator,
    franck_condon,
    franck_condon_cutoff,
    franck_condon_weights,
    kernel_from_params,
    mode_commutator,
    phonon_shift,
)

__all__ = [name for name in dir() if not name.startswith("_")]
