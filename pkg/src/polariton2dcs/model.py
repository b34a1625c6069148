"""Physical parameters, unit bridge and derived mode frequencies.

Conventions used throughout the package:

* frequencies, detunings and rates are wavenumbers (cm^-1),
* times and delays are femtoseconds,
* dimensionless exponents are always formed through :func:`time_phase`,
* internal kernels work in the rotating frame of the probe carrier; output
  axes are shifted onto the absolute axis by ``SystemParams.axis_offset``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Mapping

from .errors import ParameterError, Violation

#: radians accumulated per (cm^-1 * fs): 2*pi*c with c = 2.99792458e-5 cm/fs
RAD_PER_CM_FS = 2.0 * math.pi * 2.99792458e-5


def time_phase(freq: float, t: float) -> float:
    """Phase angle in radians accumulated after ``t`` fs by a line at ``freq`` cm^-1."""
    return RAD_PER_CM_FS * freq * t


@dataclass(frozen=True)
class SystemParams:
    """Immutable, validated parameter set consumed by every kernel.

    ``delta_x`` is the dressed exciton detuning in the rotating frame (the
    vibronic shift is already folded in, so it is taken as a direct input and
    never recomputed from a bare detuning).  ``omega_ref`` pins the absolute
    exciton frequency so spectra can be reported on an absolute axis.
    """

    n_molecules: int
    g: float            # single-molecule coupling; collective splitting is 2*g*sqrt(N)
    delta_x: float      # dressed exciton detuning, rotating frame
    delta_c: float      # cavity detuning
    gamma_x: float      # exciton dephasing/decay
    gamma_c: float      # cavity leakage
    omega_v: float      # vibrational frequency
    gamma_v: float      # vibrational damping
    lambda_hr: float    # dimensionless displacement; Huang-Rhys factor is lambda_hr**2
    omega_ref: float    # absolute exciton frequency (axis offset anchor)
    dipole: float = 1.0
    phase: float = 0.0  # global four-pulse phase, radians

    @property
    def collective_coupling(self) -> float:
        """g*sqrt(N), half the Rabi splitting."""
        return self.g * math.sqrt(self.n_molecules)

    @property
    def axis_offset(self) -> float:
        """Shift mapping rotating-frame frequencies onto the absolute axis."""
        return self.omega_ref - self.delta_x


_DEFAULTS = {"delta_x": 0.0, "delta_c": 0.0, "dipole": 1.0, "phase": 0.0}
_FIELD_NAMES = tuple(f.name for f in fields(SystemParams))


def _as_float(name: str, value, violations: list[Violation]) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        violations.append(Violation("NonFinite", name, f"not a number: {value!r}"))
        return math.nan
    if not math.isfinite(out):
        violations.append(Violation("NonFinite", name, f"not finite: {value!r}"))
    return out


def validate_params(raw: Mapping) -> SystemParams:
    """Build a :class:`SystemParams` from a plain mapping.

    Missing optional fields take their documented defaults (``delta_x=0``,
    ``delta_c=0``, ``dipole=1``, ``phase=0``).  Every violated invariant is
    collected; the raised :class:`ParameterError` lists all of them.  Unknown
    keys are a hard error so typos in physics parameters cannot pass silently.
    """
    violations: list[Violation] = []
    for key in raw:
        if key not in _FIELD_NAMES:
            violations.append(Violation("UnknownField", key, "not a model parameter"))

    values = {}
    for name in _FIELD_NAMES:
        if name in raw:
            values[name] = raw[name]
        elif name in _DEFAULTS:
            values[name] = _DEFAULTS[name]
        else:
            violations.append(Violation("MissingField", name, "required parameter absent"))
    if violations:
        raise ParameterError(violations)

    n_raw = values["n_molecules"]
    n = int(n_raw) if float(n_raw) == int(n_raw) else -1
    if n < 1:
        violations.append(Violation("NegativeCount", "n_molecules", f"need an integer >= 1, got {n_raw!r}"))

    floats = {name: _as_float(name, values[name], violations)
              for name in _FIELD_NAMES if name != "n_molecules"}

    for name in ("gamma_x", "gamma_c", "gamma_v", "omega_v"):
        if math.isfinite(floats[name]) and floats[name] <= 0.0:
            violations.append(Violation("NonPositiveRate", name, f"must be > 0, got {floats[name]}"))
    if math.isfinite(floats["dipole"]) and floats["dipole"] <= 0.0:
        violations.append(Violation("NonPositiveRate", "dipole", f"must be > 0, got {floats['dipole']}"))
    if math.isfinite(floats["lambda_hr"]) and floats["lambda_hr"] < 0.0:
        violations.append(Violation("NonPositiveRate", "lambda_hr", f"must be >= 0, got {floats['lambda_hr']}"))
    if n >= 1 and math.isfinite(floats["g"]) and not math.isfinite(2.0 * floats["g"] * math.sqrt(n)):
        violations.append(Violation("NonFinite", "g", "Rabi splitting 2*g*sqrt(N) overflows"))

    if violations:
        raise ParameterError(violations)
    return SystemParams(n_molecules=n, **floats)


@dataclass(frozen=True)
class DerivedQuantities:
    """Closed-form consequences of a parameter set, for reporting."""

    rabi_splitting: float            # 2*g*sqrt(N)
    bright_rotating: tuple[float, float]   # delta_x -/+ g*sqrt(N); exact only for delta_x == delta_c
    bright_absolute: tuple[float, float]   # same lines on the absolute axis
    polaron_shift: float             # 2 * lambda_hr**2 * omega_v
    omega_ref: float
    omega_v: float

    def eds_ladder(self, m: int) -> tuple[float, float]:
        """Absolute frequencies omega_ref -/+ m*omega_v of the m-phonon ladder."""
        return (self.omega_ref - m * self.omega_v, self.omega_ref + m * self.omega_v)


def derived_quantities(sys: SystemParams) -> DerivedQuantities:
    gn = sys.collective_coupling
    offset = sys.axis_offset
    return DerivedQuantities(
        rabi_splitting=2.0 * gn,
        bright_rotating=(sys.delta_x - gn, sys.delta_x + gn),
        bright_absolute=(offset + sys.delta_x - gn, offset + sys.delta_x + gn),
        polaron_shift=2.0 * sys.lambda_hr ** 2 * sys.omega_v,
        omega_ref=sys.omega_ref,
        omega_v=sys.omega_v,
    )


@dataclass(frozen=True)
class PulseSchedule:
    """Arrival times (fs) of the three impulsive pulses plus field scales."""

    t1: float = 0.0
    t2: float = 0.0
    t3: float = 0.0
    amp1: float = 1.0
    amp2: float = 1.0
    amp3: float = 1.0
    amp_lo: float = 1.0

    def __post_init__(self):
        bad = []
        if not (self.t1 <= self.t2 <= self.t3):
            bad.append(Violation("NegativeDelay", "t1..t3", "pulse times must be ordered t1 <= t2 <= t3"))
        for name in ("t1", "t2", "t3", "amp1", "amp2", "amp3", "amp_lo"):
            if not math.isfinite(getattr(self, name)):
                bad.append(Violation("NonFinite", name, "not finite"))
        if bad:
            raise ParameterError(bad)

    @property
    def tau(self) -> float:
        """Delay between the first two pulses."""
        return self.t2 - self.t1

    @property
    def t_wait(self) -> float:
        """Waiting time between the second pulse and the probe."""
        return self.t3 - self.t2
