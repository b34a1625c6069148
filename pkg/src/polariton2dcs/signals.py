"""Spectroscopy kernels: linear absorption, the two-dimensional coherent
signal, the pump-probe signal, analytic slice traces and brute-force oracles.

The third-order kernels sum over molecule indices (i, l, j, j') and an extra
propagation index p.  For identical molecules every propagator entry depends
only on the *equality pattern* of its indices, so the quadruple sum collapses
onto the 15 set partitions of (i, l, j, j') weighted by the number of index
tuples realizing each partition, with p contributing at most four extra cases
(p equal to l, equal to j', another molecule, or the photon slot).  This makes
grid evaluation O(1) in N; literal nested-loop oracles are kept alongside.

Phonon sums use the Kronecker-power convention delta^0 == 1 (also for unequal
indices) and delta^(m>=1) == delta, so the m = 0 terms reproduce the
zero-displacement limit exactly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cache, cached_property
from itertools import product

import numpy as np

from .errors import NegativeWaitingTime, TooLarge
from .model import SystemParams
from .propagator import (
    ModeDecomposition,
    PatternEntries,
    fourier_conj_entries,
    fourier_entries,
    propagator_G,
    propagator_entries,
)
from .vibrations import VibKernel

# element slots inside an index partition
I_, L_, J_, JP_ = 0, 1, 2, 3
# Kronecker pairs carried by the six phonon sums m1..m6
_M_PAIRS = ((JP_, J_), (I_, L_), (J_, L_), (JP_, L_), (I_, J_), (I_, JP_))


def falling_factorial(n: int, k: int) -> int:
    out = 1
    for step in range(k):
        out *= n - step
    return out


@dataclass(frozen=True)
class IndexClass:
    """One equality pattern of the molecule indices (i, l, j, j')."""

    assignment: tuple[int, int, int, int]  # block id per slot, restricted-growth form

    @property
    def blocks(self) -> int:
        return max(self.assignment) + 1

    def equal(self, x: int, y: int) -> bool:
        return self.assignment[x] == self.assignment[y]

    def multiplicity(self, n: int) -> int:
        """Number of index tuples in {1..N}^4 realizing this pattern."""
        return falling_factorial(n, self.blocks)

    @cached_property
    def free_mask(self) -> tuple[bool, ...]:
        """Which of m1..m6 range freely (pair equal); pinned pairs keep m = 0."""
        return tuple(self.equal(x, y) for x, y in _M_PAIRS)


@cache
def index_classes() -> tuple[IndexClass, ...]:
    """The 15 set partitions of four elements, in a fixed enumeration order."""
    out = []

    def grow(assign: tuple[int, ...]) -> None:
        if len(assign) == 4:
            out.append(IndexClass(assign))
            return
        for b in range(max(assign, default=-1) + 2):
            grow(assign + (b,))

    grow(())
    return tuple(out)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Axis:
    """Uniform frequency axis on the absolute scale (cm^-1)."""

    start: float
    stop: float
    count: int
    offset: float = 0.0   # absolute = rotating + offset
    label: str = "omega"

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"axis '{self.label}' needs count >= 2, got {self.count}")
        if not (self.start < self.stop):
            raise ValueError(f"axis '{self.label}' needs start < stop")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def rotating(self) -> np.ndarray:
        return self.values() - self.offset

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.count - 1)


@dataclass
class SpectrumGrid:
    """Computed spectrum with its axes and run metadata.

    1D grids store values of shape (axis1.count,); 2D grids are row-major with
    shape (axis1.count, axis2.count), axis1 being the absorption axis.
    """

    signal: str
    axis1: Axis
    axis2: Axis | None
    t_wait: float | None
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = (self.axis1.count,) if self.axis2 is None else (self.axis1.count, self.axis2.count)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != axes shape {expected}")

    def display(self) -> np.ndarray:
        """The measured quantity: Im part for the 2D signal, Re otherwise."""
        return self.values.imag if self.signal == "twod" else self.values.real


# ---------------------------------------------------------------------------
# shared helpers


def phonon_parity(m3: int, m6: int) -> float:
    """Sign carried by the two negative commutator exponents."""
    return -1.0 if (m3 + m6) % 2 else 1.0


def _wait_factor(kernel: VibKernel, t_wait: float) -> complex:
    if t_wait < 0:
        raise NegativeWaitingTime(f"waiting time must be >= 0, got {t_wait}")
    z = kernel.wait_factor(t_wait)
    # one-phonon factor must never grow with T
    assert abs(z) <= 1.0 + 1e-12
    return z


def _pattern_pick(entries: PatternEntries, tag: str):
    if tag == "D":
        return entries.mm_diag
    if tag == "O":
        return entries.mm_off
    if tag == "X":
        return entries.mol_ph
    if tag == "P":
        return entries.ph_mol
    raise KeyError(tag)


def _weight_table(kernel: VibKernel, free: tuple[bool, ...], z: complex) -> np.ndarray:
    """Collapsed six-fold phonon sum for one index class.

    Returns W[a, k] = sum over allowed (m1..m6) of the product of
    Franck-Condon weights, the (-1)^(m3+m6) sign and the waiting-time factor
    z^(m3+m4+m5+m6), restricted to m2+m5+m6 = a and m1+m4+m6 = k.  Pinned
    sums (unequal index pairs) contribute only their m = 0 term.
    """
    s = kernel.weights
    w1, w2, w3, w4, w5, w6 = (s if flag else s[:1] for flag in free)
    zp = z ** np.arange(len(s))
    # m3 appears in no composite shift: it collapses to a scalar factor
    f3 = np.sum(w3 * np.array([phonon_parity(m, 0) for m in range(len(w3))]) * zp[: len(w3)])
    u = np.convolve(w2, w5 * zp[: len(w5)])      # u[x] = sum_m5 w5 z^m5 w2[x-m5]
    v = np.convolve(w1, w4 * zp[: len(w4)])      # v[y] = sum_m4 w4 z^m4 w1[y-m4]
    dim = 3 * kernel.m_max + 1
    table = np.zeros((dim, dim), dtype=complex)
    for m6 in range(len(w6)):
        coeff = w6[m6] * phonon_parity(0, m6) * zp[m6] * f3
        table[m6:m6 + len(u), m6:m6 + len(v)] += coeff * np.outer(u, v)
    return table


def _emission_blocks(dec: ModeDecomposition, kernel: VibKernel, w3_rot: np.ndarray) -> dict:
    """G-transform pattern values at all emission-side shifts.

    A[pat][t, a] = transform entry at (w3_rot[t] + shift(a)) for the
    molecule-diagonal / molecule-off-diagonal patterns.
    """
    dim = 3 * kernel.m_max + 1
    blocks = {"D": np.empty((w3_rot.size, dim), dtype=complex),
              "O": np.empty((w3_rot.size, dim), dtype=complex)}
    for a in range(dim):
        ent = fourier_entries(dec, w3_rot + kernel.shift(a))
        blocks["D"][:, a] = ent.mm_diag
        blocks["O"][:, a] = ent.mm_off
    return blocks


def _absorption_blocks(dec: ModeDecomposition, kernel: VibKernel, w1_rot: np.ndarray) -> dict:
    """Conjugate-transform pattern values at all absorption-side shifts.

    B[pat][u, k] = conjugate-transform entry at (w1_rot[u] - shift(k)); the
    'P' pattern is the photon-row/molecule-column entry needed when the extra
    propagation index lands on the photon slot.
    """
    dim = 3 * kernel.m_max + 1
    blocks = {"D": np.empty((w1_rot.size, dim), dtype=complex),
              "O": np.empty((w1_rot.size, dim), dtype=complex),
              "P": np.empty((w1_rot.size, dim), dtype=complex)}
    for k in range(dim):
        ent = fourier_conj_entries(dec, w1_rot - kernel.shift(k))
        blocks["D"][:, k] = ent.mm_diag
        blocks["O"][:, k] = ent.mm_off
        blocks["P"][:, k] = ent.ph_mol
    return blocks


def _p_cases(cls: IndexClass, n: int) -> list[tuple[int, str, str]]:
    """(count, G_lp pattern, transform_pj' pattern) for the propagation index."""
    if cls.equal(L_, JP_):
        return [(1, "D", "D"), (max(n - 1, 0), "O", "O"), (1, "X", "P")]
    return [(1, "D", "O"), (1, "O", "D"), (max(n - 2, 0), "O", "O"), (1, "X", "P")]


def _twod_core(dec: ModeDecomposition, kernel: VibKernel, t_wait: float) -> dict:
    """Class-collapsed kernel matrices, keyed by the absorption-side pattern.

    For each pattern pair the emission-side table is folded in so that the
    grid evaluation reduces to one matrix product per absorption pattern.
    """
    n = dec.n_molecules
    z = _wait_factor(kernel, t_wait)
    prop = propagator_entries(dec, t_wait)
    dim = 3 * kernel.m_max + 1
    core: dict[tuple[str, str], np.ndarray] = {}
    for cls in index_classes():
        mult = cls.multiplicity(n)
        if mult == 0:
            continue
        table = _weight_table(kernel, cls.free_mask, z)
        pat_il = "D" if cls.equal(I_, L_) else "O"
        g_lj = _pattern_pick(prop, "D" if cls.equal(L_, J_) else "O")
        for count, lp_pat, pj_pat in _p_cases(cls, n):
            if count == 0:
                continue
            coeff = mult * count * np.conj(_pattern_pick(prop, lp_pat)) * g_lj
            key = (pat_il, pj_pat)
            if key in core:
                core[key] = core[key] + coeff * table
            else:
                core[key] = coeff * table
    return core


def _twod_prefactor(sys: SystemParams) -> complex:
    return 1j * cmath.exp(1j * sys.phase) * sys.dipole ** 4


def _twod_row_block(blocks_b: dict, folded: dict, sl: slice) -> np.ndarray:
    """Rows [sl] of the 2D signal from precomputed pattern blocks."""
    out = None
    for pj_pat, mat in folded.items():
        part = blocks_b[pj_pat][sl] @ mat
        out = part if out is None else out + part
    return out


def twod_values(dec: ModeDecomposition, kernel: VibKernel,
                w1_rot: np.ndarray, w3_rot: np.ndarray, t_wait: float,
                prefactor: complex = 1j, workers: int = 0) -> np.ndarray:
    """Complex 2D signal on rotating-frame axes; shape (len(w1), len(w3)).

    ``w1_rot`` is the user-facing absorption axis; the conjugated first
    interval makes the underlying kernel argument its negative.
    """
    w1_rot = np.atleast_1d(np.asarray(w1_rot, dtype=float))
    w3_rot = np.atleast_1d(np.asarray(w3_rot, dtype=float))
    core = _twod_core(dec, kernel, t_wait)
    blocks_a = _emission_blocks(dec, kernel, w3_rot)
    blocks_b = _absorption_blocks(dec, kernel, w1_rot)
    # fold emission side: folded[pj][k, t] = sum_il A[il][t, a] core[(il, pj)][a, k]
    folded: dict[str, np.ndarray] = {}
    for (pat_il, pj_pat), mat in core.items():
        contrib = (blocks_a[pat_il] @ mat).T
        folded[pj_pat] = folded.get(pj_pat, 0) + contrib
    out = np.empty((w1_rot.size, w3_rot.size), dtype=complex)
    slices, parts = _map_row_chunks(_twod_row_block, (blocks_b, folded), w1_rot.size, workers)
    for sl, part in zip(slices, parts):
        out[sl] = part
    out *= prefactor
    return out


def twod_signal(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
                axis1: Axis, axis3: Axis, t_wait: float, workers: int = 0) -> SpectrumGrid:
    """Heterodyne-detected 2D signal on absolute axes; display is the Im part."""
    values = twod_values(dec, kernel, axis1.rotating(), axis3.rotating(),
                         t_wait, _twod_prefactor(sys), workers)
    meta = _base_metadata(sys, kernel)
    meta.update(display="imag", axis1_role="absorption", axis2_role="emission")
    return SpectrumGrid("twod", axis1, axis3, t_wait, values, meta)


def twod_signal_point(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
                      omega1: float, omega3: float, t_wait: float) -> complex:
    """Single point of the class-collapsed 2D kernel in formula coordinates.

    ``omega1`` is the kernel-side first-interval frequency; it maps to the
    user-facing absorption axis as w1_rot = -omega1.
    """
    vals = twod_values(dec, kernel, np.array([-omega1]), np.array([omega3]),
                       t_wait, _twod_prefactor(sys))
    return complex(vals[0, 0])


def twod_signal_direct(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
                       omega1: float, omega3: float, t_wait: float) -> complex:
    """Literal quintuple-index sum with explicit Kronecker deltas (oracle).

    Cost grows as N^4 (N+1) m_max^6 with pinned-m pruning; refuse N > 6.
    """
    n = sys.n_molecules
    if n > 6:
        raise TooLarge("direct 2D oracle limited to N <= 6")
    z = _wait_factor(kernel, t_wait)
    s = kernel.weights
    mm = kernel.m_max
    g_wait = propagator_G(dec, t_wait)
    dim = 3 * mm + 1
    trans_a = [fourier_entries(dec, omega3 + kernel.shift(a)).to_dense(n) for a in range(dim)]
    trans_b = [fourier_conj_entries(dec, -omega1 - kernel.shift(k)).to_dense(n) for k in range(dim)]
    full = np.arange(mm + 1)
    pinned = np.arange(1)
    total = 0.0 + 0.0j
    for i, l, j, jp in product(range(n), repeat=4):
        ranges = [full if eq else pinned
                  for eq in ((jp == j), (i == l), (j == l), (jp == l), (i == j), (i == jp))]
        m1, m2, m3, m4, m5, m6 = np.ix_(*ranges)
        weight = (s[m1] * s[m2] * s[m3] * s[m4] * s[m5] * s[m6]
                  * (-1.0) ** (m3 + m6) * z ** (m3 + m4 + m5 + m6))
        alpha = m2 + m5 + m6
        kappa = m1 + m4 + m6
        a_val = np.stack([t[i, l] for t in trans_a])
        for p in range(n + 1):
            b_val = np.stack([t[p, jp] for t in trans_b])
            total += np.conj(g_wait[l, p]) * g_wait[l, j] * np.sum(
                weight * a_val[alpha] * b_val[kappa]
            )
    return complex(_twod_prefactor(sys) * total)


# ---------------------------------------------------------------------------
# linear absorption


def linear_absorption(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
                      axis: Axis, workers: int = 0) -> SpectrumGrid:
    """Linear absorption on the absolute axis (real spectrum).

    The zero-phonon term sums the transform over all molecule pairs (the
    delta^0 convention); every m >= 1 sideband only keeps the diagonal pairs.
    """
    w_rot = axis.rotating()
    slices, parts = _map_row_chunks(_absorption_chunk, (dec, kernel, w_rot, sys.dipole ** 2),
                                    w_rot.size, workers)
    values = np.empty(w_rot.size, dtype=complex)
    for sl, part in zip(slices, parts):
        values[sl] = part
    meta = _base_metadata(sys, kernel)
    meta.update(display="real", axis1_role="absorption")
    return SpectrumGrid("absorption", axis, None, None, values, meta)


def _absorption_chunk(dec: ModeDecomposition, kernel: VibKernel,
                      w_rot: np.ndarray, scale: float, sl: slice) -> np.ndarray:
    n = dec.n_molecules
    w = w_rot[sl]
    s = kernel.weights
    ent0 = fourier_entries(dec, w)
    acc = s[0] * (n * ent0.mm_diag + n * (n - 1) * ent0.mm_off)
    for m in range(1, kernel.m_max + 1):
        acc = acc + s[m] * n * fourier_entries(dec, w - np.conj(kernel.shift(m))).mm_diag
    return scale * np.real(acc) + 0.0j


# ---------------------------------------------------------------------------
# closed-form peak ratios


@dataclass(frozen=True)
class PeakRatios:
    """Closed-form absorption peak-height ratios (resonant cavity assumed).

    Exact for gamma_x == gamma_c; a documented approximation otherwise.
    """

    orders: tuple[int, ...]
    eds_over_lp: tuple[float, ...]
    eds_over_up: tuple[float, ...]
    sideband_over_lp: tuple[float, ...]
    sideband_over_up: tuple[float, ...]
    gamma_lp: float
    gamma_up: float
    gamma_dark: float
    approximate: bool


def peak_ratios(sys: SystemParams, dec: ModeDecomposition, m_max: int = 3) -> PeakRatios:
    lam2 = sys.lambda_hr ** 2
    n = sys.n_molecules
    g_lp, g_up = dec.mu_lp.real, dec.mu_up.real
    g_dark = dec.mu_dark.real
    gv = sys.gamma_v
    orders = tuple(range(1, m_max + 1))

    def eds(gpol, m):
        return lam2 ** m / math.factorial(m) * (1.0 - 1.0 / n) * 2.0 * gpol / (g_dark + m * gv)

    def sideband(gpol, m):
        return lam2 ** m / (math.factorial(m) * n) * gpol / (gpol + m * gv)

    return PeakRatios(
        orders=orders,
        eds_over_lp=tuple(eds(g_lp, m) for m in orders),
        eds_over_up=tuple(eds(g_up, m) for m in orders),
        sideband_over_lp=tuple(sideband(g_lp, m) for m in orders),
        sideband_over_up=tuple(sideband(g_up, m) for m in orders),
        gamma_lp=g_lp,
        gamma_up=g_up,
        gamma_dark=g_dark,
        approximate=not math.isclose(sys.gamma_x, sys.gamma_c, rel_tol=1e-12),
    )


# ---------------------------------------------------------------------------
# pump-probe


def _pp_class_weights(cls: IndexClass, kernel: VibKernel, z: complex):
    """(m1+m3)-resolved weight vector and the scalar m2 factor for one class."""
    s = kernel.weights
    m = np.arange(kernel.m_max + 1)
    w1 = s if cls.equal(I_, L_) else s[:1]
    d2 = float(cls.equal(JP_, L_)) - float(cls.equal(J_, L_))
    d3 = float(cls.equal(I_, J_)) - float(cls.equal(I_, JP_))
    w2 = s * d2 ** m          # d^0 == 1 covers the m = 0 convention
    w3 = s * d3 ** m
    f2 = np.sum(w2 * z ** m)
    w13 = np.convolve(w1, w3 * z ** m)   # index: x = m1 + m3
    return w13, f2


def pump_probe_values(dec: ModeDecomposition, kernel: VibKernel,
                      w_rot: np.ndarray, t_wait: float, scale: float = 1.0) -> np.ndarray:
    """Real pump-probe spectrum on a rotating-frame grid (class-collapsed)."""
    w_rot = np.atleast_1d(np.asarray(w_rot, dtype=float))
    n = dec.n_molecules
    z = _wait_factor(kernel, t_wait)
    prop = propagator_entries(dec, t_wait)
    dim = 2 * kernel.m_max + 1
    wvec = {"D": np.zeros(dim, dtype=complex), "O": np.zeros(dim, dtype=complex)}
    for cls in index_classes():
        mult = cls.multiplicity(n)
        if mult == 0:
            continue
        w13, f2 = _pp_class_weights(cls, kernel, z)
        g_lj = _pattern_pick(prop, "D" if cls.equal(L_, J_) else "O")
        g_ljp = _pattern_pick(prop, "D" if cls.equal(L_, JP_) else "O")
        pat_il = "D" if cls.equal(I_, L_) else "O"
        coeff = mult * np.conj(g_ljp) * g_lj * f2
        wvec[pat_il][: w13.size] += coeff * w13
    blocks = {pat: np.empty((w_rot.size, dim), dtype=complex) for pat in ("D", "O")}
    for x in range(dim):
        ent = fourier_entries(dec, w_rot + kernel.shift(x))
        blocks["D"][:, x] = ent.mm_diag
        blocks["O"][:, x] = ent.mm_off
    total = blocks["D"] @ wvec["D"] + blocks["O"] @ wvec["O"]
    return scale * np.real(total)


def _pp_row_block(dec, kernel, w_rot, t_wait, scale, sl: slice) -> np.ndarray:
    return pump_probe_values(dec, kernel, w_rot[sl], t_wait, scale)


def pump_probe(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
               axis: Axis, t_wait: float, workers: int = 0) -> SpectrumGrid:
    """Pump-probe spectrum on the absolute axis (real values)."""
    w_rot = axis.rotating()
    scale = 4.0 * sys.dipole ** 4
    slices, parts = _map_row_chunks(_pp_row_block, (dec, kernel, w_rot, t_wait, scale),
                                    w_rot.size, workers)
    values = np.empty(w_rot.size, dtype=complex)
    for sl, part in zip(slices, parts):
        values[sl] = part
    meta = _base_metadata(sys, kernel)
    meta.update(display="real", axis1_role="detection")
    return SpectrumGrid("pump_probe", axis, None, t_wait, values, meta)


def pump_probe_direct(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
                      omega_abs: float, t_wait: float) -> float:
    """Literal quadruple-index pump-probe sum (oracle); refuse N > 6."""
    n = sys.n_molecules
    if n > 6:
        raise TooLarge("direct pump-probe oracle limited to N <= 6")
    z = _wait_factor(kernel, t_wait)
    s = kernel.weights
    mm = kernel.m_max
    w_rot = omega_abs - sys.axis_offset
    g_wait = propagator_G(dec, t_wait)
    trans = [fourier_entries(dec, w_rot + kernel.shift(x)).to_dense(n) for x in range(2 * mm + 1)]
    full = np.arange(mm + 1)
    pinned = np.arange(1)
    total = 0.0 + 0.0j
    for i, l, j, jp in product(range(n), repeat=4):
        r1 = full if i == l else pinned
        d2 = float(jp == l) - float(j == l)
        d3 = float(i == j) - float(i == jp)
        m1, m2, m3 = np.ix_(r1, full, full)
        weight = (s[m1] * s[m2] * s[m3] * d2 ** m2 * d3 ** m3 * z ** (m2 + m3))
        a_val = np.stack([t[i, l] for t in trans])
        total += np.conj(g_wait[l, jp]) * g_wait[l, j] * np.sum(weight * a_val[m1 + m3])
    return float(4.0 * sys.dipole ** 4 * np.real(total))


# ---------------------------------------------------------------------------
# pump-probe slice traces


@dataclass(frozen=True)
class SliceTrace:
    """One fixed-frequency waiting-time trace with its cross-validation."""

    omega_abs: float
    formula: np.ndarray      # closed-form resonance trace (own normalization)
    exact: np.ndarray        # full kernel evaluated at omega_abs
    fitted_scale: float      # least-squares constant mapping formula onto exact
    residual: float          # relative rms misfit after scaling


@dataclass(frozen=True)
class SliceReport:
    t_list: np.ndarray
    upper_polariton: SliceTrace
    stokes: dict[int, SliceTrace]


def _fit_scale(formula: np.ndarray, exact: np.ndarray) -> tuple[float, float]:
    denom = float(np.dot(formula, formula))
    if denom == 0.0:
        return 0.0, float(np.sqrt(np.mean(exact ** 2)))
    scale = float(np.dot(exact, formula) / denom)
    resid = exact - scale * formula
    norm = max(float(np.max(np.abs(exact))), 1e-300)
    return scale, float(np.sqrt(np.mean(resid ** 2)) / norm)


def pump_probe_slices(sys: SystemParams, dec: ModeDecomposition, kernel: VibKernel,
                      t_list, stokes_orders: tuple[int, ...] = (1, 2)) -> SliceReport:
    """Waiting-time traces at the upper polariton and the Stokes phonon lines.

    The closed-form traces use the resonance-dominated expressions (uniform
    bright weight for the polariton line; explicit discrete-Fourier dark
    phases for the Stokes lines) and are cross-validated against the full
    kernel up to a fitted constant, which is reported alongside.
    """
    t_list = np.asarray(list(t_list), dtype=float)
    if np.any(t_list < 0):
        raise NegativeWaitingTime("waiting times must be >= 0")
    n = sys.n_molecules
    lam2 = kernel.lambda_hr ** 2
    s = kernel.weights
    mm = kernel.m_max
    scale = 4.0 * sys.dipole ** 4

    omega_up_abs = sys.axis_offset + dec.mu_up.imag
    up_formula = np.empty(t_list.size)
    up_exact = np.empty(t_list.size)

    # dark-basis phase vectors phi[s, q] for the Stokes traces
    q = np.arange(1, n)
    sites = np.arange(1, n + 1)
    phi = np.exp(-2j * np.pi * np.outer(sites, q) / n)
    dark_weight = (phi @ phi.conj().T).real     # sum over dark modes of phi_sk conj(phi_lk)

    eds_formula = {m: np.empty(t_list.size) for m in stokes_orders}
    eds_exact = {m: np.empty(t_list.size) for m in stokes_orders}

    for it, t_wait in enumerate(t_list):
        z = _wait_factor(kernel, t_wait)
        g = propagator_G(dec, t_wait)[:n, :n]
        gg = np.conj(g)[:, :, None] * g[:, None, :]   # [l, jp, j]
        zp = z ** np.arange(mm + 1)

        # polariton line: only the zero-phonon absorption/emission term resonates
        accum = 0.0
        for l, jp, j in product(range(n), repeat=3):
            d = float(jp == l) - float(j == l)
            accum += float(np.real(np.sum(s * d ** np.arange(mm + 1) * zp * gg[l, jp, j])))
        up_formula[it] = math.exp(-lam2) / (2.0 * dec.mu_up.real) * accum
        up_exact[it] = pump_probe_values(dec, kernel,
                                         np.array([omega_up_abs - sys.axis_offset]),
                                         t_wait, scale)[0]

        for order in stokes_orders:
            gamma_res = dec.mu_dark.real + order * kernel.gamma_v
            acc = 0.0
            m_idx = np.arange(mm + 1)
            for site, l in product(range(n), repeat=2):
                dw = dark_weight[site, l]
                if dw == 0.0:
                    continue
                for jp, j in product(range(n), repeat=2):
                    d2 = float(jp == l) - float(j == l)
                    d3 = float(site == j) - float(site == jp)
                    for m1 in range(order + 1):
                        m3 = order - m1
                        if m1 > mm or m3 > mm:
                            continue
                        if m1 > 0 and site != l:
                            continue
                        w13 = s[m1] * s[m3] * (d3 ** m3)
                        if w13 == 0.0:
                            continue
                        inner = np.sum(s * d2 ** m_idx * zp * gg[l, jp, j]) * (z ** m3)
                        acc += w13 * float(np.real(dw * inner))
            eds_formula[order][it] = math.exp(lam2) / n * acc / gamma_res
            omega_abs = sys.axis_offset + sys.delta_x - order * kernel.omega_v
            eds_exact[order][it] = pump_probe_values(dec, kernel,
                                                     np.array([omega_abs - sys.axis_offset]),
                                                     t_wait, scale)[0]

    up_scale, up_res = _fit_scale(up_formula, up_exact)
    stokes = {}
    for order in stokes_orders:
        sc, res = _fit_scale(eds_formula[order], eds_exact[order])
        omega_abs = sys.axis_offset + sys.delta_x - order * kernel.omega_v
        stokes[order] = SliceTrace(omega_abs, eds_formula[order], eds_exact[order], sc, res)
    return SliceReport(
        t_list=t_list,
        upper_polariton=SliceTrace(omega_up_abs, up_formula, up_exact, up_scale, up_res),
        stokes=stokes,
    )


# ---------------------------------------------------------------------------
# metadata and parallel plumbing


def _base_metadata(sys: SystemParams, kernel: VibKernel) -> dict:
    from .model import RAD_PER_CM_FS

    return {
        "n_molecules": sys.n_molecules,
        "g": sys.g,
        "delta_x": sys.delta_x,
        "delta_c": sys.delta_c,
        "gamma_x": sys.gamma_x,
        "gamma_c": sys.gamma_c,
        "omega_v": sys.omega_v,
        "gamma_v": sys.gamma_v,
        "lambda_hr": sys.lambda_hr,
        "omega_ref": sys.omega_ref,
        "dipole": sys.dipole,
        "phase": sys.phase,
        "axis_offset": sys.axis_offset,
        "m_max": kernel.m_max,
        "tail_eps": kernel.tail_eps,
        "rad_per_cm_fs": RAD_PER_CM_FS,
    }


_CHUNK_ROWS = 64
_POOL_CTX = None


def _chunk_slices(n: int, size: int = _CHUNK_ROWS) -> list[slice]:
    return [slice(s, min(s + size, n)) for s in range(0, n, size)]


def _pool_init(fn, args):
    global _POOL_CTX
    _POOL_CTX = (fn, args)


def _pool_call(sl: slice):
    fn, args = _POOL_CTX
    return fn(*args, sl)


def _map_row_chunks(fn, args, n_rows: int, workers: int):
    """Evaluate fn(*args, slice) over fixed-size row chunks.

    Chunking is static and independent of the worker count, so results are
    bitwise identical however many processes participate.
    """
    slices = _chunk_slices(n_rows)
    if workers and workers > 1 and len(slices) > 1:
        import multiprocessing as mp

        ctx = mp.get_context("fork")
        with ctx.Pool(processes=min(workers, len(slices)),
                      initializer=_pool_init, initargs=(fn, args)) as pool:
            parts = pool.map(_pool_call, slices)
    else:
        parts = [fn(*args, sl) for sl in slices]
    return slices, parts
