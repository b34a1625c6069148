"""Dynamics matrix, closed-form arrowhead eigendecomposition and propagators.

For N identical molecules coupled to one cavity mode the generator is a
complex symmetric arrowhead matrix: a degenerate molecular diagonal ``a``,
a photon entry ``c`` and couplings ``i*g`` along the last row/column.  Its
eigensystem splits exactly into N-1 dark modes (discrete-Fourier molecular
vectors with zero photon weight, eigenvalue ``a``) and two bright modes from
the 2x2 block [[a, i*g*sqrt(N)], [i*g*sqrt(N), c]].  Everything downstream
consumes either this structured form or a handful of index-pattern entries
(molecule diagonal / molecule off-diagonal / molecule-photon / photon-photon),
which is what makes the signal kernels O(1) in N.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateBright, DivergentTransform, NegativeTime, TooLarge
from .model import RAD_PER_CM_FS, SystemParams


@dataclass(frozen=True)
class DynamicsMatrix:
    """Structured arrowhead generator of the damped mode dynamics."""

    n_molecules: int
    mol_diag: complex     # i*delta_x + gamma_x
    photon_diag: complex  # i*delta_c + gamma_c
    coupling: float       # g

    @property
    def dimension(self) -> int:
        return self.n_molecules + 1

    def to_dense(self) -> np.ndarray:
        n = self.n_molecules
        out = np.zeros((n + 1, n + 1), dtype=complex)
        out[np.arange(n), np.arange(n)] = self.mol_diag
        out[n, n] = self.photon_diag
        out[:n, n] = 1j * self.coupling
        out[n, :n] = 1j * self.coupling
        return out

    def trace(self) -> complex:
        return self.n_molecules * self.mol_diag + self.photon_diag


def build_matrix(sys: SystemParams) -> DynamicsMatrix:
    """Assemble the arrowhead generator from validated parameters."""
    return DynamicsMatrix(
        n_molecules=sys.n_molecules,
        mol_diag=sys.gamma_x + 1j * sys.delta_x,
        photon_diag=sys.gamma_c + 1j * sys.delta_c,
        coupling=sys.g,
    )


@dataclass(frozen=True)
class ModeDecomposition:
    """Eigensystem of the arrowhead generator in structured form.

    ``bright_t`` columns are the (LP, UP) eigenvectors expressed in the
    (uniform bright combination, photon) basis; ``bright_tinv`` is its exact
    2x2 inverse.  Dark eigenvectors are the discrete-Fourier molecular vectors
    T[s, k] = exp(-2j*pi*s*(k-1)/N)/sqrt(N) restricted to the zero-sum rows.
    """

    n_molecules: int
    mu_lp: complex
    mu_up: complex
    mu_dark: complex
    bright_t: np.ndarray
    bright_tinv: np.ndarray

    @property
    def dimension(self) -> int:
        return self.n_molecules + 1

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """All N+1 eigenvalues ordered (LP, UP, dark * (N-1))."""
        return np.array([self.mu_lp, self.mu_up] + [self.mu_dark] * (self.n_molecules - 1))

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return ("LP", "UP") + tuple(f"D{q}" for q in range(1, self.n_molecules))

    @property
    def gamma_min(self) -> float:
        """Slowest decay rate; sets the convergence abscissa of the transform."""
        rates = [self.mu_lp.real, self.mu_up.real]
        if self.n_molecules > 1:
            rates.append(self.mu_dark.real)
        return min(rates)

    def t_dense(self) -> np.ndarray:
        """Materialize the full (N+1)x(N+1) eigenvector matrix."""
        n = self.n_molecules
        out = np.zeros((n + 1, n + 1), dtype=complex)
        root_n = math.sqrt(n)
        for k in range(2):
            out[:n, k] = self.bright_t[0, k] / root_n
            out[n, k] = self.bright_t[1, k]
        s = np.arange(1, n + 1)[:, None]
        q = np.arange(1, n)[None, :]
        out[:n, 2:] = np.exp(-2j * np.pi * s * q / n) / root_n
        return out

    def tinv_dense(self) -> np.ndarray:
        n = self.n_molecules
        out = np.zeros((n + 1, n + 1), dtype=complex)
        root_n = math.sqrt(n)
        for k in range(2):
            out[k, :n] = self.bright_tinv[k, 0] / root_n
            out[k, n] = self.bright_tinv[k, 1]
        s = np.arange(1, n + 1)[None, :]
        q = np.arange(1, n)[:, None]
        out[2:, :n] = np.exp(2j * np.pi * s * q / n) / root_n
        return out


def decompose(m: DynamicsMatrix) -> ModeDecomposition:
    """Closed-form eigendecomposition of the identical-molecule arrowhead."""
    n = m.n_molecules
    a = complex(m.mol_diag)
    c = complex(m.photon_diag)
    b = 1j * m.coupling * math.sqrt(n)
    half_sum = 0.5 * (a + c)
    half_diff = 0.5 * (a - c)
    radical = cmath.sqrt(half_diff * half_diff + b * b)
    mu1, mu2 = half_sum + radical, half_sum - radical
    scale = max(1.0, abs(mu1), abs(mu2))
    if abs(mu1 - mu2) < 1e-12 * scale:
        raise DegenerateBright(f"bright eigenvalues coincide: {mu1} ~ {mu2}")

    if m.coupling == 0.0:
        bright_t = np.eye(2, dtype=complex)
        mus = (a, c)
    else:
        norm = cmath.sqrt((half_diff + radical) ** 2 + b * b)
        bright_t = np.array(
            [[(half_diff + radical) / norm, -b / norm],
             [b / norm, (half_diff + radical) / norm]]
        )
        mus = (mu1, mu2)

    # label by mode frequency (imaginary part): LP below UP
    order = (0, 1) if mus[0].imag <= mus[1].imag else (1, 0)
    bright_t = bright_t[:, order].copy()
    mu_lp, mu_up = mus[order[0]], mus[order[1]]
    # sign convention: bright-combination component of each column has Re >= 0
    for k in range(2):
        head = bright_t[0, k]
        if head.real < 0.0 or (head.real == 0.0 and head.imag < 0.0):
            bright_t[:, k] = -bright_t[:, k]
    det = bright_t[0, 0] * bright_t[1, 1] - bright_t[0, 1] * bright_t[1, 0]
    bright_tinv = np.array(
        [[bright_t[1, 1], -bright_t[0, 1]],
         [-bright_t[1, 0], bright_t[0, 0]]]
    ) / det
    bright_t.setflags(write=False)
    bright_tinv.setflags(write=False)
    return ModeDecomposition(
        n_molecules=n,
        mu_lp=mu_lp,
        mu_up=mu_up,
        mu_dark=a,
        bright_t=bright_t,
        bright_tinv=bright_tinv,
    )


@dataclass(frozen=True)
class PatternEntries:
    """The five distinct entries of a permutation-symmetric (N+1)**2 matrix."""

    mm_diag: complex | np.ndarray
    mm_off: complex | np.ndarray
    mol_ph: complex | np.ndarray
    ph_mol: complex | np.ndarray
    ph_ph: complex | np.ndarray

    def to_dense(self, n: int) -> np.ndarray:
        out = np.full((n + 1, n + 1), self.mm_off, dtype=complex)
        out[np.arange(n), np.arange(n)] = self.mm_diag
        out[:n, n] = self.mol_ph
        out[n, :n] = self.ph_mol
        out[n, n] = self.ph_ph
        return out


def _assemble_entries(dec: ModeDecomposition, bright_fn, dark_fn) -> PatternEntries:
    """Combine dark scalar and bright 2x2 filter into pattern entries.

    ``bright_fn``/``dark_fn`` map an eigenvalue to its scalar filter value
    (e.g. exp(-mu*theta) or 1/(mu - i*omega)); both may return arrays for
    vectorized frequency grids.
    """
    n = dec.n_molecules
    t, tinv = dec.bright_t, dec.bright_tinv
    f_lp = bright_fn(dec.mu_lp)
    f_up = bright_fn(dec.mu_up)
    eb = [[t[i, 0] * tinv[0, j] * f_lp + t[i, 1] * tinv[1, j] * f_up
           for j in range(2)] for i in range(2)]
    dark = dark_fn(dec.mu_dark)
    root_n = math.sqrt(n)
    return PatternEntries(
        mm_diag=(1.0 - 1.0 / n) * dark + eb[0][0] / n,
        mm_off=-dark / n + eb[0][0] / n,
        mol_ph=eb[0][1] / root_n,
        ph_mol=eb[1][0] / root_n,
        ph_ph=eb[1][1],
    )


def _entries_at_theta(dec: ModeDecomposition, theta) -> PatternEntries:
    fn = lambda mu: np.exp(-mu * theta)
    return _assemble_entries(dec, fn, fn)


def propagator_entries(dec: ModeDecomposition, t: float) -> PatternEntries:
    """Index-pattern entries of the free propagator G(t), t in fs."""
    if t < 0:
        raise NegativeTime(f"propagator needs t >= 0, got {t}")
    return _entries_at_theta(dec, RAD_PER_CM_FS * t)


def propagator_G(dec: ModeDecomposition, t: float) -> np.ndarray:
    """Dense free propagator G(t) = T exp(-mu*theta(t)) T^-1."""
    return propagator_entries(dec, t).to_dense(dec.n_molecules)


def fourier_entries(dec: ModeDecomposition, omega) -> PatternEntries:
    """Pattern entries of the half-line transform of G at Omega (may be an array).

    Converges for Im(Omega) > -gamma_min; each eigenmode contributes a pole
    term 1/(mu_k - i*Omega).
    """
    omega = np.asarray(omega, dtype=complex)
    if np.any(omega.imag <= -dec.gamma_min):
        raise DivergentTransform(
            f"need Im(omega) > {-dec.gamma_min:g} for convergence"
        )
    fn = lambda mu: 1.0 / (mu - 1j * omega)
    return _assemble_entries(dec, fn, fn)


def propagator_fourier(dec: ModeDecomposition, omega: complex) -> np.ndarray:
    """Dense half-line Fourier transform of the propagator."""
    return fourier_entries(dec, omega).to_dense(dec.n_molecules)


def fourier_conj_entries(dec: ModeDecomposition, omega) -> PatternEntries:
    """Pattern entries of the conjugate transform.

    This is the half-line transform of the conjugated propagator,
    integral of conj(G(u)) * exp(-i*z*u), equal to conj of the plain
    transform evaluated at conj(z).  Converges for Im(z) < gamma_min.
    """
    omega = np.asarray(omega, dtype=complex)
    if np.any(omega.imag >= dec.gamma_min):
        raise DivergentTransform(
            f"need Im(omega) < {dec.gamma_min:g} for convergence"
        )
    plain = fourier_entries(dec, np.conj(omega))
    return PatternEntries(
        mm_diag=np.conj(plain.mm_diag),
        mm_off=np.conj(plain.mm_off),
        mol_ph=np.conj(plain.mol_ph),
        ph_mol=np.conj(plain.ph_mol),
        ph_ph=np.conj(plain.ph_ph),
    )


def matrix_exp(a: np.ndarray, taylor_terms: int = 20) -> np.ndarray:
    """exp(a) by scaling-and-squaring with a truncated Taylor series."""
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a, 1)
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    small = a / (2.0 ** squarings)
    out = np.eye(a.shape[0], dtype=complex)
    # Horner evaluation of the truncated series
    for k in range(taylor_terms, 0, -1):
        out = np.eye(a.shape[0], dtype=complex) + small @ out / k
    for _ in range(squarings):
        out = out @ out
    return out


def expm_propagator(m: DynamicsMatrix, t: float) -> np.ndarray:
    """Dense exp(-M*theta(t)) reference, independent of the decomposition."""
    if t < 0:
        raise NegativeTime(f"propagator needs t >= 0, got {t}")
    if m.n_molecules > 64:
        raise TooLarge("dense reference limited to N <= 64")
    return matrix_exp(-m.to_dense() * (RAD_PER_CM_FS * t))


_PATTERN_FIELDS = ("mm_diag", "mm_off", "mol_ph", "ph_mol", "ph_ph")


def quadrature_fourier(dec: ModeDecomposition, omega: complex,
                       u_max: float | None = None, conjugated: bool = False,
                       panel_points: int = 10) -> np.ndarray:
    """Numerical-quadrature transform of G (or conj G), as a dense matrix.

    Independent cross-check of :func:`propagator_fourier` /
    :func:`fourier_conj_entries`: integrates the time-domain propagator over
    [0, u_max] in theta units (default 40/gamma_min, where the integrand has
    decayed to ~1e-17) with composite Gauss-Legendre panels sized to hold at
    most half an oscillation period of integrand times kernel.
    """
    omega = complex(omega)
    if u_max is None:
        u_max = 40.0 / dec.gamma_min
    if conjugated:
        # conj(G(u)) * exp(-i z u):  oscillation -Re z, envelope exp(+Im(z) u)
        w_osc, q = -omega.real, -omega.imag
    else:
        w_osc, q = omega.real, omega.imag
    if q <= -dec.gamma_min:
        raise DivergentTransform("quadrature target does not converge")
    freq_scale = abs(w_osc) + max(abs(dec.mu_lp.imag), abs(dec.mu_up.imag),
                                  abs(dec.mu_dark.imag)) + 1.0
    n_panels = max(64, int(math.ceil(u_max * freq_scale / math.pi)))
    x, gl_w = np.polynomial.legendre.leggauss(panel_points)
    edges = np.linspace(0.0, u_max, n_panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    mids = 0.5 * (edges[:-1] + edges[1:])
    u = (mids[:, None] + half * x[None, :]).ravel()
    du = np.broadcast_to(half * gl_w[None, :], (n_panels, panel_points)).ravel()
    kernel = np.exp((1j * w_osc - q) * u) * du
    ent = _entries_at_theta(dec, u)
    vals = {}
    for name in _PATTERN_FIELDS:
        f = getattr(ent, name)
        if conjugated:
            f = np.conj(f)
        vals[name] = complex(np.sum(f * kernel))
    return PatternEntries(**vals).to_dense(dec.n_molecules)
