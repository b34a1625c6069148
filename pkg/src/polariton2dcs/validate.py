"""Self-check suite pairing every fast path with its independent reference.

Each check returns a :class:`CheckResult`; the CLI prints one line per check
and fails if any tolerance is exceeded.  The acceptance tests reuse the same
functions, so there is exactly one implementation of every comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SystemParams, validate_params
from .propagator import (
    build_matrix,
    decompose,
    expm_propagator,
    fourier_conj_entries,
    propagator_G,
    propagator_fourier,
    quadrature_fourier,
)
from .signals import (
    Axis,
    linear_absorption,
    peak_ratios,
    pump_probe_direct,
    pump_probe_slices,
    pump_probe_values,
    twod_signal_direct,
    twod_signal_point,
    twod_values,
)
from .vibrations import (
    TimeQuadruple,
    VibKernel,
    four_point_correlator,
    fock_correlator,
    franck_condon_cutoff,
    franck_condon_weights,
    kernel_from_params,
)


def reference_params(lambda_hr: float = 1.0, n_molecules: int = 10,
                     collective: float = 1800.0, **overrides) -> SystemParams:
    """Demo dye-in-cavity parameter set used across checks and docs."""
    raw = {
        "n_molecules": n_molecules,
        "g": collective / math.sqrt(n_molecules),
        "delta_x": 0.0,
        "delta_c": 0.0,
        "gamma_x": 1.0,
        "gamma_c": 0.9,
        "omega_v": 1200.0,
        "gamma_v": 20.0,
        "lambda_hr": lambda_hr,
        "omega_ref": 16113.0,
    }
    raw.update(overrides)
    return validate_params(raw)


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_err: float
    tol: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: max_err={self.max_err:.3e} tol={self.tol:.0e} {self.detail}"


def _result(name: str, max_err: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(name, float(max_err), tol, bool(max_err < tol), detail)


def _random_params(rng: np.random.Generator, n: int) -> SystemParams:
    return validate_params({
        "n_molecules": n,
        "g": float(rng.uniform(5.0, 600.0)),
        "delta_x": float(rng.uniform(-300.0, 300.0)),
        "delta_c": float(rng.uniform(-300.0, 300.0)),
        "gamma_x": float(rng.uniform(0.3, 3.0)),
        "gamma_c": float(rng.uniform(0.3, 3.0)),
        "omega_v": float(rng.uniform(600.0, 1600.0)),
        "gamma_v": float(rng.uniform(5.0, 40.0)),
        "lambda_hr": float(rng.uniform(0.0, 1.5)),
        "omega_ref": 16113.0,
    })


def check_propagator_expm(seed: int = 101, sets_per_n: int = 20, tol: float = 1e-10) -> CheckResult:
    """Closed-form arrowhead propagator against dense scaling-and-squaring."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, 7):
        for _ in range(sets_per_n):
            sys = _random_params(rng, n)
            m = build_matrix(sys)
            dec = decompose(m)
            t = float(rng.uniform(0.0, 300.0))
            diff = np.max(np.abs(propagator_G(dec, t) - expm_propagator(m, t)))
            worst = max(worst, float(diff))
    return _result("propagator_expm", worst, tol, "N=1..6 random parameter sets")


def check_eigenstructure(seed: int = 102, tol: float = 1e-12) -> CheckResult:
    """Dark-space structure and the unitary resonant limit of the transform."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(2, 7):
        sys = _random_params(rng, n)
        dec = decompose(build_matrix(sys))
        t = dec.t_dense()
        tinv = dec.tinv_dense()
        worst = max(worst, float(np.max(np.abs(t @ tinv - np.eye(n + 1)))))
        dark_cols = t[:, 2:]
        worst = max(worst, float(np.max(np.abs(dark_cols[-1, :]))))          # photon weight
        worst = max(worst, float(np.max(np.abs(dark_cols[:-1, :].sum(0)))))  # zero-sum
        worst = max(worst, float(np.max(np.abs(np.abs(dark_cols[:-1, :]) ** 2 - 1.0 / n))))
        if len(dec.eigenvalues) != n + 1 or sum(lbl.startswith("D") for lbl in dec.labels) != n - 1:
            worst = max(worst, 1.0)
        # resonant equal-rate case: inverse equals conjugate transpose
        res = reference_params(n_molecules=n, gamma_c=1.0)
        dres = decompose(build_matrix(res))
        worst = max(worst, float(np.max(np.abs(dres.tinv_dense() - dres.t_dense().conj().T))))
    return _result("eigenstructure", worst, tol, "dark basis + resonant unitarity")


def check_transform_quadrature(seed: int = 103, n_points: int = 100, tol: float = 1e-6) -> CheckResult:
    """Pole-sum transform against adaptive oscillatory quadrature."""
    rng = np.random.default_rng(seed)
    sys = reference_params()
    dec = decompose(build_matrix(sys))
    worst = 0.0
    for _ in range(n_points):
        omega = complex(rng.uniform(-2400.0, 2400.0), 0.0)
        if rng.uniform() < 0.2:
            omega += 1j * sys.gamma_v * rng.integers(1, 3)
        exact = propagator_fourier(dec, omega)
        quad = quadrature_fourier(dec, omega)
        worst = max(worst, float(np.max(np.abs(exact - quad)) / np.max(np.abs(exact))))
    # a few conjugate-transform points
    for _ in range(10):
        omega = complex(rng.uniform(-2400.0, 2400.0), -sys.gamma_v)
        exact = fourier_conj_entries(dec, omega).to_dense(sys.n_molecules)
        quad = quadrature_fourier(dec, omega, conjugated=True)
        worst = max(worst, float(np.max(np.abs(exact - quad)) / np.max(np.abs(exact))))
    return _result("transform_quadrature", worst, tol, "relative, reference set")


def check_fock_four_point(seed: int = 104, samples: int = 50, n_max: int = 40,
                          tol: float = 1e-8,
                          lambdas: tuple[float, ...] = (0.3, 0.7, 1.0, 1.2)) -> CheckResult:
    """Closed-form undamped correlator against truncated Fock-space mechanics."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam in lambdas:
        kernel = VibKernel(lambda_hr=lam, omega_v=1200.0, gamma_v=0.0,
                           m_max=max(1, franck_condon_cutoff(lam, 1e-10)), tail_eps=1e-10)
        for _ in range(samples):
            quad = TimeQuadruple(
                times=tuple(float(t) for t in rng.uniform(0.0, 120.0, size=4)),
                sites=tuple(int(s) for s in rng.integers(0, 4, size=4)),
            )
            analytic = four_point_correlator(quad, kernel)
            fock = fock_correlator(quad, lam, 1200.0, n_max=n_max)
            worst = max(worst, abs(analytic - fock))
    return _result("fock_four_point", worst, tol, f"lambdas={lambdas}, all orderings")


def check_twod_direct(seed: int = 105, points: int = 20, tol: float = 1e-10) -> CheckResult:
    """Class-collapsed 2D kernel against the literal quintuple loop."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3, 4, 5):
        sys = reference_params(lambda_hr=0.9, n_molecules=n, collective=1800.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys, m_max=4)
        for _ in range(points):
            om1 = float(rng.uniform(-2400.0, 2400.0))
            om3 = float(rng.uniform(-2400.0, 2400.0))
            t_wait = float(rng.uniform(0.0, 400.0))
            fast = twod_signal_point(sys, dec, kernel, om1, om3, t_wait)
            slow = twod_signal_direct(sys, dec, kernel, om1, om3, t_wait)
            rel = abs(fast - slow) / max(abs(fast), abs(slow))
            worst = max(worst, rel)
    return _result("twod_direct", worst, tol, "N=2..5, relative")


def check_pump_probe_direct(seed: int = 106, points: int = 20, tol: float = 1e-10) -> CheckResult:
    """Class-collapsed pump-probe kernel against the literal quadruple loop."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3, 4, 5):
        sys = reference_params(lambda_hr=0.8, n_molecules=n, collective=1800.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys, m_max=5)
        for _ in range(points):
            omega = float(rng.uniform(12000.0, 20000.0))
            t_wait = float(rng.uniform(0.0, 500.0))
            fast = float(pump_probe_values(dec, kernel,
                                           np.array([omega - sys.axis_offset]), t_wait,
                                           4.0 * sys.dipole ** 4)[0])
            slow = pump_probe_direct(sys, dec, kernel, omega, t_wait)
            rel = abs(fast - slow) / max(abs(fast), abs(slow))
            worst = max(worst, rel)
    return _result("pump_probe_direct", worst, tol, "N=2..5, relative")


def check_slices_grid(tol: float = 1e-8) -> CheckResult:
    """Exact slice values against the full pump-probe grid at matching points."""
    sys = reference_params()
    dec = decompose(build_matrix(sys))
    kernel = kernel_from_params(sys)
    t_list = [0.0, 100.0, 250.0, 500.0]
    report = pump_probe_slices(sys, dec, kernel, t_list, stokes_orders=(1,))
    worst = 0.0
    targets = [report.upper_polariton] + list(report.stokes.values())
    for trace in targets:
        for it, t_wait in enumerate(t_list):
            grid_val = float(pump_probe_values(
                dec, kernel, np.array([trace.omega_abs - sys.axis_offset]),
                t_wait, 4.0 * sys.dipole ** 4)[0])
            rel = abs(trace.exact[it] - grid_val) / max(abs(grid_val), 1e-300)
            worst = max(worst, rel)
    detail = (f"fitted scales up={report.upper_polariton.fitted_scale:.3g}"
              f" (resid {report.upper_polariton.residual:.2e})")
    return _result("slices_grid", worst, tol, detail)


def _local_peak_height(sys, dec, kernel, center_abs: float, halfwidth: float = 8.0) -> float:
    axis = Axis(center_abs - halfwidth, center_abs + halfwidth, 801, sys.axis_offset)
    grid = linear_absorption(sys, dec, kernel, axis)
    return float(grid.display().max())


def check_ratio_law(equal_rates: bool = False) -> CheckResult:
    """Numerical absorption peak ratio against the closed-form law."""
    sys = reference_params(gamma_c=1.0) if equal_rates else reference_params()
    dec = decompose(build_matrix(sys))
    kernel = kernel_from_params(sys)
    ratios = peak_ratios(sys, dec, m_max=1)
    lp_abs = sys.axis_offset + dec.mu_lp.imag
    eds_abs = sys.axis_offset + sys.delta_x + sys.omega_v
    lp_height = _local_peak_height(sys, dec, kernel, lp_abs)
    eds_height = _local_peak_height(sys, dec, kernel, eds_abs)
    numeric = eds_height / lp_height
    closed = ratios.eds_over_lp[0]
    err = abs(numeric - closed) / closed
    tol = 0.01 if equal_rates else 0.05
    name = "ratio_law_equal_rates" if equal_rates else "ratio_law"
    return _result(name, err, tol, f"numeric={numeric:.5f} closed={closed:.5f}")


def check_truncation_stability(tol: float = 1e-6) -> CheckResult:
    """Doubling the phonon cutoff must not move the reference 2D grid."""
    sys = reference_params()
    dec = decompose(build_matrix(sys))
    base = kernel_from_params(sys)
    doubled = kernel_from_params(sys, m_max=2 * base.m_max)
    w1 = np.linspace(13000.0, 19000.0, 40) - sys.axis_offset
    w3 = np.linspace(13000.0, 19000.0, 40) - sys.axis_offset
    a = twod_values(dec, base, w1, w3, 0.0)
    b = twod_values(dec, doubled, w1, w3, 0.0)
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return _result("truncation_stability", err, tol, f"m_max {base.m_max} -> {2 * base.m_max}")


def check_franck_condon_sums(tol: float = 1e-10) -> CheckResult:
    """Truncated weight sums stay within the advertised tail bound."""
    worst = 0.0
    for lam in (0.0, 0.5, 1.0, 2.0, 3.0):
        m_max = franck_condon_cutoff(lam, 1e-10)
        total = franck_condon_weights(lam, m_max).sum()
        worst = max(worst, 1.0 - float(total))
    return _result("franck_condon_sums", worst, tol, "lambda in {0,0.5,1,2,3}")


ALL_CHECKS = (
    check_propagator_expm,
    check_eigenstructure,
    check_transform_quadrature,
    check_fock_four_point,
    check_twod_direct,
    check_pump_probe_direct,
    check_slices_grid,
    check_ratio_law,
    lambda: check_ratio_law(equal_rates=True),
    check_truncation_stability,
    check_franck_condon_sums,
)


def run_suite() -> list[CheckResult]:
    """Run every oracle pair with fixed seeds; deterministic output order."""
    return [check() for check in ALL_CHECKS]
