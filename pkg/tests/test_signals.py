import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polariton2dcs import (
    Axis,
    NegativeWaitingTime,
    SpectrumGrid,
    TooLarge,
    build_matrix,
    decompose,
    index_classes,
    linear_absorption,
    peak_ratios,
    propagator_G,
    propagator_fourier,
    pump_probe,
    pump_probe_direct,
    pump_probe_slices,
    pump_probe_values,
    twod_signal,
    twod_signal_direct,
    twod_signal_point,
    twod_values,
)
from polariton2dcs.peaks import find_peaks_1d, find_peaks_2d
from polariton2dcs.signals import falling_factorial
from polariton2dcs.validate import (
    check_pump_probe_direct,
    check_slices_grid,
    check_twod_direct,
    reference_params,
)
from polariton2dcs.vibrations import VibKernel, kernel_from_params

POLARITON_LINES = (14313.0, 17913.0)


def full_axis(count=300, offset=16113.0):
    return Axis(13000.0, 19000.0, count, offset)


class TestIndexClasses:
    def test_fifteen_partitions(self):
        assert len(index_classes()) == 15

    @given(n=st.integers(1, 8))
    def test_multiplicities_tile_the_index_space(self, n):
        assert sum(cls.multiplicity(n) for cls in index_classes()) == n ** 4

    def test_multiplicity_vanishes_when_blocks_exceed_n(self):
        all_distinct = next(cls for cls in index_classes() if cls.blocks == 4)
        assert all_distinct.multiplicity(3) == 0
        assert all_distinct.multiplicity(4) == 24

    def test_free_mask_of_fully_merged_class(self):
        merged = next(cls for cls in index_classes() if cls.blocks == 1)
        assert merged.free_mask == (True,) * 6

    def test_falling_factorial(self):
        assert falling_factorial(10, 4) == 5040
        assert falling_factorial(3, 4) == 0


class TestGridTypes:
    def test_axis_validation(self):
        with pytest.raises(ValueError):
            Axis(0.0, 1.0, 1)
        with pytest.raises(ValueError):
            Axis(2.0, 1.0, 50)

    def test_axis_rotating_frame(self):
        axis = Axis(13000.0, 19000.0, 4, offset=16113.0)
        assert axis.rotating()[0] == pytest.approx(-3113.0)

    def test_grid_shape_enforced(self):
        axis = Axis(0.0, 1.0, 4)
        with pytest.raises(ValueError):
            SpectrumGrid("absorption", axis, None, None, np.zeros(3, dtype=complex))


class TestLinearAbsorption:
    def test_zero_displacement_two_lorentzians(self):
        sys = reference_params(lambda_hr=0.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys)
        axis = full_axis(2000)
        grid = linear_absorption(sys, dec, kernel, axis)
        peaks = find_peaks_1d(axis.values(), grid.display(), min_rel_height=0.001)
        assert len(peaks) == 2
        for peak, target in zip(sorted(p.refined_position for p in peaks), POLARITON_LINES):
            assert abs(peak - target) < 5.0
        # dark contributions cancel exactly: the spectrum equals the all-pairs
        # sum of the dense transform, which has no dark pole left
        w = axis.rotating()[::100]
        dense_sum = np.array([propagator_fourier(dec, om)[:10, :10].sum() for om in w])
        assert np.max(np.abs(grid.display()[::100] - dense_sum.real)) < 1e-10

    def test_reference_three_peak_structure(self, dye_system, dye_dec, dye_kernel):
        axis = full_axis(2000)
        grid = linear_absorption(dye_system, dye_dec, dye_kernel, axis)
        peaks = find_peaks_1d(axis.values(), grid.display(), min_rel_height=0.05)
        positions = sorted(p.refined_position for p in peaks)
        assert len(positions) == 3
        for pos, target in zip(positions, (14313.0, 17313.0, 17913.0)):
            assert abs(pos - target) < 5.0

    def test_decoupled_limit_matches_bare_vibronic_progression(self):
        sys = reference_params(lambda_hr=1.0, collective=1e-6)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys)
        axis = Axis(14000.0, 22000.0, 1500, sys.axis_offset)
        grid = linear_absorption(sys, dec, kernel, axis)
        w = axis.rotating()
        bare = np.zeros_like(w)
        for m in range(kernel.m_max + 1):
            weight = math.exp(-1.0) / math.factorial(m)
            width = sys.gamma_x + m * sys.gamma_v
            bare += sys.n_molecules * weight * width / (width**2 + (w - m * sys.omega_v) ** 2)
        assert np.max(np.abs(grid.display() - bare)) / bare.max() < 1e-10

    def test_output_is_real(self, dye_system, dye_dec, dye_kernel):
        grid = linear_absorption(dye_system, dye_dec, dye_kernel, full_axis(64))
        assert np.all(grid.values.imag == 0.0)


class TestPeakRatios:
    def test_reference_first_order_ratio(self, dye_system, dye_dec):
        ratios = peak_ratios(dye_system, dye_dec, m_max=1)
        assert ratios.eds_over_lp[0] == pytest.approx(0.9 * 2.0 * 0.95 / 21.0, rel=1e-6)
        assert ratios.eds_over_lp[0] == pytest.approx(0.08143, abs=5e-5)
        assert ratios.approximate  # gamma_x != gamma_c in the reference set

    def test_large_n_limit(self):
        sys = reference_params(n_molecules=10**6)
        dec = decompose(build_matrix(sys))
        ratios = peak_ratios(sys, dec, m_max=1)
        # exact N -> infinity value of the closed form
        exact_limit = 2.0 * dec.mu_lp.real / (dec.mu_dark.real + 20.0)
        assert ratios.eds_over_lp[0] == pytest.approx(exact_limit, rel=1e-5)
        # the common wide-phonon-line shorthand drops the dark width entirely
        assert ratios.eds_over_lp[0] == pytest.approx(2.0 * dec.mu_lp.real / 20.0, rel=0.06)

    def test_sideband_barely_observable(self, dye_system, dye_dec):
        ratios = peak_ratios(dye_system, dye_dec, m_max=1)
        assert ratios.sideband_over_lp[0] == pytest.approx(0.95 / (10 * 20.95), rel=1e-6)
        assert ratios.sideband_over_lp[0] == pytest.approx(0.004535, abs=5e-6)


class TestTwodSignal:
    def test_single_molecule_single_class(self):
        sys = reference_params(n_molecules=1, collective=1800.0, lambda_hr=0.7)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys, m_max=3)
        active = [cls for cls in index_classes() if cls.multiplicity(1) > 0]
        assert len(active) == 1
        fast = twod_signal_point(sys, dec, kernel, -1800.0, 1800.0, 120.0)
        slow = twod_signal_direct(sys, dec, kernel, -1800.0, 1800.0, 120.0)
        assert fast == pytest.approx(slow, rel=1e-11)

    def test_direct_loop_agreement_sample(self):
        result = check_twod_direct(points=4)
        assert result.passed, result.line()

    def test_direct_loop_size_guard(self, dye_system, dye_dec, dye_kernel):
        with pytest.raises(TooLarge):
            twod_signal_direct(dye_system, dye_dec, dye_kernel, 0.0, 0.0, 0.0)

    def test_negative_waiting_time_rejected(self, dye_system, dye_dec, dye_kernel):
        axis = full_axis(8)
        with pytest.raises(NegativeWaitingTime):
            twod_signal(dye_system, dye_dec, dye_kernel, axis, axis, -5.0)

    def test_zero_displacement_pure_polariton_grid(self):
        sys = reference_params(lambda_hr=0.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys)
        axis = full_axis(300)
        grid = twod_signal(sys, dec, kernel, axis, axis, 0.0)
        peaks = find_peaks_2d(axis.values(), axis.values(), grid.display(),
                              omega_v=sys.omega_v, min_rel_height=0.02)
        assert peaks
        for p in peaks:
            assert min(abs(p.refined_position[0] - x) for x in POLARITON_LINES) < 60.0
            assert min(abs(p.refined_position[1] - x) for x in POLARITON_LINES) < 60.0

    def test_zero_phonon_term_reproduces_zero_displacement_signal(self):
        lam = 1.0
        sys_l = reference_params(lambda_hr=lam)
        sys_0 = reference_params(lambda_hr=0.0)
        dec_l = decompose(build_matrix(sys_l))
        dec_0 = decompose(build_matrix(sys_0))
        zero_phonon = VibKernel(lambda_hr=lam, omega_v=1200.0, gamma_v=20.0, m_max=0, tail_eps=1.0)
        kernel_0 = kernel_from_params(sys_0)
        w = np.linspace(-3000.0, 3000.0, 9)
        a = twod_values(dec_l, zero_phonon, w, w, 85.0) / math.exp(-lam**2) ** 6
        b = twod_values(dec_0, kernel_0, w, w, 85.0)
        # exact identity; last-bit weight rounding passes through a strongly
        # canceling contraction, so allow ~1e3 ulp relative to the grid scale
        assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-9

    def test_reference_cross_peaks_at_phonon_offsets(self, dye_system, dye_dec, dye_kernel):
        axis = full_axis(300)
        grid = twod_signal(dye_system, dye_dec, dye_kernel, axis, axis, 0.0)
        peaks = find_peaks_2d(axis.values(), axis.values(), grid.display(),
                              omega_v=dye_system.omega_v, min_rel_height=0.02)

        def present(w1, w3, tol=80.0):
            return any(abs(p.position[0] - w1) < tol and abs(p.position[1] - w3) < tol
                       for p in peaks)

        assert present(17313.0, 14913.0)   # one-phonon emission below the pump line
        assert present(17313.0, 13713.0)   # two-phonon emission

    def test_emission_marginal_matches_absorption(self):
        sys = reference_params(lambda_hr=0.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys)
        axis = full_axis(400)
        grid = twod_signal(sys, dec, kernel, axis, axis, 0.0)
        marginal = np.abs(grid.display()).max(axis=0)
        twod_peaks = sorted(p.position for p in find_peaks_1d(axis.values(), marginal, 0.05))
        absorption = linear_absorption(sys, dec, kernel, axis)
        abs_peaks = sorted(p.position for p in
                           find_peaks_1d(axis.values(), absorption.display(), 0.05))
        assert len(twod_peaks) == len(abs_peaks)
        for a, b in zip(twod_peaks, abs_peaks):
            assert abs(a - b) <= axis.step

    def test_sign_flip_canary(self, monkeypatch, dye_system):
        # forcing the phonon-exchange sign positive must break the oracle match
        sys = reference_params(lambda_hr=0.9, n_molecules=3)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys, m_max=3)
        args = (sys, dec, kernel, -1700.0, 1100.0, 90.0)
        scale = abs(twod_signal_direct(*args))
        baseline = abs(twod_signal_point(*args) - twod_signal_direct(*args))
        assert baseline < 1e-12 * scale
        import polariton2dcs.signals as signals_mod

        monkeypatch.setattr(signals_mod, "phonon_parity", lambda m3, m6: 1.0)
        broken = abs(twod_signal_point(*args) - twod_signal_direct(*args))
        assert broken > 1e-2 * scale


class TestPumpProbe:
    def test_direct_loop_agreement_sample(self):
        result = check_pump_probe_direct(points=4)
        assert result.passed, result.line()

    def test_direct_loop_size_guard(self, dye_system, dye_dec, dye_kernel):
        with pytest.raises(TooLarge):
            pump_probe_direct(dye_system, dye_dec, dye_kernel, 16113.0, 0.0)

    def test_stokes_side_peaks(self, dye_system, dye_dec, dye_kernel):
        axis = Axis(12000.0, 19000.0, 2500, dye_system.axis_offset)
        grid = pump_probe(dye_system, dye_dec, dye_kernel, axis, 0.0)
        peaks = find_peaks_1d(axis.values(), grid.display(), min_rel_height=0.01)
        positions = sorted(p.refined_position for p in peaks)
        targets = (13713.0, 14313.0, 14913.0, 17913.0)  # two Stokes lines, LP, UP
        assert len(positions) == len(targets)
        for pos, ref in zip(positions, targets):
            assert abs(pos - ref) < 5.0

    def test_zero_displacement_rabi_transient(self):
        sys = reference_params(lambda_hr=0.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys)
        w_up = np.array([dec.mu_up.imag])
        # with no phonon sums left the trace is a pure polariton interference
        trace = np.array([float(pump_probe_values(dec, kernel, w_up, t)[0])
                          for t in np.linspace(0.0, 12.0, 13)])
        assert trace.std() > 0.05 * np.abs(trace).max()   # Rabi beats
        late = float(pump_probe_values(dec, kernel, w_up, 8.0e4)[0])
        assert abs(late) < 1e-6 * np.abs(trace).max()

    def test_output_is_real(self, dye_system, dye_dec, dye_kernel):
        axis = Axis(12000.0, 19000.0, 64, dye_system.axis_offset)
        grid = pump_probe(dye_system, dye_dec, dye_kernel, axis, 30.0)
        assert np.all(grid.values.imag == 0.0)

    def test_negative_waiting_time_rejected(self, dye_system, dye_dec, dye_kernel):
        axis = Axis(12000.0, 19000.0, 16, dye_system.axis_offset)
        with pytest.raises(NegativeWaitingTime):
            pump_probe(dye_system, dye_dec, dye_kernel, axis, -1.0)

    def test_identical_molecule_relabeling_invariance(self, dye_dec):
        # any molecule permutation fixes the dense propagator entries, hence
        # every literal index sum is invariant under relabeling
        rng = np.random.default_rng(5)
        perm = np.concatenate([rng.permutation(10), [10]])
        g = propagator_G(dye_dec, 55.0)
        assert np.array_equal(g[np.ix_(perm, perm)], g)
        f = propagator_fourier(dye_dec, 432.0)
        assert np.array_equal(f[np.ix_(perm, perm)], f)


class TestSlices:
    def test_zero_displacement_zero_delay_counts_molecules(self):
        sys = reference_params(lambda_hr=0.0)
        dec = decompose(build_matrix(sys))
        kernel = kernel_from_params(sys)
        report = pump_probe_slices(sys, dec, kernel, [0.0], stokes_orders=(1,))
        value = report.upper_polariton.formula[0] * 2.0 * dec.mu_up.real
        assert value == pytest.approx(10.0, rel=1e-12)

    def test_exact_values_match_grid(self):
        result = check_slices_grid()
        assert result.passed, result.line()

    def test_long_delay_decay(self, dye_system, dye_dec, dye_kernel):
        report = pump_probe_slices(dye_system, dye_dec, dye_kernel,
                                   [0.0, 40000.0], stokes_orders=(1,))
        up = report.upper_polariton
        assert abs(up.exact[1]) < 1e-4 * abs(up.exact[0])
        assert abs(up.formula[1]) < 1e-4 * abs(up.formula[0])

    def test_formula_tracks_exact_up_to_constant(self, dye_system, dye_dec, dye_kernel):
        t_list = [0.0, 60.0, 130.0, 260.0, 420.0, 700.0]
        report = pump_probe_slices(dye_system, dye_dec, dye_kernel, t_list, stokes_orders=(1,))
        assert report.upper_polariton.residual < 0.01
        assert report.stokes[1].residual < 0.05
        # the fitted constant is the kernel-side normalization left out of the
        # resonance form: 4 * exp(-lambda^2)
        assert report.upper_polariton.fitted_scale == pytest.approx(4 * math.exp(-1.0), rel=1e-2)

    def test_negative_waiting_time_rejected(self, dye_system, dye_dec, dye_kernel):
        with pytest.raises(NegativeWaitingTime):
            pump_probe_slices(dye_system, dye_dec, dye_kernel, [-10.0])
