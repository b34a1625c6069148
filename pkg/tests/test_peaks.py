import json

import numpy as np
import pytest

from polariton2dcs import Axis, MalformedGrid, SpectrumGrid
from polariton2dcs.peaks import (
    classify_2d,
    find_peaks_1d,
    find_peaks_2d,
    grid_peak_report,
    load_grid,
)


def lorentzian(x, center, width):
    return width / (width**2 + (x - center) ** 2)


class TestFindPeaks1D:
    def test_constant_grid_has_no_peaks(self):
        x = np.linspace(0.0, 10.0, 101)
        assert find_peaks_1d(x, np.ones_like(x)) == []

    def test_lorentzian_position_refined(self):
        x = np.linspace(-50.0, 50.0, 301)
        v = lorentzian(x, 3.7, 4.0)
        peaks = find_peaks_1d(x, v)
        assert len(peaks) == 1
        assert abs(peaks[0].refined_position - 3.7) < 0.1
        assert peaks[0].height == pytest.approx(0.25, rel=0.02)

    def test_relative_height_floor(self):
        x = np.linspace(0.0, 100.0, 501)
        v = lorentzian(x, 20.0, 2.0) + 0.01 * lorentzian(x, 80.0, 2.0)
        assert len(find_peaks_1d(x, v, min_rel_height=0.05)) == 1
        assert len(find_peaks_1d(x, v, min_rel_height=0.0)) == 2

    def test_sorted_by_height(self):
        x = np.linspace(0.0, 100.0, 501)
        v = 0.5 * lorentzian(x, 20.0, 2.0) + lorentzian(x, 70.0, 2.0)
        peaks = find_peaks_1d(x, v)
        assert peaks[0].height > peaks[1].height


class TestFindPeaks2D:
    def test_constant_grid_has_no_peaks(self):
        v = np.ones((40, 40))
        ax = np.linspace(0.0, 1.0, 40)
        assert find_peaks_2d(ax, ax, v) == []

    def test_classification_tags(self):
        assert classify_2d(17313.0, 14913.0, 1200.0, 40.0) == ("cross", 2)
        assert classify_2d(14313.0, 14320.0, 1200.0, 40.0) == ("diagonal", 0)
        assert classify_2d(17913.0, 14913.0, 1200.0, 40.0) == ("coherence", None)

    def test_synthetic_cross_peak(self):
        ax1 = np.linspace(14000.0, 18000.0, 161)
        ax2 = np.linspace(14000.0, 18000.0, 161)
        g1, g2 = np.meshgrid(ax1, ax2, indexing="ij")
        v = (lorentzian(g1, 17000.0, 60.0) * lorentzian(g2, 15800.0, 60.0)
             + 0.5 * lorentzian(g1, 15000.0, 60.0) * lorentzian(g2, 15000.0, 60.0))
        peaks = find_peaks_2d(ax1, ax2, v, omega_v=1200.0, min_rel_height=0.02)
        assert len(peaks) == 2
        top = peaks[0]
        assert abs(top.refined_position[0] - 17000.0) < 15.0
        assert abs(top.refined_position[1] - 15800.0) < 15.0
        assert top.classification == "cross" and top.k_tag == 1
        assert peaks[1].classification == "diagonal"


class TestGridIO:
    def make_grid(self, two_dimensional):
        ax1 = Axis(100.0, 200.0, 6, offset=50.0, label="omega1")
        if two_dimensional:
            ax2 = Axis(300.0, 400.0, 5, offset=50.0, label="omega3")
            values = (np.arange(30, dtype=float) + 1j * np.arange(30)).reshape(6, 5)
            return SpectrumGrid("twod", ax1, ax2, 250.0, values, {"omega_v": 1200.0})
        values = np.linspace(0.0, 1.0, 6).astype(complex)
        return SpectrumGrid("absorption", ax1, None, None, values, {"omega_v": 1200.0})

    @pytest.mark.parametrize("two_dimensional", [False, True])
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_roundtrip(self, tmp_path, two_dimensional, fmt):
        from polariton2dcs.cli import write_csv, write_json_grid

        grid = self.make_grid(two_dimensional)
        path = tmp_path / f"grid.{fmt}"
        (write_csv if fmt == "csv" else write_json_grid)(path, grid)
        loaded = load_grid(path)
        assert loaded.signal == grid.signal
        assert loaded.axis1.count == grid.axis1.count
        assert np.allclose(loaded.axis1.values(), grid.axis1.values())
        if two_dimensional:
            assert np.allclose(loaded.values, grid.values)
            assert loaded.t_wait == 250.0
        else:
            assert np.allclose(loaded.values.real, grid.values.real)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedGrid):
            load_grid(tmp_path / "nope.csv")

    def test_garbage_csv(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,grid\n1,2\n")
        with pytest.raises(MalformedGrid):
            load_grid(bad)

    def test_garbage_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"signal\": \"absorption\"}")
        with pytest.raises(MalformedGrid):
            load_grid(bad)

    def test_peak_report_dicts(self, tmp_path):
        from polariton2dcs.cli import write_csv

        ax = Axis(0.0, 100.0, 201)
        x = ax.values()
        grid = SpectrumGrid("absorption", ax, None, None,
                            lorentzian(x, 40.0, 3.0).astype(complex), {})
        path = tmp_path / "grid.csv"
        write_csv(path, grid)
        report = grid_peak_report(load_grid(path))
        assert len(report) == 1
        assert report[0]["omega"] == pytest.approx(40.0, abs=0.5)
