import io
import json
import warnings

import numpy as np
import pytest

from fieldsim.errors import InvalidParameterError
from fieldsim.report import (
    CSV_HEADER,
    csv_line,
    ndjson_line,
    read_rows_csv,
    render_heatmaps,
    write_rows,
)
from fieldsim.sweep import (
    SimSettings,
    SweepRow,
    SweepSpec,
    compute_validation,
    run_sweep,
    sweep_points,
)

FAST_SIM = SimSettings(
    rings=1, iterations=6, target_count=800, region_radius=60.0, root_seed=3)


class TestSweepPoints:
    def test_grid_order_and_count(self):
        spec = SweepSpec(mode="grid", arm_steps=2, ratio_steps=3,
                         pitch_steps=2, arm_min=8.0, arm_max=9.0)
        pts = sweep_points(spec)
        assert pts.shape == (12, 3)
        assert pts[0].tolist() == [8.0, 1.0, 24.6]
        # pitch varies fastest, then ratio, then arm
        assert pts[1].tolist() == [8.0, 1.0, 35.0]
        assert pts[2][1] == 1.5
        assert pts[6][0] == 9.0

    def test_random_within_ranges_and_deterministic(self):
        spec = SweepSpec(mode="random", count=50, seed=9)
        pts = sweep_points(spec)
        assert pts.shape == (50, 3)
        assert np.all((pts[:, 0] >= 7.25) & (pts[:, 0] <= 14.5))
        assert np.all((pts[:, 1] >= 1.0) & (pts[:, 1] <= 2.0))
        assert np.all((pts[:, 2] >= 24.6) & (pts[:, 2] <= 35.0))
        assert np.array_equal(pts, sweep_points(spec))

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(arm_min=10.0, arm_max=9.0)
        with pytest.raises(InvalidParameterError):
            SweepSpec(mode="spiral")


class TestRunSweep:
    def test_grid_2x2_four_rows(self):
        spec = SweepSpec(mode="grid", arm_steps=1, ratio_steps=2,
                         pitch_steps=2, arm_min=8.25, arm_max=8.25)
        rows = run_sweep(spec, FAST_SIM, method="analytic")
        assert len(rows) == 4
        assert all(r.method == "analytic" for r in rows)
        assert all(r.wilson_lower is None for r in rows)

    def test_both_methods_interleaved(self):
        spec = SweepSpec(mode="random", count=3, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows = run_sweep(spec, FAST_SIM, method="both")
        assert len(rows) == 6
        assert [r.method for r in rows] == ["analytic", "mc"] * 3
        for a, m in zip(rows[::2], rows[1::2]):
            assert (a.arm, a.ratio, a.pitch) == (m.arm, m.ratio, m.pitch)
            assert m.wilson_lower is not None and m.seed is not None

    def test_workers_identical_rows(self):
        spec = SweepSpec(mode="random", count=4, seed=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r1 = run_sweep(spec, FAST_SIM, method="mc", workers=1)
            r2 = run_sweep(spec, FAST_SIM, method="mc", workers=2)
        assert r1 == r2

    def test_unknown_method(self):
        with pytest.raises(InvalidParameterError):
            run_sweep(SweepSpec(count=1), FAST_SIM, method="quantum")


class TestValidation:
    def test_self_comparison_is_trivial(self):
        rows = []
        rng = np.random.default_rng(4)
        for k in range(10):
            arm, ratio, pitch = 8.0 + k * 0.5, 1.1, 30.0
            p = float(rng.random())
            rows.append(SweepRow(arm, ratio, pitch, "analytic", p))
            rows.append(SweepRow(arm, ratio, pitch, "mc", p, 0.0, 1.0, 1))
        report = compute_validation(rows)
        assert report.residual_mean == 0.0
        assert report.residual_variance == 0.0
        assert report.rank_correlation == 1.0

    def test_monotone_maps_rank_one(self):
        rows = []
        for k in range(8):
            v = 0.01 * (k + 1)
            rows.append(SweepRow(8.0 + k, 1.0, 30.0, "analytic", v))
            rows.append(SweepRow(8.0 + k, 1.0, 30.0, "mc", v * 3 + 0.05,
                                 0.0, 1.0, 1))
        report = compute_validation(rows)
        assert report.rank_correlation == pytest.approx(1.0)
        assert abs(report.residual_mean) < 0.05

    def test_misaligned_rows_rejected(self):
        rows = [
            SweepRow(8.0, 1.0, 30.0, "analytic", 0.1),
            SweepRow(9.0, 1.0, 30.0, "mc", 0.2, 0.0, 1.0, 1),
        ]
        with pytest.raises(InvalidParameterError):
            compute_validation(rows)


class TestReportFormats:
    def test_csv_header_and_digits(self):
        row = SweepRow(8.25, 4.0 / 3.0, 25.6, "mc", 1.0 / 3.0,
                       0.123456789012345, 0.5, 42)
        line = csv_line(row)
        cells = line.split(",")
        assert len(cells) == 9
        assert cells[0] == "1"
        assert cells[5] == "0.333333333333"  # 12 significant digits
        assert cells[8] == "42"

    def test_csv_round_trip(self, tmp_path):
        rows = [
            SweepRow(8.25, 1.0, 25.6, "analytic", 0.25),
            SweepRow(8.25, 1.0, 25.6, "mc", 0.125, 0.0625, 0.25, 7),
        ]
        path = tmp_path / "rows.csv"
        with open(path, "w") as fh:
            write_rows(fh, rows)
        text = path.read_text().splitlines()
        assert text[0] == CSV_HEADER
        assert read_rows_csv(path) == rows

    def test_ndjson_lines_parse(self):
        row = SweepRow(8.25, 1.5, 25.6, "mc", 0.125, 0.0625, 0.25, 7)
        obj = json.loads(ndjson_line(row))
        assert obj["schema_version"] == 1
        assert obj["method"] == "mc"
        assert obj["probability"] == 0.125
        analytic = json.loads(ndjson_line(SweepRow(8.0, 1.0, 30.0,
                                                   "analytic", 0.5)))
        assert analytic["wilson_lower"] is None

    def test_unknown_format(self):
        with pytest.raises(InvalidParameterError):
            write_rows(io.StringIO(), [], fmt="xml")

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InvalidParameterError):
            read_rows_csv(path)


class TestHeatmaps:
    def grid_rows(self):
        rows = []
        for arm in (8.0, 9.0):
            for k, ratio in enumerate((1.0, 1.5, 2.0)):
                for m, pitch in enumerate((25.0, 30.0)):
                    rows.append(SweepRow(
                        arm, ratio, pitch, "mc",
                        0.1 * (k + 1) + 0.01 * m, 0.0, 1.0, 1))
        return rows

    def test_renders_expected_files(self, tmp_path):
        paths = render_heatmaps(self.grid_rows(), tmp_path)
        names = sorted(p.name for p in paths)
        assert names == ["heatmap_mc_arm8.png", "heatmap_mc_arm9.png"]
        for p in paths:
            assert p.stat().st_size > 1000

    def test_pure_function_of_rows(self, tmp_path):
        rows = self.grid_rows()
        first = render_heatmaps(rows, tmp_path / "a")
        second = render_heatmaps(rows, tmp_path / "b")
        for p1, p2 in zip(first, second):
            assert p1.read_bytes() == p2.read_bytes()

    def test_incomplete_grid_rejected(self, tmp_path):
        rows = self.grid_rows()[:-1]
        with pytest.raises(InvalidParameterError):
            render_heatmaps(rows, tmp_path)
