import json

import numpy as np
import pytest
from PIL import Image

from geosep import report


class TestStretch:
    def test_range_maps_to_full_grey_scale(self, rng):
        v = rng.standard_normal((16, 16))
        pix, p = report.stretch(v)
        assert pix.dtype == np.uint8 and pix.min() == 0 and pix.max() == 255
        assert p["offset"] == v.min() and p["scale"] == pytest.approx((v.max() - v.min()) / 255)

    def test_constant_image(self):
        pix, p = report.stretch(np.full((4, 4), 3.0))
        assert np.all(pix == 0) and p["scale"] == 0.0 and p["offset"] == 3.0

    def test_explicit_limits_clip(self):
        pix, _ = report.stretch(np.array([[-1.0, 0.0, 2.0]]), 0.0, 1.0)
        assert pix.tolist() == [[0, 0, 255]]


class TestImages:
    def test_round_trip_within_half_a_level(self, tmp_path, rng):
        v = rng.standard_normal((32, 48))
        paths = report.write_image(tmp_path / "img", v, description="noise")
        assert sorted(p.suffix for p in paths) == [".json", ".pgm", ".png"]
        back = report.read_image(tmp_path / "img")
        step = (v.max() - v.min()) / 255
        assert np.abs(back - v).max() <= 0.5 * step + 1e-12
        side = json.loads((tmp_path / "img.json").read_text())
        assert side["schema_version"] == report.SCHEMA_VERSION and side["shape"] == [32, 48]

    def test_pgm_and_png_agree(self, tmp_path, rng):
        report.write_image(tmp_path / "a", rng.standard_normal((8, 8)))
        pgm = np.asarray(Image.open(tmp_path / "a.pgm"))
        png = np.asarray(Image.open(tmp_path / "a.png"))
        assert pgm.dtype == np.uint8 and np.array_equal(pgm, png)
        assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5")

    def test_orientation(self, tmp_path):
        v = np.zeros((8, 8))
        v[1, 6] = 1.0
        report.write_image(tmp_path / "o", v)
        assert np.asarray(Image.open(tmp_path / "o.png"))[1, 6] == 255

    def test_log_magnitude_is_centred(self):
        s = np.zeros((8, 8))
        s[0, 0] = 9.0
        m = report.log_magnitude(s)
        assert m[4, 4] == pytest.approx(1.0) and m.sum() == pytest.approx(1.0)


class TestTables:
    def test_csv_lf_utf8(self, tmp_path):
        p = report.write_csv(tmp_path / "t.csv", ("j", "value", "name"),
                             [(3, 0.1, "ξ"), (4, None, "x"), (5, float("inf"), "y")])
        raw = p.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode("utf-8").split("\n")
        assert lines[0] == "j,value,name" and lines[1] == "3,0.1,ξ"
        assert lines[2] == "4,,x" and lines[3] == "5,inf,y" and lines[-1] == ""

    def test_json_non_finite_to_null(self, tmp_path):
        p = report.write_json(tmp_path / "d.json", {"a": np.float64(np.nan), "b": [np.inf, 1.0],
                                                    "c": np.int64(3), "d": np.bool_(True), 4: "k"})
        doc = json.loads(p.read_text())
        assert doc["schema_version"] == report.SCHEMA_VERSION
        assert doc["a"] is None and doc["b"] == [None, 1.0] and doc["c"] == 3 and doc["d"] is True
        assert doc["4"] == "k"

    def test_unwritable_directory(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(report.OutputError):
            report.ensure_dir(blocker / "sub")


class TestFigures:
    def test_figures_written(self, tmp_path, rng):
        f = rng.standard_normal((32, 32))
        assert report.separation_figure(tmp_path / "s.png", f, f / 2, f / 2, title="t").stat().st_size > 0
        assert report.overlay_figure(tmp_path / "o.png", f, rng.random((5, 2)), rng.random((7, 2))).exists()
        assert report.decay_figure(tmp_path / "d.png", [3, 4, 5], {"r": [1.0, 0.5, None]}).exists()

    def test_empty_overlay(self, tmp_path):
        p = report.overlay_figure(tmp_path / "e.png", np.zeros((16, 16)), np.empty((0, 2)), np.empty((0, 2)))
        assert p.stat().st_size > 0
