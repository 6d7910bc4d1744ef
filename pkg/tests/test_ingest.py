import numpy as np
import pytest

from semgmm import (
    DataError,
    DataSet,
    MixtureModel,
    load_csv,
    load_model,
    normalize,
    save_csv,
    save_model,
)
from semgmm.rng import substream

from conftest import make_instance


class TestCsvRoundTrip:
    def test_value_exact(self, tmp_path):
        pts = substream(111).normal(size=(30, 3)) * 1e6
        pts[0, 0] = 1.0 / 3.0
        data = DataSet(pts)
        path = tmp_path / "data.csv"
        save_csv(data, path)
        loaded = load_csv(path)
        np.testing.assert_array_equal(loaded.points, data.points)

    def test_load_simple(self, tmp_path):
        path = tmp_path / "simple.csv"
        path.write_text("1.5,2\n-3,0.25\n")
        data = load_csv(path)
        np.testing.assert_array_equal(data.points, [[1.5, 2.0], [-3.0, 0.25]])

    def test_ragged_row_named(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(path)

    def test_bad_token_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,abc\n")
        with pytest.raises(DataError, match="row 2, column 2"):
            load_csv(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "inf.csv"
        path.write_text("1,inf\n")
        with pytest.raises(DataError, match="non-finite"):
            load_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv")


class TestModelRoundTrip:
    def test_value_exact(self, tmp_path):
        truth, _, _, _ = make_instance(112, d=3, k=4, n=100)
        path = tmp_path / "model.txt"
        save_model(truth, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.weights, truth.weights)
        np.testing.assert_array_equal(loaded.means, truth.means)
        np.testing.assert_array_equal(loaded.covariances, truth.covariances)

    def test_header_format(self, tmp_path):
        m = MixtureModel([1.0], [[0.0, 0.0]], [np.eye(2)])
        path = tmp_path / "m.txt"
        save_model(m, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "gmm 1 2"
        assert lines[1].startswith("w ")
        assert lines[2].startswith("mu ")
        assert lines[3].startswith("sigma ") and lines[4].startswith("sigma ")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("mixture 1 2\n")
        with pytest.raises(DataError, match="gmm"):
            load_model(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "trunc.txt"
        path.write_text("gmm 2 1\nw 0.5\nmu 0\nsigma 1\n")
        with pytest.raises(DataError, match="lines"):
            load_model(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "badval.txt"
        path.write_text("gmm 1 1\nw 1\nmu x\nsigma 1\n")
        with pytest.raises(DataError):
            load_model(path)

    def test_invalid_params_rejected(self, tmp_path):
        path = tmp_path / "neg.txt"
        path.write_text("gmm 1 1\nw 1\nmu 0\nsigma -1\n")
        with pytest.raises(Exception, match="positive definite"):
            load_model(path)


class TestNormalize:
    def test_unit_range(self):
        pts = substream(113).normal(size=(100, 3)) * 5 + 2
        normalized, record = normalize(DataSet(pts))
        assert normalized.points.min() == 0.0
        assert normalized.points.max() == 1.0
        np.testing.assert_array_equal(
            normalized.points.max(axis=0) - normalized.points.min(axis=0), 1.0
        )
        assert not record.degenerate.any()

    def test_round_trip(self):
        pts = substream(114).normal(size=(60, 2)) * 100
        data = DataSet(pts)
        normalized, record = normalize(data)
        back = record.denormalize(normalized)
        np.testing.assert_allclose(back.points, pts, rtol=1e-14, atol=1e-12)

    def test_constant_column_kept_and_flagged(self):
        pts = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
        normalized, record = normalize(DataSet(pts))
        assert normalized.d == 2
        np.testing.assert_array_equal(normalized.points[:, 1], 0.0)
        np.testing.assert_array_equal(record.degenerate, [False, True])
        assert record.scale[1] == 1.0
        back = record.denormalize(normalized)
        np.testing.assert_array_equal(back.points[:, 1], 3.0)

    def test_record_save(self, tmp_path):
        pts = substream(115).normal(size=(20, 2))
        _, record = normalize(DataSet(pts))
        path = tmp_path / "norm.csv"
        record.save(path)
        lines = path.read_text().splitlines()
        offset = [float(v) for v in lines[0].split(",")]
        scale = [float(v) for v in lines[1].split(",")]
        np.testing.assert_array_equal(offset, record.offset)
        np.testing.assert_array_equal(scale, record.scale)
