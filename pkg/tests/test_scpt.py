"""SCPT container: byte-stability, shape padding, corruption handling."""

import numpy as np
import pytest

from scopenet.scpt import ContainerError, load_tensors, save_tensors


class TestRoundTrip:
    def test_serialize_deserialize_bytes_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {
            "alpha.weight": rng.standard_normal((2, 3, 3, 3))
            .astype(np.float32),
            "alpha.bias": rng.standard_normal(2).astype(np.float32),
            "beta": rng.standard_normal((1, 9, 4, 4)).astype(np.float64),
        }
        first = tmp_path / "a.scpt"
        second = tmp_path / "b.scpt"
        save_tensors(first, tensors)
        save_tensors(second, load_tensors(first))
        assert first.read_bytes() == second.read_bytes()

    def test_values_and_dtypes_survive(self, tmp_path):
        rng = np.random.default_rng(1)
        tensors = {"x": rng.standard_normal((4, 2, 1, 5)).astype(np.float64)}
        path = tmp_path / "t.scpt"
        save_tensors(path, tensors)
        back = load_tensors(path)
        assert back["x"].dtype == np.float64
        np.testing.assert_array_equal(back["x"], tensors["x"])

    def test_low_rank_shapes_padded_with_ones(self, tmp_path):
        path = tmp_path / "t.scpt"
        save_tensors(path, {"bias": np.arange(5, dtype=np.float32)})
        back = load_tensors(path)
        assert back["bias"].shape == (5, 1, 1, 1)
        np.testing.assert_array_equal(back["bias"].reshape(-1),
                                      np.arange(5, dtype=np.float32))

    def test_insertion_order_preserved(self, tmp_path):
        path = tmp_path / "t.scpt"
        names = [f"p{i}" for i in range(6)]
        save_tensors(path, {n: np.zeros(1, np.float32) for n in names})
        assert list(load_tensors(path)) == names


class TestErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.scpt"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ContainerError, match="not an SCPT"):
            load_tensors(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.scpt"
        save_tensors(path, {"x": np.ones((2, 2), np.float32)})
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(ContainerError, match="truncated"):
            load_tensors(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "t.scpt"
        save_tensors(path, {"x": np.ones(1, np.float32)})
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerError, match="version"):
            load_tensors(path)

    def test_integer_dtype_rejected(self, tmp_path):
        with pytest.raises(ContainerError, match="dtype"):
            save_tensors(tmp_path / "t.scpt", {"x": np.ones(3, np.int32)})

    def test_five_dims_rejected(self, tmp_path):
        with pytest.raises(ContainerError, match="4 dims"):
            save_tensors(tmp_path / "t.scpt",
                         {"x": np.ones((1, 1, 1, 1, 1), np.float32)})
