import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from cmcurves.storage import FileStorage, MemoryStorage, dumps, get_storage_backend, to_jsonable


class TestSerialisation:
    def test_complex_values(self):
        assert to_jsonable({"z": 1 + 2j, "zs": np.array([1j])}) == {"z": [1.0, 2.0], "zs": [[0.0, 1.0]]}

    def test_numpy_scalars(self):
        out = to_jsonable([np.float64(0.5), np.int64(3), np.bool_(True), np.complex128(2j)])
        assert out == [0.5, 3, True, [0.0, 2.0]]
        assert type(out[1]) is int

    def test_dumps_is_stable(self):
        assert dumps({"b": 1, "a": 2}) == dumps({"a": 2, "b": 1})
        assert dumps({}).endswith("\n")


class TestFileStorage:
    def test_json(self, tmp_path):
        store = FileStorage(tmp_path / "out")
        path = store.write_json("report.json", {"value": 1 + 1j})
        assert json.loads(Path(path).read_text()) == {"value": [1.0, 1.0]}
        assert store.read_json("report.json") == {"value": [1.0, 1.0]}
        assert store.read_json("missing.json") is None

    def test_table(self, tmp_path):
        store = FileStorage(tmp_path)
        path = store.write_table("t.csv", pd.DataFrame({"x": [0.1, 1 / 3]}))
        back = pd.read_csv(path, float_precision="round_trip")
        assert back["x"].iloc[1] == 1 / 3

    def test_table_from_records(self, tmp_path):
        store = FileStorage(tmp_path)
        path = store.write_table("nested/t.csv", [{"a": 1}, {"a": 2}])
        assert list(pd.read_csv(path)["a"]) == [1, 2]

    def test_refuses_escaping_paths(self, tmp_path):
        store = FileStorage(tmp_path / "out")
        with pytest.raises(ValueError):
            store.write_json("../elsewhere.json", {})


class TestMemoryStorage:
    def test_round_trip(self):
        store = MemoryStorage()
        store.write_json("r.json", {"x": 1j})
        store.write_table("t.csv", [{"a": 1}])
        assert store.read_json("r.json") == {"x": [0.0, 1.0]}
        assert store.documents["t.csv"].splitlines() == ["a", "1"]


def test_backend_factory(tmp_path):
    assert isinstance(get_storage_backend("file", tmp_path), FileStorage)
    assert isinstance(get_storage_backend("Memory", tmp_path), MemoryStorage)
    with pytest.raises(ValueError):
        get_storage_backend("s3", tmp_path)
