import json
import zipfile

import numpy as np
import pytest

from roadslice.anomaly import build_autoencoder
from roadslice.errors import ModelFormatError
from roadslice.localizer import LocalizerModel, LocArchitecture
from roadslice.nn.serialize import FORMAT_VERSION, load_container, save_container


def test_container_round_trip(tmp_path):
    path = tmp_path / "model.npz"
    arrays = {"w": np.arange(6.0).reshape(2, 3), "b": np.zeros(3)}
    save_container(path, "demo", {"note": "x"}, arrays)
    manifest, back = load_container(path, expect_kind="demo")
    assert manifest["format_version"] == FORMAT_VERSION
    assert manifest["meta"]["note"] == "x"
    assert np.array_equal(back["w"], arrays["w"])


def test_kind_mismatch(tmp_path):
    path = tmp_path / "model.npz"
    save_container(path, "demo", {}, {"w": np.zeros(2)})
    with pytest.raises(ModelFormatError):
        load_container(path, expect_kind="other")


def test_version_mismatch(tmp_path):
    path = tmp_path / "model.npz"
    save_container(path, "demo", {}, {"w": np.zeros(2)})
    # bump the version field inside the stored manifest
    with np.load(path) as data:
        manifest = json.loads(bytes(data["__meta__"]).decode())
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    manifest["format_version"] = FORMAT_VERSION + 1
    payload = {"__meta__": np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8)}
    payload.update(arrays)
    np.savez(path, **payload)
    with pytest.raises(ModelFormatError, match="version"):
        load_container(path)


def test_truncated_file_is_corruption(tmp_path):
    path = tmp_path / "model.npz"
    save_container(path, "demo", {}, {"w": np.arange(100.0)})
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(ModelFormatError):
        load_container(path)


def test_not_a_container(tmp_path):
    path = tmp_path / "model.npz"
    np.savez(path, w=np.zeros(3))
    with pytest.raises(ModelFormatError, match="manifest"):
        load_container(path)


def test_autoencoder_round_trip_inference(tmp_path):
    model = build_autoencoder("dl_volume", n_stations=6, lookback=8,
                              cells=(10, 5), seed=3)
    rng = np.random.default_rng(0)
    xs = rng.uniform(size=(10, 8, 6))
    path = tmp_path / "ae.npz"
    model.save(path)
    back = type(model).load(path)
    assert np.allclose(model.reconstruct_batch(xs), back.reconstruct_batch(xs))


def test_localizer_round_trip_inference(tmp_path):
    arch = LocArchitecture(conv_filters=(4, 3), dense=(16, 8))
    model = LocalizerModel((5, 6, 6), arch, seed=1)
    rng = np.random.default_rng(0)
    xs = rng.uniform(size=(10, 5, 6, 6))
    path = tmp_path / "loc.npz"
    model.save(path)
    back = LocalizerModel.load(path)
    assert np.allclose(model.forward(xs), back.forward(xs))
