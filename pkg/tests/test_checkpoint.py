import numpy as np
import pytest

from hnmvts.backbones import DLinearBackbone, MlpBackbone
from hnmvts.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from hnmvts.data import SeriesTable
from hnmvts.hypernet import bake, build_baseline, build_hyper
from hnmvts.numcore import Tensor


def toy_table(rng, t=64, n=3):
    return SeriesTable(Tensor(rng.standard_normal((t, n))), [f"c{i}" for i in range(n)])


@pytest.mark.parametrize("variant", ["baseline", "hyper", "baked"])
@pytest.mark.parametrize("backbone_kind", ["dlinear", "mlp"])
def test_roundtrip_bit_exact(tmp_path, rng, variant, backbone_kind):
    table = toy_table(rng)
    if backbone_kind == "dlinear":
        bb = DLinearBackbone(8, 3)
    else:
        bb = MlpBackbone(8, (6,), rng=rng)
    if variant == "baseline":
        model = build_baseline(bb, 3, 4, rng)
    else:
        model = build_hyper(bb, table, 4, rng, mode="per_channel_linear")
        if variant == "baked":
            model = bake(model)
    path = tmp_path / "model.npz"
    save_checkpoint(model, path, config_echo={"note": "test"})
    loaded, echo = load_checkpoint(path)
    assert echo == {"note": "test"}
    assert loaded.variant == model.variant
    assert loaded.channel_names == model.channel_names
    orig = model.all_arrays()
    back = loaded.all_arrays()
    assert sorted(orig) == sorted(back)
    for key in orig:
        assert (orig[key].data == back[key].data).all(), key
    x = Tensor(rng.standard_normal((3, 8)))
    np.testing.assert_array_equal(model.forward(x).data, loaded.forward(x).data)


def test_shared_mlp_head_roundtrip(tmp_path, rng):
    table = toy_table(rng)
    model = build_hyper(
        DLinearBackbone(8, 3), table, 4, rng, mode="shared_mlp", gen_hidden=(5,)
    )
    path = tmp_path / "m.npz"
    save_checkpoint(model, path)
    loaded, _ = load_checkpoint(path)
    x = Tensor(rng.standard_normal((3, 8)))
    np.testing.assert_array_equal(model.forward(x).data, loaded.forward(x).data)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="no such"):
        load_checkpoint(tmp_path / "missing.npz")


def test_wrong_version_rejected(tmp_path, rng):
    model = build_baseline(DLinearBackbone(8, 3), 2, 2, rng)
    path = tmp_path / "m.npz"
    save_checkpoint(model, path)
    import json

    bundle = dict(np.load(path, allow_pickle=False))
    meta = json.loads(bytes(bundle["meta"]).decode())
    meta["format_version"] = 99
    bundle["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **bundle)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)
