"""
Unit Tests for networks and checkpoints

Architecture construction, inference helpers, freezing, the checkpoint
hash and bit-exact save/load with every corruption path.
"""

import json
import struct

import numpy as np
import pytest

from fimguard.errors import (
    ArchitectureMismatchError,
    CorruptCheckpointError,
    DataError,
    ShapeError,
    VersionMismatchError,
)
from fimguard.models.checkpoint import MAGIC, load_checkpoint, read_manifest, save_checkpoint
from fimguard.models.network import (
    build_convnet,
    build_from_architecture,
    build_mlp,
    classify,
    predict_proba,
)


def rewrite_manifest(path, update):
    """Rewrite a checkpoint with ``update`` applied to its manifest."""
    manifest, blob = read_manifest(path)
    update(manifest)
    encoded = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path.write_bytes(MAGIC + struct.pack("<I", len(encoded)) + encoded + blob)


class TestNetworks:
    """Architectures and inference."""

    def test_mlp_probabilities_on_simplex(self, mlp, rng):
        """Softmax rows are nonnegative and sum to one."""
        p = predict_proba(mlp, rng.uniform(0, 1, (5, 6)))
        assert p.shape == (5, 3)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_convnet_shapes(self, small_convnet, rng):
        """The ConvNet maps (B, 1, H, W) to (B, K)."""
        p = predict_proba(small_convnet, rng.uniform(0, 1, (2, 1, 8, 8)))
        assert p.shape == (2, 3)

    def test_mnist_convnet_layout(self):
        """Reference layout: two conv+BN blocks then one FC layer."""
        net = build_convnet()
        kinds = [layer.kind for layer in net.layers]
        assert kinds.count("conv2d") == 2 and kinds.count("batch_norm") == 2
        assert net.final_linear().weight.shape == (32 * 7 * 7, 10)

    def test_convnet_rejects_odd_sizes(self):
        """Height and width must be divisible by four."""
        with pytest.raises(ValueError):
            build_convnet((1, 10, 10), 3)

    def test_mlp_rejects_bad_dimensions(self):
        """Zero widths and single-class outputs are rejected."""
        with pytest.raises(ValueError):
            build_mlp(4, [0], 3)
        with pytest.raises(ValueError):
            build_mlp(4, [], 1)

    def test_image_shaped_input(self, rng):
        """An MLP with an image input shape accepts (B, 1, 1, D) batches."""
        net = build_mlp(6, [4], 3, input_shape=(1, 1, 6))
        assert predict_proba(net, rng.uniform(0, 1, (2, 1, 1, 6))).shape == (2, 3)

    def test_wrong_input_size(self, mlp):
        """Inputs with the wrong number of features are a ShapeError."""
        with pytest.raises(ShapeError):
            predict_proba(mlp, np.zeros((2, 5)))

    def test_seed_determinism(self):
        """The same seed gives the same weights."""
        assert build_mlp(4, [3], 2, seed=7).checkpoint_hash() == \
            build_mlp(4, [3], 2, seed=7).checkpoint_hash()
        assert build_mlp(4, [3], 2, seed=7).checkpoint_hash() != \
            build_mlp(4, [3], 2, seed=8).checkpoint_hash()

    def test_classify_tie_breaks_low(self):
        """Equal probabilities resolve to the lowest class index."""
        net = build_mlp(2, [], 3, seed=0)
        net.final_linear().weight.data = np.zeros((2, 3))
        net.final_linear().bias.data = np.zeros(3)
        assert classify(net, np.zeros((1, 2)))[0] == 0

    @pytest.mark.parametrize("temperature", [0.25, 4.0])
    def test_classify_ignores_logit_temperature(self, mlp, rng, temperature):
        """Scaling the final layer changes probabilities but not labels."""
        x = rng.uniform(0, 1, (20, 6))
        scaled = build_mlp(6, [8], 3, seed=1).freeze()
        layer = scaled.final_linear()
        layer.weight.data = layer.weight.data * temperature
        layer.bias.data = layer.bias.data * temperature
        assert np.array_equal(classify(scaled, x), classify(mlp, x))
        assert not np.allclose(predict_proba(scaled, x), predict_proba(mlp, x))

    def test_freeze_and_unfreeze(self, mlp):
        """freeze takes every parameter off the tape."""
        assert not any(p.requires_grad for p in mlp.parameters())
        mlp.unfreeze()
        assert all(p.requires_grad for p in mlp.parameters())

    def test_parameter_names_are_unique(self, small_convnet):
        """Names are '<layer>.<param>' and unique."""
        names = [name for name, _ in small_convnet.named_parameters()]
        assert len(names) == len(set(names))
        assert "0.weight" in names

    def test_build_from_architecture(self, mlp):
        """The descriptor rebuilds an identical network."""
        assert build_from_architecture(mlp.architecture).checkpoint_hash() == mlp.checkpoint_hash()
        with pytest.raises(ValueError):
            build_from_architecture({"name": "transformer"})


class TestCheckpoint:
    """Save/load round trip and failure modes."""

    def test_round_trip_bit_identical(self, small_convnet, tmp_path, rng):
        """Loaded networks predict bit-identical probabilities."""
        for layer in small_convnet.layers:
            for name, buf in layer.buffers():
                buf += rng.uniform(0, 0.1, buf.shape)
        path = tmp_path / "model.ckpt"
        digest = save_checkpoint(small_convnet, path, train_config={"regime": "fim", "mu": 0.022})
        loaded = load_checkpoint(path)

        x = rng.uniform(0, 1, (4, 1, 8, 8))
        assert np.array_equal(predict_proba(small_convnet, x), predict_proba(loaded, x))
        assert digest == loaded.checkpoint_hash() == small_convnet.checkpoint_hash()
        assert not any(p.requires_grad for p in loaded.parameters())

    def test_manifest_contents(self, mlp, tmp_path):
        """The manifest carries version, architecture, entries and train config."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(mlp, path, train_config={"regime": "baseline"})
        manifest, blob = read_manifest(path)
        assert manifest["format_version"] == 1
        assert manifest["num_classes"] == 3
        assert manifest["train_config"] == {"regime": "baseline"}
        assert len(blob) == manifest["blob_length"] == 8 * mlp.parameter_count()

    def test_missing_file(self, tmp_path):
        """A missing checkpoint is a DataError."""
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_bad_magic(self, tmp_path):
        """Foreign files are rejected."""
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_version_mismatch(self, mlp, tmp_path):
        """Unsupported format versions are rejected."""
        path = tmp_path / "v.ckpt"
        save_checkpoint(mlp, path)
        rewrite_manifest(path, lambda m: m.update(format_version=99))
        with pytest.raises(VersionMismatchError):
            load_checkpoint(path)

    def test_architecture_mismatch(self, mlp, tmp_path):
        """Entries that do not match the declared architecture are rejected."""
        path = tmp_path / "a.ckpt"
        save_checkpoint(mlp, path)
        rewrite_manifest(path, lambda m: m["entries"].pop())
        with pytest.raises(ArchitectureMismatchError):
            load_checkpoint(path)

    def test_flipped_weight_byte(self, mlp, tmp_path):
        """A damaged weights blob fails the digest check."""
        path = tmp_path / "c.ckpt"
        save_checkpoint(mlp, path)
        raw = bytearray(path.read_bytes())
        raw[-3] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_truncated_blob(self, mlp, tmp_path):
        """A short blob is rejected."""
        path = tmp_path / "t.ckpt"
        save_checkpoint(mlp, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)
