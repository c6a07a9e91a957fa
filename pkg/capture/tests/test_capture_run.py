"""Capture pipeline: model construction, module matching, and hook recording.

File contents are checked with a minimal struct-based parser local to this
module, so the capture package's output is verified without going through
its own writer a second time.
"""

import struct
from pathlib import Path

import numpy as np
import pytest
import torch
from torch import nn

from actd_capture import (
    DEFAULT_FILTERS,
    KIND_ACTIVATION,
    KIND_WEIGHT,
    CaptureConfig,
    CaptureSummary,
    DecoderConfig,
    FirstInputRecorder,
    ModelLoadError,
    NoModulesMatchedError,
    build_tiny,
    capture_run,
    load_model,
    match_linear_modules,
    save_checkpoint,
)
from actd_capture.run import _record_name, _token_ids

CFG = DecoderConfig()


def read_raw(path):
    """Independent ACTD parser: (name, kind, matrix) per record, in file order."""
    data = Path(path).read_bytes()
    magic, version, flags, count = struct.unpack_from("<4sHHI", data, 0)
    assert (magic, version, flags) == (b"ACTD", 1, 0)
    offset, records = 12, []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        dtype_code, kind_code, rows, cols = struct.unpack_from("<BBII", data, offset)
        offset += 10
        item = {0: "<f4", 1: "<f8"}[dtype_code]
        size = rows * cols * {0: 4, 1: 8}[dtype_code]
        matrix = np.frombuffer(data[offset : offset + size], dtype=item)
        offset += size
        records.append((name, kind_code, matrix.reshape(rows, cols)))
    assert offset == len(data), "trailing bytes after final record"
    return records


def capture(tmp_path, **overrides):
    options = {"model": "tiny:0", "seq_len": 16}
    options.update(overrides)
    out = tmp_path / "cap.actd"
    summary = capture_run(CaptureConfig(out_path=str(out), **options))
    return summary, read_raw(out)


class TestModel:
    def test_config_rejects_indivisible_heads(self):
        with pytest.raises(ValueError, match="divisible"):
            DecoderConfig(hidden=64, heads=5)

    def test_config_rejects_nonpositive_fields(self):
        with pytest.raises(ValueError, match="positive int"):
            DecoderConfig(layers=0)

    def test_build_is_deterministic_per_seed(self):
        first, second = build_tiny(7), build_tiny(7)
        for key, value in first.state_dict().items():
            torch.testing.assert_close(value, second.state_dict()[key], rtol=0, atol=0)
        other = build_tiny(8)
        assert any(
            not torch.equal(value, other.state_dict()[key])
            for key, value in first.state_dict().items()
        )

    def test_forward_shape_and_finiteness(self):
        model = build_tiny(0)
        ids = torch.arange(10)[None, :] % CFG.vocab_size
        with torch.no_grad():
            hidden = model(ids)
        assert hidden.shape == (1, 10, CFG.hidden)
        assert torch.isfinite(hidden).all()

    def test_checkpoint_round_trip(self, tmp_path):
        model = build_tiny(3)
        path = tmp_path / "tiny.pt"
        save_checkpoint(model, path)
        restored = load_model(str(path))
        assert restored.config == model.config
        for key, value in model.state_dict().items():
            torch.testing.assert_close(
                value, restored.state_dict()[key], rtol=0, atol=0
            )

    def test_tiny_spec_with_seed(self):
        spec, direct = load_model("tiny:5"), build_tiny(5)
        for key, value in direct.state_dict().items():
            torch.testing.assert_close(value, spec.state_dict()[key], rtol=0, atol=0)

    def test_bad_seed_spec_rejected(self):
        with pytest.raises(ModelLoadError, match="tiny"):
            load_model("tiny:abc")

    def test_missing_checkpoint_rejected(self, tmp_path):
        with pytest.raises(ModelLoadError):
            load_model(str(tmp_path / "ghost.pt"))

    def test_non_checkpoint_file_rejected(self, tmp_path):
        path = tmp_path / "notes.txt"
        path.write_text("not a checkpoint")
        with pytest.raises(ModelLoadError, match="could not load"):
            load_model(str(path))


class TestMatching:
    def test_record_names_strip_module_paths(self):
        assert _record_name("blocks.0.attn.k_proj") == "layer.0.k_proj"
        assert _record_name("blocks.1.mlp.down_proj") == "layer.1.down_proj"
        assert _record_name("embed") == "embed"

    def test_default_filters_select_four_linears_per_layer(self):
        matched = match_linear_modules(build_tiny(0), DEFAULT_FILTERS)
        assert [name for name, _ in matched] == [
            f"layer.{index}.{leaf}"
            for index in range(CFG.layers)
            for leaf in ("k_proj", "o_proj", "gate_proj", "down_proj")
        ]
        assert all(isinstance(module, nn.Linear) for _, module in matched)

    def test_glob_matches_every_projection(self):
        matched = match_linear_modules(build_tiny(0), ("*_proj",))
        assert len(matched) == 7 * CFG.layers

    def test_qualified_pattern_matches_record_names(self):
        matched = match_linear_modules(build_tiny(0), ("layer.1.*",))
        names = [name for name, _ in matched]
        assert len(names) == 7
        assert all(name.startswith("layer.1.") for name in names)

    def test_no_match_returns_empty(self):
        assert match_linear_modules(build_tiny(0), ("conv*",)) == []


class TestTokenIds:
    def cfg(self, **overrides):
        options = {"model": "tiny", "out_path": "unused.actd"}
        options.update(overrides)
        return CaptureConfig(**options)

    def test_text_tokenizes_as_cycled_utf8_bytes(self):
        ids = _token_ids(self.cfg(text="ab", seq_len=5), vocab_size=256)
        assert ids.tolist() == [97, 98, 97, 98, 97]

    def test_explicit_ids_cycle(self):
        ids = _token_ids(self.cfg(token_ids=(3, 1), seq_len=4), vocab_size=256)
        assert ids.tolist() == [3, 1, 3, 1]

    def test_explicit_ids_truncate(self):
        ids = _token_ids(self.cfg(token_ids=(5, 6, 7), seq_len=2), vocab_size=256)
        assert ids.tolist() == [5, 6]

    def test_out_of_range_ids_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            _token_ids(self.cfg(token_ids=(300,), seq_len=2), vocab_size=256)


class TestConfigValidation:
    def test_empty_filters_rejected(self):
        with pytest.raises(ValueError, match="filters"):
            CaptureConfig(model="tiny", out_path="x.actd", filters=())

    def test_blank_pattern_rejected(self):
        with pytest.raises(ValueError, match="filters"):
            CaptureConfig(model="tiny", out_path="x.actd", filters=("k_proj", ""))

    def test_zero_seq_len_rejected(self):
        with pytest.raises(ValueError, match="seq_len"):
            CaptureConfig(model="tiny", out_path="x.actd", seq_len=0)

    def test_empty_token_ids_rejected(self):
        with pytest.raises(ValueError, match="token_ids"):
            CaptureConfig(model="tiny", out_path="x.actd", token_ids=())

    def test_no_token_source_rejected(self):
        with pytest.raises(ValueError, match="text or token_ids"):
            CaptureConfig(model="tiny", out_path="x.actd", text="")


class TestCaptureRun:
    def test_default_run_inventory(self, tmp_path):
        summary, records = capture(tmp_path)
        # 2 layers × 4 filtered linears × (activation + weight)
        assert isinstance(summary, CaptureSummary)
        assert summary.record_count == len(records) == 2 * CFG.layers * len(
            DEFAULT_FILTERS
        )
        assert summary.bytes_written == Path(summary.path).stat().st_size
        assert summary.record_names == tuple(name for name, _, _ in records)
        kinds = [kind for _, kind, _ in records]
        assert kinds == [KIND_ACTIVATION, KIND_WEIGHT] * (len(records) // 2)

    def test_shapes_follow_decoder_dimensions(self, tmp_path):
        _, records = capture(tmp_path, seq_len=16)
        shapes = {
            (name, kind): matrix.shape for name, kind, matrix in records
        }
        hidden, inter = CFG.hidden, CFG.intermediate
        for index in range(CFG.layers):
            for leaf, a_cols, w_shape in (
                ("k_proj", hidden, (hidden, hidden)),
                ("o_proj", hidden, (hidden, hidden)),
                ("gate_proj", hidden, (hidden, inter)),
                ("down_proj", inter, (inter, hidden)),
            ):
                name = f"layer.{index}.{leaf}"
                assert shapes[(name, KIND_ACTIVATION)] == (16, a_cols)
                assert shapes[(name, KIND_WEIGHT)] == w_shape

    def test_weights_are_module_transposes(self, tmp_path):
        _, records = capture(tmp_path, model="tiny:3")
        model = build_tiny(3)
        stored = {
            name: matrix for name, kind, matrix in records if kind == KIND_WEIGHT
        }
        np.testing.assert_array_equal(
            stored["layer.0.k_proj"],
            model.blocks[0].attn.k_proj.weight.detach().T.numpy(),
        )
        np.testing.assert_array_equal(
            stored["layer.1.down_proj"],
            model.blocks[1].mlp.down_proj.weight.detach().T.numpy(),
        )

    def test_activation_matches_recomputed_module_input(self, tmp_path):
        # Independent route: layer 0's k_proj input is the first block's
        # attention norm applied to the embeddings.
        summary, records = capture(tmp_path, model="tiny:2")
        cfg = CaptureConfig(model="tiny:2", out_path=summary.path, seq_len=16)
        model = build_tiny(2)
        ids = _token_ids(cfg, CFG.vocab_size)
        with torch.no_grad():
            expected = model.blocks[0].attn_norm(model.embed(ids[None, :]))
        stored = next(
            matrix
            for name, kind, matrix in records
            if name == "layer.0.k_proj" and kind == KIND_ACTIVATION
        )
        np.testing.assert_array_equal(stored, expected.reshape(16, -1).numpy())

    def test_single_filter_keeps_one_pair_per_layer(self, tmp_path):
        _, records = capture(tmp_path, filters=("down_proj",))
        assert [name for name, _, _ in records] == [
            "layer.0.down_proj",
            "layer.0.down_proj",
            "layer.1.down_proj",
            "layer.1.down_proj",
        ]

    def test_same_config_writes_identical_bytes(self, tmp_path):
        first = capture_run(
            CaptureConfig(model="tiny:4", out_path=str(tmp_path / "a.actd"))
        )
        second = capture_run(
            CaptureConfig(model="tiny:4", out_path=str(tmp_path / "b.actd"))
        )
        assert Path(first.path).read_bytes() == Path(second.path).read_bytes()

    def test_half_precision_model_widens_to_f32(self, tmp_path):
        model = build_tiny(1).half()
        checkpoint = tmp_path / "half.pt"
        save_checkpoint(model, checkpoint)
        out = tmp_path / "half.actd"
        capture_run(CaptureConfig(model=str(checkpoint), out_path=str(out), seq_len=8))
        for _, _, matrix in read_raw(out):
            assert matrix.dtype == np.dtype("<f4")
            assert np.isfinite(matrix).all()

    def test_unmatched_filters_raise(self, tmp_path):
        with pytest.raises(NoModulesMatchedError, match="no linear modules matched"):
            capture_run(
                CaptureConfig(
                    model="tiny", out_path=str(tmp_path / "x.actd"), filters=("conv*",)
                )
            )

    def test_model_load_failure_propagates(self, tmp_path):
        with pytest.raises(ModelLoadError):
            capture_run(
                CaptureConfig(
                    model=str(tmp_path / "ghost.pt"), out_path=str(tmp_path / "x.actd")
                )
            )


class TestFirstInputRecorder:
    def test_keeps_first_input_only(self):
        recorder = FirstInputRecorder()
        module = nn.Linear(4, 4, bias=False)
        handle = module.register_forward_pre_hook(recorder.hook_for("m"))
        try:
            first, second = torch.ones(1, 4), torch.full((1, 4), 2.0)
            module(first)
            module(second)
        finally:
            handle.remove()
        torch.testing.assert_close(recorder.inputs["m"], first, rtol=0, atol=0)

    def test_stored_input_is_detached_copy(self):
        recorder = FirstInputRecorder()
        module = nn.Linear(4, 4, bias=False)
        handle = module.register_forward_pre_hook(recorder.hook_for("m"))
        try:
            source = torch.ones(1, 4, requires_grad=True)
            module(source)
        finally:
            handle.remove()
        stored = recorder.inputs["m"]
        assert not stored.requires_grad
        with torch.no_grad():
            source.add_(1.0)
        torch.testing.assert_close(stored, torch.ones(1, 4), rtol=0, atol=0)
