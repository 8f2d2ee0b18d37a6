# Standard library imports
import io
import json
import struct

# Third-party imports
import numpy as np
import pytest

# Local application imports
from src.instrumentation.checkpoint import (
    MAGIC,
    BadMagicError,
    CheckpointError,
    ShapeMismatchError,
    TrainingState,
    VersionMismatchError,
    load_checkpoint,
    read_arrays,
    save_checkpoint,
    write_arrays,
)
from src.instrumentation.metrics import MetricsRecord, log_metrics, read_metrics
from src.instrumentation.op_counter import (
    count_forward_ops,
    fwht_ops,
    layer_ops,
    summarize_ops,
    total_ops,
)
from src.instrumentation.reference import reference_forward
from src.models.builder import build_model
from src.models.graph import Relu
from src.models.network import forward, prepare_inputs
from src.optimizer import AdamState, adam_step


def _counts(model):
    return {c.layer: c for c in count_forward_ops(model)}


def test_first_layer_counts_dense_versus_binary():
    cnn = _counts(build_model("mnist", "convpool", "cnn", np.random.default_rng(0)))
    bwn = _counts(build_model("mnist", "convpool", "bwn", np.random.default_rng(0)))
    outputs = 6 * 28 * 28
    assert cnn["cnn.conv1"].multiplies == outputs * 36 == 169_344
    assert bwn["bwn.conv1"].multiplies == outputs
    assert bwn["bwn.conv1"].adds_subs == outputs * 35
    # The real-valued layer also adds its bias.
    assert cnn["cnn.conv1"].adds_subs == outputs * 35 + outputs


def test_dense_to_binary_ratio_is_the_filter_size():
    cnn = _counts(build_model("mnist", "allcnn", "cnn", np.random.default_rng(0)))
    bwn = _counts(build_model("mnist", "allcnn", "bwn", np.random.default_rng(0)))
    for layer, n in (("conv1", 36), ("conv2", 6 * 25), ("conv3", 12 * 16)):
        assert cnn[f"cnn.{layer}"].multiplies == n * bwn[f"bwn.{layer}"].multiplies


def test_relu_and_pooling_only_compare():
    bwn = _counts(build_model("mnist", "convpool", "bwn", np.random.default_rng(0)))
    assert bwn["bwn.relu1"].comparisons == 6 * 28 * 28
    assert bwn["bwn.relu1"].multiplies == 0
    assert bwn["bwn.pool2"].comparisons == 3 * 24 * 7 * 7
    relu = layer_ops("relu", Relu("relu"), (24, 7, 7), (24, 7, 7))
    assert (relu.comparisons, relu.multiplies, relu.adds_subs) == (1176, 0, 0)
    assert bwn["head.drop_fc"].multiplies == 0 and bwn["bwn.flatten"].adds_subs == 0


def test_binary_convpool_conv_multiplies():
    summary = summarize_ops(build_model("mnist", "convpool", "bwn", np.random.default_rng(0)))
    assert summary.conv_multiplies == 4704 + 9408 + 4704
    assert summary.multiplies == 18_816 + 1176 * 200 + 200 * 10


def test_dense_twin_costs_as_much_as_the_real_valued_network():
    bwn = summarize_ops(build_model("mnist", "convpool", "bwn", np.random.default_rng(0)))
    cnn = summarize_ops(build_model("mnist", "convpool", "cnn", np.random.default_rng(0)))
    assert bwn.dense_multiplies == cnn.multiplies
    assert bwn.multiply_reduction > 5
    assert cnn.multiply_reduction == 1


def test_hadamard_input_transform_counts():
    ops = fwht_ops((1, 32, 32))
    assert (ops.multiplies, ops.adds_subs) == (1024, 10240)
    hin = _counts(build_model("mnist", "convpool", "hin", np.random.default_rng(0)))
    assert hin["hin.fwht"].adds_subs == 10240
    assert list(hin)[0] == "hin.fwht"


def test_weighted_combiner_counts():
    model = build_model("mnist", "convpool", "bwhin-random", np.random.default_rng(0))
    combiner = _counts(model)["combiner"]
    assert (combiner.multiplies, combiner.adds_subs) == (2 * 1176, 1176 + 1)
    simple = _counts(build_model("mnist", "convpool", "bwhin-normal", np.random.default_rng(0)))
    assert (simple["combiner"].multiplies, simple["combiner"].adds_subs) == (1176, 1176)


@pytest.mark.parametrize("factory", ["tiny_bwhin", "tiny_cnn"])
def test_closed_form_counts_match_a_loop_level_execution(factory, request, rng):
    model = request.getfixturevalue(factory)()
    size = model.branches[0].input_shape[1]
    image = rng.random((1, size, size))

    logits, counters = reference_forward(model, image)
    assert counters == count_forward_ops(model)

    inputs = prepare_inputs(model, image[np.newaxis])
    expected, _ = forward(model, inputs, multiplication_free=False)
    np.testing.assert_allclose(logits, expected[0], atol=1e-10)


def _trained_state(model, rng, steps=2):
    state = TrainingState(AdamState.for_params(model.params), 0)
    for _ in range(steps):
        grads = {n: rng.normal(size=p.shape).astype(p.dtype) for n, p in model.params.items()}
        adam_step(state.adam, model.params, grads, lr=1e-3)
        state.iteration += 1
    return state


def test_checkpoint_round_trip_is_byte_identical(tmp_path, rng):
    model = build_model("mnist", "convpool", "bwhin-random", np.random.default_rng(0))
    state = _trained_state(model, rng)
    first = tmp_path / "a.bwhn"
    save_checkpoint(model, state, first, [0.75])

    restored, restored_state, meta = load_checkpoint(first)
    assert meta["variant"] == "bwhin-random" and meta["dataset"] == "mnist"
    assert restored_state.iteration == 2 and restored_state.adam.t == 2
    for name in model.params:
        np.testing.assert_array_equal(restored.params[name], model.params[name])
        np.testing.assert_array_equal(restored_state.adam.m[name], state.adam.m[name])
    assert restored.combiner.value == model.combiner.value

    second = tmp_path / "b.bwhn"
    save_checkpoint(restored, restored_state, second, meta["keep_probs"])
    assert first.read_bytes() == second.read_bytes()


def test_checkpoint_does_not_fit_another_dataset(tmp_path, rng):
    model = build_model("mnist", "convpool", "bwn", np.random.default_rng(0))
    path = tmp_path / "mnist.bwhn"
    save_checkpoint(model, _trained_state(model, rng, steps=0), path, [0.75])
    cifar = build_model("cifar10", "convpool", "bwn", np.random.default_rng(0))
    with pytest.raises(ShapeMismatchError):
        load_checkpoint(path, cifar)


def test_checkpoint_shape_mismatch_on_same_names(tmp_path, rng):
    model = build_model("mnist", "convpool", "bwn", np.random.default_rng(0))
    path = tmp_path / "mnist.bwhn"
    save_checkpoint(model, _trained_state(model, rng, steps=0), path, [0.75])
    arrays = read_arrays(path)
    arrays["param/head.fc2.b"] = np.zeros(9, dtype=np.float32)
    write_arrays(path, arrays)
    with pytest.raises(ShapeMismatchError, match="head.fc2.b"):
        load_checkpoint(path)


def test_container_header_checks(tmp_path):
    path = tmp_path / "bad.bwhn"
    path.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(BadMagicError):
        read_arrays(path)
    path.write_bytes(MAGIC + struct.pack("<II", 2, 0))
    with pytest.raises(VersionMismatchError):
        read_arrays(path)

    write_arrays(path, {"x": np.arange(6, dtype=np.int64).reshape(2, 3)})
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    path.write_bytes(raw[:-5])
    with pytest.raises(CheckpointError, match="truncated"):
        read_arrays(path)


def test_container_keeps_dtypes_and_shapes(tmp_path):
    arrays = {
        "f32": np.ones((2, 1, 3), dtype=np.float32),
        "f64": np.array(2.5),
        "u8": np.arange(4, dtype=np.uint8),
    }
    write_arrays(tmp_path / "x.bwhn", arrays)
    loaded = read_arrays(tmp_path / "x.bwhn")
    assert list(loaded) == ["f32", "f64", "u8"]
    for name, value in arrays.items():
        assert loaded[name].dtype == value.dtype and loaded[name].shape == value.shape
    with pytest.raises(ValueError, match="Unsupported array dtype"):
        write_arrays(tmp_path / "y.bwhn", {"c": np.ones(2, dtype=np.complex64)})


def test_metrics_append_one_line_per_record(tmp_path):
    path = tmp_path / "metrics.jsonl"
    log_metrics(MetricsRecord(100, "train", 0.31, 0.9, 1000, 2000, 1.5), path)
    log_metrics(MetricsRecord(100, "test", 0.28, 0.9888, 1000, 2000, 1.7), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[1])["accuracy"] == 0.9888
    records = read_metrics(path)
    assert [r.split for r in records] == ["train", "test"]
    assert records[0].mults == 1000


def test_metrics_to_a_stream():
    stream = io.StringIO()
    log_metrics(MetricsRecord(1, "test", 2.3, 0.1, 5, 6), stream)
    assert json.loads(stream.getvalue())["seconds"] == 0.0


def test_invalid_metrics_records(tmp_path):
    with pytest.raises(ValueError, match="accuracy"):
        MetricsRecord(1, "test", 0.1, 1.5, 0, 0)
    with pytest.raises(ValueError, match="Unsupported split"):
        MetricsRecord(1, "validation", 0.1, 0.5, 0, 0)
    path = tmp_path / "metrics.jsonl"
    path.write_text('{"iteration": 1\n')
    with pytest.raises(ValueError, match="malformed"):
        read_metrics(path)


def test_total_ops_sums_layers():
    model = build_model("mnist", "convpool", "hin", np.random.default_rng(0))
    counters = count_forward_ops(model)
    total = total_ops(counters)
    assert total.multiplies == sum(c.multiplies for c in counters)
    assert total.comparisons == sum(c.comparisons for c in counters)
