import struct

import numpy as np
import pytest

from spiking_seizure_prediction.cnn_reference import (
    Conv1D,
    FullyConnected,
    MaxPool1D,
    NetworkSpec,
    Relu,
    TrainingConfig,
    WeightContainer,
    conv1d_forward,
    default_network_spec,
    fc_forward,
    forward,
    forward_with_activations,
    init_parameters,
    load_network_spec,
    load_weights,
    loss_and_gradients,
    maxpool1d_forward,
    network_spec_json_schema,
    predict_logits,
    relu,
    save_network_spec,
    save_weights,
    train_sgd,
)
from spiking_seizure_prediction.snn_engine import IfConfig, run_network_batch
from spiking_seizure_prediction.utils.errors import (
    DivergenceError,
    FormatError,
    InputError,
    StructuralError,
    UnsupportedVersionError,
)


def _width_conv(kernel, c_in=1, c_out=1, stride=1):
    return Conv1D(kernel_h=1, kernel_w=kernel, c_in=c_in, c_out=c_out, stride=stride)


def test_conv1d_forward_example():
    out = conv1d_forward(np.array([[[1.0, 2.0, 3.0, 4.0]]]), _width_conv(3), np.array([[[[1.0, 0.0, -1.0]]]]), [0.0])
    np.testing.assert_array_equal(out, [[[-2.0, -2.0]]])


def test_conv1d_identity_and_bias_only(rng):
    x = rng.normal(size=(1, 3, 6))
    np.testing.assert_allclose(conv1d_forward(x, _width_conv(1), np.ones((1, 1, 1, 1)), [0.5]), x + 0.5)
    bias_only = conv1d_forward(x, _width_conv(2), np.zeros((1, 1, 1, 2)), [0.7])
    np.testing.assert_array_equal(bias_only, np.full((1, 3, 5), 0.7))


def test_conv1d_height_kernel_slides_over_electrodes():
    layer = Conv1D(kernel_h=2, kernel_w=1, c_in=1, c_out=1)
    x = np.arange(6.0).reshape(1, 3, 2)
    out = conv1d_forward(x, layer, np.ones(layer.weight_shape), [0.0])
    np.testing.assert_array_equal(out, [[[2.0, 4.0], [6.0, 8.0]]])


def test_conv1d_kernel_larger_than_input():
    with pytest.raises(StructuralError):
        conv1d_forward(np.ones((1, 1, 2)), _width_conv(3), np.ones((1, 1, 1, 3)), [0.0])


def test_only_single_dimension_kernels():
    with pytest.raises(ValueError):
        Conv1D(kernel_h=3, kernel_w=3, c_in=1, c_out=1)


@pytest.mark.parametrize(
    "values, window, expected",
    [([1, 3, 2, 0], 2, [3, 2]), ([4, 4, 4, 4], 2, [4, 4]), ([-5, -1], 2, [-1]), ([1, 2, 3], 2, [2])],
)
def test_maxpool1d_forward(values, window, expected):
    out = maxpool1d_forward(np.array([[values]], dtype=float), window)
    np.testing.assert_array_equal(out, [[expected]])


def test_relu_examples():
    np.testing.assert_array_equal(relu(np.array([-2.0, 3.5, 0.0])), [0.0, 3.5, 0.0])


def test_fc_forward_examples(rng):
    x = rng.normal(size=4)
    np.testing.assert_array_equal(fc_forward(x, np.eye(4), np.zeros(4)), x)
    np.testing.assert_array_equal(fc_forward(np.array([2.0, 3.0]), np.array([[1.0, 1.0]]), [0.0]), [5.0])
    np.testing.assert_array_equal(fc_forward(x[:2], np.zeros((2, 2)), [0.1, -0.2]), [0.1, -0.2])


def test_zero_weights_give_zero_logits(tiny_spec, rng):
    logits = forward(tiny_spec, WeightContainer.zeros(tiny_spec), rng.normal(size=(1, 2, 8)))
    np.testing.assert_array_equal(logits, [0.0, 0.0])


def _straight_line_forward(spec, weights, sample):
    x, ordinal = np.array(sample, dtype=float), 0
    for layer in spec.layers:
        if isinstance(layer, Conv1D):
            weight, bias = (np.asarray(t, dtype=float) for t in weights.layers[ordinal])
            c_in, rows, cols = x.shape
            k_h, k_w = layer.kernel_h, layer.kernel_w
            out_rows = (rows - k_h) // layer.stride + 1 if k_h > 1 else rows
            out_cols = (cols - k_w) // layer.stride + 1 if k_h == 1 else cols
            out = np.zeros((layer.c_out, out_rows, out_cols))
            for o in range(layer.c_out):
                for r in range(out_rows):
                    for c in range(out_cols):
                        r0 = r * layer.stride if k_h > 1 else r
                        c0 = c * layer.stride if k_h == 1 else c
                        total = bias[o]
                        for i in range(c_in):
                            for dr in range(k_h):
                                for dc in range(k_w):
                                    total += weight[o, i, dr, dc] * x[i, r0 + dr, c0 + dc]
                        out[o, r, c] = total
            x, ordinal = out, ordinal + 1
        elif isinstance(layer, FullyConnected):
            weight, bias = (np.asarray(t, dtype=float) for t in weights.layers[ordinal])
            flat = x.ravel()
            x = np.array([sum(weight[o, i] * flat[i] for i in range(len(flat))) + bias[o] for o in range(len(bias))])
            ordinal += 1
        elif isinstance(layer, MaxPool1D):
            w = layer.window
            if layer.orientation == "width":
                out = np.zeros((x.shape[0], x.shape[1], x.shape[2] // w))
                for ch, r, j in np.ndindex(out.shape):
                    out[ch, r, j] = max(x[ch, r, j * w : (j + 1) * w])
            else:
                out = np.zeros((x.shape[0], x.shape[1] // w, x.shape[2]))
                for ch, j, c in np.ndindex(out.shape):
                    out[ch, j, c] = max(x[ch, j * w : (j + 1) * w, c])
            x = out
        else:
            x = np.where(x > 0, x, 0.0)
    return x


def _mixed_spec():
    return NetworkSpec(
        input_shape=(2, 6, 5),
        layers=[
            Conv1D(kernel_h=3, kernel_w=1, c_in=2, c_out=2),
            Relu(),
            MaxPool1D(window=2, orientation="height"),
            Conv1D(kernel_h=1, kernel_w=2, c_in=2, c_out=3, stride=2),
            Relu(),
            FullyConnected(in_dim=12, out_dim=2),
        ],
    )


@pytest.mark.parametrize("make_spec", ["tiny", "mixed"])
def test_forward_matches_a_straight_line_implementation(make_spec, tiny_spec, rng):
    spec = tiny_spec if make_spec == "tiny" else _mixed_spec()
    weights = WeightContainer.random(spec, seed=4)
    samples = rng.normal(size=(20,) + spec.input_shape)
    logits = predict_logits(spec, weights, samples, batch=7)
    for sample, row in zip(samples, logits):
        np.testing.assert_allclose(row, _straight_line_forward(spec, weights, sample), rtol=1e-6, atol=1e-9)
        np.testing.assert_array_equal(row, forward(spec, weights, sample))


def test_activations_of_every_layer(tiny_spec, tiny_weights, rng):
    activations = forward_with_activations(tiny_spec, tiny_weights, rng.normal(size=(3, 1, 2, 8)))
    assert [a.shape[1:] for a in activations] == tiny_spec.output_shapes()
    assert all(len(a) == 3 for a in activations)


def test_relu_network_and_spiking_sums_agree_layer_by_layer(tiny_spec, tiny_weights, rng):
    v_th = 0.2
    bits = rng.random((6, 1) + tiny_spec.input_shape) < 0.5
    run = run_network_batch(tiny_spec.spiking_variant(), tiny_weights, bits, IfConfig(v_th=v_th), record=True)
    conv, _, pool, _, _, _ = tiny_spec.layers
    inputs = bits[:, 0].astype(float)

    activations = forward_with_activations(tiny_spec, tiny_weights, inputs)
    np.testing.assert_allclose(run.peak_inputs[0], activations[0], rtol=0, atol=1e-12)
    np.testing.assert_allclose(run.peak_inputs[0], conv1d_forward(inputs, conv, *tiny_weights.layers[0]), atol=1e-12)

    # a single step feeds each layer the 0/1 spikes of the one before
    pooled = maxpool1d_forward((run.peak_inputs[0] >= v_th).astype(float), pool.window)
    hidden = fc_forward(pooled.reshape(len(bits), -1), *tiny_weights.layers[1])
    np.testing.assert_allclose(run.peak_inputs[1], hidden, atol=1e-12)
    readout = fc_forward((run.peak_inputs[1] >= v_th).astype(float), *tiny_weights.layers[2])
    np.testing.assert_allclose(run.peak_inputs[2], readout, atol=1e-12)


def test_shape_chain_is_validated():
    with pytest.raises(ValueError):
        NetworkSpec(input_shape=(1, 1, 8), layers=[_width_conv(3), FullyConnected(in_dim=5, out_dim=2)])
    with pytest.raises(ValueError):
        NetworkSpec(input_shape=(1, 1, 4), layers=[MaxPool1D(window=5)])


def test_default_network_spec():
    spec = default_network_spec((1, 23, 5120))
    kinds = [layer.kind for layer in spec.layers]
    assert kinds == ["conv1d", "relu", "maxpool1d"] * 5 + ["fc", "relu", "fc"]
    assert spec.output_shapes()[-1] == (2,)
    spiking = spec.spiking_variant()
    assert [layer.kind for layer in spiking.layers] == ["conv1d", "maxpool1d"] * 5 + ["fc", "fc"]
    assert spiking.weighted_layers == spec.weighted_layers


def test_spec_json_round_trip(tmp_path, tiny_spec):
    file_path = tmp_path / "spec.json"
    save_network_spec(tiny_spec, file_path)
    loaded = load_network_spec(file_path)
    assert loaded == tiny_spec
    assert loaded.fingerprint == tiny_spec.fingerprint
    assert tiny_spec.spiking_variant().fingerprint != tiny_spec.fingerprint
    assert "layers" in network_spec_json_schema()["properties"]


def test_weight_file_round_trip(tmp_path, tiny_spec, tiny_weights):
    file_path = tmp_path / "cnn.scnw"
    save_weights(tiny_weights, file_path)
    loaded = load_weights(file_path)
    assert loaded.equals(tiny_weights)
    loaded.check_spec(tiny_spec)


def test_weight_file_errors(tmp_path, tiny_weights):
    file_path = tmp_path / "cnn.scnw"
    save_weights(tiny_weights, file_path)
    data = file_path.read_bytes()

    file_path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="offset 0"):
        load_weights(file_path)

    file_path.write_bytes(data[:4] + struct.pack("<H", 2) + data[6:])
    with pytest.raises(UnsupportedVersionError):
        load_weights(file_path)

    file_path.write_bytes(data[:-3])
    with pytest.raises(FormatError, match="Truncated"):
        load_weights(file_path)


def test_weight_container_checks(tiny_spec, tiny_weights):
    with pytest.raises(StructuralError):
        tiny_weights.check_spec(tiny_spec.spiking_variant())
    tiny_weights.check_shapes(tiny_spec.spiking_variant())
    partial = WeightContainer(fingerprint=tiny_spec.fingerprint, layers={0: tiny_weights.layers[0]})
    with pytest.raises(StructuralError, match="missing layers"):
        partial.check_shapes(tiny_spec)
    with pytest.raises(InputError):
        WeightContainer(fingerprint=0, layers={0: (np.array([[np.inf]]), np.zeros(1))})


def _numeric_gradients(spec, params, samples, labels, eps=1e-4):
    grads = []
    for index, tensors in enumerate(params):
        pair = []
        for which, tensor in enumerate(tensors):
            grad = np.zeros_like(tensor)
            for position in np.ndindex(tensor.shape):
                values = []
                for sign in (1.0, -1.0):
                    shifted = [[t.copy() for t in p] for p in params]
                    shifted[index][which][position] += sign * eps
                    values.append(loss_and_gradients(spec, [tuple(p) for p in shifted], samples, labels)[0])
                grad[position] = (values[0] - values[1]) / (2 * eps)
            pair.append(grad)
        grads.append(pair)
    return grads


@pytest.mark.parametrize("make_spec", ["tiny", "mixed"])
def test_backprop_matches_finite_differences(make_spec, tiny_spec, rng):
    spec = tiny_spec if make_spec == "tiny" else _mixed_spec()
    params = init_parameters(spec, seed=7)
    params = [(weight, rng.normal(scale=0.1, size=bias.shape)) for weight, bias in params]
    samples = rng.normal(size=(4,) + spec.input_shape)
    labels = np.array([0, 1, 1, 0])
    _, analytic = loss_and_gradients(spec, params, samples, labels)
    numeric = _numeric_gradients(spec, params, samples, labels)
    for analytic_pair, numeric_pair in zip(analytic, numeric):
        for a, n in zip(analytic_pair, numeric_pair):
            scale = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
            assert np.linalg.norm(a - n) / scale < 1e-4


def _separable_set(rng, n=120):
    points = rng.uniform(-1.0, 1.0, size=(4 * n, 2))
    points = points[np.abs(points.sum(axis=1)) > 0.2][:n]
    labels = (points.sum(axis=1) > 0).astype(int)
    return points.reshape(-1, 1, 1, 2), labels


def test_training_fits_a_separable_set(rng):
    spec = NetworkSpec(input_shape=(1, 1, 2), layers=[FullyConnected(in_dim=2, out_dim=2)])
    samples, labels = _separable_set(rng)
    weights = train_sgd(spec, samples, labels, TrainingConfig(lr=1.0, epochs=200, batch=16, seed=3))
    accuracy = np.mean(predict_logits(spec, weights, samples).argmax(axis=1) == labels)
    assert accuracy == 1.0


def test_full_batch_loss_never_increases_on_a_convex_problem(rng):
    spec = NetworkSpec(input_shape=(1, 1, 2), layers=[FullyConnected(in_dim=2, out_dim=2)])
    samples, labels = _separable_set(rng)
    losses = []
    hyper = TrainingConfig(lr=0.1, epochs=30, batch=len(samples), seed=6)
    train_sgd(spec, samples, labels, hyper, callback=lambda epoch, loss: losses.append(loss))
    assert len(losses) == 30
    assert all(later <= earlier + 1e-12 for earlier, later in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_training_is_deterministic_and_reports_epochs(tiny_spec, rng):
    samples = rng.normal(size=(20, 1, 2, 8))
    labels = np.arange(20) % 2
    hyper = TrainingConfig(lr=0.05, epochs=3, batch=8, seed=5)
    losses = []
    first = train_sgd(tiny_spec, samples, labels, hyper, callback=lambda epoch, loss: losses.append((epoch, loss)))
    second = train_sgd(tiny_spec, samples, labels, hyper)
    assert first.equals(second)
    assert [epoch for epoch, _ in losses] == [1, 2, 3]


def test_zero_learning_rate_leaves_weights_unchanged(tiny_spec, rng):
    samples = rng.normal(size=(10, 1, 2, 8))
    labels = np.arange(10) % 2
    weights = train_sgd(tiny_spec, samples, labels, TrainingConfig(lr=0.0, epochs=4, seed=8))
    assert weights.equals(WeightContainer.random(tiny_spec, seed=8))


def test_frozen_biases_stay_zero(tiny_spec, rng):
    samples = rng.normal(size=(16, 1, 2, 8))
    labels = np.arange(16) % 2
    weights = train_sgd(tiny_spec, samples, labels, TrainingConfig(lr=0.1, epochs=3, seed=2, train_bias=False))
    assert all(not bias.any() for _, bias in weights.layers.values())
    assert not weights.equals(WeightContainer.random(tiny_spec, seed=2))


def test_divergence_reports_the_epoch():
    spec = NetworkSpec(input_shape=(1, 1, 2), layers=[FullyConnected(in_dim=2, out_dim=2)])
    initial = WeightContainer(
        fingerprint=spec.fingerprint, layers={0: (np.array([[1e38, 1e38], [0.0, 0.0]]), np.zeros(2))}
    )
    samples = np.full((4, 1, 1, 2), 1e300)
    with pytest.raises(DivergenceError) as info:
        train_sgd(spec, samples, np.array([0, 1, 0, 1]), TrainingConfig(epochs=3), initial=initial)
    assert info.value.epoch == 1


def test_training_input_errors(tiny_spec):
    hyper = TrainingConfig(epochs=1)
    with pytest.raises(InputError):
        train_sgd(tiny_spec, np.zeros((0, 1, 2, 8)), np.zeros(0), hyper)
    with pytest.raises(InputError):
        train_sgd(tiny_spec, np.zeros((3, 1, 2, 8)), np.zeros(3), hyper)
    with pytest.raises(StructuralError):
        train_sgd(tiny_spec, np.zeros((3, 1, 2, 8)), np.array([0, 1]), hyper)
