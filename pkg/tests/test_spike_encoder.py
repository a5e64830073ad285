import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from spiking_seizure_prediction.spike_encoder import (
    EncoderConfig,
    SpikeTrain,
    encode,
    encode_batch,
    expected_rate,
    load_spike_train,
    rate_transform,
    save_spike_train,
    spike_rate,
)
from spiking_seizure_prediction.utils.errors import FormatError, InputError, StructuralError, UnsupportedVersionError

finite_values = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)


def test_encode_shape_and_dtype(rng):
    cfg = EncoderConfig(time_steps=7, seed=3)
    train = encode(rng.normal(size=(1, 4, 5)), cfg)
    assert train.shape == (7, 1, 4, 5)
    assert train.bits.dtype == np.bool_


def test_encode_is_deterministic(rng):
    sample = rng.normal(size=(1, 3, 6))
    cfg = EncoderConfig(time_steps=20, seed=11)
    assert encode(sample, cfg) == encode(sample, cfg)
    other = encode(sample, cfg.model_copy(update={"seed": 12}))
    assert other != encode(sample, cfg)


def test_longer_train_extends_shorter_one(rng):
    sample = rng.normal(size=(1, 2, 4))
    short = encode(sample, EncoderConfig(time_steps=10, seed=5))
    long = encode(sample, EncoderConfig(time_steps=25, seed=5))
    np.testing.assert_array_equal(long.bits[:10], short.bits)


def test_rate_at_gaussian_mean_is_half():
    cfg = EncoderConfig(time_steps=20_000, v_th_up=1.0, v_th_down=-1.0, seed=1)
    train = encode(np.zeros((1, 1, 1)), cfg)
    assert spike_rate(train)[0, 0, 0] == pytest.approx(0.5, abs=0.02)


def test_saturated_value_always_spikes():
    cfg = EncoderConfig(time_steps=50, v_th_up=1.0, v_th_down=-1.0, seed=2)
    train = encode(np.full((1, 2, 3), cfg.v_th_up + 10 * cfg.sigma), cfg)
    assert train.bits.all()


@pytest.mark.slow
def test_rate_law_matches_gaussian_cdf():
    cfg = EncoderConfig(time_steps=100_000, v_th_up=1.0, v_th_down=-1.0, sigma=1.0, seed=2022)
    values = np.linspace(cfg.mean - 3 * cfg.sigma, cfg.mean + 3 * cfg.sigma, 9)
    train = encode(values.reshape(1, 1, 9), cfg)
    np.testing.assert_allclose(spike_rate(train)[0, 0], norm.cdf((values - cfg.mean) / cfg.sigma), atol=0.01)


def test_longer_trains_retain_more_of_the_sample(rng):
    sample = rng.uniform(-2.0, 2.0, size=(1, 20, 100))
    cfg = EncoderConfig(time_steps=1, v_th_up=1.0, v_th_down=-1.0, seed=9)
    target = rate_transform(sample, cfg)
    errors = [
        np.mean((spike_rate(encode(sample, cfg.model_copy(update={"time_steps": t}))) - target) ** 2)
        for t in (2, 5, 10, 20, 50)
    ]
    assert all(shorter > longer for shorter, longer in zip(errors, errors[1:]))


def test_sigma_defaults_to_half_the_threshold_span():
    cfg = EncoderConfig(time_steps=1, v_th_up=40.0, v_th_down=-20.0)
    assert cfg.sigma == 30.0
    assert cfg.mean == 10.0


def test_expected_rate_examples():
    cfg = EncoderConfig(time_steps=1, v_th_up=1.0, v_th_down=-1.0)
    assert expected_rate(cfg.mean, cfg) == 0.5
    assert expected_rate(cfg.mean + cfg.sigma, cfg) == pytest.approx(0.841345, abs=1e-6)
    assert expected_rate(cfg.mean - cfg.sigma, cfg) == pytest.approx(0.158655, abs=1e-6)


def test_rate_transform_is_elementwise_expected_rate(rng):
    cfg = EncoderConfig(time_steps=1, v_th_up=40.0, v_th_down=-40.0)
    sample = rng.normal(scale=30.0, size=(1, 2, 5))
    np.testing.assert_allclose(rate_transform(sample, cfg), norm.cdf(sample / 40.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(finite_values, min_size=1, max_size=8), st.floats(min_value=0.0, max_value=3.0))
def test_larger_values_spike_at_least_as_often(values, delta):
    cfg = EncoderConfig(time_steps=16, seed=9)
    low = np.asarray(values).reshape(1, 1, -1)
    low_train = encode(low, cfg)
    high_train = encode(low + delta, cfg)
    assert (high_train.bits >= low_train.bits).all()


def test_spike_rate_examples():
    assert (spike_rate(SpikeTrain(np.ones((10, 1, 2, 2)))) == 1.0).all()
    bits = np.zeros((10, 1, 1, 1))
    bits[[1, 4, 8]] = 1
    assert spike_rate(SpikeTrain(bits))[0, 0, 0] == pytest.approx(0.3)


def test_encode_rejects_non_finite_samples():
    sample = np.zeros((1, 1, 3))
    sample[0, 0, 1] = np.nan
    with pytest.raises(InputError):
        encode(sample, EncoderConfig(time_steps=2))


def test_invalid_encoder_configs_are_rejected():
    with pytest.raises(ValueError):
        EncoderConfig(time_steps=0)
    with pytest.raises(ValueError):
        EncoderConfig(time_steps=1, v_th_up=-1.0, v_th_down=1.0)


def test_spike_train_invariants():
    with pytest.raises(InputError):
        SpikeTrain(np.full((2, 1, 1, 1), 2))
    with pytest.raises(StructuralError):
        SpikeTrain(np.zeros((2, 3)))
    with pytest.raises(StructuralError):
        SpikeTrain(np.zeros((0, 1, 1, 1)))


def test_batch_encoding_is_chunk_invariant(rng):
    samples = list(rng.normal(size=(5, 1, 2, 3)))
    cfg = EncoderConfig(time_steps=6, seed=21)
    whole = encode_batch(samples, cfg)
    chunked = encode_batch(samples[:2], cfg) + encode_batch(samples[2:], cfg, start_index=2)
    assert whole == chunked


def test_spike_file_round_trip(tmp_path, rng):
    train = SpikeTrain(rng.random((5, 2, 3, 7)) < 0.3)
    file_path = tmp_path / "train.spkt"
    save_spike_train(train, file_path)
    assert load_spike_train(file_path) == train


def test_spike_file_with_bad_magic(tmp_path):
    file_path = tmp_path / "train.spkt"
    save_spike_train(SpikeTrain(np.ones((2, 1, 1, 3))), file_path)
    data = bytearray(file_path.read_bytes())
    data[0:4] = b"XXXX"
    file_path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="offset 0") as info:
        load_spike_train(file_path)
    assert info.value.offset == 0


def test_spike_file_from_a_newer_version(tmp_path):
    file_path = tmp_path / "train.spkt"
    save_spike_train(SpikeTrain(np.ones((2, 1, 1, 3))), file_path)
    data = bytearray(file_path.read_bytes())
    data[4:8] = struct.pack("<I", 2)
    file_path.write_bytes(bytes(data))
    with pytest.raises(UnsupportedVersionError, match="version 2"):
        load_spike_train(file_path)
