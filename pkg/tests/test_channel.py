import numpy as np
import pytest

from polarot.channel import (
    ChannelParams,
    add_noise,
    db_to_linear,
    gaussian,
    linear_to_db,
    llr_map,
    modulate,
    substream,
)


def test_modulate():
    assert modulate([0, 1]).tolist() == [1.0, -1.0]
    assert modulate(np.zeros(5, dtype=np.uint8)).tolist() == [1.0] * 5
    bits = np.random.default_rng(0).integers(0, 2, 50)
    assert np.array_equal((modulate(bits) < 0).astype(int), bits)
    with pytest.raises(ValueError):
        modulate([2])


def test_db_roundtrip():
    assert db_to_linear(0.0) == 1.0
    assert linear_to_db(db_to_linear(3.0)) == pytest.approx(3.0)
    assert ChannelParams.from_db(10.0).snr == pytest.approx(10.0)
    with pytest.raises(ValueError):
        ChannelParams(0.0)


def test_noise_is_reproducible():
    p = ChannelParams(1.0)
    a = add_noise(np.ones(100), p, substream(7, 3))
    b = add_noise(np.ones(100), p, substream(7, 3))
    c = add_noise(np.ones(100), p, substream(7, 4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_infinite_snr_is_noiseless():
    s = modulate([0, 1, 1, 0])
    assert np.array_equal(add_noise(s, ChannelParams(float("inf")), substream(1)), s)


def test_noise_variance():
    y = add_noise(np.zeros(1_000_000), ChannelParams(1.0), substream(11))
    assert np.var(y) == pytest.approx(1.0, abs=0.01)
    assert abs(np.mean(y)) < 0.005


def test_gaussian_moments():
    z = gaussian(substream(3), 400_001)
    assert z.size == 400_001
    assert np.mean(z) == pytest.approx(0.0, abs=0.01)
    assert np.mean(z ** 4) == pytest.approx(3.0, abs=0.05)


def test_llr_statistics():
    p = ChannelParams(0.8)
    assert llr_map([0.0], p).tolist() == [0.0]
    llr = llr_map(add_noise(np.ones(1_000_000), p, substream(5)), p)
    assert np.var(llr) == pytest.approx(4 * p.snr, rel=0.02)
    assert np.mean(llr) == pytest.approx(2 * p.snr, rel=0.02)


def test_channel_mi_at_half():
    # histogram estimate of I(X;Y) with uniform BPSK input
    p = ChannelParams(1.044)
    rng = substream(9)
    x = modulate(rng.integers(0, 2, 1_000_000, dtype=np.uint8))
    y = add_noise(x, p, rng)
    edges = np.linspace(-7, 7, 281)
    h_pos, _ = np.histogram(y[x > 0], edges)
    h_neg, _ = np.histogram(y[x < 0], edges)
    p_pos, p_neg = h_pos / h_pos.sum(), h_neg / h_neg.sum()
    mix = 0.5 * (p_pos + p_neg)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = 0.5 * (np.where(p_pos > 0, p_pos * np.log2(p_pos / mix), 0)
                       + np.where(p_neg > 0, p_neg * np.log2(p_neg / mix), 0))
    assert terms.sum() == pytest.approx(0.5, abs=0.02)
