import itertools
import math

import numpy as np
import pytest

from polarot.autgroup import enumerate_aut, induced_index_perm
from polarot.channel import ChannelParams, add_noise, llr_map, modulate, substream
from polarot.polar_core import build_transform, gf2_encode, polar_encode
from polarot.scdec import FrozenSpec, codeword_loglik, f_exact, f_minsum, sc_decode


def test_noiseless_recovery():
    rng = np.random.default_rng(0)
    for m in (1, 3, 6):
        n = 1 << m
        u = rng.integers(0, 2, size=n, dtype=np.uint8)
        llr = np.where(polar_encode(u) == 0, np.inf, -np.inf)
        res = sc_decode(llr, FrozenSpec.from_unfrozen(n, range(n)))
        assert np.array_equal(res.u_hat, u)


def test_all_frozen_returns_frozen_values():
    vals = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    spec = FrozenSpec(np.ones(8, dtype=bool), vals)
    llr = np.random.default_rng(1).normal(size=8) * 10
    assert np.array_equal(sc_decode(llr, spec).u_hat, vals)


def test_nan_rejected():
    with pytest.raises(ValueError):
        sc_decode([np.nan, 1.0], FrozenSpec.from_unfrozen(2, [0, 1]))


def test_f_exact_against_tanh_rule():
    a = np.array([0.3, -2.0, 5.0, -7.5, 30.0])
    b = np.array([1.1, 0.4, -3.0, -0.2, 25.0])
    want = 2 * np.arctanh(np.tanh(a / 2) * np.tanh(b / 2))
    assert np.allclose(f_exact(a, b), want, atol=1e-9)
    assert np.array_equal(np.sign(f_minsum(a, b)), np.sign(want))


def test_sc_matches_ml_at_n4():
    n, trials = 4, 10_000
    params = ChannelParams(4.0)
    T = build_transform(2).matrix
    rng = substream(21)
    u = rng.integers(0, 2, size=(trials, n), dtype=np.uint8)
    y = add_noise(modulate(polar_encode(u)), params, rng)
    sc = sc_decode(llr_map(y, params), FrozenSpec.from_unfrozen(n, range(n))).u_hat
    cands = np.array(list(itertools.product([0, 1], repeat=n)), dtype=np.uint8)
    cw = modulate(polar_encode(cands))  # (16, n)
    ml = cands[np.argmax(y @ cw.T, axis=1)]
    agree = np.mean(np.all(sc == ml, axis=1))
    assert agree >= 0.99
    assert gf2_encode(cands[5], T).tolist() == polar_encode(cands[5]).tolist()


def test_min_sum_close_to_exact():
    params = ChannelParams(2.0)
    rng = substream(4)
    u = rng.integers(0, 2, size=(2000, 16), dtype=np.uint8)
    y = add_noise(modulate(polar_encode(u)), params, rng)
    spec = FrozenSpec.from_unfrozen(16, [7, 11, 13, 14, 15])
    a = sc_decode(llr_map(y, params), spec).u_hat
    b = sc_decode(llr_map(y, params), spec, min_sum=True).u_hat
    assert np.mean(np.all(a == b, axis=1)) > 0.95


def test_loglik_density_product():
    params = ChannelParams(0.7)
    y = np.array([0.3, -1.2])
    G = build_transform(1).matrix
    for u in ([0, 0], [1, 0], [0, 1], [1, 1]):
        s = modulate(gf2_encode(u, G))
        dens = np.prod(np.exp(-params.snr * (y - s) ** 2 / 2) * math.sqrt(params.snr / (2 * math.pi)))
        assert codeword_loglik(y, u, G, params) == pytest.approx(math.log(dens), abs=1e-12)


def test_loglik_noiseless_is_strict_max():
    params = ChannelParams(50.0)
    G = build_transform(2).matrix
    u0 = [1, 0, 1, 1]
    y = modulate(gf2_encode(u0, G))
    ll = {u: codeword_loglik(y, u, G, params) for u in itertools.product([0, 1], repeat=4)}
    best = max(ll, key=ll.get)
    assert best == tuple(u0)
    assert sorted(ll.values())[-2] < ll[best]


@pytest.mark.parametrize("m", [2, 3])
def test_matched_decoder_equivalence(m):
    n = 1 << m
    T = build_transform(m).matrix
    auts = [induced_index_perm(s) for s in enumerate_aut(m)]
    params = ChannelParams(1.0)
    rng = np.random.default_rng(m)
    for _ in range(25):
        p1, p2 = (auts[i] for i in rng.integers(0, len(auts), size=2))
        P1, P2 = p1.matrix(), p2.matrix()
        G = P1.T @ T @ P2
        u = rng.integers(0, 2, size=n, dtype=np.uint8)
        y = modulate(gf2_encode(u, G)) + rng.normal(size=n)
        lhs = [codeword_loglik(y[list(p2.pi)], c, G, params)
               for c in itertools.product([0, 1], repeat=n)]
        rhs = [codeword_loglik(y[list(p1.pi)], c, T, params)
               for c in itertools.product([0, 1], repeat=n)]
        assert np.max(np.abs(np.array(lhs) - np.array(rhs))) <= 1e-9
        assert int(np.argmax(lhs)) == int(np.argmax(rhs))
