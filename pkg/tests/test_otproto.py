import itertools
from collections import Counter

import numpy as np
import pytest

from polarot.autgroup import BitPermutation, IndexPermutation
from polarot.channel import substream
from polarot.construct import mi_profile
from polarot.optimize import OtSelection, inner_topk, outer_search
from polarot.otproto import (
    AliceParty,
    BobParty,
    SelectionError,
    SessionConfig,
    SessionInputs,
    alice_encode,
    bob_align_decode,
    bob_setup,
    key_exchange,
    make_seeds,
    public_tuple,
    run_loopback,
    verify_transcript_symmetry,
)
from polarot.polar_core import gf2_encode
from polarot.privacy import HashSeed, toeplitz_hash
from polarot.wire import ProtocolError, decode_frame, encode_frame

from conftest import SIGMA2, idx1

CLEAN_SNR = 1e6


@pytest.fixture(scope="module")
def config16(selection16):
    return SessionConfig(4, 1.0, selection16, ell=2)


@pytest.fixture(scope="module")
def clean16(selection16):
    return SessionConfig(4, CLEAN_SNR, selection16, ell=2)


def test_public_transform_family(config16):
    A = config16.A
    assert A.order == 2
    T1, T2 = config16.transform(0), config16.transform(1)
    family = {T1, T1.permute_rows(A.pi), T2, T2.permute_rows(A.pi)}
    seen = set()
    for view, k in itertools.product((0, 1), range(A.order)):
        F = public_tuple(config16, view, A.power(k)).F
        assert F in family
        seen.add(F)
    assert seen == family


def test_f_hiding_exact_multiset(config16):
    A = config16.A
    views = [Counter(public_tuple(config16, v, A.power(k)).F for k in range(A.order))
             for v in (0, 1)]
    assert views[0] == views[1]


def test_forced_choice_gives_plain_transform(config16):
    st = bob_setup(config16, 0, substream(0), K=0, s_sw=0)
    assert st.F == config16.T1
    assert st.J0 == config16.good_set


def test_f_distribution_independent_of_choice(config16):
    rep = verify_transcript_symmetry(config16, samples=10_000, seed=3)
    assert rep.ok
    assert rep.tv <= 0.05


def test_symmetry_trivial_for_identity():
    ident = BitPermutation.identity(4)
    sel = OtSelection(ident, IndexPermutation.identity(16), (), (), 0, 0.0)
    rep = verify_transcript_symmetry(SessionConfig(4, 1.0, sel, ell=0))
    assert rep.per_orbit == [True]


def test_symmetry_fails_without_swap(profile16):
    sel = inner_topk(BitPermutation((0, 2, 3, 1)), profile16, 1)
    cfg = SessionConfig(4, 1.0, sel, ell=1)
    assert not verify_transcript_symmetry(cfg).ok
    with pytest.raises(SelectionError, match="incompatible with Aut structure"):
        bob_setup(cfg, 0, substream(0))


def test_alice_encode_examples():
    from polarot.polar_core import build_transform

    F = build_transform(4).matrix
    x, st = alice_encode(F, (), (), substream(1), 0)
    assert not x.any()
    J0, J1 = idx1(11, 9), idx1(7, 5)
    x, st = alice_encode(F, J0, J1, substream(2), 2)
    support = set(np.flatnonzero(st.u))
    assert support <= set(J0 + J1)
    assert np.array_equal(x, gf2_encode(st.u, F))
    x2, st2 = alice_encode(F, J0, J1, substream(2), 2)
    assert np.array_equal(x, x2) and np.array_equal(st.u, st2.u)
    with pytest.raises(ProtocolError):
        alice_encode(F, (1, 2), (2, 3), substream(0), 1)


def test_alignment_identity(config16):
    rng = np.random.default_rng(0)
    for view, K in itertools.product((0, 1), (0, 1)):
        P1 = config16.A.power(K)
        F = config16.transform(view).permute_rows(P1.pi)
        for _ in range(10):
            u = rng.integers(0, 2, 16, dtype=np.uint8)
            x = gf2_encode(u, F)
            assert np.array_equal(x[list(P1.pi)], gf2_encode(u, config16.transform(view)))


@pytest.mark.parametrize("choice", [0, 1])
@pytest.mark.parametrize("s_sw", [0, 1])
@pytest.mark.parametrize("K", [0, 1])
def test_clean_decode_all_branches(clean16, choice, s_sw, K):
    st = bob_setup(clean16, choice, substream(5), K=K, s_sw=s_sw)
    x, alice = alice_encode(st.F, st.J0, st.J1, substream(6), clean16.ell)
    y = 1.0 - 2.0 * x.astype(float)
    u_hat = bob_align_decode(st, clean16, y)
    J = list(st.decodable)
    assert np.array_equal(u_hat[J], alice.u[J])
    seeds = make_seeds(substream(7), len(st.J0), clean16.ell)
    c0, c1, out = key_exchange(alice, st, u_hat, seeds, clean16.ell)
    assert np.array_equal(out, (alice.m0, alice.m1)[choice])


def test_key_exchange_zero_length(clean16):
    st = bob_setup(clean16, 1, substream(1))
    x, alice = alice_encode(st.F, st.J0, st.J1, substream(2), 0)
    seeds = make_seeds(substream(3), len(st.J0), 0)
    c0, c1, out = key_exchange(alice, st, alice.u, seeds, 0)
    assert c0.size == c1.size == out.size == 0


def test_single_bit_error_flips_key_often():
    a, l = 4, 2
    x = np.array([1, 0, 1, 1], dtype=np.uint8)
    for flip in range(a):
        y = x.copy()
        y[flip] ^= 1
        changed = 0
        total = 0
        for bits in itertools.product([0, 1], repeat=a + l - 1):
            s = HashSeed(np.array(bits, dtype=np.uint8), a, l)
            changed += not np.array_equal(toeplitz_hash(x, s), toeplitz_hash(y, s))
            total += 1
        assert changed / total >= 0.5


@pytest.mark.parametrize("choice", [0, 1])
def test_loopback_clean(clean16, choice):
    msgs = ([1, 0], [0, 1])
    out = run_loopback(clean16, SessionInputs(3, 4, choice, msgs))
    assert out.success
    assert out.bob.message.tolist() == list(msgs[choice])
    frames = [decode_frame(line) for line in out.transcript]
    kinds = [f["type"] for f in frames]
    # Bob receives channel outputs, not the clean +-1 codeword
    assert not set(frames[4]["symbols"]) <= {1.0, -1.0}
    assert kinds == ["hello", "hello", "public_transform", "index_sets", "channel_frame",
                     "hash_seeds", "ciphertexts", "close"]


def test_loopback_is_deterministic(config16):
    a = run_loopback(config16, SessionInputs(8, 9, 1, session=5))
    b = run_loopback(config16, SessionInputs(8, 9, 1, session=5))
    c = run_loopback(config16, SessionInputs(8, 9, 1, session=6))
    assert a.transcript == b.transcript
    assert a.transcript != c.transcript


def test_config_json_roundtrip(config16):
    back = SessionConfig.from_json(config16.to_json())
    assert back.digest() == config16.digest()
    assert back.good_set == config16.good_set


def test_truncation_keeps_best_pairs(profile16):
    sel = outer_search(4, profile=profile16, k=2, involutions_only=True).best
    cfg = SessionConfig(4, 1.0, sel, ell=1, hash_len=1)
    (g, b), = cfg.pairs
    assert profile16.I[g] == max(profile16.I[i] for i in sel.good_sel)
    with pytest.raises(SelectionError):
        SessionConfig(4, 1.0, sel, ell=2, hash_len=1)


def test_out_of_order_frame_rejected(config16):
    alice = AliceParty(config16, substream(1))
    alice.start()
    with pytest.raises(ProtocolError):
        alice.handle({"v": 1, "type": "index_sets", "J0": [1], "J1": [2]})


def test_config_mismatch_rejected(config16, clean16):
    bob = BobParty(clean16, 0, substream(1))
    hello = AliceParty(config16, substream(3)).start()[0]
    with pytest.raises(ProtocolError):
        bob.handle(hello)


def test_frame_validation():
    with pytest.raises(ProtocolError):
        decode_frame('{"v": 2, "type": "hello"}')
    with pytest.raises(ProtocolError):
        decode_frame('{"v": 1, "type": "bogus"}')
    with pytest.raises(ProtocolError):
        decode_frame("not json")
    line = encode_frame({"v": 1, "type": "close", "x": 0.1})
    assert line == '{"v":1,"type":"close","x":0.10000000000000001}'


def test_obliviousness_proxy_large_block():
    prof = mi_profile(10, 10 ** 0.3)
    sel = outer_search(10, profile=prof, k=4, involutions_only=True, perm_limit=500).best
    cfg = SessionConfig(10, prof.snr, sel, ell=2)
    ok, agree, total = 0, 0, 0
    for s in range(150):
        out = run_loopback(cfg, SessionInputs(11, 22, choice=s % 2, session=s))
        ok += out.success
        a, t = out.hidden_agreement()
        agree += a
        total += t
    assert ok >= 148
    assert abs(agree / total - 0.5) <= 0.1
