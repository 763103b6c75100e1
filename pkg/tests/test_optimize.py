import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarot.autgroup import BitPermutation, IndexPermutation, enumerate_aut, induced_index_perm
from polarot.construct import ga_mi_profile, mi_profile
from polarot.optimize import (
    InfeasibleError,
    OtSelection,
    brute_force_best,
    candidate_perms,
    canonical_partition,
    eligible_set,
    inner_topk,
    involutive_on,
    is_crosscut,
    outer_search,
    top_half_partition,
    weights,
)
from polarot.privacy import ell_net

from conftest import SIGMA2, idx1

WEIGHTS_N16 = {12: 0.0292, 11: 0.0730, 10: 0.0730, 9: 0.0292}


def test_identity_weights_and_eligibility(profile16):
    ident = BitPermutation.identity(4)
    assert np.all(weights(ident, profile16) == 0)
    assert eligible_set(ident, profile16) == ()
    with pytest.raises(InfeasibleError):
        inner_topk(ident, profile16, 1)


def test_example_weights(profile16):
    w = weights(SIGMA2, profile16)
    for idx, want in WEIGHTS_N16.items():
        assert w[idx - 1] == pytest.approx(want, abs=0.02)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(4))), st.floats(0.2, 4.0))
def test_weight_antisymmetry_on_two_cycles(perm, snr):
    sigma = BitPermutation(tuple(perm))
    pi = induced_index_perm(sigma)
    w = weights(sigma, ga_mi_profile(4, snr))
    for i in range(16):
        if pi(pi(i)) == i:
            assert w[i] + w[pi(i)] == pytest.approx(0.0, abs=1e-15)


def test_eligible_sets(profile16):
    # canonical halves reproduce the worked example exactly
    assert eligible_set(SIGMA2, profile16, canonical_partition(16)) == idx1(9, 10, 11, 12)
    # the GA reliability halves keep only the pair that stays cross-cut
    assert eligible_set(SIGMA2, profile16) == idx1(10, 11)


def test_eligible_count_matches_cycle_scan(profile16):
    good, bad = top_half_partition(profile16)
    for sigma in enumerate_aut(4):
        if not sigma.is_involution():
            continue
        pi = induced_index_perm(sigma)
        scan = sum(1 for c in pi.cycles if len(c) == 2
                   for i in c if i in good and pi(i) in bad)
        assert len(eligible_set(sigma, profile16)) == scan


@pytest.mark.parametrize("partition", [None, "canonical"])
def test_inner_topk_example(profile16, partition):
    part = canonical_partition(16) if partition else None
    sel = inner_topk(SIGMA2, profile16, 2, part)
    assert sel.good_sel == idx1(10, 11)
    assert sel.bad_sel == idx1(6, 7)
    assert sel.s == pytest.approx(0.1459, abs=0.02)
    assert sel.rate == pytest.approx(9.12e-3, rel=0.15)
    with pytest.raises(InfeasibleError):
        inner_topk(SIGMA2, profile16, 3)


def test_outer_search_dominates(profile16, selection16):
    res = outer_search(4, profile=profile16, k=2)
    assert res.evaluated == 24
    assert res.best.s >= selection16.s
    assert res.best.s == max(
        inner_topk(s, profile16, 2).s for s in enumerate_aut(4)
        if len(eligible_set(s, profile16)) >= 2)
    assert outer_search(4, profile=profile16, k=0).best.s == 0.0
    with pytest.raises(InfeasibleError):
        outer_search(4, profile=profile16, k=1, candidates=[BitPermutation.identity(4)])


@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("snr", [0.5, 2.0])
def test_max_k_rule_is_optimal(m, k, snr):
    prof = mi_profile(m, snr)
    for sigma in enumerate_aut(m):
        try:
            best = brute_force_best(sigma, prof, k)
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                inner_topk(sigma, prof, k)
            continue
        assert inner_topk(sigma, prof, k).s == pytest.approx(best, abs=1e-15)


def test_selection_properties(profile16):
    part = top_half_partition(profile16)
    for sigma in enumerate_aut(4):
        try:
            sel = inner_topk(sigma, profile16, 2)
        except InfeasibleError:
            continue
        assert is_crosscut(sel, part)
        assert ell_net(sel.good_sel, sel.pi, profile16)[0] == sel.s


def test_selection_json_roundtrip(selection16):
    obj = json.loads(json.dumps(selection16.to_json(snr=1.0)))
    back = OtSelection.from_json(obj)
    assert back.good_sel == selection16.good_sel and back.bad_sel == selection16.bad_sel
    assert back.sigma == selection16.sigma and back.s == selection16.s
    obj["bad_sel"] = [1, 2]
    with pytest.raises(ValueError):
        OtSelection.from_json(obj)


def test_involutive_pairing(profile16, selection16):
    assert involutive_on(selection16)
    # a 3-cycle on the bit positions does not send the bad index back
    sel = inner_topk(BitPermutation((0, 2, 3, 1)), profile16, 1)
    assert not involutive_on(sel)


def test_sampled_candidates_are_seeded():
    a = candidate_perms(10, 50, seed=3)
    b = candidate_perms(10, 50, seed=3)
    assert [p.sigma for p in a] == [p.sigma for p in b]
    assert len(a) == 50
    inv = candidate_perms(10, 40, seed=3, involutions_only=True)
    assert inv and all(p.is_involution() for p in inv)
