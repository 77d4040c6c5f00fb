"""Ensemble decoding: branch candidates, selection rules, reports."""

import json

import numpy as np
import pytest

from polarlab import aed
from polarlab.aed import (
    Ensemble,
    aed_candidates_batch,
    aed_decode,
    aed_decode_batch,
    correlations,
    frame_report,
    select_min_pm,
    select_ml_in_list,
)
from polarlab.automorphism import apply_inverse, apply_perm, packaged_automorphisms
from polarlab.channel import awgn_bpsk_llr, noiseless_llrs
from polarlab.codes import build_code, encode_payload, packaged_code, partial_order_closure
from polarlab.sc import build_prune_tree, fast_decode_batch, hard_bits, int_mode
from polarlab.selection import exhaustive_pool, identity_rep

CODE = packaged_code("p128_60")
TOY = build_code(3, partial_order_closure({3}, 3))


def ens16(rule=aed.MIN_PM):
    return Ensemble(CODE, tuple(packaged_automorphisms()), rule=rule)


def test_rule_constants():
    assert aed.MIN_PM == "min_pm" and aed.ML_IN_LIST == "ml_in_list"
    assert set(aed.RULES) == {aed.MIN_PM, aed.ML_IN_LIST}


def test_ensemble_validation():
    auts = packaged_automorphisms()
    with pytest.raises(ValueError):
        Ensemble(CODE, (), rule=aed.MIN_PM)
    with pytest.raises(ValueError):
        Ensemble(CODE, tuple(auts), rule="best_guess")
    with pytest.raises(ValueError):
        Ensemble(TOY, tuple(auts[:2]), rule=aed.MIN_PM)  # n mismatch
    with pytest.raises(ValueError):
        Ensemble(CODE, (auts[0], auts[0]), rule=aed.MIN_PM)  # same decode class


def test_ensemble_prefix():
    full = ens16()
    part = full.prefix(4)
    assert part.m == 4 and part.rule == full.rule
    assert part.automorphisms == full.automorphisms[:4]
    with pytest.raises(ValueError):
        full.prefix(17)


def test_single_branch_identity_equals_fast():
    ens = Ensemble(CODE, (packaged_automorphisms()[0],), rule=aed.MIN_PM)
    rng = np.random.default_rng(60)
    llr = rng.normal(0, 2, (40, 128))
    cw, pm, idx = aed_decode_batch(ens, llr)
    fcw, fpm = fast_decode_batch(ens.tree, llr)
    assert np.array_equal(cw, fcw) and np.allclose(pm, fpm) and not idx.any()


def test_candidates_match_manual_permuted_decode():
    ens = ens16().prefix(5)
    rng = np.random.default_rng(61)
    llr = rng.normal(0, 2, (20, 128))
    cands, pms = aed_candidates_batch(ens, llr)
    assert cands.shape == (20, 5, 128) and pms.shape == (20, 5)
    for m, perm in enumerate(ens.permutations):
        cw, pm = fast_decode_batch(ens.tree, apply_perm(perm, llr))
        assert np.array_equal(cands[:, m], apply_inverse(perm, cw))
        assert np.allclose(pms[:, m], pm)


def test_noiseless_all_branches_recover():
    ens = ens16()
    rng = np.random.default_rng(62)
    payload = rng.integers(0, 2, (10, 60), dtype=np.uint8)
    x = encode_payload(CODE, payload)
    cands, pms = aed_candidates_batch(ens, noiseless_llrs(x))
    assert (cands == x[:, None, :]).all()
    assert not pms.any()
    cw, pm, idx = aed_decode_batch(ens, noiseless_llrs(x))
    assert np.array_equal(cw, x) and not idx.any()


def test_select_min_pm_examples():
    assert select_min_pm(np.array([[3.0, 1.0, 2.0]]))[0] == 1
    assert select_min_pm(np.array([[2.0, 2.0, 5.0]]))[0] == 0  # tie: lowest index


def test_correlations_example():
    llr = np.array([[1.0, -2.0]])
    cands = np.array([[[0, 0], [1, 0]]], dtype=np.uint8)
    corr = correlations(llr, cands)
    assert corr.tolist() == [[-1.0, -3.0]]
    assert select_ml_in_list(llr, cands)[0] == 0


def test_ml_in_list_is_argmax_correlation():
    ens = ens16(rule=aed.ML_IN_LIST)
    rng = np.random.default_rng(63)
    llr = rng.normal(0, 2, (30, 128))
    cands, pms = aed_candidates_batch(ens, llr)
    idx = select_ml_in_list(llr, cands)
    corr = correlations(llr, cands)
    assert np.array_equal(idx, corr.argmax(axis=1))
    cw, pm, got = aed_decode_batch(ens, llr)
    assert np.array_equal(got, idx)
    assert np.array_equal(cw, cands[np.arange(30), idx])


def test_rules_pick_same_codeword_in_float_mode():
    # the metric of any consistently updated path equals the summed magnitude
    # of the channel disagreements, so min metric and max correlation coincide
    ens = ens16()
    rng = np.random.default_rng(64)
    payload = rng.integers(0, 2, (400, 60), dtype=np.uint8)
    llr = awgn_bpsk_llr(encode_payload(CODE, payload), 2.5, CODE.rate, rng)
    cands, pms = aed_candidates_batch(ens, llr)
    rows = np.arange(400)
    cw_pm = cands[rows, select_min_pm(pms)]
    cw_ml = cands[rows, select_ml_in_list(llr, cands)]
    assert np.array_equal(cw_pm, cw_ml)


def test_pm_correlation_identity_per_branch():
    ens = ens16()
    rng = np.random.default_rng(65)
    llr = rng.normal(0, 2, (50, 128))
    cands, pms = aed_candidates_batch(ens, llr)
    corr = correlations(llr, cands)
    total = np.abs(llr).sum(axis=1)[:, None]
    assert np.allclose(corr, total - 2.0 * pms, rtol=1e-12, atol=1e-8)


def test_selected_metric_never_worse_than_identity_branch():
    ens = ens16()
    rng = np.random.default_rng(66)
    llr = rng.normal(0, 2, (100, 128))
    _, pm, _ = aed_decode_batch(ens, llr)
    _, pm0 = fast_decode_batch(ens.tree, llr)
    assert (pm <= pm0 + 1e-12).all()


def test_selected_codeword_scale_invariant():
    ens = ens16()
    rng = np.random.default_rng(67)
    llr = rng.normal(0, 2, (60, 128))
    cw, _, _ = aed_decode_batch(ens, llr)
    cw2, _, _ = aed_decode_batch(ens, 2.5 * llr)
    assert np.array_equal(cw, cw2)


def test_int_mode_smoke():
    ens = ens16()
    rng = np.random.default_rng(68)
    llr = rng.integers(-31, 32, (20, 128)).astype(np.int64)
    cands, pms = aed_candidates_batch(ens, llr, int_mode(6))
    assert pms.dtype == np.int64


def test_aed_decode_single_and_report():
    ens = ens16()
    rng = np.random.default_rng(69)
    payload = rng.integers(0, 2, (1, 60), dtype=np.uint8)
    llr = awgn_bpsk_llr(encode_payload(CODE, payload), 2.0, CODE.rate, rng)[0]
    out = aed_decode(ens, llr)
    report = frame_report(ens, llr)
    assert report["m"] == 16 and report["rule"] == aed.MIN_PM
    assert len(report["candidates"]) == 16
    assert len(report["path_metrics"]) == len(report["correlations"]) == 16
    assert report["min_pm_choice"] == int(np.argmin(report["path_metrics"]))
    assert report["ml_in_list_choice"] == int(np.argmax(report["correlations"]))
    agree = (report["candidates"][report["min_pm_choice"]]
             == report["candidates"][report["ml_in_list_choice"]])
    assert report["rules_agree"] == agree
    assert out.codeword.tolist() == report["candidates"][report["min_pm_choice"]]
    assert out.decoder_id == report["min_pm_choice"]
    json.dumps(report)  # report must serialize as-is


def test_toy_ensemble_outperforms_identity_branch():
    # coverage check at a noisy design point: the ensemble decodes at least as
    # many frames as its own first branch
    perms = exhaustive_pool((3,), 3)
    ens = Ensemble(TOY, tuple(perms[:8]), rule=aed.MIN_PM)
    rng = np.random.default_rng(70)
    payload = rng.integers(0, 2, (4000, TOY.K), dtype=np.uint8)
    x = encode_payload(TOY, payload)
    llr = awgn_bpsk_llr(x, 1.0, TOY.rate, rng)
    cw, _, _ = aed_decode_batch(ens, llr)
    base, _ = fast_decode_batch(ens.tree, llr)
    err_ens = (cw != x).any(axis=1).sum()
    err_base = (base != x).any(axis=1).sum()
    assert err_ens < err_base
