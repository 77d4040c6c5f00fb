"""Greedy ensemble selection: pools, hard batches, prefix stability."""

import numpy as np
import pytest

from polarlab.automorphism import (
    canonical_key,
    load_permutations,
    to_permutation,
)
from polarlab.channel import awgn_bpsk_llr
from polarlab.codes import build_code, encode_payload, packaged_code, partial_order_closure
from polarlab.sc import build_prune_tree, fast_decode_batch
from polarlab.selection import (
    SelectionConfig,
    build_candidate_pool,
    collect_hard_batch,
    decode_under_perm,
    exhaustive_pool,
    greedy_select,
    identity_rep,
)

TOY = build_code(3, partial_order_closure({3}, 3))  # every bit permutation applies


def test_config_validation():
    with pytest.raises(ValueError):
        SelectionConfig(m=0, design_snr_db=2.5)
    with pytest.raises(ValueError):
        SelectionConfig(m=4, design_snr_db=2.5, batch_target=0)
    with pytest.raises(ValueError):
        SelectionConfig(m=8, design_snr_db=2.5, pool_size=4)


def test_identity_rep():
    rep = identity_rep(3)
    assert rep.rows == (1, 2, 4) and rep.b == 0
    assert to_permutation(rep).forward.tolist() == list(range(8))


def test_exhaustive_pool_small():
    pool = exhaustive_pool((2, 1), 3)
    assert len(pool) == 3
    assert pool[0].rows == identity_rep(3).rows
    keys = [canonical_key(a) for a in pool]
    assert len(set(keys)) == 3
    assert keys[1:] == sorted(keys[1:])


def test_build_candidate_pool():
    rng = np.random.default_rng(50)
    pool = build_candidate_pool(7, (3, 4), 12, rng)
    assert len(pool) == 12
    assert pool[0].rows == identity_rep(7).rows
    keys = {canonical_key(a) for a in pool}
    assert len(keys) == 12
    with pytest.raises(ValueError):
        build_candidate_pool(3, (2, 1), 4, rng)  # only 3 classes exist
    with pytest.raises(RuntimeError):
        build_candidate_pool(7, (3, 4), 64, rng, max_draws=3)


def test_decode_under_perm_identity():
    tree = build_prune_tree(TOY)
    rng = np.random.default_rng(51)
    llr = rng.normal(0, 2, (30, 8))
    same = decode_under_perm(tree, to_permutation(identity_rep(3)), llr)
    assert np.array_equal(same, fast_decode_batch(tree, llr)[0])


def test_collect_hard_batch_frames_fail_all_perms():
    code = packaged_code("p128_60")
    tree = build_prune_tree(code)
    rng = np.random.default_rng(52)
    perms = [to_permutation(a) for a in build_candidate_pool(7, (3, 4), 3, rng)]
    x, llr, generated, capped = collect_hard_batch(
        code, tree, perms, 2.0, target=40, rng=rng, trial_cap=100_000, chunk=512
    )
    assert x.shape == (40, 128) and llr.shape == (40, 128)
    assert not capped and generated >= 40
    for perm in perms:
        decoded = decode_under_perm(tree, perm, llr)
        assert not (decoded == x).all(axis=1).any()


def test_collect_hard_batch_cap():
    code = packaged_code("p128_60")
    tree = build_prune_tree(code)
    rng = np.random.default_rng(53)
    perms = [to_permutation(identity_rep(7))]
    # at a clean channel no frame fails, so the cap must end the search
    x, llr, generated, capped = collect_hard_batch(
        code, tree, perms, 12.0, target=5, rng=rng, trial_cap=1024, chunk=256
    )
    assert capped and generated == 1024 and x.shape[0] == 0


def test_greedy_select_toy_invariants():
    pool = exhaustive_pool((3,), 3)
    cfg = SelectionConfig(m=4, design_snr_db=1.0, batch_target=80,
                          pool_size=len(pool), trial_cap=50_000, seed=7, chunk=256)
    res = greedy_select(TOY, pool, cfg)
    assert res.complete and res.m == 4
    assert res.pool_indices[0] == 0  # identity first, no round spent on it
    assert len(res.rounds) == 3
    for r, round_ in enumerate(res.rounds):
        scores = np.asarray(round_.all_scores)
        already = set(res.pool_indices[: r + 1])
        assert all(scores[i] == -1 for i in already)  # selected entries masked
        assert round_.chosen_pool_index == int(np.argmax(scores))
        assert round_.score == scores.max()
        assert 0 < round_.batch_size <= cfg.batch_target
        assert round_.batch is None
    assert len(set(res.pool_indices)) == 4


def test_greedy_select_prefix_stability():
    pool = exhaustive_pool((3,), 3)
    small = SelectionConfig(m=2, design_snr_db=1.0, batch_target=60,
                            pool_size=len(pool), trial_cap=50_000, seed=9, chunk=256)
    big = SelectionConfig(m=4, design_snr_db=1.0, batch_target=60,
                          pool_size=len(pool), trial_cap=50_000, seed=9, chunk=256)
    a = greedy_select(TOY, pool, small)
    b = greedy_select(TOY, pool, big)
    assert b.pool_indices[: a.m] == a.pool_indices


def test_greedy_select_m1_is_identity_only():
    pool = exhaustive_pool((3,), 3)
    cfg = SelectionConfig(m=1, design_snr_db=1.0, pool_size=len(pool), seed=1)
    res = greedy_select(TOY, pool, cfg)
    assert res.complete and res.pool_indices == (0,) and res.rounds == ()


def test_greedy_select_partial_when_capped_empty():
    pool = exhaustive_pool((3,), 3)
    # an effectively error-free design point: no hard frames within the cap
    cfg = SelectionConfig(m=3, design_snr_db=15.0, batch_target=10,
                          pool_size=len(pool), trial_cap=1024, seed=3, chunk=256)
    res = greedy_select(TOY, pool, cfg)
    assert not res.complete
    assert res.pool_indices == (0,)


def test_greedy_select_keep_batches():
    pool = exhaustive_pool((3,), 3)
    cfg = SelectionConfig(m=2, design_snr_db=1.0, batch_target=30,
                          pool_size=len(pool), trial_cap=50_000, seed=11, chunk=256)
    res = greedy_select(TOY, pool, cfg, keep_batches=True)
    x, llr = res.rounds[0].batch
    assert x.shape[0] == res.rounds[0].batch_size == llr.shape[0]


def test_greedy_select_pool_validation():
    pool = exhaustive_pool((3,), 3)
    cfg = SelectionConfig(m=2, design_snr_db=1.0, pool_size=2)
    with pytest.raises(ValueError, match="identity"):
        greedy_select(TOY, pool[1:], cfg)
    with pytest.raises(ValueError, match="non-equivalent"):
        greedy_select(TOY, [pool[0], pool[1], pool[1]],
                      SelectionConfig(m=2, design_snr_db=1.0, pool_size=3))
    with pytest.raises(ValueError, match="smaller"):
        greedy_select(TOY, pool[:1], cfg)


def test_selection_result_save_roundtrip(tmp_path):
    pool = exhaustive_pool((3,), 3)
    cfg = SelectionConfig(m=3, design_snr_db=1.0, batch_target=40,
                          pool_size=len(pool), trial_cap=50_000, seed=13, chunk=256)
    res = greedy_select(TOY, pool, cfg)
    path = tmp_path / "sel.json"
    res.save(path, code_label="P(8,4)")
    back = load_permutations(path)
    assert [(a.rows, a.b) for a in back] == [(a.rows, a.b) for a in res.automorphisms]


def test_selection_improves_toy_coverage():
    # the second pick must decode some frames the identity failed on
    pool = exhaustive_pool((3,), 3)
    cfg = SelectionConfig(m=2, design_snr_db=1.0, batch_target=100,
                          pool_size=len(pool), trial_cap=50_000, seed=17, chunk=256)
    res = greedy_select(TOY, pool, cfg, keep_batches=True)
    assert res.rounds[0].score > 0


def test_packaged_selection_smoke_p128():
    # tiny rerun of the production flow on the real code
    code = packaged_code("p128_60")
    rng = np.random.default_rng(54)
    pool = build_candidate_pool(7, (3, 4), 6, rng)
    cfg = SelectionConfig(m=3, design_snr_db=2.5, batch_target=40,
                          pool_size=6, trial_cap=20_000, seed=5, chunk=512)
    res = greedy_select(code, pool, cfg)
    assert res.complete and res.m == 3
    assert res.pool_indices[0] == 0
