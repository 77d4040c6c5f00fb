"""Affine index transforms: permutations, membership oracle, canonical cosets."""

import json

import numpy as np
import pytest

from polarlab import gf2
from polarlab.automorphism import (
    BLTAAutomorphism,
    Permutation,
    apply_inverse,
    apply_perm,
    canonical_key,
    canonicalize,
    class_count,
    enumerate_blta,
    identity_automorphism,
    is_automorphism,
    is_codeword,
    load_permutations,
    packaged_automorphisms,
    sample_blta,
    save_permutations,
    to_permutation,
    validate_convention,
)
from polarlab.codes import build_code, encode_payload, packaged_code, partial_order_closure
from polarlab.sc import build_prune_tree, fast_decode_batch


def toy_code(n=3):
    return build_code(n, partial_order_closure({3}, n))


def test_to_permutation_examples():
    aut = BLTAAutomorphism(n=2, rows=(1, 3), b=0)
    assert to_permutation(aut).forward.tolist() == [0, 3, 2, 1]
    shift = BLTAAutomorphism(n=2, rows=(1, 2), b=1)
    assert to_permutation(shift).forward.tolist() == [1, 0, 3, 2]
    swap = BLTAAutomorphism(n=2, rows=(2, 1), b=0)
    assert to_permutation(swap).forward.tolist() == [0, 2, 1, 3]
    ident = identity_automorphism(4)
    assert to_permutation(ident).forward.tolist() == list(range(16))


def test_permutation_validation_and_inverse():
    with pytest.raises(ValueError):
        Permutation(forward=np.array([0, 0, 1]))
    p = Permutation(forward=np.array([1, 2, 0]))
    assert p.inverse.tolist() == [2, 0, 1]
    v = np.array([10.0, 20.0, 30.0])
    out = apply_perm(p, v)
    assert out.tolist() == [30.0, 10.0, 20.0]  # out[forward[i]] = v[i]
    assert apply_inverse(p, out).tolist() == v.tolist()
    with pytest.raises(ValueError):
        apply_perm(p, np.zeros(4))


def test_blta_validation():
    with pytest.raises(ValueError):
        BLTAAutomorphism(n=2, rows=(1,))
    with pytest.raises(ValueError):
        BLTAAutomorphism(n=2, rows=(1, 1))  # singular
    with pytest.raises(ValueError):
        BLTAAutomorphism(n=2, rows=(1, 2), b=4)
    with pytest.raises(ValueError):
        # bit above the first diagonal block
        BLTAAutomorphism(n=3, rows=(5, 2, 4), profile=(2, 1))
    BLTAAutomorphism(n=3, rows=(1, 2, 5), profile=(2, 1))  # below-diagonal fill ok


def test_sample_blta_respects_blocks():
    rng = np.random.default_rng(40)
    for _ in range(100):
        aut = sample_blta((3, 4), 7, rng)
        assert aut.profile == (3, 4)
        assert all(r < 8 for r in aut.rows[:3])
        assert gf2.is_invertible(aut.rows, 7)


def test_sampled_blta_are_automorphisms():
    code = packaged_code("p128_60")
    rng = np.random.default_rng(41)
    for _ in range(300):
        perm = to_permutation(sample_blta((3, 4), 7, rng))
        assert is_automorphism(perm, code)


def test_random_permutations_mostly_fail():
    code = packaged_code("p128_60")
    rng = np.random.default_rng(42)
    fails = sum(
        not is_automorphism(Permutation(forward=rng.permutation(128)), code)
        for _ in range(200)
    )
    assert fails >= 198


def test_automorphism_maps_codewords_to_codewords():
    code = toy_code(3)
    rng = np.random.default_rng(43)
    words = encode_payload(code, rng.integers(0, 2, (10, code.K), dtype=np.uint8))
    # full permutation group applies to this code; single-coordinate swaps do not
    aut = sample_blta((3,), 3, rng)
    perm = to_permutation(aut)
    assert is_automorphism(perm, code)
    for w in words:
        assert is_codeword(code, apply_perm(perm, w))


def test_validate_convention():
    code = packaged_code("p128_60")
    validate_convention(code, (3, 4), np.random.default_rng(0))
    with pytest.raises(RuntimeError, match="MSB"):
        validate_convention(code, (4, 3), np.random.default_rng(0))


def test_enumerate_blta_counts():
    mats = list(enumerate_blta((2, 1), 3))
    assert len(mats) == 24  # |GL(2)| * |GL(1)| * 2^2 sub-diagonal fills
    keys = {canonical_key(a) for a in mats}
    assert len(keys) == class_count((2, 1)) == 3
    full = list(enumerate_blta((3,), 3))
    assert len(full) == 168
    assert len({canonical_key(a) for a in full}) == class_count((3,)) == 21


def test_class_count_values():
    assert class_count((3, 4)) == 6615
    gl7 = 1
    for i in range(7):
        gl7 *= (1 << 7) - (1 << i)
    assert class_count((7,)) * (1 << 21) == gl7
    assert class_count((1,) * 7) == 1  # LTA only: a single class


def test_canonicalize_properties():
    rng = np.random.default_rng(44)
    for _ in range(50):
        aut = sample_blta((3, 4), 7, rng)
        canon = canonicalize(aut)
        assert canonical_key(canon) == canonical_key(aut)
        assert canonicalize(canon) == canon
        assert canon.b == 0


def lta_coset_mate(aut, rng):
    """Left-multiply by a random unit lower triangular matrix, random shift."""
    n = aut.n
    lrows = [(1 << i) | int(rng.integers(0, 1 << i)) for i in range(n)]
    new_rows = []
    for i in range(n):
        acc = 0
        for j in range(n):
            if (lrows[i] >> j) & 1:
                acc ^= aut.rows[j]
        new_rows.append(acc)
    return BLTAAutomorphism(n=n, rows=tuple(new_rows), b=int(rng.integers(0, 1 << n)))


def test_coset_mates_share_canonical_key():
    rng = np.random.default_rng(45)
    for _ in range(30):
        aut = sample_blta((3, 4), 7, rng)
        mate = lta_coset_mate(aut, rng)
        assert canonical_key(mate) == canonical_key(aut)
        assert mate.rows != aut.rows or mate.b != aut.b or True  # mates may coincide


def test_coset_mates_decode_identically():
    # lower triangular affine transforms are absorbed: permuting the channel
    # LLRs by any member of the same coset yields the same un-permuted word
    code = packaged_code("p128_60")
    tree = build_prune_tree(code)
    rng = np.random.default_rng(46)
    llr = rng.normal(0, 2, (20, 128))
    for _ in range(10):
        aut = sample_blta((3, 4), 7, rng)
        mate = lta_coset_mate(aut, rng)
        pa, pb = to_permutation(aut), to_permutation(mate)
        cwa, _ = fast_decode_batch(tree, apply_perm(pa, llr))
        cwb, _ = fast_decode_batch(tree, apply_perm(pb, llr))
        assert np.array_equal(apply_inverse(pa, cwa), apply_inverse(pb, cwb))


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(47)
    auts = [sample_blta((3, 4), 7, rng) for _ in range(4)]
    path = tmp_path / "perms.json"
    save_permutations(path, auts, code_label="P(128,60)", meta={"note": "test"})
    back = load_permutations(path)
    assert [(a.rows, a.b) for a in back] == [(a.rows, a.b) for a in auts]
    assert json.loads(path.read_text())["meta"]["note"] == "test"


def test_load_rejects_tampered_index_map(tmp_path):
    rng = np.random.default_rng(48)
    path = tmp_path / "perms.json"
    save_permutations(path, [sample_blta((3, 4), 7, rng)])
    obj = json.loads(path.read_text())
    fwd = obj["perms"][0]["forward"]
    fwd[0], fwd[1] = fwd[1], fwd[0]
    path.write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="disagrees"):
        load_permutations(path)


def test_packaged_automorphisms():
    auts = packaged_automorphisms()
    assert len(auts) == 16
    assert to_permutation(auts[0]).forward.tolist() == list(range(128))
    code = packaged_code("p128_60")
    keys = {canonical_key(a) for a in auts}
    assert len(keys) == 16  # pairwise distinct decode classes
    for aut in auts:
        assert is_automorphism(to_permutation(aut), code)
