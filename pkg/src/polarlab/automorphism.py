"""Code automorphisms from block lower triangular affine index transforms.

An automorphism acts on bit indices as z' = Az + b over GF(2), with A block
lower triangular (invertible diagonal blocks) and b a translation.  Bit i of
an index's expansion is the coefficient of 2^i, matching the partial-order
convention in codes.py; the is_automorphism oracle validates that choice
end-to-end, and validate_convention fails fast with a diagnostic if sampling
ever disagrees with it.

Equivalence classes are represented by left-coset canonicalization under the
lower triangular affine subgroup: decoding absorbs that subgroup, so two
transforms with equal canonical forms produce identical decode results on
every input, and deduping by canonical form guarantees behaviorally distinct
ensemble members.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from math import prod
from pathlib import Path

import numpy as np

from . import gf2
from .codes import PolarCode, polar_transform

__all__ = [
    "BLTAAutomorphism",
    "Permutation",
    "apply_inverse",
    "apply_perm",
    "canonical_key",
    "canonicalize",
    "class_count",
    "enumerate_blta",
    "identity_automorphism",
    "is_automorphism",
    "is_codeword",
    "load_permutations",
    "sample_blta",
    "save_permutations",
    "to_permutation",
    "validate_convention",
]


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class BLTAAutomorphism:
    """Affine index transform z' = Az + b; rows are LSB-first bitsets."""

    n: int
    rows: tuple[int, ...]
    b: int = 0
    profile: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.rows) != self.n:
            raise ValueError("row count must equal n")
        if not 0 <= self.b < 1 << self.n:
            raise ValueError("translation wider than n bits")
        if any(not 0 <= r < 1 << self.n for r in self.rows):
            raise ValueError("row wider than n bits")
        if not gf2.is_invertible(self.rows, self.n):
            raise ValueError("matrix is singular")
        if self.profile is not None:
            if sum(self.profile) != self.n:
                raise ValueError("block profile must sum to n")
            hi = 0
            for size in self.profile:
                hi += size
                allowed = (1 << hi) - 1
                for i in range(hi - size, hi):
                    if self.rows[i] & ~allowed:
                        raise ValueError("entry above the block diagonal")


@dataclass(frozen=True)
class Permutation:
    """Bijection on [0, N) stored as forward and inverse index maps."""

    forward: np.ndarray

    def __post_init__(self) -> None:
        fwd = np.asarray(self.forward, dtype=np.int64)
        fwd.setflags(write=False)
        object.__setattr__(self, "forward", fwd)
        n = len(fwd)
        if sorted(fwd.tolist()) != list(range(n)):
            raise ValueError("not a bijection")
        inv = np.empty(n, dtype=np.int64)
        inv[fwd] = np.arange(n)
        inv.setflags(write=False)
        object.__setattr__(self, "_inverse", inv)

    @property
    def inverse(self) -> np.ndarray:
        return self._inverse

    def __len__(self) -> int:
        return len(self.forward)


def apply_perm(perm: Permutation, vec):
    """out[perm.forward[i]] = vec[i], applied along the last axis."""
    vec = np.asarray(vec)
    if vec.shape[-1] != len(perm):
        raise ValueError("length mismatch")
    return vec[..., perm.inverse]


def apply_inverse(perm: Permutation, vec):
    """Undo apply_perm."""
    vec = np.asarray(vec)
    if vec.shape[-1] != len(perm):
        raise ValueError("length mismatch")
    return vec[..., perm.forward]


# ---------------------------------------------------------------------------
# Construction


def identity_automorphism(n: int, profile: tuple[int, ...] | None = None) -> BLTAAutomorphism:
    return BLTAAutomorphism(n=n, rows=tuple(gf2.identity(n)), b=0, profile=profile)


def sample_blta(profile, n: int, rng) -> BLTAAutomorphism:
    """Uniformly random BLTA element: invertible diagonal blocks, free
    sub-diagonal entries and translation."""
    profile = tuple(int(s) for s in profile)
    if sum(profile) != n:
        raise ValueError("block profile must sum to n")
    rows: list[int] = []
    lo = 0
    for size in profile:
        block = gf2.sample_invertible(size, rng)
        for r in block:
            below = int(rng.integers(0, 1 << lo)) if lo else 0
            rows.append(below | (r << lo))
        lo += size
    b = int(rng.integers(0, 1 << n))
    return BLTAAutomorphism(n=n, rows=tuple(rows), b=b, profile=profile)


def enumerate_blta(profile, n: int):
    """All BLTA matrices for a tiny profile (b fixed to 0); exhaustive-test helper."""
    profile = tuple(int(s) for s in profile)
    if sum(profile) != n:
        raise ValueError("block profile must sum to n")
    block_choices = []
    lo = 0
    for size in profile:
        invertible = [
            rows
            for rows in itertools.product(range(1 << size), repeat=size)
            if gf2.is_invertible(rows, size)
        ]
        block_choices.append((lo, size, invertible))
        lo += size
    below_choices = [range(1 << lo) for lo, size, _ in block_choices for _ in range(size)]
    for blocks in itertools.product(*(inv for _, _, inv in block_choices)):
        row_shifts = []
        for (lo, _, _), rows in zip(block_choices, blocks):
            row_shifts.extend(r << lo for r in rows)
        for below in itertools.product(*below_choices):
            yield BLTAAutomorphism(
                n=n,
                rows=tuple(s | lo_bits for s, lo_bits in zip(row_shifts, below)),
                b=0,
                profile=profile,
            )


def to_permutation(aut: BLTAAutomorphism) -> Permutation:
    """Index permutation induced by the affine transform on bit expansions."""
    n = aut.n
    fwd = np.empty(1 << n, dtype=np.int64)
    for z in range(1 << n):
        fwd[z] = gf2.mat_vec(aut.rows, z) ^ aut.b
    return Permutation(forward=fwd)


# ---------------------------------------------------------------------------
# Membership oracle


@lru_cache(maxsize=32)
def _generator_rows(code: PolarCode) -> np.ndarray:
    """Generator matrix rows (K, N) uint8.

    Row k of the polar transform has its highest set column at index
    info_set[k] (the transform matrix is unitriangular), so the rows form an
    echelon basis with known pivots and membership tests reduce against them
    from the highest pivot down, no elimination pass needed.
    """
    rows = polar_transform(np.eye(code.N, dtype=np.uint8)[list(code.info_set)])
    rows.setflags(write=False)
    return rows


def _reduce_to_residual(code: PolarCode, mat: np.ndarray) -> np.ndarray:
    gen = _generator_rows(code)
    mat = np.array(mat, dtype=np.uint8, copy=True)
    for k in range(code.K - 1, -1, -1):
        sel = mat[:, code.info_set[k]] != 0
        if sel.any():
            mat[sel] ^= gen[k]
    return mat


def is_codeword(code: PolarCode, bits) -> bool:
    """Membership test by reduction against the generator echelon basis."""
    return not _reduce_to_residual(code, np.atleast_2d(bits)).any()


def is_automorphism(perm: Permutation, code: PolarCode) -> bool:
    """True iff permuting every generator row lands inside the code."""
    if len(perm) != code.N:
        raise ValueError("permutation length does not match the code")
    permuted = apply_perm(perm, _generator_rows(code))
    return not _reduce_to_residual(code, permuted).any()


def validate_convention(code: PolarCode, profile, rng, samples: int = 16) -> None:
    """Fail fast if sampled BLTA transforms are not automorphisms of the code.

    A clean failure here almost always means a bit-order mismatch between the
    index convention used for the partial order and the one used for A.
    """
    for _ in range(samples):
        aut = sample_blta(profile, code.n, rng)
        if not is_automorphism(to_permutation(aut), code):
            raise RuntimeError(
                f"sampled BLTA{tuple(profile)} transform is not an automorphism of "
                f"{code.label}; if the code was built with the LSB-first partial "
                "order, A is being read with the opposite (MSB-first) bit order"
            )


# ---------------------------------------------------------------------------
# Canonical forms (left cosets of the lower triangular affine subgroup)


def canonical_key(aut: BLTAAutomorphism) -> tuple[int, ...]:
    """Canonical matrix of the left coset LTA @ A, as a row tuple (b dropped).

    Row i is replaced by the minimum of row_i + span(rows above it); left
    multiplication by a unit lower triangular matrix adds earlier rows into
    later ones, so the result is constant on the coset, and the translation
    part is absorbed entirely.
    """
    basis = gf2.EchelonBasis()
    out = []
    for row in aut.rows:
        reduced = basis.coset_min(row)
        out.append(reduced)
        basis.add(reduced)
    return tuple(out)


def canonicalize(aut: BLTAAutomorphism) -> BLTAAutomorphism:
    """Canonical representative of aut's class (same block profile, b = 0)."""
    return BLTAAutomorphism(n=aut.n, rows=canonical_key(aut), b=0, profile=aut.profile)


def class_count(profile) -> int:
    """Number of left LTA-cosets in BLTA(profile): prod |GL(s_i, 2)| / 2^(s_i(s_i-1)/2)."""
    total = 1
    for s in (int(v) for v in profile):
        gl = prod((1 << s) - (1 << i) for i in range(s))
        total *= gl >> (s * (s - 1) // 2)
    return total


# ---------------------------------------------------------------------------
# Persistence


def save_permutations(path, auts, code_label: str = "", meta: dict | None = None) -> None:
    """Store transforms (hex rows + translation) with their index maps."""
    auts = list(auts)
    if not auts:
        raise ValueError("nothing to save")
    obj = {
        "n": auts[0].n,
        "profile": list(auts[0].profile) if auts[0].profile else None,
        "code": code_label,
        "meta": meta or {},
        "perms": [
            {
                "rows_hex": [f"{r:x}" for r in a.rows],
                "b_hex": f"{a.b:x}",
                "forward": to_permutation(a).forward.tolist(),
            }
            for a in auts
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def packaged_automorphisms() -> list[BLTAAutomorphism]:
    """The shipped greedy-selected 16-transform set for P(128,60).

    Entry 0 is the identity; decoders taking the first M entries inherit the
    nesting the selection produced (design point 2.5 dB, see the file meta).
    """
    from .codes import packaged_path

    return load_permutations(packaged_path("aed16_p128_60.json"))


def load_permutations(path) -> list[BLTAAutomorphism]:
    obj = json.loads(Path(path).read_text())
    n = int(obj["n"])
    profile = tuple(obj["profile"]) if obj.get("profile") else None
    auts = []
    for entry in obj["perms"]:
        aut = BLTAAutomorphism(
            n=n,
            rows=tuple(int(h, 16) for h in entry["rows_hex"]),
            b=int(entry["b_hex"], 16),
            profile=profile,
        )
        stored = np.array(entry["forward"], dtype=np.int64)
        if (to_permutation(aut).forward != stored).any():
            raise ValueError(f"{path}: stored index map disagrees with (A, b)")
        auts.append(aut)
    return auts
