"""Greedy, data-driven choice of the ensemble permutation list.

The selection produces one ordered list; any prefix of it is itself a valid
smaller ensemble, because each round appends exactly one permutation and the
random stream consumed per round does not depend on the target size.

Round structure: collect a batch of noisy frames that every already-selected
permutation fails to decode, score each unselected pool candidate by how many
of those frames it decodes correctly, append the argmax (ties: lowest pool
index).  The first pick is always the identity class representative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gf2
from .automorphism import (
    BLTAAutomorphism,
    apply_inverse,
    apply_perm,
    canonical_key,
    canonicalize,
    class_count,
    enumerate_blta,
    sample_blta,
    save_permutations,
    to_permutation,
)
from .channel import awgn_bpsk_llr
from .codes import PolarCode, encode_payload
from .sc import FLOAT, PruneTree, build_prune_tree, fast_decode_batch


@dataclass(frozen=True)
class SelectionConfig:
    m: int
    design_snr_db: float
    batch_target: int = 1000
    pool_size: int = 64
    trial_cap: int = 200_000
    seed: int = 0
    chunk: int = 512

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("ensemble size must be >= 1")
        if self.batch_target < 1:
            raise ValueError("batch target must be >= 1")
        if self.pool_size < self.m:
            raise ValueError("pool must be at least as large as the ensemble")


def identity_rep(n: int) -> BLTAAutomorphism:
    return BLTAAutomorphism(n=n, rows=tuple(gf2.identity(n)), b=0)


def build_candidate_pool(
    n: int, profile, pool_size: int, rng, max_draws: int | None = None
) -> list[BLTAAutomorphism]:
    """Sampled pool of pairwise non-equivalent canonical representatives.

    Entry 0 is the identity class representative.  Raises if the profile has
    fewer classes than requested or sampling stalls.
    """
    total = class_count(profile)
    if pool_size > total:
        raise ValueError(f"profile has only {total} classes, {pool_size} requested")
    if max_draws is None:
        max_draws = 1000 * pool_size
    pool = [identity_rep(n)]
    seen = {canonical_key(pool[0])}
    draws = 0
    while len(pool) < pool_size:
        if draws >= max_draws:
            raise RuntimeError(f"pool stalled at {len(pool)}/{pool_size} after {draws} draws")
        draws += 1
        aut = sample_blta(profile, n, rng)
        key = canonical_key(aut)
        if key in seen:
            continue
        seen.add(key)
        pool.append(canonicalize(aut))
    return pool


def exhaustive_pool(profile, n: int) -> list[BLTAAutomorphism]:
    """Every equivalence class once, identity representative first."""
    reps: dict = {}
    for aut in enumerate_blta(profile, n):
        key = canonical_key(aut)
        if key not in reps:
            reps[key] = canonicalize(aut)
    ident = identity_rep(n)
    ikey = canonical_key(ident)
    rest = [reps[k] for k in sorted(reps) if k != ikey]
    return [reps[ikey]] + rest


def decode_under_perm(tree: PruneTree, perm, llrs) -> np.ndarray:
    cw, _ = fast_decode_batch(tree, apply_perm(perm, llrs), FLOAT)
    return apply_inverse(perm, cw)


def collect_hard_batch(
    code: PolarCode,
    tree: PruneTree,
    perms,
    ebn0_db: float,
    target: int,
    rng,
    trial_cap: int,
    chunk: int = 512,
):
    """Frames every permutation in ``perms`` decodes incorrectly.

    Returns (codewords (b, N), llrs (b, N), frames_generated, capped).  The
    batch is shorter than ``target`` only when the trial cap was hit; that is
    reported via ``capped``.
    """
    if not perms:
        raise ValueError("need at least one selected permutation")
    kept_x: list[np.ndarray] = []
    kept_llr: list[np.ndarray] = []
    kept = 0
    generated = 0
    while kept < target and generated < trial_cap:
        size = min(chunk, trial_cap - generated)
        payload = rng.integers(0, 2, size=(size, code.k_payload), dtype=np.uint8)
        x = encode_payload(code, payload)
        llr = awgn_bpsk_llr(x, ebn0_db, code.rate, rng)
        generated += size
        alive = np.ones(size, dtype=bool)
        for perm in perms:
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            decoded = decode_under_perm(tree, perm, llr[idx])
            ok = (decoded == x[idx]).all(axis=1)
            alive[idx[ok]] = False
        if alive.any():
            kept_x.append(x[alive])
            kept_llr.append(llr[alive])
            kept += int(alive.sum())
    if kept == 0:
        empty = np.empty((0, code.N))
        return empty.astype(np.uint8), empty, generated, True
    batch_x = np.concatenate(kept_x)[:target]
    batch_llr = np.concatenate(kept_llr)[:target]
    return batch_x, batch_llr, generated, batch_x.shape[0] < target


@dataclass(frozen=True)
class SelectionRound:
    chosen_pool_index: int
    score: int
    batch_size: int
    frames_generated: int
    capped: bool
    all_scores: tuple[int, ...]
    batch: tuple | None = None


@dataclass(frozen=True)
class SelectionResult:
    automorphisms: tuple[BLTAAutomorphism, ...]
    pool_indices: tuple[int, ...]
    rounds: tuple[SelectionRound, ...]
    complete: bool
    config: SelectionConfig

    @property
    def m(self) -> int:
        return len(self.automorphisms)

    def save(self, path, code_label: str = "") -> None:
        cfg = self.config
        save_permutations(
            path,
            self.automorphisms,
            code_label=code_label,
            meta={
                "seed": cfg.seed,
                "design_snr_db": cfg.design_snr_db,
                "batch_target": cfg.batch_target,
                "pool_size": cfg.pool_size,
                "trial_cap": cfg.trial_cap,
                "complete": self.complete,
            },
        )


def greedy_select(
    code: PolarCode,
    pool,
    cfg: SelectionConfig,
    keep_batches: bool = False,
) -> SelectionResult:
    """Pick ``cfg.m`` permutations from ``pool`` by hard-frame coverage.

    ``pool`` entries must be pairwise non-equivalent; the identity
    representative must be present and is always selected first.  If a round
    cannot collect any hard frame within the trial cap, the selection stops
    early and ``complete`` is False.
    """
    pool = list(pool)
    if len(pool) < cfg.m:
        raise ValueError("pool smaller than the requested ensemble")
    keys = [canonical_key(aut) for aut in pool]
    if len(set(keys)) != len(keys):
        raise ValueError("pool entries must be pairwise non-equivalent")
    try:
        first = keys.index(canonical_key(identity_rep(code.n)))
    except ValueError:
        raise ValueError("pool must contain the identity class representative") from None

    tree = build_prune_tree(code)
    perms = [to_permutation(aut) for aut in pool]
    rng = np.random.default_rng(cfg.seed)
    chosen = [first]
    rounds: list[SelectionRound] = []
    while len(chosen) < cfg.m:
        batch_x, batch_llr, generated, capped = collect_hard_batch(
            code,
            tree,
            [perms[i] for i in chosen],
            cfg.design_snr_db,
            cfg.batch_target,
            rng,
            cfg.trial_cap,
            cfg.chunk,
        )
        if batch_x.shape[0] == 0:
            break
        scores = np.full(len(pool), -1, dtype=np.int64)
        for j in range(len(pool)):
            if j in chosen:
                continue
            decoded = decode_under_perm(tree, perms[j], batch_llr)
            scores[j] = int((decoded == batch_x).all(axis=1).sum())
        pick = int(np.argmax(scores))
        rounds.append(
            SelectionRound(
                chosen_pool_index=pick,
                score=int(scores[pick]),
                batch_size=batch_x.shape[0],
                frames_generated=generated,
                capped=capped,
                all_scores=tuple(int(s) for s in scores),
                batch=(batch_x, batch_llr) if keep_batches else None,
            )
        )
        chosen.append(pick)
    return SelectionResult(
        automorphisms=tuple(pool[i] for i in chosen),
        pool_indices=tuple(chosen),
        rounds=tuple(rounds),
        complete=len(chosen) == cfg.m,
        config=cfg,
    )
