"""Ensemble decoding: M pruned-tree decoders behind permuted channel views.

Each constituent decoder sees ``apply_perm(perm_m, llrs)``, decodes in that
permuted domain, and its codeword is mapped back with the inverse
permutation.  The path metric stays in the permuted domain; candidate
selection consumes only (codeword, pm) pairs, or additionally the channel
LLRs when the correlation rule is active.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .automorphism import (
    BLTAAutomorphism,
    apply_inverse,
    apply_perm,
    canonical_key,
    to_permutation,
)
from .codes import PolarCode
from .sc import FLOAT, DecodeOutcome, LlrMode, PruneTree, build_prune_tree, fast_decode_batch

MIN_PM = "min_pm"
ML_IN_LIST = "ml_in_list"
RULES = (MIN_PM, ML_IN_LIST)


@dataclass(frozen=True)
class Ensemble:
    """An ordered permutation list plus the selection rule applied to it."""

    code: PolarCode
    automorphisms: tuple[BLTAAutomorphism, ...]
    rule: str = MIN_PM

    def __post_init__(self) -> None:
        object.__setattr__(self, "automorphisms", tuple(self.automorphisms))
        if not self.automorphisms:
            raise ValueError("ensemble needs at least one permutation")
        if self.rule not in RULES:
            raise ValueError(f"unknown selection rule {self.rule!r}")
        keys = set()
        for aut in self.automorphisms:
            if aut.n != self.code.n:
                raise ValueError("permutation size does not match the code")
            key = canonical_key(aut)
            if key in keys:
                raise ValueError("ensemble permutations must be pairwise non-equivalent")
            keys.add(key)

    @property
    def m(self) -> int:
        return len(self.automorphisms)

    @cached_property
    def permutations(self):
        return tuple(to_permutation(aut) for aut in self.automorphisms)

    @cached_property
    def tree(self) -> PruneTree:
        return build_prune_tree(self.code)

    def prefix(self, m: int) -> "Ensemble":
        """First ``m`` permutations as a smaller ensemble, same rule."""
        if not 1 <= m <= self.m:
            raise ValueError(f"prefix size {m} out of range 1..{self.m}")
        return Ensemble(self.code, self.automorphisms[:m], self.rule)


def aed_candidates_batch(ens: Ensemble, llrs, mode: LlrMode = FLOAT):
    """Run all constituents; returns (codewords (B, M, N), pms (B, M)).

    Codewords are in the unpermuted domain, pms in each constituent's own
    permuted domain.
    """
    llrs = np.atleast_2d(mode.cast(llrs))
    if llrs.shape[1] != ens.code.N:
        raise ValueError("LLR length does not match the code")
    batch = llrs.shape[0]
    cands = np.empty((batch, ens.m, ens.code.N), dtype=np.uint8)
    pms = np.empty((batch, ens.m), dtype=mode.dtype)
    for m, perm in enumerate(ens.permutations):
        cw, pm = fast_decode_batch(ens.tree, apply_perm(perm, llrs), mode)
        cands[:, m] = apply_inverse(perm, cw)
        pms[:, m] = pm
    return cands, pms


def select_min_pm(pms) -> np.ndarray:
    """Per-frame index of the smallest path metric (ties: lowest index)."""
    pms = np.atleast_2d(pms)
    if pms.shape[1] == 0:
        raise ValueError("empty candidate set")
    return np.argmin(pms, axis=1)


def correlations(llrs, cands) -> np.ndarray:
    """Per-candidate LLR correlation sum(llr * (1 - 2 x)), shape (B, M)."""
    sgn = 1.0 - 2.0 * np.asarray(cands, dtype=np.float64)
    return np.einsum("bn,bmn->bm", np.atleast_2d(llrs).astype(np.float64), sgn)


def select_ml_in_list(llrs, cands) -> np.ndarray:
    """Per-frame index of the best-correlating candidate (ties: lowest index)."""
    cands = np.asarray(cands)
    if cands.ndim != 3 or cands.shape[1] == 0:
        raise ValueError("empty candidate set")
    return np.argmax(correlations(llrs, cands), axis=1)


def aed_decode_batch(ens: Ensemble, llrs, mode: LlrMode = FLOAT):
    """Decode a batch; returns (codewords (B, N), pms (B,), chosen index (B,)).

    The returned pm is the chosen constituent's permuted-domain metric.
    """
    llrs = np.atleast_2d(mode.cast(llrs))
    cands, pms = aed_candidates_batch(ens, llrs, mode)
    if ens.rule == MIN_PM:
        idx = select_min_pm(pms)
    else:
        idx = select_ml_in_list(llrs, cands)
    rows = np.arange(cands.shape[0])
    return cands[rows, idx], pms[rows, idx], idx


def aed_decode(ens: Ensemble, llrs, mode: LlrMode = FLOAT) -> DecodeOutcome:
    cw, pm, idx = aed_decode_batch(ens, np.atleast_2d(llrs), mode)
    return DecodeOutcome(codeword=cw[0], pm=pm[0].item(), decoder_id=int(idx[0]))


def frame_report(ens: Ensemble, llr, mode: LlrMode = FLOAT) -> dict:
    """JSON-friendly per-frame dump: all candidates, both rules' picks."""
    llr = np.atleast_2d(mode.cast(llr))
    cands, pms = aed_candidates_batch(ens, llr, mode)
    corr = correlations(llr, cands)
    pick_pm = int(select_min_pm(pms)[0])
    pick_ml = int(select_ml_in_list(llr, cands)[0])
    return {
        "m": ens.m,
        "rule": ens.rule,
        "candidates": cands[0].tolist(),
        "path_metrics": [float(v) for v in pms[0]],
        "correlations": [float(v) for v in corr[0]],
        "min_pm_choice": pick_pm,
        "ml_in_list_choice": pick_ml,
        "rules_agree": bool(
            np.array_equal(cands[0, pick_pm], cands[0, pick_ml])
        ),
    }
