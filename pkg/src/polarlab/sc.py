"""Successive cancellation decoding: plain full-tree SC and Fast-SSC on a pruned tree.

Both decoders share the min-sum f/g updates and accumulate the same path
metric (penalties at frozen decisions only).  In exact arithmetic the fast
decoder reproduces the plain one bit for bit; the test suite leans on that
contract, so every tie rule here is deterministic: sign(0) counts as +1
(bit 0) and argmin/metric ties resolve to the lowest index.

LLR sign convention: positive means bit 0.  Batch shape is (frames, size)
throughout; single-frame wrappers adapt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import PolarCode

__all__ = [
    "DecodeOutcome",
    "FLOAT",
    "LlrMode",
    "PruneNode",
    "PruneTree",
    "approx_pm_term",
    "build_prune_tree",
    "decode_rep",
    "decode_spc",
    "exact_pm_term",
    "f_min_sum",
    "fast_decode",
    "fast_decode_batch",
    "g_fun",
    "hard_bits",
    "int_mode",
    "pm_r0",
    "sc_decode",
    "sc_decode_batch",
]


# ---------------------------------------------------------------------------
# Arithmetic modes


@dataclass(frozen=True)
class LlrMode:
    """float64 arithmetic, or saturating int64 quantized to q bits."""

    kind: str = "float"
    q: int = 8

    def __post_init__(self) -> None:
        if self.kind not in ("float", "int"):
            raise ValueError("kind must be 'float' or 'int'")
        if self.kind == "int" and not 2 <= self.q <= 62:
            # q <= 62 keeps g() sums and REP accumulators inside int64
            raise ValueError("q out of range")

    @property
    def dtype(self):
        return np.int64 if self.kind == "int" else np.float64

    @property
    def clip(self) -> int | None:
        return (1 << (self.q - 1)) - 1 if self.kind == "int" else None

    def cast(self, llrs) -> np.ndarray:
        arr = np.asarray(llrs, dtype=self.dtype)
        if self.kind == "int" and np.abs(arr).max(initial=0) > self.clip:
            raise ValueError(f"LLR outside the q={self.q} range")
        return arr


FLOAT = LlrMode("float")


def int_mode(q: int = 8) -> LlrMode:
    return LlrMode("int", q)


# ---------------------------------------------------------------------------
# Elementary updates


def f_min_sum(a, b):
    """Min-sum check update: sign(a)sign(b)min(|a|,|b|), with sign(0) = +1."""
    a = np.asarray(a)
    b = np.asarray(b)
    mag = np.minimum(np.abs(a), np.abs(b))
    return np.where((a < 0) != (b < 0), -mag, mag)


def g_fun(a, b, c, mode: LlrMode = FLOAT):
    """Variable update (1 - 2c)a + b; saturates in integer mode."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.where(np.asarray(c, dtype=bool), b - a, a + b)
    if mode.clip is not None:
        out = np.clip(out, -mode.clip, mode.clip)
    return out


def hard_bits(a) -> np.ndarray:
    """Hard decision per LLR: 1 iff negative (sign(0) = +1 gives bit 0)."""
    return (np.asarray(a) < 0).astype(np.uint8)


def _penalty(a) -> np.ndarray:
    """|min(0, a)|: the metric cost of deciding bit 0 against LLR a."""
    a = np.asarray(a)
    return np.where(a < 0, -a, 0)


def exact_pm_term(x):
    """Reference penalty ln(1 + e^-x); tests only, decoders use approx_pm_term."""
    return np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def approx_pm_term(x):
    """max(0, -x), the hardware-friendly approximation of exact_pm_term."""
    return np.maximum(0, -np.asarray(x))


# ---------------------------------------------------------------------------
# Decode outcome


@dataclass(frozen=True)
class DecodeOutcome:
    """Estimated codeword plus the accumulated path metric."""

    codeword: np.ndarray
    pm: float
    decoder_id: int = 0


# ---------------------------------------------------------------------------
# Plain SC


def sc_decode_batch(code: PolarCode, llrs, mode: LlrMode = FLOAT):
    """Depth-first SC over the full factor tree, vectorized over frames.

    Returns (codewords (B, N) uint8, pm (B,)).
    """
    alpha = np.atleast_2d(mode.cast(llrs))
    if alpha.shape[1] != code.N:
        raise ValueError("LLR length does not match the code")
    info_mask = code.info_mask
    pm = np.zeros(alpha.shape[0], dtype=mode.dtype)

    def rec(a: np.ndarray, lo: int) -> np.ndarray:
        nonlocal pm
        size = a.shape[1]
        if size == 1:
            if info_mask[lo]:
                return hard_bits(a)
            pm = pm + _penalty(a[:, 0])
            return np.zeros(a.shape, dtype=np.uint8)
        half = size // 2
        first, second = a[:, :half], a[:, half:]
        beta_l = rec(f_min_sum(first, second), lo)
        beta_r = rec(g_fun(first, second, beta_l, mode), lo + half)
        return np.concatenate([beta_l ^ beta_r, beta_r], axis=1)

    return rec(alpha, 0), pm


def sc_decode(code: PolarCode, llrs, mode: LlrMode = FLOAT) -> DecodeOutcome:
    cw, pm = sc_decode_batch(code, np.atleast_2d(llrs), mode)
    return DecodeOutcome(codeword=cw[0], pm=pm[0].item())


# ---------------------------------------------------------------------------
# Pruned factor tree


@dataclass(frozen=True)
class PruneNode:
    kind: str  # R0 | R1 | REP | SPC | BRANCH
    start: int
    size: int
    left: "PruneNode | None" = None
    right: "PruneNode | None" = None


@dataclass(frozen=True)
class PruneTree:
    code: PolarCode
    root: PruneNode

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.kind == "BRANCH":
                stack.append(node.right)
                stack.append(node.left)

    def node_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for node in self.nodes():
            counts[node.kind] = counts.get(node.kind, 0) + 1
        return counts

    def leaves(self):
        return (n for n in self.nodes() if n.kind != "BRANCH")


def build_prune_tree(code: PolarCode) -> PruneTree:
    """Maximal pruning, classification precedence R0 > R1 > REP > SPC top-down."""
    mask = code.info_mask

    def build(lo: int, size: int) -> PruneNode:
        seg = mask[lo : lo + size]
        k = int(seg.sum())
        if k == 0:
            return PruneNode("R0", lo, size)
        if k == size:
            return PruneNode("R1", lo, size)
        if k == 1 and seg[-1]:
            return PruneNode("REP", lo, size)
        if k == size - 1 and not seg[0]:
            return PruneNode("SPC", lo, size)
        half = size // 2
        return PruneNode("BRANCH", lo, size, build(lo, half), build(lo + half, half))

    return PruneTree(code=code, root=build(0, code.N))


# ---------------------------------------------------------------------------
# Specialized node decoders


def pm_r0(alpha) -> np.ndarray:
    """Metric increment of an all-frozen node: sum |min(0, alpha_j)|."""
    return _penalty(np.asarray(alpha)).sum(axis=-1)


def decode_rep(alpha):
    """Repetition node: majority by LLR sum (ties to bit 0), penalty = outvoted magnitudes.

    Returns (beta, pm_delta); batch shape (B, size) -> ((B, size), (B,)).
    The sum runs in the working dtype (int64/float64), so quantized inputs
    never saturate while accumulating.
    """
    a = np.atleast_2d(np.asarray(alpha))
    beta = (a.sum(axis=1) < 0).astype(np.uint8)
    mismatch = (a < 0) != beta[:, None].astype(bool)
    pm_delta = np.where(mismatch, np.abs(a), 0).sum(axis=1)
    return np.repeat(beta[:, None], a.shape[1], axis=1), pm_delta


def decode_spc(alpha):
    """Single parity check node (Wagner rule).

    Hard decisions everywhere; if their parity fails, flip the least reliable
    position (lowest index on magnitude ties) and pay its magnitude.
    """
    a = np.atleast_2d(np.asarray(alpha))
    beta = hard_bits(a)
    gamma = np.bitwise_xor.reduce(beta, axis=1)
    mags = np.abs(a)
    j_min = mags.argmin(axis=1)
    rows = np.arange(a.shape[0])
    beta[rows, j_min] ^= gamma
    pm_delta = gamma * mags[rows, j_min]
    return beta, pm_delta


# ---------------------------------------------------------------------------
# Fast-SSC


def fast_decode_batch(tree: PruneTree, llrs, mode: LlrMode = FLOAT, trace: list | None = None):
    """Fast-SSC over the pruned tree, vectorized over frames.

    Returns (codewords (B, N) uint8, pm (B,)).  When ``trace`` is a list, a
    dict per non-branch node (kind, start, size, pm_delta of frame 0) is
    appended in decode order.
    """
    alpha = np.atleast_2d(mode.cast(llrs))
    if alpha.shape[1] != tree.code.N:
        raise ValueError("LLR length does not match the code")
    pm = np.zeros(alpha.shape[0], dtype=mode.dtype)

    def note(node: PruneNode, delta) -> None:
        if trace is not None:
            trace.append(
                {
                    "kind": node.kind,
                    "start": node.start,
                    "size": node.size,
                    "pm_delta": np.asarray(delta).reshape(-1)[0].item(),
                }
            )

    def rec(node: PruneNode, a: np.ndarray) -> np.ndarray:
        nonlocal pm
        if node.kind == "R0":
            delta = pm_r0(a)
            pm = pm + delta
            note(node, delta)
            return np.zeros(a.shape, dtype=np.uint8)
        if node.kind == "R1":
            note(node, np.zeros(1))
            return hard_bits(a)
        if node.kind == "REP":
            beta, delta = decode_rep(a)
            pm = pm + delta
            note(node, delta)
            return beta
        if node.kind == "SPC":
            beta, delta = decode_spc(a)
            pm = pm + delta
            note(node, delta)
            return beta
        half = node.size // 2
        first, second = a[:, :half], a[:, half:]
        beta_l = rec(node.left, f_min_sum(first, second))
        beta_r = rec(node.right, g_fun(first, second, beta_l, mode))
        return np.concatenate([beta_l ^ beta_r, beta_r], axis=1)

    return rec(tree.root, alpha), pm


def fast_decode(tree: PruneTree, llrs, mode: LlrMode = FLOAT, trace: list | None = None) -> DecodeOutcome:
    cw, pm = fast_decode_batch(tree, np.atleast_2d(llrs), mode, trace)
    return DecodeOutcome(codeword=cw[0], pm=pm[0].item())
