"""LLR-based successive cancellation list decoding and the ML-bound estimators.

The decoder walks the full factor tree leaf by leaf, keeping the L
lowest-metric paths.  At an information leaf each path forks into both bit
values; the 2L candidates are flattened as [bit-0 of path 0..L-1, bit-1 of
path 0..L-1] and pruned with a stable sort, so ties keep the lowest flat
index.  Bit 0 sorting first makes L=1 reproduce plain SC exactly, including
the sign(0) = +1 convention at zero LLRs.

State lives in per-level arrays indexed (frame, path, position); path forks
gather every per-path array.  Inactive path slots carry a huge sentinel
metric until real forks fill them, which keeps the arrays rectangular; their
final candidates are duplicates of real paths and sort last.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import channel
from .codes import PolarCode, encode_payload, polar_transform
from .sc import FLOAT, DecodeOutcome, LlrMode, f_min_sum, g_fun, _penalty

__all__ = [
    "MlBoundEstimate",
    "estimate_ml_bounds",
    "scl_crc_decode",
    "scl_crc_decode_batch",
    "scl_decode",
    "scl_decode_batch",
]


def _big(mode: LlrMode):
    return np.inf if mode.kind == "float" else np.int64(1) << 60


def scl_decode_batch(code: PolarCode, llrs, L: int, mode: LlrMode = FLOAT):
    """List decoding vectorized over frames.

    Returns (candidates (B, L, N) uint8, metrics (B, L)), both sorted per
    frame by ascending metric (stable, so equal-metric candidates keep path
    order).
    """
    if L < 1:
        raise ValueError("list size must be positive")
    alpha0 = np.atleast_2d(mode.cast(llrs))
    B, N = alpha0.shape
    if N != code.N:
        raise ValueError("LLR length does not match the code")
    n = code.n
    info_mask = code.info_mask

    # alpha[t]: LLRs of the active node at level t, (B, 1 or L, N >> t).
    # A second-axis length of 1 marks path-independent content (pre-fork);
    # lstore[t] holds the beta of a completed left child at level t.
    alpha: list[np.ndarray | None] = [alpha0[:, None, :]] + [None] * n
    lstore: list[np.ndarray | None] = [None] + [
        np.zeros((B, L, N >> t), dtype=np.uint8) for t in range(1, n + 1)
    ]
    pm = np.zeros((B, L), dtype=mode.dtype)
    pm[:, 1:] = _big(mode)
    codeword = None

    def descend(levels) -> None:
        for t in levels:
            parent = alpha[t - 1]
            half = parent.shape[2] // 2
            alpha[t] = f_min_sum(parent[:, :, :half], parent[:, :, half:])

    for phi in range(N):
        if phi == 0:
            descend(range(1, n + 1))
        else:
            k = (phi & -phi).bit_length() - 1
            t = n - k
            parent = alpha[t - 1]
            half = parent.shape[2] // 2
            alpha[t] = g_fun(parent[:, :, :half], parent[:, :, half:], lstore[t], mode)
            descend(range(t + 1, n + 1))

        a = alpha[n][:, :, 0]  # (B, 1 or L)
        if info_mask[phi]:
            d0 = _penalty(a)
            d1 = _penalty(-a)
            cand = np.concatenate(
                [np.broadcast_to(pm + d0, (B, L)), np.broadcast_to(pm + d1, (B, L))], axis=1
            )
            keep = np.argsort(cand, axis=1, kind="stable")[:, :L]
            parent_idx = keep % L
            pm = np.take_along_axis(cand, keep, axis=1)
            gather = parent_idx[:, :, None]
            for t in range(1, n + 1):
                if alpha[t].shape[1] == L:
                    alpha[t] = np.take_along_axis(alpha[t], gather, axis=1)
                lstore[t] = np.take_along_axis(lstore[t], gather, axis=1)
            bit = (keep // L).astype(np.uint8)
        else:
            pm = pm + _penalty(a)
            bit = np.zeros((B, L), dtype=np.uint8)

        beta = np.broadcast_to(bit[:, :, None], (B, L, 1))
        prop, lev = phi, n
        while prop & 1:
            beta = np.concatenate([lstore[lev] ^ beta, beta], axis=2)
            prop >>= 1
            lev -= 1
        if lev == 0:
            codeword = beta
        else:
            lstore[lev] = np.ascontiguousarray(beta)

    order = np.argsort(pm, axis=1, kind="stable")
    pm = np.take_along_axis(pm, order, axis=1)
    codeword = np.take_along_axis(codeword, order[:, :, None], axis=1)
    return codeword, pm


def scl_decode(code: PolarCode, llrs, L: int, mode: LlrMode = FLOAT):
    """Single-frame list decode: (best outcome, full candidate list by metric)."""
    cands, pms = scl_decode_batch(code, np.atleast_2d(llrs), L, mode)
    out = [
        DecodeOutcome(codeword=cands[0, m], pm=pms[0, m].item(), decoder_id=m)
        for m in range(cands.shape[1])
    ]
    return out[0], out


def _crc_pass_mask(code: PolarCode, cands: np.ndarray) -> np.ndarray:
    """CRC pass/fail per candidate, (B, L, N) -> (B, L) bool."""
    info_bits = polar_transform(cands)[..., code.info_positions]
    return code.crc.check(info_bits)


def scl_crc_decode_batch(code: PolarCode, llrs, L: int, mode: LlrMode = FLOAT):
    """CRC-aided selection: lowest-metric candidate that passes the CRC,
    falling back to the overall lowest-metric candidate when none does.

    Returns (codewords (B, N), metrics (B,), crc_ok (B,)).
    """
    if code.crc is None:
        raise ValueError("code has no CRC attached")
    cands, pms = scl_decode_batch(code, llrs, L, mode)
    passed = _crc_pass_mask(code, cands)
    any_pass = passed.any(axis=1)
    pick = np.where(any_pass, passed.argmax(axis=1), 0)
    rows = np.arange(cands.shape[0])
    return cands[rows, pick], pms[rows, pick], any_pass


def scl_crc_decode(code: PolarCode, llrs, L: int, mode: LlrMode = FLOAT) -> DecodeOutcome:
    cw, pm, _ = scl_crc_decode_batch(code, np.atleast_2d(llrs), L, mode)
    return DecodeOutcome(codeword=cw[0], pm=pm[0].item())


# ---------------------------------------------------------------------------
# ML bounds


@dataclass(frozen=True)
class MlBoundEstimate:
    """Correlation-counting bounds from list decoding with large L.

    ``count_closer`` tallies frames where some list candidate correlates
    strictly higher with the received LLRs than the transmitted codeword;
    ``count_closer_and_present`` additionally requires the transmitted word
    to appear in the list.  The directional bound names mirror how the two
    rates are usually quoted; the neutral rate_* aliases are the ground
    truth and both are reported everywhere.
    """

    ebn0_db: float
    list_size: int
    frames: int
    count_closer: int
    count_closer_and_present: int
    scl_frame_errors: int
    target_reached: bool
    wall_time: float

    @property
    def rate_any_closer(self) -> float:
        return self.count_closer / self.frames

    @property
    def rate_any_closer_and_present(self) -> float:
        return self.count_closer_and_present / self.frames

    @property
    def upper_bound_rate(self) -> float:
        return self.rate_any_closer

    @property
    def lower_bound_rate(self) -> float:
        return self.rate_any_closer_and_present

    @property
    def scl_fer(self) -> float:
        return self.scl_frame_errors / self.frames

    def to_json(self) -> dict:
        return {
            "kind": "ml_bound",
            "ebn0_db": self.ebn0_db,
            "list_size": self.list_size,
            "frames": self.frames,
            "count_closer": self.count_closer,
            "count_closer_and_present": self.count_closer_and_present,
            "rate_any_closer": self.rate_any_closer,
            "rate_any_closer_and_present": self.rate_any_closer_and_present,
            "upper_bound_rate": self.upper_bound_rate,
            "lower_bound_rate": self.lower_bound_rate,
            "scl_frame_errors": self.scl_frame_errors,
            "scl_fer": self.scl_fer,
            "target_reached": self.target_reached,
            "wall_time": self.wall_time,
        }


def estimate_ml_bounds(
    code: PolarCode,
    ebn0_db: float,
    min_error_events: int = 100,
    L: int = 128,
    seed: int = 0,
    point_index: int = 0,
    max_frames: int = 10_000_000,
    clip: float = 20.0,
    chunk_size: int = 512,
) -> MlBoundEstimate:
    """Count correlation events until both counters reach the target.

    Per frame: list-decode, compare every candidate's correlation
    llr . (1 - 2x) against the transmitted codeword's (strict inequality, so
    the transmitted word itself never counts), and record whether the
    transmitted word appeared in the list.  Stops at whole chunks so results
    do not depend on scheduling; hitting max_frames first is reported via
    target_reached=False rather than an error.
    """
    start = time.monotonic()
    frames = closer = closer_present = scl_errors = 0
    chunk = 0
    while frames < max_frames:
        payload, noise = channel.chunk_frames(
            seed, point_index, chunk, code.k_payload, code.N, chunk_size
        )
        x = encode_payload(code, payload)
        llr = channel.llr_from_noise(x, ebn0_db, code.rate, noise, clip)
        cands, _ = scl_decode_batch(code, llr, L)
        sgn = 1.0 - 2.0 * cands.astype(np.float64)
        corr = np.einsum("bn,bln->bl", llr, sgn)
        tx_corr = np.einsum("bn,bn->b", llr, 1.0 - 2.0 * x.astype(np.float64))
        any_closer = (corr > tx_corr[:, None]).any(axis=1)
        present = (cands == x[:, None, :]).all(axis=2).any(axis=1)
        closer += int(any_closer.sum())
        closer_present += int((any_closer & present).sum())
        scl_errors += int((cands[:, 0, :] != x).any(axis=1).sum())
        frames += chunk_size
        chunk += 1
        if closer >= min_error_events and closer_present >= min_error_events:
            break
    reached = closer >= min_error_events and closer_present >= min_error_events
    return MlBoundEstimate(
        ebn0_db=ebn0_db,
        list_size=L,
        frames=frames,
        count_closer=closer,
        count_closer_and_present=closer_present,
        scl_frame_errors=scl_errors,
        target_reached=reached,
        wall_time=time.monotonic() - start,
    )
