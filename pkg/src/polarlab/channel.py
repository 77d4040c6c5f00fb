"""AWGN/BPSK channel model and counter-based reproducible random streams.

Frame randomness is organized in fixed chunks of CHUNK frames.  Chunk c of
simulation point p under master seed s draws from a Philox generator keyed
(s, p) with its counter jumped to block c * 2^64, so any scheduling of chunks
across workers reproduces identical bits.  Changing CHUNK changes every
stream; it is a protocol constant, not a tuning knob.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "CHUNK",
    "awgn_bpsk_llr",
    "chunk_frames",
    "chunk_stream",
    "llr_from_noise",
    "noise_sigma",
    "noiseless_llrs",
]

CHUNK = 4096


def noise_sigma(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for BPSK at the given Eb/N0 and code rate."""
    if not 0 < rate <= 1:
        raise ValueError("rate must be in (0, 1]")
    return float(1.0 / np.sqrt(2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def llr_from_noise(x, ebn0_db: float, rate: float, noise, clip: float = 20.0):
    """Channel LLRs for codeword bits x given unit-variance noise samples.

    s = 1 - 2x, y = s + sigma * noise, LLR = 2y / sigma^2, clipped to +-clip.
    """
    sigma = noise_sigma(ebn0_db, rate)
    s = 1.0 - 2.0 * np.asarray(x, dtype=np.float64)
    y = s + sigma * np.asarray(noise)
    return np.clip(2.0 * y / (sigma * sigma), -clip, clip)


def awgn_bpsk_llr(x, ebn0_db: float, rate: float, rng, clip: float = 20.0):
    """Simulate the AWGN/BPSK channel for codeword array x (noise drawn from rng)."""
    x = np.asarray(x)
    return llr_from_noise(x, ebn0_db, rate, rng.standard_normal(x.shape), clip)


def noiseless_llrs(x, clip: float = 20.0):
    """Zero-variance test hook: +-clip with the sign of the transmitted symbol."""
    return clip * (1.0 - 2.0 * np.asarray(x, dtype=np.float64))


def chunk_stream(master_seed: int, point_index: int, chunk_index: int) -> np.random.Generator:
    """Independent, reconstructible generator for one chunk of one point."""
    bits = np.random.Philox(
        key=np.array([master_seed, point_index], dtype=np.uint64),
        counter=np.array([0, 0, chunk_index, 0], dtype=np.uint64),
    )
    return np.random.Generator(bits)


def chunk_frames(
    master_seed: int,
    point_index: int,
    chunk_index: int,
    k_payload: int,
    block_len: int,
    chunk_size: int = CHUNK,
):
    """Payload bits (chunk_size, k_payload) and noise (chunk_size, block_len) for one chunk.

    Draw order (payload first, then noise) is part of the reproducibility
    contract.
    """
    rng = chunk_stream(master_seed, point_index, chunk_index)
    payload = rng.integers(0, 2, size=(chunk_size, k_payload), dtype=np.uint8)
    noise = rng.standard_normal((chunk_size, block_len))
    return payload, noise
