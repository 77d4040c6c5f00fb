"""Polar code definitions: information sets, encoding, CRC handling, data ingestion.

Conventions fixed here and relied on everywhere else:
  - bit i of an index's binary expansion is the coefficient of 2^i (LSB-first)
  - codewords are in natural (non-bit-reversed) order, x = u @ F^(x)n with
    F = [[1, 0], [1, 1]]; the transform is an involution
  - CRC bits, when present, occupy the last C information positions in
    decoding order (the C largest information indices)
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "CrcSpec",
    "PolarCode",
    "assemble_u",
    "build_code",
    "encode",
    "encode_payload",
    "extract_payload",
    "info_set_from_reliability",
    "load_code",
    "load_info_set",
    "load_reliability",
    "packaged_code",
    "packaged_path",
    "partial_order_closure",
    "polar_transform",
]


# ---------------------------------------------------------------------------
# CRC


@dataclass(frozen=True)
class CrcSpec:
    """Cyclic redundancy check over GF(2).

    ``poly`` is the full coefficient bitset of a degree-``length`` polynomial
    (bit ``length``, the leading 1, included).  ``init`` presets the shift
    register before the payload is clocked in.
    """

    length: int
    poly: int
    init: int = 0

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("CRC length must be positive")
        if self.poly >> self.length != 1:
            raise ValueError("polynomial degree must equal the CRC length")
        if not 0 <= self.init < 1 << self.length:
            raise ValueError("initial register value wider than the CRC")

    def remainder(self, bits: np.ndarray) -> np.ndarray:
        """CRC register contents after clocking in ``bits`` (last axis), MSB first.

        Accepts any leading batch shape: (..., len) -> (..., length).
        """
        bits = np.asarray(bits)
        mask = (1 << self.length) - 1
        low = self.poly & mask
        reg = np.full(bits.shape[:-1], self.init, dtype=np.int64)
        for k in range(bits.shape[-1]):
            fb = ((reg >> (self.length - 1)) ^ bits[..., k].astype(np.int64)) & 1
            reg = ((reg << 1) & mask) ^ fb * low
        out = np.empty(bits.shape[:-1] + (self.length,), dtype=np.uint8)
        for t in range(self.length):
            out[..., t] = (reg >> (self.length - 1 - t)) & 1
        return out

    def attach(self, payload: np.ndarray) -> np.ndarray:
        """payload || remainder(payload) along the last axis."""
        payload = np.asarray(payload, dtype=np.uint8)
        return np.concatenate([payload, self.remainder(payload)], axis=-1)

    def check(self, bits: np.ndarray) -> np.ndarray:
        """Elementwise pass/fail for (..., payload_len + length) arrays."""
        bits = np.asarray(bits)
        rem = self.remainder(bits[..., : -self.length])
        return (rem == bits[..., -self.length :]).all(axis=-1)

    @classmethod
    def from_json(cls, obj: dict) -> "CrcSpec":
        return cls(
            length=int(obj["length"]),
            poly=int(obj["poly_hex"], 16),
            init=int(obj.get("init_hex", "0"), 16),
        )

    def to_json(self) -> dict:
        return {"length": self.length, "poly_hex": f"{self.poly:x}", "init_hex": f"{self.init:x}"}


# ---------------------------------------------------------------------------
# Code model


@dataclass(frozen=True)
class PolarCode:
    """A polar code: block length 2^n, information set, optional CRC."""

    n: int
    info_set: tuple[int, ...]
    crc: CrcSpec | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        idx = tuple(sorted(int(i) for i in self.info_set))
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate information indices")
        if idx and not (0 <= idx[0] and idx[-1] < self.N):
            raise ValueError("information index out of range")
        if not idx:
            raise ValueError("information set is empty")
        object.__setattr__(self, "info_set", idx)
        if self.crc is not None and self.k_payload < 1:
            raise ValueError("CRC leaves no payload bits")
        if not self.label:
            object.__setattr__(self, "label", f"P({self.N},{self.k_payload})")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def K(self) -> int:
        return len(self.info_set)

    @property
    def k_payload(self) -> int:
        return self.K - (self.crc.length if self.crc else 0)

    @property
    def rate(self) -> float:
        return self.k_payload / self.N

    @cached_property
    def frozen_set(self) -> tuple[int, ...]:
        info = set(self.info_set)
        return tuple(i for i in range(self.N) if i not in info)

    @cached_property
    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[list(self.info_set)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def info_positions(self) -> np.ndarray:
        pos = np.array(self.info_set, dtype=np.int64)
        pos.setflags(write=False)
        return pos


def build_code(
    n: int,
    info_set,
    crc: CrcSpec | None = None,
    label: str = "",
) -> PolarCode:
    """Validated PolarCode with frozen set taken as the complement."""
    return PolarCode(n=n, info_set=tuple(info_set), crc=crc, label=label)


# ---------------------------------------------------------------------------
# Partial order


def partial_order_closure(min_set, n: int) -> tuple[int, ...]:
    """Upward closure of ``min_set`` under the polar partial order.

    Elementary moves on an n-bit index: flip a 0 to 1, or move a set bit to
    the next more-significant position.  Returns the unique smallest superset
    of min_set closed under both moves, sorted ascending.
    """
    top = 1 << n
    seed = [int(i) for i in min_set]
    for i in seed:
        if not 0 <= i < top:
            raise ValueError(f"index {i} out of range for n={n}")
    out = set(seed)
    work = list(out)
    while work:
        z = work.pop()
        for k in range(n):
            bit = (z >> k) & 1
            if not bit:
                w = z | (1 << k)
                if w not in out:
                    out.add(w)
                    work.append(w)
            elif k + 1 < n and not ((z >> (k + 1)) & 1):
                w = (z ^ (1 << k)) | (1 << (k + 1))
                if w not in out:
                    out.add(w)
                    work.append(w)
    return tuple(sorted(out))


# ---------------------------------------------------------------------------
# Encoding


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """x = u @ F^(x)n over GF(2), natural order, applied along the last axis.

    The transform is its own inverse, so this also recovers u from a codeword.
    """
    x = np.array(bits, dtype=np.uint8, copy=True)
    size = x.shape[-1]
    if size & (size - 1):
        raise ValueError("length must be a power of two")
    lead = x.shape[:-1]
    d = 1
    while d < size:
        y = x.reshape(lead + (size // (2 * d), 2, d))
        y[..., 0, :] ^= y[..., 1, :]
        d *= 2
    return x


def encode(code: PolarCode, u: np.ndarray) -> np.ndarray:
    """Codeword for a full u-vector; frozen positions must be zero."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != code.N:
        raise ValueError("u length does not match the code")
    if u[..., ~code.info_mask].any():
        raise ValueError("nonzero bit at a frozen position")
    return polar_transform(u)


def assemble_u(code: PolarCode, payload: np.ndarray) -> np.ndarray:
    """Scatter payload (plus CRC, if the code has one) into a full u-vector."""
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.shape[-1] != code.k_payload:
        raise ValueError("payload length does not match the code")
    info_bits = code.crc.attach(payload) if code.crc else payload
    u = np.zeros(payload.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., code.info_positions] = info_bits
    return u


def encode_payload(code: PolarCode, payload: np.ndarray) -> np.ndarray:
    return polar_transform(assemble_u(code, payload))


def extract_payload(code: PolarCode, u: np.ndarray) -> np.ndarray:
    """Payload bits from a u-vector (CRC bits dropped)."""
    info_bits = np.asarray(u)[..., code.info_positions]
    return info_bits[..., : code.k_payload]


# ---------------------------------------------------------------------------
# Data ingestion


def _parse_int_list(text: str) -> list[int]:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(t for t in re.split(r"[\s,]+", line) if t)
    return [int(t) for t in tokens]


def load_info_set(path, n: int | None = None) -> tuple[int, ...]:
    """Information set from a newline- or comma-separated integer file."""
    values = _parse_int_list(Path(path).read_text())
    if len(set(values)) != len(values):
        raise ValueError(f"{path}: duplicate indices")
    if any(v < 0 for v in values):
        raise ValueError(f"{path}: negative index")
    if n is not None and any(v >= 1 << n for v in values):
        raise ValueError(f"{path}: index out of range for n={n}")
    return tuple(sorted(values))


def load_reliability(path) -> list[int]:
    """Reliability order (least reliable first); must be a permutation of range(len)."""
    values = _parse_int_list(Path(path).read_text())
    if sorted(values) != list(range(len(values))):
        raise ValueError(f"{path}: not a permutation of 0..{len(values) - 1}")
    return values


def info_set_from_reliability(seq, k: int) -> tuple[int, ...]:
    """The k most reliable indices (tail of the sequence), sorted ascending."""
    seq = list(seq)
    if not 1 <= k <= len(seq):
        raise ValueError("k out of range")
    return tuple(sorted(seq[-k:]))


def load_code(path) -> PolarCode:
    """Code from a JSON definition: {n, info_set | min_info_set, crc?, label?}."""
    obj = json.loads(Path(path).read_text())
    n = int(obj["n"])
    if ("info_set" in obj) == ("min_info_set" in obj):
        raise ValueError(f"{path}: exactly one of info_set / min_info_set required")
    if "info_set" in obj:
        info = tuple(int(i) for i in obj["info_set"])
    else:
        info = partial_order_closure(obj["min_info_set"], n)
    crc = CrcSpec.from_json(obj["crc"]) if obj.get("crc") else None
    return build_code(n, info, crc=crc, label=obj.get("label", ""))


def packaged_path(name: str) -> Path:
    """Filesystem path of a data file shipped with the package."""
    return Path(resources.files("polarlab.data") / name)


def packaged_code(name: str) -> PolarCode:
    """Load one of the shipped code definitions, e.g. 'p128_60' or 'p128_60_crc11'."""
    return load_code(packaged_path(f"{name}.json"))
