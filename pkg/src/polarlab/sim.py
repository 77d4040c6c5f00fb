"""Monte-Carlo FER/BER engine: stopping rules, SNR sweeps, persistence.

Determinism contract: frames are generated in fixed-size chunks, each chunk
from its own counter-based stream keyed by (master seed, grid point index,
chunk index).  Stopping decisions are taken at chunk boundaries in chunk
order, so tallies do not depend on how many workers decoded chunks in
parallel.  All decoders at the same grid point consume the same frames
(common random numbers), which sharpens decoder-vs-decoder comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .aed import MIN_PM, RULES, Ensemble, aed_decode_batch
from .automorphism import load_permutations, packaged_automorphisms
from .codes import PolarCode, encode_payload, load_code, packaged_code
from .sc import FLOAT, LlrMode, build_prune_tree, fast_decode_batch, sc_decode_batch
from .scl import scl_crc_decode_batch, scl_decode_batch

CSV_HEADER = "ebn0_db,frames,frame_errors,bit_errors,fer,ber"
WORKERS_ENV = "POLARLAB_WORKERS"


@dataclass(frozen=True)
class StopRule:
    min_frame_errors: int = 100
    max_frames: int = 10_000_000

    def __post_init__(self) -> None:
        if self.min_frame_errors < 1 or self.max_frames < 1:
            raise ValueError("stop rule thresholds must be positive")


@dataclass(frozen=True)
class ChannelConfig:
    ebn0_grid: tuple[float, ...]
    clip: float = 20.0
    master_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ebn0_grid", tuple(float(v) for v in self.ebn0_grid))
        if any(b <= a for a, b in zip(self.ebn0_grid, self.ebn0_grid[1:])):
            raise ValueError("Eb/N0 grid must be strictly increasing")
        if self.clip <= 0:
            raise ValueError("clip must be positive")


_SPEC_RE = re.compile(
    r"^(?:(SC)|(FASTSSC)|SCL-(\d+)|SCL-CRC-(\d+)|AED-(\d+)(?:\((\w+)\))?)$"
)


@dataclass(frozen=True)
class DecoderSpec:
    kind: str
    size: int = 1
    rule: str | None = None

    @classmethod
    def parse(cls, text: str) -> "DecoderSpec":
        """Accepts SC, FASTSSC, SCL-<L>, SCL-CRC-<L>, AED-<M>, AED-<M>(<rule>)."""
        m = _SPEC_RE.match(text.strip().upper().replace("MIN_PM", "min_pm").replace("ML_IN_LIST", "ml_in_list"))
        if m is None:
            raise ValueError(f"cannot parse decoder spec {text!r}")
        sc, fast, scl, sclcrc, aed, rule = m.groups()
        if sc:
            return cls("sc")
        if fast:
            return cls("fastssc")
        if scl:
            return cls("scl", int(scl))
        if sclcrc:
            return cls("scl_crc", int(sclcrc))
        rule = rule or MIN_PM
        if rule not in RULES:
            raise ValueError(f"unknown selection rule {rule!r}")
        return cls("aed", int(aed), rule)

    def __post_init__(self) -> None:
        if self.kind not in ("sc", "fastssc", "scl", "scl_crc", "aed"):
            raise ValueError(f"unknown decoder kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("decoder size must be >= 1")

    @property
    def name(self) -> str:
        if self.kind == "sc":
            return "SC"
        if self.kind == "fastssc":
            return "FASTSSC"
        if self.kind == "scl":
            return f"SCL-{self.size}"
        if self.kind == "scl_crc":
            return f"SCL-CRC-{self.size}"
        return f"AED-{self.size}({self.rule})"

    @property
    def slug(self) -> str:
        return self.name.lower().replace("(", "-").replace(")", "")


def make_decoder(code: PolarCode, spec: DecoderSpec, automorphisms=None, mode: LlrMode = FLOAT):
    """Closure (llrs (B, N)) -> codewords (B, N) for one decoder spec.

    List decoders are internally sub-batched to bound the L x N work arrays.
    """
    if spec.kind == "sc":
        return lambda llrs: sc_decode_batch(code, llrs, mode)[0]
    if spec.kind == "fastssc":
        tree = build_prune_tree(code)
        return lambda llrs: fast_decode_batch(tree, llrs, mode)[0]
    if spec.kind in ("scl", "scl_crc"):
        if spec.kind == "scl_crc" and code.crc is None:
            raise ValueError("SCL-CRC requires a code with a CRC")
        sub = max(64, (1 << 22) // (spec.size * code.N))

        def decode(llrs):
            llrs = np.atleast_2d(llrs)
            outs = []
            for s in range(0, llrs.shape[0], sub):
                piece = llrs[s : s + sub]
                if spec.kind == "scl":
                    outs.append(scl_decode_batch(code, piece, spec.size, mode)[0][:, 0])
                else:
                    outs.append(scl_crc_decode_batch(code, piece, spec.size, mode)[0])
            return np.concatenate(outs)

        return decode
    if automorphisms is None:
        raise ValueError("AED decoder needs a permutation list")
    if len(automorphisms) < spec.size:
        raise ValueError(f"permutation list has {len(automorphisms)} entries, AED-{spec.size} requested")
    ens = Ensemble(code, tuple(automorphisms[: spec.size]), rule=spec.rule)
    return lambda llrs: aed_decode_batch(ens, llrs, mode)[0]


@dataclass(frozen=True)
class SimPoint:
    ebn0_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    block_len: int
    wall_time: float = 0.0
    fer_is_upper_bound: bool = False

    def __post_init__(self) -> None:
        if self.frame_errors > self.frames:
            raise ValueError("frame_errors cannot exceed frames")

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.block_len) if self.frames else 0.0

    def csv_row(self) -> str:
        return ",".join(
            [
                repr(float(self.ebn0_db)),
                str(self.frames),
                str(self.frame_errors),
                str(self.bit_errors),
                repr(self.fer),
                repr(self.ber),
            ]
        )

    def to_json(self) -> dict:
        return {
            "ebn0_db": self.ebn0_db,
            "frames": self.frames,
            "frame_errors": self.frame_errors,
            "bit_errors": self.bit_errors,
            "block_len": self.block_len,
            "fer": self.fer,
            "ber": self.ber,
            "wall_time": self.wall_time,
            "fer_is_upper_bound": self.fer_is_upper_bound,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SimPoint":
        return cls(
            ebn0_db=float(obj["ebn0_db"]),
            frames=int(obj["frames"]),
            frame_errors=int(obj["frame_errors"]),
            bit_errors=int(obj["bit_errors"]),
            block_len=int(obj["block_len"]),
            wall_time=float(obj.get("wall_time", 0.0)),
            fer_is_upper_bound=bool(obj.get("fer_is_upper_bound", False)),
        )


@dataclass(frozen=True)
class SimResult:
    decoder: DecoderSpec
    code_label: str
    seed: int
    points: tuple[SimPoint, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        snrs = [p.ebn0_db for p in self.points]
        if snrs != sorted(snrs):
            raise ValueError("points must be sorted by SNR")


def _chunk_tally(code, decode_fn, ebn0_db, master_seed, point_index, chunk_index, chunk_size, clip):
    payload, noise = channel.chunk_frames(
        master_seed, point_index, chunk_index, code.k_payload, code.N, chunk_size
    )
    x = encode_payload(code, payload)
    llr = channel.llr_from_noise(x, ebn0_db, code.rate, noise, clip)
    decoded = decode_fn(llr)
    wrong = decoded != x
    return int(wrong.any(axis=1).sum()), int(wrong.sum()), chunk_size


def run_fer_point(
    code: PolarCode,
    decode_fn,
    ebn0_db: float,
    stop: StopRule = StopRule(),
    master_seed: int = 0,
    point_index: int = 0,
    chunk_size: int = channel.CHUNK,
    clip: float = 20.0,
    workers: int | None = None,
) -> SimPoint:
    """Decode chunks until the error target or the frame cap is reached.

    The result is identical for any worker count: workers only decode
    speculative chunks whose tallies are merged in chunk order.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    workers = max(1, workers)
    t0 = time.monotonic()
    frames = errors = bit_errors = 0
    chunk_index = 0

    def done() -> bool:
        return errors >= stop.min_frame_errors or frames >= stop.max_frames

    if workers == 1:
        while not done():
            e, b, n = _chunk_tally(
                code, decode_fn, ebn0_db, master_seed, point_index, chunk_index, chunk_size, clip
            )
            errors += e
            bit_errors += b
            frames += n
            chunk_index += 1
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            while not done():
                futs = [
                    pool.submit(
                        _chunk_tally,
                        code,
                        decode_fn,
                        ebn0_db,
                        master_seed,
                        point_index,
                        chunk_index + i,
                        chunk_size,
                        clip,
                    )
                    for i in range(workers)
                ]
                chunk_index += workers
                for fut in futs:  # merge in chunk order, stop where a lone worker would
                    e, b, n = fut.result()
                    if done():
                        continue
                    errors += e
                    bit_errors += b
                    frames += n
    return SimPoint(
        ebn0_db=float(ebn0_db),
        frames=frames,
        frame_errors=errors,
        bit_errors=bit_errors,
        block_len=code.N,
        wall_time=time.monotonic() - t0,
        fer_is_upper_bound=errors == 0,
    )


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def config_hash(config: dict) -> str:
    trimmed = {k: v for k, v in config.items() if k != "workers"}
    return hashlib.sha256(json.dumps(trimmed, sort_keys=True).encode()).hexdigest()[:16]


def load_config_code(config: dict) -> PolarCode:
    spec = config["code"]
    if isinstance(spec, str):
        return packaged_code(spec)
    if "file" in spec:
        return load_code(spec["file"])
    raise ValueError("config 'code' must be a packaged name or {'file': path}")


def run_sweep(config: dict, out_dir: str, workers: int | None = None) -> list[SimResult]:
    """One SimPoint per decoder per grid entry, persisted and resumable.

    Writes ``result.json`` after every completed point, per-decoder
    ``points_<slug>.csv`` files in the exact six-column schema, and a
    combined ``points.csv`` with a leading decoder column.
    """
    code = load_config_code(config)
    chan = ChannelConfig(
        ebn0_grid=tuple(config["ebn0_db"]),
        clip=float(config.get("clip", 20.0)),
        master_seed=int(config.get("seed", 0)),
    )
    stop_cfg = config.get("stop", {})
    stop = StopRule(
        min_frame_errors=int(stop_cfg.get("min_frame_errors", 100)),
        max_frames=int(stop_cfg.get("max_frames", 10_000_000)),
    )
    chunk_size = int(config.get("chunk", channel.CHUNK))
    specs = [DecoderSpec.parse(s) for s in config["decoders"]]
    auts = None
    if any(s.kind == "aed" for s in specs):
        if "permutations" in config:
            auts = load_permutations(config["permutations"])
        elif code.label == "P(128,60)":
            auts = packaged_automorphisms()
        else:
            raise ValueError("AED decoders need a 'permutations' file in the config")

    os.makedirs(out_dir, exist_ok=True)
    chash = config_hash(config)
    result_path = os.path.join(out_dir, "result.json")
    prior: dict[tuple[str, float], SimPoint] = {}
    if os.path.exists(result_path):
        with open(result_path) as fh:
            saved = json.load(fh)
        if saved.get("config_hash") == chash:
            for dec in saved["decoders"]:
                for pt in dec["points"]:
                    prior[(dec["decoder"], float(pt["ebn0_db"]))] = SimPoint.from_json(pt)

    from . import __version__

    results: dict[str, list[SimPoint]] = {s.name: [] for s in specs}

    def flush() -> None:
        doc = {
            "tool_version": __version__,
            "config": config,
            "config_hash": chash,
            "code_label": code.label,
            "decoders": [
                {
                    "decoder": s.name,
                    "seed": chan.master_seed,
                    "points": [p.to_json() for p in results[s.name]],
                }
                for s in specs
            ],
        }
        _atomic_write(result_path, json.dumps(doc, indent=2) + "\n")

    for spec in specs:
        decode_fn = make_decoder(code, spec, automorphisms=auts)
        for point_index, ebn0 in enumerate(chan.ebn0_grid):
            key = (spec.name, float(ebn0))
            if key in prior:
                results[spec.name].append(prior[key])
            else:
                results[spec.name].append(
                    run_fer_point(
                        code,
                        decode_fn,
                        ebn0,
                        stop,
                        chan.master_seed,
                        point_index,
                        chunk_size,
                        chan.clip,
                        workers,
                    )
                )
            flush()

    combined = ["decoder," + CSV_HEADER]
    for spec in specs:
        rows = [CSV_HEADER] + [p.csv_row() for p in results[spec.name]]
        _atomic_write(os.path.join(out_dir, f"points_{spec.slug}.csv"), "\n".join(rows) + "\n")
        combined.extend(f"{spec.name},{p.csv_row()}" for p in results[spec.name])
    _atomic_write(os.path.join(out_dir, "points.csv"), "\n".join(combined) + "\n")
    return [
        SimResult(
            decoder=spec,
            code_label=code.label,
            seed=chan.master_seed,
            points=tuple(results[spec.name]),
            metadata={"config_hash": chash},
        )
        for spec in specs
    ]
