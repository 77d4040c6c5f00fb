"""Command-line front end: code inspection, sweeps, selection, bounds, debug."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, channel, codes, sim
from .aed import Ensemble, frame_report
from .automorphism import (
    class_count,
    load_permutations,
    packaged_automorphisms,
    validate_convention,
)
from .scl import estimate_ml_bounds
from .sc import FLOAT, build_prune_tree, fast_decode_batch, int_mode, sc_decode_batch
from .selection import SelectionConfig, build_candidate_pool, greedy_select


def _load_code(arg: str) -> codes.PolarCode:
    if arg.endswith(".json"):
        return codes.load_code(arg)
    return codes.packaged_code(arg)


def _cmd_construct(args) -> int:
    code = _load_code(args.code)
    tree = build_prune_tree(code)
    info = {
        "label": code.label,
        "n": code.n,
        "N": code.N,
        "K": code.K,
        "k_payload": code.k_payload,
        "rate": code.rate,
        "crc": None if code.crc is None else code.crc.to_json(),
        "info_set": list(code.info_set),
        "tree_node_counts": tree.node_counts(),
    }
    if args.profile:
        profile = tuple(int(s) for s in args.profile.split(","))
        info["profile"] = list(profile)
        info["equivalence_classes"] = class_count(profile)
    if args.json:
        print(json.dumps(info, indent=2))
        return 0
    print(f"{code.label}: N={code.N} K={code.K} payload={code.k_payload} rate={code.rate:.4f}")
    if code.crc is not None:
        print(f"crc: length={code.crc.length} poly=0x{code.crc.poly:x}")
    print("info set:", " ".join(str(i) for i in code.info_set))
    print("pruned tree:", ", ".join(f"{k}={v}" for k, v in sorted(tree.node_counts().items())))
    if args.profile:
        print(f"BLTA{profile} equivalence classes: {info['equivalence_classes']}")
    return 0


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    results = sim.run_sweep(config, args.out, workers=args.workers)
    for res in results:
        for pt in res.points:
            flag = " (upper bound)" if pt.fer_is_upper_bound else ""
            print(
                f"{res.decoder.name:>18} @ {pt.ebn0_db:g} dB: fer={pt.fer:.3e} "
                f"ber={pt.ber:.3e} frames={pt.frames}{flag}"
            )
    print(f"wrote {args.out}/result.json and points csv files")
    return 0


def _cmd_select_perms(args) -> int:
    code = _load_code(args.code)
    profile = tuple(int(s) for s in args.profile.split(","))
    rng = np.random.default_rng(args.seed)
    validate_convention(code, profile, rng)
    pool = build_candidate_pool(code.n, profile, args.pool_size, rng)
    cfg = SelectionConfig(
        m=args.m,
        design_snr_db=args.design_snr,
        batch_target=args.batch_target,
        pool_size=args.pool_size,
        trial_cap=args.trial_cap,
        seed=args.seed,
    )
    result = greedy_select(code, pool, cfg)
    result.save(args.out, code_label=code.label)
    status = "complete" if result.complete else f"PARTIAL ({result.m}/{cfg.m})"
    print(f"selected {result.m} permutations ({status}) -> {args.out}")
    for i, rnd in enumerate(result.rounds):
        print(
            f"  round {i + 2}: pool[{rnd.chosen_pool_index}] covered "
            f"{rnd.score}/{rnd.batch_size} hard frames"
            + (" [trial cap hit]" if rnd.capped else "")
        )
    return 0 if result.complete else 1


def _cmd_bounds(args) -> int:
    code = _load_code(args.code)
    est = estimate_ml_bounds(
        code,
        args.ebn0,
        min_error_events=args.min_errors,
        L=args.list_size,
        seed=args.seed,
        max_frames=args.max_frames,
    )
    doc = est.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    print(
        f"@ {est.ebn0_db:g} dB over {est.frames} frames: "
        f"ml lower {est.lower_bound_rate:.3e}  ml upper {est.upper_bound_rate:.3e}  "
        f"scl-{est.list_size} fer {est.scl_fer:.3e}"
        + ("" if est.target_reached else "  [frame cap hit]")
    )
    return 0


def _cmd_decode(args) -> int:
    code = _load_code(args.code)
    rng = np.random.default_rng(args.seed)
    payload = rng.integers(0, 2, size=(1, code.k_payload), dtype=np.uint8)
    x = codes.encode_payload(code, payload)
    if args.noiseless:
        llr = channel.noiseless_llrs(x)
    else:
        llr = channel.awgn_bpsk_llr(x, args.ebn0, code.rate, rng)
    spec = sim.DecoderSpec.parse(args.decoder)
    out: dict = {"decoder": spec.name, "ebn0_db": args.ebn0, "transmitted": x[0].tolist()}
    if spec.kind == "aed":
        if args.permutations:
            auts = load_permutations(args.permutations)
        elif code.label == "P(128,60)":
            auts = packaged_automorphisms()
        else:
            raise SystemExit("AED decoding needs --permutations for this code")
        ens = Ensemble(code, tuple(auts[: spec.size]), rule=spec.rule)
        out.update(frame_report(ens, llr))
        decoded = np.array(out["candidates"], dtype=np.uint8)[
            out["min_pm_choice" if spec.rule == "min_pm" else "ml_in_list_choice"]
        ]
        out["decoded"] = decoded.tolist()
    else:
        trace: list = []
        if spec.kind == "fastssc":
            tree = build_prune_tree(code)
            cw, pm = fast_decode_batch(tree, llr, FLOAT, trace=trace)
        else:
            decode_fn = sim.make_decoder(code, spec)
            cw = decode_fn(llr)
            pm = None
        out["decoded"] = cw[0].tolist()
        if pm is not None:
            out["path_metric"] = float(pm[0])
        if trace:
            out["pm_trace"] = trace
    out["frame_error"] = out["decoded"] != x[0].tolist()
    if args.json:
        print(json.dumps(out, indent=2))
        return 0
    print(f"decoder {spec.name} @ {args.ebn0:g} dB  frame_error={out['frame_error']}")
    if "path_metric" in out:
        print(f"path metric: {out['path_metric']:.4f}")
    for node in out.get("pm_trace", []):
        print(
            f"  {node['kind']:>6} [{node['start']:3d}:{node['start'] + node['size']:3d}] "
            f"pm += {node['pm_delta']:.4f}"
        )
    if "path_metrics" in out:
        for m, (pm_m, corr) in enumerate(zip(out["path_metrics"], out["correlations"])):
            mark = " <- min_pm" if m == out["min_pm_choice"] else ""
            mark += " <- ml_in_list" if m == out["ml_in_list_choice"] else ""
            print(f"  branch {m:2d}: pm {pm_m:10.4f}  corr {corr:10.4f}{mark}")
    return 0


def _cmd_equiv_check(args) -> int:
    code = _load_code(args.code)
    mode = int_mode(args.q)
    tree = build_prune_tree(code)
    rng = np.random.default_rng(args.seed)
    # odd magnitudes below clip >> n leave every internal sum unsaturated and
    # make exact ties (the one benign divergence source) vanishingly rare
    span = max(2, int(mode.clip) >> code.n)
    mismatches = 0
    remaining = args.frames
    while remaining > 0:
        batch = min(8192, remaining)
        remaining -= batch
        mags = rng.integers(1, span, size=(batch, code.N), dtype=np.int64) | 1
        sign = rng.integers(0, 2, size=(batch, code.N), dtype=np.int64)
        llrs = np.where(sign == 1, -mags, mags)
        cw_f, pm_f = fast_decode_batch(tree, llrs, mode)
        cw_s, pm_s = sc_decode_batch(code, llrs, mode)
        mismatches += int(((cw_f != cw_s).any(axis=1) | (pm_f != pm_s)).sum())
    print(
        f"fast vs plain on {args.frames} frames (q={args.q}): "
        f"{mismatches} mismatches"
    )
    return 0 if mismatches == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="polarlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"polarlab {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("construct", help="build and inspect a code")
    p.add_argument("--code", default="p128_60", help="packaged code name or JSON file")
    p.add_argument("--profile", help="comma-separated block profile for class counting")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_construct)

    p = subs.add_parser("simulate", help="run an SNR sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_simulate)

    p = subs.add_parser("select-perms", help="greedy permutation selection")
    p.add_argument("--code", default="p128_60")
    p.add_argument("--profile", default="3,4")
    p.add_argument("-m", type=int, default=8)
    p.add_argument("--design-snr", type=float, required=True)
    p.add_argument("--batch-target", type=int, default=1000)
    p.add_argument("--pool-size", type=int, default=64)
    p.add_argument("--trial-cap", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_select_perms)

    p = subs.add_parser("bounds", help="list-decoding ML bound estimation")
    p.add_argument("--code", default="p128_60")
    p.add_argument("--ebn0", type=float, required=True)
    p.add_argument("--list-size", type=int, default=128)
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-frames", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_bounds)

    p = subs.add_parser("decode", help="single-frame decode with diagnostics")
    p.add_argument("--code", default="p128_60")
    p.add_argument("--decoder", default="FASTSSC")
    p.add_argument("--ebn0", type=float, default=3.0)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--permutations", help="JSON list for AED decoders")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_decode)

    p = subs.add_parser("equiv-check", help="fast vs plain integer-mode comparison")
    p.add_argument("--code", default="p128_60")
    p.add_argument("--frames", type=int, default=100_000)
    p.add_argument("--q", type=int, default=48)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_equiv_check)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
