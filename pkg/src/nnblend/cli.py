"""Command-line front end: one executable, one subcommand per workflow."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dataset, engine, gating, metrics, model, quantize


def _read_rd_csv(path: str) -> list[metrics.RdPoint]:
    points = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected 'rate,psnr', got {raw!r}")
        points.append(metrics.RdPoint(rate=float(parts[0]), distortion=float(parts[1])))
    return points


def _read_plane(path: str, width: int, height: int) -> np.ndarray:
    data = np.fromfile(path, dtype="<u2")
    if data.size != width * height:
        raise ValueError(
            f"{path}: expected {width * height} u16 samples, found {data.size}")
    return data.reshape(height, width)


def _load_patches(path: str) -> list[dataset.PatchRecord]:
    return dataset.read_patch_file(Path(path).read_bytes())


def _blend_all(records, weights_path: str | None, qweights_path: str | None):
    """Blend every record with the float or the integer path."""
    if (weights_path is None) == (qweights_path is None):
        raise ValueError("exactly one of --weights / --qweights is required")
    outputs = []
    if weights_path is not None:
        cfg, w = model.load_weights(Path(weights_path).read_bytes())
        for rec in records:
            req = engine.BlendRequest(pred0=rec.pred0.astype(np.int64),
                                      pred1=rec.pred1.astype(np.int64),
                                      cfg=cfg, bit_depth=rec.bit_depth)
            outputs.append(engine.forward_float(w, req).data[0])
    else:
        qw = quantize.load_quantized(Path(qweights_path).read_bytes())
        cfg = model.build_config(qw.n_layers)
        for rec in records:
            req = engine.BlendRequest(pred0=rec.pred0.astype(np.int64),
                                      pred1=rec.pred1.astype(np.int64),
                                      cfg=cfg, bit_depth=rec.bit_depth)
            outputs.append(engine.forward_int16(qw, req).data[0])
    return outputs


def _cmd_net_info(args) -> int:
    cfg = model.build_config(args.n)
    report = model.complexity_report(cfg, mac_block=args.block, memory_block=args.mem_block)
    param_memory = 2 * report.param_count  # int16 storage, rounding aside
    if args.csv:
        print("n,param_count,param_memory_bytes,mac_per_pixel,mac_block,"
              "peak_memory_bytes,memory_block")
        print(f"{args.n},{report.param_count},{param_memory},{report.mac_per_pixel},"
              f"{report.mac_block_size},{report.peak_memory},{report.memory_block_size}")
    else:
        print(f"network: {args.n} conv layers, border {cfg.border}")
        print(f"parameters: {report.param_count} (~{param_memory} bytes as int16)")
        print(f"mac/pixel at {report.mac_block_size}x{report.mac_block_size}: "
              f"{report.mac_per_pixel}")
        print(f"peak activation memory at {report.memory_block_size}x"
              f"{report.memory_block_size}: {report.peak_memory} bytes")
    return 0


def _cmd_quantize(args) -> int:
    cfg, w = model.load_weights(Path(args.weights).read_bytes())
    calib = _load_patches(args.calib)
    qw = quantize.quantize_direct(w, cfg, calib, bit_depth=args.bit_depth)
    Path(args.out).write_bytes(quantize.save_quantized(qw))
    if args.csv:
        print("layer,weight_shift,activation_shift")
        for idx, q in enumerate(qw.layers):
            print(f"{idx},{q.weight_shift},{q.activation_shift}")
    else:
        print(f"wrote {args.out}: {qw.n_layers} layers, "
              f"weight shifts {qw.weight_shifts}, activation shifts {qw.activation_shifts}")
    if args.report:
        rep = quantize.quantization_report(w, qw, calib)
        if args.csv:
            print(f"error,{rep.mean_abs_error:.6f},{rep.max_abs_error}")
        else:
            print(f"calibration error vs float: mean {rep.mean_abs_error:.4f} LSB, "
                  f"max {rep.max_abs_error} LSB")
    return 0


def _cmd_infer(args) -> int:
    records = _load_patches(args.patches)
    if not records:
        raise ValueError("patch file holds no records")
    outputs = _blend_all(records, args.weights, args.qweights)
    blob = b"".join(np.ascontiguousarray(o, dtype="<u2").tobytes() for o in outputs)
    Path(args.out).write_bytes(blob)
    mean_psnr = _aggregate_psnr(outputs, records)
    print(f"wrote {args.out}: {len(outputs)} blocks of "
          f"{outputs[0].shape[0]}x{outputs[0].shape[1]}, "
          f"psnr vs targets {mean_psnr:.2f} dB")
    return 0


def _aggregate_psnr(outputs, records) -> float:
    max_value = (1 << records[0].bit_depth) - 1
    stacked_out = np.stack(outputs).astype(np.float64)
    stacked_tgt = np.stack([r.target for r in records]).astype(np.float64)
    mse = float(np.mean((stacked_out - stacked_tgt) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(max_value * max_value / mse)


def _cmd_benchmark(args) -> int:
    if args.qweights is not None:
        qw = quantize.load_quantized(Path(args.qweights).read_bytes())
    else:
        cfg = model.build_config(args.n)
        w = model.random_weights(cfg, seed=args.seed)
        calib = dataset.synth_generate(count=32, displacement=1, noise_amplitude=2.0,
                                       seed=args.seed, n_border=cfg.n_layers)
        qw = quantize.quantize_direct(w, cfg, calib)
    report = engine.benchmark(qw, patch_size=args.patch_size, iterations=args.iterations)
    if args.csv:
        warm = "" if report.warm_start_ms is None else f"{report.warm_start_ms:.6f}"
        print("patch_size,iterations,cold_ms,warm_ms")
        print(f"{report.patch_size},{report.iterations},{report.cold_start_ms:.6f},{warm}")
    else:
        for line in report.lines():
            print(line)
    return 0


_GATE_KEYS = {
    "affine": "is_affine", "ciip": "uses_ciip", "bcw": "uses_bcw", "smvd": "uses_smvd",
    "poc_cur": "poc_current", "poc_ref0": "poc_ref0", "poc_ref1": "poc_ref1",
    "width": "width", "height": "height", "bi": "is_biprediction",
}


def _cmd_gate(args) -> int:
    fields = {
        "is_affine": args.affine, "uses_ciip": args.ciip, "uses_bcw": args.bcw,
        "uses_smvd": args.smvd, "poc_current": args.poc_cur,
        "poc_ref0": args.poc_ref0, "poc_ref1": args.poc_ref1,
        "width": args.width, "height": args.height, "is_biprediction": not args.uni,
    }
    for pair in args.kv:
        if "=" not in pair:
            raise ValueError(f"expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        if key not in _GATE_KEYS:
            raise ValueError(f"unknown coding-unit key {key!r}")
        field = _GATE_KEYS[key]
        fields[field] = int(value) if field.startswith(("poc", "width", "height")) \
            else bool(int(value))
    cu = gating.CuMeta(**fields)
    if args.mode == "all":
        parts = []
        for mode in gating.GatingMode:
            parts.append(f"{mode.value}={str(gating.should_apply(cu, mode)).lower()}")
        print(" ".join(parts))
    else:
        mode = gating.GatingMode(args.mode)
        print(f"apply={str(gating.should_apply(cu, mode)).lower()}")
    return 0


def _cmd_dataset_gen(args) -> int:
    records = dataset.synth_generate(count=args.count, displacement=args.displacement,
                                     noise_amplitude=args.noise, seed=args.seed,
                                     n_border=args.n, bit_depth=args.bit_depth)
    Path(args.out).write_bytes(dataset.write_patch_file(records))
    print(f"wrote {args.out}: {len(records)} records, border {args.n}, "
          f"displacement {args.displacement}, noise {args.noise}")
    return 0


def _cmd_dataset_extract(args) -> int:
    prev = _read_plane(args.prev, args.width, args.height)
    cur = _read_plane(args.cur, args.width, args.height)
    nxt = _read_plane(args.next, args.width, args.height)
    records = dataset.extract_triplets(prev, cur, nxt, stride=args.stride,
                                       n_border=args.n, bit_depth=args.bit_depth)
    Path(args.out).write_bytes(dataset.write_patch_file(records))
    print(f"wrote {args.out}: {len(records)} records from a "
          f"{args.width}x{args.height} triplet")
    return 0


def _cmd_eval(args) -> int:
    records = _load_patches(args.patches)
    if not records:
        raise ValueError("patch file holds no records")
    outputs = _blend_all(records, args.weights, args.qweights)
    max_value = (1 << records[0].bit_depth) - 1
    rows = []
    for idx, (rec, out) in enumerate(zip(records, outputs)):
        avg = metrics.average_blend(rec.pred0, rec.pred1)[
            rec.n_border:-rec.n_border, rec.n_border:-rec.n_border]
        rows.append((idx,
                     metrics.psnr(out, rec.target, max_value),
                     metrics.psnr(avg, rec.target, max_value),
                     metrics.satd(out, rec.target),
                     metrics.satd(avg, rec.target)))
    nn_psnr = _aggregate_psnr(outputs, records)
    avg_blends = [metrics.average_blend(r.pred0, r.pred1)[
        r.n_border:-r.n_border, r.n_border:-r.n_border] for r in records]
    avg_psnr = _aggregate_psnr(avg_blends, records)
    nn_satd = sum(r[3] for r in rows)
    avg_satd = sum(r[4] for r in rows)
    if args.csv:
        print("patch,nn_psnr,avg_psnr,nn_satd,avg_satd")
        for idx, npsnr, apsnr, nsatd, asatd in rows:
            print(f"{idx},{npsnr:.4f},{apsnr:.4f},{nsatd},{asatd}")
        print(f"all,{nn_psnr:.4f},{avg_psnr:.4f},{nn_satd},{avg_satd}")
    else:
        print(f"patches: {len(records)}")
        print(f"network blend: psnr {nn_psnr:.2f} dB, satd {nn_satd}")
        print(f"average blend: psnr {avg_psnr:.2f} dB, satd {avg_satd}")
        print(f"delta: psnr {nn_psnr - avg_psnr:+.2f} dB, satd {nn_satd - avg_satd:+d}")
    return 0


def _cmd_bdrate(args) -> int:
    anchor = _read_rd_csv(args.anchor)
    test = _read_rd_csv(args.test)
    delta = metrics.bd_rate(anchor, test)
    print(f"{delta:.2f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nnblend",
        description="Inference, quantization, and evaluation for the bi-prediction "
                    "blending network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("net-info", help="architecture size, compute, and memory figures")
    p.add_argument("--n", type=int, required=True, help="total 3x3 conv layers")
    p.add_argument("--block", type=int, default=16, help="block size for MAC/pixel")
    p.add_argument("--mem-block", type=int, default=32, help="block size for peak memory")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_net_info)

    p = sub.add_parser("quantize", help="fixed-point quantization of a weight file")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib", required=True, help="patch file used for calibration")
    p.add_argument("--out", required=True)
    p.add_argument("--bit-depth", type=int, default=10)
    p.add_argument("--report", action="store_true",
                   help="print error statistics on the calibration set")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("infer", help="blend every record of a patch file")
    p.add_argument("--patches", required=True)
    p.add_argument("--weights", help="float weight file (float path)")
    p.add_argument("--qweights", help="quantized weight file (integer path)")
    p.add_argument("--out", required=True, help="raw u16 little-endian output blocks")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("benchmark", help="cold/warm timing of the integer path")
    p.add_argument("--qweights")
    p.add_argument("--n", type=int, default=6,
                   help="build a random network of this size when no --qweights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch-size", type=int, default=32)
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("gate", help="tri-mode application decision for one coding unit")
    p.add_argument("--mode", choices=["default", "fast", "slow", "all"], default="all")
    p.add_argument("--affine", action="store_true")
    p.add_argument("--ciip", action="store_true")
    p.add_argument("--bcw", action="store_true")
    p.add_argument("--smvd", action="store_true")
    p.add_argument("--uni", action="store_true", help="mark the block uni-predicted")
    p.add_argument("--poc-cur", type=int, default=4)
    p.add_argument("--poc-ref0", type=int, default=0)
    p.add_argument("--poc-ref1", type=int, default=8)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("kv", nargs="*", metavar="key=value",
                   help="overrides: affine, ciip, bcw, smvd, bi, poc_cur, poc_ref0, "
                        "poc_ref1, width, height")
    p.set_defaults(func=_cmd_gate)

    p = sub.add_parser("dataset", help="generate or extract patch files")
    dsub = p.add_subparsers(dest="dataset_command", required=True)

    g = dsub.add_parser("gen", help="synthetic patches with symmetric motion")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--displacement", type=int, default=2)
    g.add_argument("--noise", type=float, default=2.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=6, help="prediction border samples")
    g.add_argument("--bit-depth", type=int, default=10)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_dataset_gen)

    g = dsub.add_parser("extract", help="cut patches from three raw luma planes")
    g.add_argument("--prev", required=True, help="raw u16 little-endian plane")
    g.add_argument("--cur", required=True)
    g.add_argument("--next", required=True)
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--height", type=int, required=True)
    g.add_argument("--stride", type=int, default=16)
    g.add_argument("--n", type=int, default=6)
    g.add_argument("--bit-depth", type=int, default=10)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_dataset_extract)

    p = sub.add_parser("eval", help="network vs average blending on a patch file")
    p.add_argument("--patches", required=True)
    p.add_argument("--weights")
    p.add_argument("--qweights")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bdrate", help="rate delta between two rate,psnr CSV curves")
    p.add_argument("--anchor", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=_cmd_bdrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
