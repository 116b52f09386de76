"""``footpose`` command line.

Exit status: 0 on success, 1 on usage errors, 2 on data or format errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from ..decode import DEFAULT_MIN_SCORE, DEFAULT_NMS_RADIUS, DEFAULT_THRESHOLD, decode
from ..exceptions import ConfigError, FootPoseError
from ..geom import Intrinsics
from ..occlude import occlusion_mask
from ..pnp import FootModel, load_default_foot_model, solve_instance
from ..stabilize import StabilizerState, config_from_dict, stabilize
from ..track import MatchedPairs, read_pgm, write_pgm
from . import io
from .pipeline import PipelineOptions, run_pipeline
from .simulate import TrajectoryConfig, simulate_sequence

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DEFAULT_INTRINSICS = (280.0, 280.0, 128.0, 128.0)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _model(arg) -> FootModel:
    return load_default_foot_model() if arg in (None, "default") else FootModel.load(arg)


def _intrinsics(vals) -> Intrinsics:
    return Intrinsics(*vals)


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    cfg = TrajectoryConfig.from_dict(_load_json(args.config) if args.config else {})
    frames = simulate_sequence(cfg, _model(args.model))
    io.save_frames(args.out, cfg, frames)
    print(f"wrote {len(frames)} frames to {args.out}")


def cmd_decode(args):
    tensors = io.read_output_tensors(args.tensors)
    instances = decode(tensors, threshold=args.threshold, nms_radius=args.nms_radius, min_score=args.min_score)
    _emit(json.dumps({"instances": io.instances_to_json(instances)}, indent=2) + "\n", args.out)


def cmd_pnp(args):
    K = _intrinsics(args.intrinsics)
    model = _model(args.model)
    instances = io.instances_from_json(_load_json(args.keypoints))
    lines = []
    for i, inst in enumerate(instances):
        res = solve_instance(inst.keypoints * args.stride, model, K)
        rec = io.pose_to_record(i, res.pose)
        rec["residual"] = res.residual
        lines.append(json.dumps(rec))
    _emit("".join(ln + "\n" for ln in lines), args.out)


def cmd_stabilize(args):
    cfg = config_from_dict(_load_json(args.config) if args.config else {})
    overrides = {}
    if args.add_to_measured:
        overrides["translation_prediction"] = "add_to_measured"
    if args.no_clamp:
        overrides["weight_clamp"] = False
    if args.raw_prev:
        overrides["prev_pose_source"] = "raw"
    cfg = config_from_dict({**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__}, **overrides})
    K = _intrinsics(args.intrinsics)
    model = _model(args.model)
    frames, poses, flags = io.read_poses(args.poses)
    pairs = io.read_pairs(args.pairs)
    state = StabilizerState()
    refined = []
    for f, p in zip(frames, poses):
        out, state = stabilize(state, p, pairs.get(f, MatchedPairs.empty()), model.cloud, K, cfg)
        refined.append(out)
    text = "".join(json.dumps(io.pose_to_record(f, p, fl)) + "\n" for f, p, fl in zip(frames, refined, flags))
    _emit(text, args.out)


def cmd_occlude(args):
    shoe = read_pgm(args.shoe_mask) > 0
    leg = read_pgm(args.leg_mask) > 0
    mask = occlusion_mask(shoe, leg)
    write_pgm(args.out, mask)
    print(f"occlusion pixels: {int(mask.sum())}" + ("" if mask.any() else " (leg does not cross the shoe outline)"))


def _report_json(report):
    frames = []
    for fr in report.frames:
        tracks = []
        for k in range(report.n_tracks):
            tracks.append(
                dict(
                    measured=None if fr.measured[k] is None else io.pose_to_record(fr.index, fr.measured[k]),
                    refined=None if fr.refined[k] is None else io.pose_to_record(fr.index, fr.refined[k]),
                    flags=fr.flags[k],
                    truth_id=fr.truth_ids[k],
                    occlusion_pixels=None if fr.occlusion[k] is None else int(fr.occlusion[k].sum()),
                )
            )
        frames.append(dict(frame=fr.index, tracks=tracks, timings_ms=fr.timings_ms))
    return dict(metrics=report.metrics, track_feet=report.track_feet, frames=frames)


def cmd_eval(args):
    cfg, frames = io.load_frames(args.run)
    stab = config_from_dict(_load_json(args.config) if args.config else {})
    opts = PipelineOptions.from_config(cfg, stabilize=not args.no_stabilize, stabilizer=stab)
    report = run_pipeline(frames, opts, _model(args.model))
    Path(args.report).write_text(json.dumps(_report_json(report), indent=2) + "\n")
    m = report.metrics
    print(
        f"euler {m['mean_euler_deg']:.3f} deg  translation {m['mean_translation_cm']:.3f} cm  "
        f"jitter raw {m['jitter_raw']:.3f} refined {m['jitter_refined']:.3f} px/frame  swaps {m['identity_swaps']}"
    )


def cmd_bench(args):
    if args.frames < 1:
        raise ConfigError("--frames must be >= 1")
    cfg = TrajectoryConfig(n_frames=args.frames, motion=args.motion, amplitude_rad=0.2, seed=args.seed)
    t0 = time.perf_counter()
    frames = simulate_sequence(cfg)
    sim_ms = (time.perf_counter() - t0) * 1000.0 / len(frames)
    opts = PipelineOptions.from_config(cfg)
    run_pipeline(frames[: min(5, len(frames))], opts)  # warm-up
    report = run_pipeline(frames, opts)
    m = report.metrics
    print(f"frames {len(frames)}  feet {cfg.n_feet}  image {cfg.image_size}px  tensor {cfg.tensor_size}px")
    print(f"network (stand-in: simulation) {sim_ms:8.3f} ms/frame")
    for name, ms in m["timings_ms"].items():
        if name != "network":
            print(f"  {name:<10s} {ms:8.3f} ms/frame")
    print(f"pose estimation and stabilization {m['category_ms']['pose']:8.3f} ms/frame")
    print(f"occlusion generation              {m['category_ms']['occlusion']:8.3f} ms/frame")
    print(f"throughput {m['fps']:.1f} frames/s (decode+group+PnP+stabilize+occlude)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="footpose", description="Foot pose, stabilization and occlusion pipeline tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a synthetic run directory")
    s.add_argument("--config", help="JSON file with TrajectoryConfig keys")
    s.add_argument("--out", required=True)
    s.add_argument("--model", default="default")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("decode", help="tensors (ARST) to grouped keypoints (JSON, tensor pixels)")
    s.add_argument("--tensors", required=True)
    s.add_argument("--out")
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--nms-radius", type=float, default=DEFAULT_NMS_RADIUS)
    s.add_argument("--min-score", type=float, default=DEFAULT_MIN_SCORE)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("pnp", help="keypoints JSON to poses JSONL")
    s.add_argument("--keypoints", required=True)
    s.add_argument("--model", default="default", help="foot model file or 'default'")
    s.add_argument("--intrinsics", nargs=4, type=float, metavar=("FX", "FY", "CX", "CY"), required=True)
    s.add_argument("--stride", type=float, default=1.0, help="multiply keypoints by this (tensor to image pixels)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_pnp)

    s = sub.add_parser("stabilize", help="measured poses plus corner pairs to refined poses")
    s.add_argument("--poses", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument(
        "--add-to-measured",
        "--literal-eq5",
        dest="add_to_measured",
        action="store_true",
        help="add flow to the current measured translation instead of the previous one",
    )
    s.add_argument("--no-clamp", action="store_true", help="do not clamp the blend weight to [0, 1]")
    s.add_argument("--raw-prev", action="store_true", help="use the raw measurement as the next previous pose")
    s.add_argument("--config", help="JSON file with stabilizer keys")
    s.add_argument("--intrinsics", nargs=4, type=float, metavar=("FX", "FY", "CX", "CY"), default=DEFAULT_INTRINSICS)
    s.add_argument("--model", default="default")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stabilize)

    s = sub.add_parser("occlude", help="shoe and leg masks (PGM) to occlusion mask (PGM)")
    s.add_argument("--shoe-mask", required=True)
    s.add_argument("--leg-mask", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_occlude)

    s = sub.add_parser("eval", help="run the pipeline on a run directory and write a JSON report")
    s.add_argument("--run", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--config", help="JSON file with stabilizer keys")
    s.add_argument("--no-stabilize", action="store_true")
    s.add_argument("--model", default="default")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="time the pipeline on a synthetic two-foot sequence")
    s.add_argument("--frames", type=int, default=300)
    s.add_argument("--motion", default="walk", choices=("static", "sinusoid", "walk"))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (FootPoseError, ValueError, OSError, KeyError) as exc:
        print(f"footpose {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
