"""File formats: ARST tensors, pose and pair JSONL, instance JSON, run directories.

ARST layout (all little-endian)::

    b"ARST" | version u8 | c u32 | h u32 | w u32 | c*h*w float32, row-major

which makes a 17-byte header.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import List, Sequence

import numpy as np

from ..exceptions import ConfigError, TensorFormatError
from ..geom import Pose
from ..skeleton import NUM_KEYPOINTS, FootInstance
from ..targets import OutputTensors
from ..track import MatchedPairs, read_pgm, write_pgm

MAGIC = b"ARST"
VERSION = 1
_HEADER = struct.Struct("<4sBIII")
HEADER_SIZE = _HEADER.size


def encode_tensor(tensor) -> bytes:
    t = np.asarray(tensor)
    if t.ndim != 3:
        raise ValueError(f"expected a (c, h, w) tensor, got shape {t.shape}")
    c, h, w = t.shape
    return _HEADER.pack(MAGIC, VERSION, c, h, w) + np.ascontiguousarray(t, dtype="<f4").tobytes()


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise TensorFormatError("truncated magic", offset=len(data))
    if data[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {data[:4]!r}", offset=0)
    if len(data) < HEADER_SIZE:
        raise TensorFormatError("truncated header", offset=len(data))
    _, version, c, h, w = _HEADER.unpack_from(data)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}", offset=4)
    need = HEADER_SIZE + 4 * c * h * w
    if len(data) < need:
        raise TensorFormatError(f"truncated payload: need {need} bytes, have {len(data)}", offset=len(data))
    if len(data) > need:
        raise TensorFormatError(f"{len(data) - need} trailing bytes", offset=need)
    return np.frombuffer(data, dtype="<f4", count=c * h * w, offset=HEADER_SIZE).reshape(c, h, w).copy()


def write_tensor(path, tensor) -> None:
    Path(path).write_bytes(encode_tensor(tensor))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def write_output_tensors(path, tensors: OutputTensors) -> None:
    write_tensor(path, tensors.stacked())


def read_output_tensors(path) -> OutputTensors:
    try:
        return OutputTensors.from_stacked(read_tensor(path))
    except ValueError as exc:
        if isinstance(exc, TensorFormatError):
            raise
        raise TensorFormatError(str(exc), offset=5) from exc


# --- poses -------------------------------------------------------------------


def pose_to_record(frame: int, pose: Pose, flags=()) -> dict:
    qw, qx, qy, qz = (float(v) for v in pose.rotation)
    tx, ty, tz = (float(v) for v in pose.translation)
    return dict(frame=int(frame), qw=qw, qx=qx, qy=qy, qz=qz, tx=tx, ty=ty, tz=tz, flags=list(flags))


def record_to_pose(rec: dict) -> Pose:
    try:
        return Pose([rec["qw"], rec["qx"], rec["qy"], rec["qz"]], [rec["tx"], rec["ty"], rec["tz"]])
    except KeyError as exc:
        raise ConfigError(f"pose record is missing field {exc}") from exc


def _read_jsonl(path) -> List[dict]:
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{n}: {exc}") from exc
    return out


def _write_jsonl(path, records) -> None:
    Path(path).write_text("".join(json.dumps(r) + "\n" for r in records))


def write_poses(path, poses: Sequence, flags=None, frames=None) -> None:
    """One JSON object per line; ``None`` poses are skipped."""
    frames = range(len(poses)) if frames is None else frames
    flags = [()] * len(poses) if flags is None else flags
    _write_jsonl(path, [pose_to_record(i, p, f) for i, p, f in zip(frames, poses, flags) if p is not None])


def read_poses(path):
    """Returns ``(frames, poses, flags)`` lists."""
    recs = _read_jsonl(path)
    return [int(r.get("frame", i)) for i, r in enumerate(recs)], [record_to_pose(r) for r in recs], [
        list(r.get("flags", [])) for r in recs
    ]


def write_pairs(path, pairs_seq: Sequence[MatchedPairs]) -> None:
    _write_jsonl(path, [dict(frame=i, prev=p.prev.tolist(), cur=p.cur.tolist()) for i, p in enumerate(pairs_seq)])


def read_pairs(path) -> dict:
    """Map frame index to :class:`MatchedPairs`."""
    out = {}
    for i, r in enumerate(_read_jsonl(path)):
        try:
            out[int(r.get("frame", i))] = MatchedPairs(np.asarray(r["prev"], float), np.asarray(r["cur"], float))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad pair record {i}: {exc}") from exc
    return out


# --- keypoint instances ------------------------------------------------------


def instances_to_json(instances: Sequence[FootInstance]) -> list:
    out = []
    for inst in instances:
        kp = [None if not np.all(np.isfinite(p)) else [float(p[0]), float(p[1])] for p in inst.keypoints]
        conf = [None if not np.isfinite(c) else float(c) for c in inst.confidences]
        out.append(dict(keypoints=kp, confidences=conf))
    return out


def instances_from_json(obj) -> List[FootInstance]:
    """Accepts the decode output (list of instances), one instance dict, or a bare list of 8 points."""
    if isinstance(obj, dict):
        obj = obj.get("instances", [obj])
    if isinstance(obj, list) and len(obj) == NUM_KEYPOINTS and all(p is None or _is_point(p) for p in obj):
        obj = [dict(keypoints=obj)]
    out = []
    for item in obj:
        if not isinstance(item, dict) or "keypoints" not in item:
            raise ConfigError("each instance needs a 'keypoints' list")
        kp = np.array([[np.nan, np.nan] if p is None else p for p in item["keypoints"]], dtype=np.float64)
        if kp.shape != (NUM_KEYPOINTS, 2):
            raise ConfigError(f"instance keypoints must be {NUM_KEYPOINTS}x2, got {kp.shape}")
        conf = item.get("confidences")
        conf = None if conf is None else np.array([np.nan if c is None else c for c in conf], dtype=np.float64)
        out.append(FootInstance(kp, conf))
    return out


def _is_point(p):
    return isinstance(p, (list, tuple)) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p)


# --- run directories ---------------------------------------------------------


def save_frames(directory, cfg, frames) -> None:
    """Persist simulated frames: config, per-frame tensors and masks, per-foot poses and pairs."""
    d = Path(directory)
    (d / "tensors").mkdir(parents=True, exist_ok=True)
    (d / "masks").mkdir(exist_ok=True)
    (d / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    n_feet = len(frames[0].true_poses) if frames else 0
    for f in frames:
        write_output_tensors(d / "tensors" / f"{f.index:05d}.arst", f.tensors)
        write_pgm(d / "masks" / f"leg_{f.index:05d}.pgm", f.leg_mask)
        for k, m in enumerate(f.shoe_masks):
            write_pgm(d / "masks" / f"shoe{k}_{f.index:05d}.pgm", m)
    for k in range(n_feet):
        write_poses(d / f"truth_foot{k}.jsonl", [f.true_poses[k] for f in frames], frames=[f.index for f in frames])
        write_pairs(d / f"pairs_foot{k}.jsonl", [f.pairs[k] for f in frames])


def load_frames(directory):
    """Inverse of :func:`save_frames`; returns ``(cfg, frames)``."""
    from .simulate import FrameRecord, TrajectoryConfig

    d = Path(directory)
    if not (d / "config.json").exists():
        raise ConfigError(f"{d} is not a run directory (config.json missing)")
    try:
        cfg = TrajectoryConfig.from_dict(json.loads((d / "config.json").read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config.json: {exc}") from exc
    truths = [read_poses(d / f"truth_foot{k}.jsonl")[1] for k in range(cfg.n_feet)]
    pairs = [read_pairs(d / f"pairs_foot{k}.jsonl") for k in range(cfg.n_feet)]
    frames = []
    for i in range(cfg.n_frames):
        tensors = read_output_tensors(d / "tensors" / f"{i:05d}.arst")
        leg = read_pgm(d / "masks" / f"leg_{i:05d}.pgm") > 0
        shoes = [read_pgm(d / "masks" / f"shoe{k}_{i:05d}.pgm") > 0 for k in range(cfg.n_feet)]
        frames.append(
            FrameRecord(
                i,
                [truths[k][i] for k in range(cfg.n_feet)],
                tensors,
                [pairs[k].get(i, MatchedPairs.empty()) for k in range(cfg.n_feet)],
                leg,
                shoes,
                timestamp=i / cfg.fps,
            )
        )
    return cfg, frames
