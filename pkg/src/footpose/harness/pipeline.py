"""End-to-end runner: tensors to per-foot poses and occlusion masks.

Per frame: peaks, grouping, assignment of instances to foot tracks, PnP,
stabilization and occlusion. Failures are recorded as per-frame flags and
the run goes on. Stage times are kept per frame and rolled up into three
categories: ``network`` (tensor load, a stand-in for the absent network),
``pose`` (decode, grouping, PnP, stabilization) and ``occlusion``
(shoe render plus occlusion region).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..decode import DEFAULT_MIN_SCORE, DEFAULT_NMS_RADIUS, DEFAULT_THRESHOLD, extract_peaks, group_keypoints
from ..exceptions import FootPoseError
from ..geom import Intrinsics, Pose
from ..occlude import occlusion_mask
from ..pnp import MIN_CORRESPONDENCES, FootModel, load_default_foot_model, pose_error, project_model_keypoints, solve_instance
from ..stabilize import StabilizerConfig, StabilizerState, stabilize
from ..track import MatchedPairs
from .metrics import jitter_metric
from .simulate import FrameRecord, TrajectoryConfig, render_shoe_mask

STAGES = ("network", "decode", "group", "pnp", "stabilize", "occlude")
CATEGORIES = {"network": ("network",), "pose": ("decode", "group", "pnp", "stabilize"), "occlusion": ("occlude",)}


@dataclass
class PipelineOptions:
    """Runner settings. ``stride`` maps tensor to image pixels."""

    K: Intrinsics
    stride: float = 4.0
    n_tracks: Optional[int] = None
    stabilize: bool = True
    stabilizer: StabilizerConfig = field(default_factory=StabilizerConfig)
    occlusion: bool = True
    min_keypoints: int = MIN_CORRESPONDENCES
    threshold: float = DEFAULT_THRESHOLD
    nms_radius: float = DEFAULT_NMS_RADIUS
    min_score: float = DEFAULT_MIN_SCORE

    @classmethod
    def from_config(cls, cfg: TrajectoryConfig, **overrides) -> "PipelineOptions":
        return cls(K=cfg.intrinsics, stride=float(cfg.stride), n_tracks=cfg.n_feet, **overrides)


@dataclass
class FrameResult:
    """Per-frame output; lists are indexed by track."""

    index: int
    measured: List[Optional[Pose]]
    refined: List[Optional[Pose]]
    flags: List[List[str]]
    occlusion: List[Optional[np.ndarray]]
    truth_ids: List[int]
    timings_ms: Dict[str, float]


@dataclass
class RunReport:
    """Per-frame results plus aggregates that :meth:`recompute` reproduces.

    ``truths[l][k]`` is the ground-truth pose of the foot that track ``k``
    follows (its identity at first detection), or ``None`` when unknown.
    """

    frames: List[FrameResult]
    truths: List[List[Optional[Pose]]]
    track_feet: List[int]
    n_tracks: int
    K: Intrinsics
    model: FootModel = field(repr=False, default=None)
    metrics: dict = field(default_factory=dict)

    def recompute(self) -> dict:
        return compute_metrics(self)


def _track_series(report: RunReport, k: int, which: str):
    est, tru = [], []
    for fr, truth in zip(report.frames, report.truths):
        p = getattr(fr, which)[k]
        t = truth[k] if truth is not None else None
        if p is not None and t is not None:
            est.append(p)
            tru.append(t)
    return est, tru


def _jitter_runs(poses_by_frame, model, K):
    """Jitter over maximal runs of consecutive frames that all have a pose, frame-weighted."""
    total, steps = 0.0, 0
    run = []
    for p in poses_by_frame + [None]:
        if p is not None:
            run.append(p)
            continue
        if len(run) >= 2:
            total += jitter_metric(run, model, K) * (len(run) - 1)
            steps += len(run) - 1
        run = []
    return total, steps


def compute_metrics(report: RunReport) -> dict:
    """Aggregate metrics, derived only from the per-frame records."""
    out = {}
    for which in ("measured", "refined"):
        errs, rel = [], []
        for k in range(report.n_tracks):
            est, tru = _track_series(report, k, which)
            for e, t in zip(est, tru):
                errs.append(pose_error(e, t))
                rel.append(np.linalg.norm(e.translation - t.translation) / t.translation[2])
        a = np.asarray(errs) if errs else np.full((1, 2), np.nan)
        suffix = "" if which == "refined" else "_raw"
        out["mean_euler_deg" + suffix] = float(a[:, 0].mean())
        out["mean_translation_cm" + suffix] = float(a[:, 1].mean())
        out["mean_translation_rel" + suffix] = float(np.mean(rel)) if rel else float("nan")
        total, steps = 0.0, 0
        for k in range(report.n_tracks):
            t, s = _jitter_runs([getattr(fr, which)[k] for fr in report.frames], report.model, report.K)
            total, steps = total + t, steps + s
        out["jitter" + ("_refined" if which == "refined" else "_raw")] = total / steps if steps else float("nan")
    out["identity_swaps"] = count_identity_swaps(report)
    out["failed_frames"] = sum(1 for fr in report.frames if any(f for f in fr.flags))
    n = max(len(report.frames), 1)
    stage = {s: sum(fr.timings_ms.get(s, 0.0) for fr in report.frames) / n for s in STAGES}
    out["timings_ms"] = stage
    out["category_ms"] = {c: sum(stage[s] for s in members) for c, members in CATEGORIES.items()}
    work = sum(stage[s] for s in STAGES if s != "network")
    out["fps"] = 1000.0 / work if work > 0 else float("inf")
    return out


def count_identity_swaps(report: RunReport) -> int:
    swaps = 0
    for k in range(report.n_tracks):
        last = None
        for fr in report.frames:
            tid = fr.truth_ids[k]
            if tid < 0:
                continue
            if last is not None and tid != last:
                swaps += 1
            last = tid
    return swaps


def _centroid(kp):
    ok = np.all(np.isfinite(kp), axis=1)
    return kp[ok].mean(axis=0)


def _kp_distance(a, b):
    ok = np.all(np.isfinite(a), axis=1) & np.all(np.isfinite(b), axis=1)
    if not ok.any():
        return 1e9
    return float(np.linalg.norm(a[ok] - b[ok], axis=1).mean())


def _assign_pairs(pairs: MatchedPairs, anchors: List[Optional[np.ndarray]]) -> List[MatchedPairs]:
    """Split pooled corner pairs by the nearest previous-frame keypoint of each track."""
    n = len(anchors)
    if len(pairs) == 0 or all(a is None for a in anchors):
        return [MatchedPairs.empty() for _ in range(n)]
    d = np.full((len(pairs), n), np.inf)
    for k, a in enumerate(anchors):
        if a is None:
            continue
        a = a[np.all(np.isfinite(a), axis=1)]
        d[:, k] = np.min(np.linalg.norm(pairs.prev[:, None, :] - a[None], axis=2), axis=1)
    owner = np.argmin(d, axis=1)
    return [MatchedPairs(pairs.prev[owner == k], pairs.cur[owner == k]) for k in range(n)]


def run_pipeline(frames: List[FrameRecord], options: PipelineOptions, model: Optional[FootModel] = None) -> RunReport:
    """Run every stage over ``frames`` and collect a :class:`RunReport`."""
    if not frames:
        raise ValueError("no frames to process")
    model = load_default_foot_model() if model is None else model
    K = options.K
    n_tracks = options.n_tracks or len(frames[0].true_poses)
    states = [StabilizerState() for _ in range(n_tracks)]
    last_kp: List[Optional[np.ndarray]] = [None] * n_tracks
    track_feet = [-1] * n_tracks
    results, truths = [], []
    started = False

    for frame in frames:
        tm = dict.fromkeys(STAGES, 0.0)
        flags = [[] for _ in range(n_tracks)]
        measured: List[Optional[Pose]] = [None] * n_tracks
        refined: List[Optional[Pose]] = [None] * n_tracks
        masks: List[Optional[np.ndarray]] = [None] * n_tracks

        t0 = time.perf_counter()
        heatmap, pafmap = np.asarray(frame.tensors.heatmap), np.asarray(frame.tensors.pafmap)
        t1 = time.perf_counter()
        peaks = extract_peaks(heatmap, options.threshold, options.nms_radius)
        t2 = time.perf_counter()
        instances = group_keypoints(peaks, pafmap, min_score=options.min_score)
        kps = [inst.keypoints * options.stride for inst in instances if inst.completeness >= options.min_keypoints]
        kps = kps[:n_tracks]
        # instances to tracks: left-to-right at start, then nearest previous keypoints
        slot = {}
        if kps:
            if not started:
                order = np.argsort([_centroid(kp)[0] for kp in kps], kind="stable")
                slot = {int(i): k for k, i in enumerate(order)}
                started = True
            else:
                cost = np.array([[_kp_distance(kp, last) if last is not None else 1e6 for last in last_kp] for kp in kps])
                rows, cols = linear_sum_assignment(cost)
                slot = {int(r): int(c) for r, c in zip(rows, cols)}
        t3 = time.perf_counter()

        track_kp: List[Optional[np.ndarray]] = [None] * n_tracks
        for i, k in slot.items():
            track_kp[k] = kps[i]
            try:
                measured[k] = solve_instance(kps[i], model, K).pose
            except FootPoseError as exc:
                flags[k].append(f"pnp_failed:{type(exc).__name__}")
        for k in range(n_tracks):
            if track_kp[k] is None:
                flags[k].append("not_detected")
        t4 = time.perf_counter()

        pooled = MatchedPairs(
            np.concatenate([p.prev for p in frame.pairs]) if frame.pairs else np.zeros((0, 2)),
            np.concatenate([p.cur for p in frame.pairs]) if frame.pairs else np.zeros((0, 2)),
        )
        split = _assign_pairs(pooled, last_kp)
        for k in range(n_tracks):
            if measured[k] is None:
                states[k] = StabilizerState()
                continue
            if not options.stabilize:
                refined[k] = measured[k]
                continue
            try:
                refined[k], states[k] = stabilize(states[k], measured[k], split[k], model.cloud, K, options.stabilizer)
            except FootPoseError as exc:
                flags[k].append(f"stabilize_failed:{type(exc).__name__}")
                refined[k], states[k] = measured[k], StabilizerState(measured[k], True)
        t5 = time.perf_counter()

        if options.occlusion:
            size = frame.leg_mask.shape[0]
            for k in range(n_tracks):
                if refined[k] is None:
                    continue
                try:
                    shoe = render_shoe_mask(model, refined[k], K, size)
                    masks[k] = occlusion_mask(shoe, frame.leg_mask)
                except (FootPoseError, ValueError) as exc:
                    flags[k].append(f"occlusion_failed:{type(exc).__name__}")
        t6 = time.perf_counter()

        tm.update(network=t1 - t0, decode=t2 - t1, group=t3 - t2, pnp=t4 - t3, stabilize=t5 - t4, occlude=t6 - t5)
        last_kp = [track_kp[k] if track_kp[k] is not None else last_kp[k] for k in range(n_tracks)]

        # ground-truth labels, outside the timed region
        truth_kp = [project_model_keypoints(model, p, K) for p in frame.true_poses]
        truth_ids = [-1] * n_tracks
        for k in range(n_tracks):
            if track_kp[k] is not None and truth_kp:
                truth_ids[k] = int(np.argmin([_kp_distance(track_kp[k], t) for t in truth_kp]))
                if track_feet[k] < 0:
                    track_feet[k] = truth_ids[k]
        truths.append([frame.true_poses[f] if 0 <= f < len(frame.true_poses) else None for f in track_feet])
        results.append(
            FrameResult(frame.index, measured, refined, flags, masks, truth_ids, {s: v * 1000.0 for s, v in tm.items()})
        )

    report = RunReport(results, truths, track_feet, n_tracks, K, model)
    report.metrics = compute_metrics(report)
    return report
