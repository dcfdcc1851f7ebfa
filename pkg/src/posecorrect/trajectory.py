"""Keyframe-anchored trajectory model.

A trajectory is a list of keyframes with world poses plus relative frames
whose poses are stored with respect to a parent keyframe (``rel_pose`` is
``T_{kf,frame}``).  Segments group the relative frames between consecutive
keyframes; a terminal partial segment (no closing keyframe) collects any
trailing relative frames.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .liegeom import Pose

DEFAULT_ASSOC_TOL = 0.01  # seconds; nearest-timestamp association window


class AssociationError(ValueError):
    """A frame could not be matched to a keyframe or ground-truth pose."""


@dataclass(frozen=True, order=True)
class FrameId:
    stamp: float
    index: int


@dataclass(frozen=True)
class Keyframe:
    id: FrameId
    world_pose: Pose


@dataclass(frozen=True)
class RelativeFrame:
    id: FrameId
    parent: int          # keyframe index i
    rel_pose: Pose       # T_{kf_i, frame}


@dataclass(frozen=True)
class Segment:
    """Relative frames between keyframe ``kf_a`` and ``kf_b``.

    ``kf_b is None`` marks the terminal partial segment after the last
    keyframe.
    """

    index: int
    kf_a: Keyframe
    kf_b: Optional[Keyframe]
    rels: tuple[RelativeFrame, ...]

    @property
    def terminal(self) -> bool:
        return self.kf_b is None


@dataclass(frozen=True)
class KeyframeUpdate:
    index: int
    old_pose: Pose
    new_pose: Pose


def segmentize(
    keyframes: Sequence[Keyframe],
    relatives: Sequence[RelativeFrame],
) -> tuple[Segment, ...]:
    """Partition relative frames into per-keyframe-pair segments.

    The parent index recorded on each relative frame is authoritative; a
    frame whose parent does not exist, or whose timestamp falls outside its
    parent's segment window, raises :class:`AssociationError`.  A frame at
    exactly a keyframe timestamp belongs to the segment that keyframe opens.
    """
    if not keyframes:
        raise AssociationError("trajectory has no keyframes")
    stamps = [kf.id.stamp for kf in keyframes]
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        raise AssociationError("keyframe timestamps must be strictly increasing")

    n = len(keyframes)
    buckets: list[list[RelativeFrame]] = [[] for _ in range(n)]
    for rel in relatives:
        i = rel.parent
        if not 0 <= i < n:
            raise AssociationError(
                f"relative frame {rel.id} references missing keyframe {i}"
            )
        lo = stamps[i]
        hi = stamps[i + 1] if i + 1 < n else float("inf")
        if not lo <= rel.id.stamp < hi:
            raise AssociationError(
                f"relative frame {rel.id} lies outside keyframe {i}'s segment"
            )
        buckets[i].append(rel)

    segments = []
    for i in range(n):
        rels = tuple(sorted(buckets[i], key=lambda r: (r.id.stamp, r.id.index)))
        kf_b = keyframes[i + 1] if i + 1 < n else None
        segments.append(Segment(index=i, kf_a=keyframes[i], kf_b=kf_b, rels=rels))
    return tuple(segments)


@dataclass(frozen=True)
class Trajectory:
    keyframes: tuple[Keyframe, ...]
    relatives: tuple[RelativeFrame, ...]
    segments: tuple[Segment, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "keyframes", tuple(self.keyframes))
        object.__setattr__(self, "relatives", tuple(self.relatives))
        object.__setattr__(
            self, "segments", segmentize(self.keyframes, self.relatives)
        )

    @property
    def frame_count(self) -> int:
        return len(self.keyframes) + len(self.relatives)


def from_world_poses(
    frames: Sequence[tuple[FrameId, Pose]],
    keyframe_positions: Sequence[int],
) -> Trajectory:
    """Build a trajectory from world poses, rebasing non-keyframes onto the
    keyframe that opens their segment.

    ``keyframe_positions`` are indices into ``frames``.
    """
    if not keyframe_positions:
        raise AssociationError("keyframe index selects no frames")
    positions = sorted(set(int(i) for i in keyframe_positions))
    if positions[0] < 0 or positions[-1] >= len(frames):
        raise AssociationError(
            f"keyframe position out of range (n_frames={len(frames)})"
        )
    kf_set = set(positions)
    keyframes = [Keyframe(frames[p][0], frames[p][1]) for p in positions]
    kf_stamps = [kf.id.stamp for kf in keyframes]

    relatives = []
    for pos, (fid, world) in enumerate(frames):
        if pos in kf_set:
            continue
        i = bisect.bisect_right(kf_stamps, fid.stamp) - 1
        if i < 0:
            raise AssociationError(
                f"frame {fid} precedes the first keyframe; cannot anchor it"
            )
        rel = keyframes[i].world_pose.inverse() * world
        relatives.append(RelativeFrame(fid, i, rel))
    return Trajectory(tuple(keyframes), tuple(relatives))


def world_poses(traj: Trajectory) -> list[tuple[FrameId, Pose]]:
    """World pose of every frame: keyframes pass through, relative frames
    compose ``kf.world_pose * rel_pose``.  Ordered by timestamp."""
    out = [(kf.id, kf.world_pose) for kf in traj.keyframes]
    for seg in traj.segments:
        base = seg.kf_a.world_pose
        out.extend((rel.id, base * rel.rel_pose) for rel in seg.rels)
    out.sort(key=lambda item: (item[0].stamp, item[0].index))
    return out


def associate(
    stamp: float,
    reference: Sequence[tuple[FrameId, Pose]],
    tol: float = DEFAULT_ASSOC_TOL,
) -> tuple[FrameId, Pose]:
    """Nearest-timestamp lookup within ``tol`` seconds, or AssociationError."""
    stamps = [fid.stamp for fid, _ in reference]
    j = bisect.bisect_left(stamps, stamp)
    best = None
    for k in (j - 1, j):
        if 0 <= k < len(reference):
            d = abs(stamps[k] - stamp)
            if best is None or d < best[0]:
                best = (d, reference[k])
    if best is None or best[0] > tol:
        raise AssociationError(
            f"no pose within {tol} s of timestamp {stamp:.6f}"
        )
    return best[1]


def snap_to_gt(
    traj: Trajectory,
    gt: Sequence[tuple[FrameId, Pose]],
    tol: float = DEFAULT_ASSOC_TOL,
) -> list[KeyframeUpdate]:
    """One update per keyframe: old = estimated world pose, new = associated
    ground-truth pose.  Missing associations raise, never drop silently."""
    gt_sorted = sorted(gt, key=lambda item: item[0].stamp)
    updates = []
    for i, kf in enumerate(traj.keyframes):
        _, pose = associate(kf.id.stamp, gt_sorted, tol)
        updates.append(KeyframeUpdate(index=i, old_pose=kf.world_pose, new_pose=pose))
    return updates


def identity_updates(traj: Trajectory) -> list[KeyframeUpdate]:
    """Updates with new == old for every keyframe (no back-end change)."""
    return [
        KeyframeUpdate(index=i, old_pose=kf.world_pose, new_pose=kf.world_pose)
        for i, kf in enumerate(traj.keyframes)
    ]
