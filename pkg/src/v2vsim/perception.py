"""Synthetic LiDAR frames, their bit-exact wire format, and windowed fusion.

Wire format (little-endian): magic "VPC1", version u16, source_id u32,
stamp_us u64, pose (x f32, y f32, heading_rad f32), point_count u32, then
point_count * (x, y, z) f32 triples.  Fused clouds reuse the format with
source_id 0xFFFFFFFF.  Fusion accepts a remote frame only when its stamp
lies within the sync window of the local one, transforms both clouds into
the configured frame using the senders' planar poses (z passes through),
concatenates local-then-remote, and keeps the first point per voxel.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidInputError

MAGIC = b"VPC1"
VERSION = 1
FUSED_SOURCE_ID = 0xFFFFFFFF
_HEADER_FMT = "<4sHIQfffI"
HEADER_BYTES = struct.calcsize(_HEADER_FMT)  # 34
POINT_BYTES = 12
_MAX_POINTS = 0xFFFFFFFF


@dataclass(frozen=True)
class PointCloudFrame:
    source_id: int
    stamp_us: int
    points: np.ndarray  # (n, 3) float32, sensor frame
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x_m, y_m, heading_rad

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float32))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError("points must be an (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points must be finite")
        object.__setattr__(self, "points", pts)
        pose32 = tuple(float(np.float32(v)) for v in self.pose)
        object.__setattr__(self, "pose", pose32)

    @property
    def point_count(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class FusionConfig:
    sync_window_us: int = 100_000
    voxel_size_m: float = 0.1
    frame_of_reference: str = "world"  # or "ego"

    def __post_init__(self) -> None:
        if self.sync_window_us <= 0:
            raise InvalidInputError("sync window must be positive")
        if self.voxel_size_m <= 0:
            raise InvalidInputError("voxel size must be positive")
        if self.frame_of_reference not in ("world", "ego"):
            raise InvalidInputError(
                f"unknown frame of reference {self.frame_of_reference!r}"
            )


@dataclass(frozen=True)
class FusionRejection:
    reason: str
    skew_us: int


# --- generators ----------------------------------------------------------------


@dataclass(frozen=True)
class RingGenerator:
    """Points on a circle of fixed radius (z = 0), randomly rotated per frame."""

    radius_m: float = 5.0
    n_points: int = 360


@dataclass(frozen=True)
class BoxRoomGenerator:
    """Points uniform inside an axis-aligned box centered on the sensor."""

    width_m: float = 10.0
    depth_m: float = 10.0
    height_m: float = 3.0
    n_points: int = 512


@dataclass(frozen=True)
class GaussianBlobsGenerator:
    """Clusters around random centers within a square extent."""

    n_blobs: int = 4
    points_per_blob: int = 128
    spread_m: float = 0.5
    extent_m: float = 20.0


Generator = RingGenerator | BoxRoomGenerator | GaussianBlobsGenerator


def generate_frame(
    node_id: int,
    stamp_us: int,
    generator: Generator,
    rng: np.random.Generator,
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> PointCloudFrame:
    """Deterministic in the rng stream (derive it from (seed, node, stamp))."""
    if isinstance(generator, RingGenerator):
        phase = rng.uniform(0, 2 * np.pi)
        angles = phase + np.linspace(0, 2 * np.pi, generator.n_points, endpoint=False)
        pts = np.column_stack(
            [
                generator.radius_m * np.cos(angles),
                generator.radius_m * np.sin(angles),
                np.zeros_like(angles),
            ]
        )
    elif isinstance(generator, BoxRoomGenerator):
        half = np.array([generator.width_m, generator.depth_m, generator.height_m]) / 2.0
        pts = rng.uniform(-half, half, size=(generator.n_points, 3))
    elif isinstance(generator, GaussianBlobsGenerator):
        centers = rng.uniform(
            -generator.extent_m / 2, generator.extent_m / 2, size=(generator.n_blobs, 3)
        )
        pts = np.concatenate(
            [
                c + rng.normal(0.0, generator.spread_m, size=(generator.points_per_blob, 3))
                for c in centers
            ]
        )
    else:
        raise InvalidInputError(f"unknown generator {generator!r}")
    return PointCloudFrame(
        source_id=node_id, stamp_us=stamp_us, points=pts.astype(np.float32), pose=pose
    )


# --- serialization --------------------------------------------------------------


def serialize_frame(frame: PointCloudFrame) -> bytes:
    if frame.point_count > _MAX_POINTS:
        raise InvalidInputError("point count exceeds the u32 format limit")
    header = struct.pack(
        _HEADER_FMT,
        MAGIC,
        VERSION,
        frame.source_id,
        frame.stamp_us,
        np.float32(frame.pose[0]),
        np.float32(frame.pose[1]),
        np.float32(frame.pose[2]),
        frame.point_count,
    )
    return header + frame.points.astype("<f4").tobytes()


def deserialize_frame(raw: bytes) -> PointCloudFrame:
    if len(raw) < HEADER_BYTES:
        raise FormatError(f"frame too short: {len(raw)} bytes")
    magic, version, source_id, stamp_us, px, py, ph, count = struct.unpack_from(
        _HEADER_FMT, raw
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if len(raw) != HEADER_BYTES + count * POINT_BYTES:
        raise FormatError(
            f"frame length {len(raw)} inconsistent with point count {count}"
        )
    points = np.frombuffer(raw, dtype="<f4", offset=HEADER_BYTES).reshape(count, 3)
    return PointCloudFrame(
        source_id=source_id, stamp_us=stamp_us, points=points.copy(), pose=(px, py, ph)
    )


# --- fusion ---------------------------------------------------------------------


def transform_to_world(frame: PointCloudFrame) -> np.ndarray:
    """Rotate by the sender's heading and translate by its position; z unchanged."""
    x, y, heading = frame.pose
    c, s = np.cos(heading), np.sin(heading)
    pts = frame.points.astype(np.float64)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + x
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + y
    out[:, 2] = pts[:, 2]
    return out.astype(np.float32)


def _world_to_ego(points: np.ndarray, pose: tuple[float, float, float]) -> np.ndarray:
    x, y, heading = pose
    c, s = np.cos(heading), np.sin(heading)
    pts = points.astype(np.float64)
    dx = pts[:, 0] - x
    dy = pts[:, 1] - y
    out = np.empty_like(pts)
    out[:, 0] = c * dx + s * dy
    out[:, 1] = -s * dx + c * dy
    out[:, 2] = pts[:, 2]
    return out.astype(np.float32)


def voxel_keys(points: np.ndarray, voxel_size_m: float) -> np.ndarray:
    """Integer voxel index per point."""
    return np.floor(np.asarray(points, dtype=np.float64) / voxel_size_m).astype(np.int64)


def voxel_set(points: np.ndarray, voxel_size_m: float) -> set[tuple[int, int, int]]:
    return {tuple(v) for v in voxel_keys(points, voxel_size_m).tolist()}


def _dedupe_first(points: np.ndarray, voxel_size_m: float) -> np.ndarray:
    keys = voxel_keys(points, voxel_size_m)
    _, first_idx = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first_idx)]


def fuse(
    local: PointCloudFrame, remote: PointCloudFrame, cfg: FusionConfig
) -> PointCloudFrame | FusionRejection:
    """Fuse a remote cloud into the local one, or reject on time skew.

    Scan order is local-then-remote, so on voxel collisions the local point
    wins.  The fused frame carries the local stamp; in world mode its pose
    is the origin (points are world coordinates), in ego mode the local pose.
    """
    skew = abs(int(local.stamp_us) - int(remote.stamp_us))
    if skew > cfg.sync_window_us:
        return FusionRejection(reason="time-skew", skew_us=skew)
    local_world = transform_to_world(local)
    remote_world = transform_to_world(remote)
    merged = np.concatenate([local_world, remote_world])
    if cfg.frame_of_reference == "ego":
        merged = _world_to_ego(merged, local.pose)
        pose = local.pose
    else:
        pose = (0.0, 0.0, 0.0)
    fused_points = _dedupe_first(merged, cfg.voxel_size_m)
    return PointCloudFrame(
        source_id=FUSED_SOURCE_ID,
        stamp_us=local.stamp_us,
        points=fused_points,
        pose=pose,
    )
