"""Detection and depth interfaces plus monocular length estimation.

The neural detectors this system would run in the field are replaced by two
desk-scale implementations: a sidecar oracle that replays ground-truth
annotations, and a key-color blob detector. Depth comes from a synthetic
planar-scene renderer. The geometry that turns a bounding box plus depth
into centimeters is real and is the part worth testing hard.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from catchkit.images import ImageBuffer


class AnnotationMissingError(KeyError):
    """Sidecar oracle has no entry for the requested frame id."""


class BoxOutOfBoundsError(ValueError):
    pass


class InsufficientDepthError(ValueError):
    """Less than half the box has valid depth: measurement unavailable."""


@dataclass(frozen=True)
class BoundingBox:
    """Pixel rectangle: top-left corner plus extents."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def within(self, width: int, height: int) -> bool:
        return 0 <= self.x and 0 <= self.y and self.x + self.w <= width and self.y + self.h <= height


@dataclass(frozen=True)
class Detection:
    species: str
    confidence: float
    box: BoundingBox

    def __post_init__(self):
        if not self.species:
            raise ValueError("species must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


class DepthMap:
    """Per-pixel depth in meters. 0 marks invalid pixels."""

    __slots__ = ("depth",)

    def __init__(self, depth: np.ndarray):
        arr = np.asarray(depth, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"depth must be 2D, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("depths must be finite and >= 0 (0 = invalid)")
        self.depth = arr

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_px: float
    center: tuple[float, float]
    model: str = "pinhole"  # or "equidistant-fisheye"

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ValueError(f"focal_px must be > 0, got {self.focal_px}")
        if self.model not in ("pinhole", "equidistant-fisheye"):
            raise ValueError(f"unknown camera model {self.model!r}")


@dataclass(frozen=True)
class LengthEstimate:
    length_cm: float
    depth_used_m: float
    method: str

    def __post_init__(self):
        if not self.length_cm > 0:
            raise ValueError(f"length_cm must be > 0, got {self.length_cm}")


# ---------------------------------------------------------------------------
# Scene description (drives the synthetic depth provider and frame renderer)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanarObject:
    species: str
    depth_m: float
    box: BoundingBox

    def __post_init__(self):
        if not self.depth_m > 0:
            raise ValueError(f"depth_m must be > 0, got {self.depth_m}")


@dataclass(frozen=True)
class SceneSpec:
    """Planar fish at known depths in front of a uniform far background."""

    objects: tuple[PlanarObject, ...]
    far_m: float = 5.0

    def __post_init__(self):
        if not self.far_m > 0:
            raise ValueError(f"far_m must be > 0, got {self.far_m}")

    @classmethod
    def from_json(cls, doc: str | dict) -> "SceneSpec":
        data = json.loads(doc) if isinstance(doc, str) else doc
        objs = tuple(
            PlanarObject(
                species=o["species"],
                depth_m=float(o["depth_m"]),
                box=BoundingBox(int(o["box"]["x"]), int(o["box"]["y"]),
                                int(o["box"]["w"]), int(o["box"]["h"])),
            )
            for o in data.get("objects", [])
        )
        return cls(objects=objs, far_m=float(data.get("far_m", 5.0)))

    @classmethod
    def load(cls, path: str | Path) -> "SceneSpec":
        return cls.from_json(Path(path).read_text())


def depth_for(frame: ImageBuffer, scene: SceneSpec) -> DepthMap:
    """Render per-pixel depth for the scene: nearer object wins, background
    is the configured far value."""
    depth = np.full((frame.height, frame.width), scene.far_m, dtype=np.float64)
    for obj in scene.objects:
        b = obj.box
        y0, y1 = max(b.y, 0), min(b.y + b.h, frame.height)
        x0, x1 = max(b.x, 0), min(b.x + b.w, frame.width)
        if y0 < y1 and x0 < x1:
            region = depth[y0:y1, x0:x1]
            np.minimum(region, obj.depth_m, out=region)
    return DepthMap(depth)


def render_frame(
    scene: SceneSpec,
    width: int,
    height: int,
    key_color: tuple[int, int, int] = (255, 64, 32),
    background: tuple[int, int, int] = (0, 40, 80),
) -> ImageBuffer:
    """Paint scene objects in the key color the blob detector looks for."""
    arr = np.empty((height, width, 3), dtype=np.uint8)
    arr[:, :] = background
    for obj in scene.objects:
        b = obj.box
        y0, y1 = max(b.y, 0), min(b.y + b.h, height)
        x0, x1 = max(b.x, 0), min(b.x + b.w, width)
        if y0 < y1 and x0 < x1:
            arr[y0:y1, x0:x1] = key_color
    return ImageBuffer(arr)


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

class SidecarDetector:
    """Replays ground-truth annotations keyed by frame id.

    Annotation file: JSON object mapping frame id (string) to a list of
    {species, confidence, x, y, w, h}. See schemas/annotations.schema.json.
    """

    def __init__(self, annotations: dict):
        self._table: dict[int, list[Detection]] = {}
        for key, entries in annotations.items():
            dets = [
                Detection(
                    species=e["species"],
                    confidence=float(e.get("confidence", 1.0)),
                    box=BoundingBox(int(e["x"]), int(e["y"]), int(e["w"]), int(e["h"])),
                )
                for e in entries
            ]
            self._table[int(key)] = dets

    @classmethod
    def load(cls, path: str | Path) -> "SidecarDetector":
        return cls(json.loads(Path(path).read_text()))

    def detect(self, frame: ImageBuffer, frame_id: int | None = None) -> list[Detection]:
        if frame_id is None or frame_id not in self._table:
            raise AnnotationMissingError(f"no annotation entry for frame id {frame_id}")
        return list(self._table[frame_id])


class BlobDetector:
    """Thresholds a key color and returns one detection per connected
    component (8-connectivity), confidence 1.0, species from config."""

    def __init__(
        self,
        species: str,
        key_color: tuple[int, ...] = (255, 64, 32),
        tolerance: int = 0,
        min_area: int = 1,
    ):
        self.species = species
        self.key_color = key_color
        self.tolerance = tolerance
        self.min_area = min_area

    def detect(self, frame: ImageBuffer, frame_id: int | None = None) -> list[Detection]:
        px = frame.pixels.astype(np.int32)
        key = self.key_color
        if frame.channels == 1:
            key = (key[0],) if len(key) != 1 else key
        if len(key) != frame.channels:
            raise ValueError(
                f"key color has {len(key)} components, frame has {frame.channels} channels"
            )
        mask = np.all(np.abs(px - np.asarray(key)) <= self.tolerance, axis=2)
        if not mask.any():
            return []
        labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
        detections = []
        for slc in ndimage.find_objects(labels):
            ys, xs = slc
            box = BoundingBox(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start)
            if box.area >= self.min_area:
                detections.append(Detection(self.species, 1.0, box))
        detections.sort(key=lambda d: (-d.box.area, d.box.x, d.box.y))
        return detections


def depth_gate(detections: list[Detection]) -> bool:
    """Depth estimation runs only when something was detected."""
    return len(detections) > 0


# ---------------------------------------------------------------------------
# Length estimation
# ---------------------------------------------------------------------------

def _view_direction(point: tuple[float, float], cam: CameraIntrinsics) -> np.ndarray:
    """Unit ray for a pixel under the equidistant model (theta = r / f)."""
    cx, cy = cam.center
    dx = point[0] - cx
    dy = point[1] - cy
    r = math.hypot(dx, dy)
    theta = r / cam.focal_px
    if r == 0:
        return np.array([0.0, 0.0, 1.0])
    phi = math.atan2(dy, dx)
    return np.array([
        math.sin(theta) * math.cos(phi),
        math.sin(theta) * math.sin(phi),
        math.cos(theta),
    ])


def estimate_length(det: Detection, depth: DepthMap, cam: CameraIntrinsics) -> LengthEstimate:
    """Convert a bounding box plus in-box depth into a length in centimeters.

    Depth is the median of valid in-box pixels (robust to background pixels
    bleeding into the box). Pinhole: similar triangles on the major axis.
    Equidistant fisheye: chord between the rays through the two extreme
    edge midpoints of the major axis.
    """
    b = det.box
    if not b.within(depth.width, depth.height):
        raise BoxOutOfBoundsError(
            f"box {b} outside depth map {depth.width}x{depth.height}"
        )
    window = depth.depth[b.y:b.y + b.h, b.x:b.x + b.w]
    valid = window[window > 0]
    if valid.size < 0.5 * window.size:
        raise InsufficientDepthError(
            f"only {valid.size}/{window.size} box pixels have valid depth"
        )
    depth_used = float(np.median(valid))

    if cam.model == "pinhole":
        extent = max(b.w, b.h)
        length_cm = 100.0 * extent * depth_used / cam.focal_px
        method = "pinhole"
    else:
        if b.w >= b.h:
            p1 = (float(b.x), b.y + b.h / 2.0)
            p2 = (float(b.x + b.w), b.y + b.h / 2.0)
        else:
            p1 = (b.x + b.w / 2.0, float(b.y))
            p2 = (b.x + b.w / 2.0, float(b.y + b.h))
        v1 = _view_direction(p1, cam)
        v2 = _view_direction(p2, cam)
        length_cm = 100.0 * depth_used * float(np.linalg.norm(v1 - v2))
        method = "fisheye"
    return LengthEstimate(length_cm=length_cm, depth_used_m=depth_used, method=method)
