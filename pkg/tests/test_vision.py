"""Detector plumbing and length-estimation geometry."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catchkit.images import ImageBuffer
from catchkit.vision import (
    AnnotationMissingError,
    BlobDetector,
    BoundingBox,
    BoxOutOfBoundsError,
    CameraIntrinsics,
    Detection,
    DepthMap,
    InsufficientDepthError,
    PlanarObject,
    SceneSpec,
    SidecarDetector,
    depth_for,
    depth_gate,
    estimate_length,
    render_frame,
)

KEY = (255, 64, 32)


def scene_with(*objs: PlanarObject, far: float = 5.0) -> SceneSpec:
    return SceneSpec(objects=tuple(objs), far_m=far)


def uniform_depth(w: int, h: int, d: float) -> DepthMap:
    return DepthMap(np.full((h, w), d))


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

def test_blob_detector_empty_on_black_frame():
    frame = ImageBuffer.full(64, 48, 0, channels=3)
    assert BlobDetector("perch", KEY).detect(frame) == []


def test_blob_detector_recovers_rectangle():
    scene = scene_with(PlanarObject("perch", 1.0, BoundingBox(100, 50, 40, 10)))
    frame = render_frame(scene, 200, 100, key_color=KEY)
    dets = BlobDetector("perch", KEY).detect(frame)
    assert len(dets) == 1
    assert dets[0].box == BoundingBox(100, 50, 40, 10)
    assert dets[0].confidence == 1.0
    assert dets[0].species == "perch"


@given(
    st.integers(0, 40), st.integers(0, 30),
    st.integers(1, 20), st.integers(1, 15),
)
@settings(max_examples=40, deadline=None)
def test_blob_render_roundtrip(x, y, w, h):
    scene = scene_with(PlanarObject("bass", 1.0, BoundingBox(x, y, w, h)))
    frame = render_frame(scene, 64, 48, key_color=KEY)
    dets = BlobDetector("bass", KEY).detect(frame)
    assert [d.box for d in dets] == [BoundingBox(x, y, w, h)]


def test_sidecar_passthrough_and_missing_entry():
    det = SidecarDetector({
        "7": [
            {"species": "perch", "confidence": 0.9, "x": 1, "y": 2, "w": 3, "h": 4},
            {"species": "pike", "confidence": 0.5, "x": 10, "y": 2, "w": 6, "h": 2},
        ]
    })
    frame = ImageBuffer.full(32, 32, 0, channels=3)
    dets = det.detect(frame, frame_id=7)
    assert [d.species for d in dets] == ["perch", "pike"]
    assert dets[0].box == BoundingBox(1, 2, 3, 4)
    with pytest.raises(AnnotationMissingError):
        det.detect(frame, frame_id=8)


def test_detection_validation():
    with pytest.raises(ValueError):
        Detection("", 0.5, BoundingBox(0, 0, 1, 1))
    with pytest.raises(ValueError):
        Detection("perch", 1.5, BoundingBox(0, 0, 1, 1))
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 5)


def test_depth_gate():
    d = Detection("perch", 1.0, BoundingBox(0, 0, 1, 1))
    assert depth_gate([]) is False
    assert depth_gate([d]) is True
    assert depth_gate([d, d, d]) is True


# ---------------------------------------------------------------------------
# Synthetic depth
# ---------------------------------------------------------------------------

def test_depth_empty_scene_all_far():
    frame = ImageBuffer.full(16, 12, 0, channels=3)
    dm = depth_for(frame, scene_with(far=5.0))
    assert np.all(dm.depth == 5.0)


def test_depth_single_plane():
    frame = ImageBuffer.full(16, 12, 0, channels=3)
    dm = depth_for(frame, scene_with(PlanarObject("p", 1.2, BoundingBox(2, 3, 4, 5))))
    assert np.all(dm.depth[3:8, 2:6] == 1.2)
    mask = np.ones((12, 16), dtype=bool)
    mask[3:8, 2:6] = False
    assert np.all(dm.depth[mask] == 5.0)


def test_depth_overlapping_planes_nearer_wins():
    frame = ImageBuffer.full(20, 20, 0, channels=3)
    a = PlanarObject("a", 2.0, BoundingBox(0, 0, 10, 10))
    b = PlanarObject("b", 1.0, BoundingBox(5, 5, 10, 10))
    dm = depth_for(frame, scene_with(a, b, far=9.0))
    # brute-force per-pixel min oracle
    expected = np.full((20, 20), 9.0)
    for y in range(20):
        for x in range(20):
            for obj in (a, b):
                bx = obj.box
                if bx.x <= x < bx.x + bx.w and bx.y <= y < bx.y + bx.h:
                    expected[y, x] = min(expected[y, x], obj.depth_m)
    assert np.array_equal(dm.depth, expected)


# ---------------------------------------------------------------------------
# Length estimation
# ---------------------------------------------------------------------------

def pinhole_cam(f: float = 800.0, c=(320.0, 240.0)) -> CameraIntrinsics:
    return CameraIntrinsics(focal_px=f, center=c, model="pinhole")


def fisheye_cam(f: float = 800.0, c=(320.0, 240.0)) -> CameraIntrinsics:
    return CameraIntrinsics(focal_px=f, center=c, model="equidistant-fisheye")


def test_pinhole_known_scene():
    # oracle: a 0.25 m segment at 1.0 m projects to f*L/d = 200 px exactly,
    # so a 200 px box must measure back to 25 cm
    f, length_m, d = 800.0, 0.25, 1.0
    extent_px = f * length_m / d
    assert extent_px == 200.0
    det = Detection("perch", 1.0, BoundingBox(100, 100, 200, 50))
    est = estimate_length(det, uniform_depth(640, 480, d), pinhole_cam(f))
    assert est.length_cm == pytest.approx(25.0, rel=1e-12)
    assert est.method == "pinhole"
    assert est.depth_used_m == 1.0


def test_pinhole_linear_in_depth():
    det = Detection("perch", 1.0, BoundingBox(10, 10, 120, 40))
    e1 = estimate_length(det, uniform_depth(640, 480, 1.3), pinhole_cam())
    e2 = estimate_length(det, uniform_depth(640, 480, 2.6), pinhole_cam())
    assert e2.length_cm == pytest.approx(2 * e1.length_cm, rel=1e-12)


@given(
    st.floats(100, 2000), st.floats(0.2, 8.0),
    st.integers(1, 300), st.integers(1, 200),
)
@settings(max_examples=60, deadline=None)
def test_pinhole_linearity_algebraic(f, d, w, h):
    det = Detection("x", 1.0, BoundingBox(0, 0, w, h))
    est = estimate_length(det, uniform_depth(320, 220, d), pinhole_cam(f, (160.0, 110.0)))
    assert est.length_cm == pytest.approx(100.0 * max(w, h) * d / f, rel=1e-9)


def test_estimate_monotone_in_major_axis():
    prev = 0.0
    for w in (50, 80, 120, 200, 300):
        det = Detection("x", 1.0, BoundingBox(0, 0, w, 30))
        est = estimate_length(det, uniform_depth(640, 480, 1.5), pinhole_cam())
        assert est.length_cm >= prev
        prev = est.length_cm


def test_fisheye_agrees_with_pinhole_small_angle():
    # box centered on the optical center, theta well under 0.05 rad
    f = 800.0
    cam_p = pinhole_cam(f)
    cam_f = fisheye_cam(f)
    det = Detection("x", 1.0, BoundingBox(300, 230, 40, 20))  # centered at 320,240
    dm = uniform_depth(640, 480, 1.0)
    ep = estimate_length(det, dm, cam_p)
    ef = estimate_length(det, dm, cam_f)
    assert ef.method == "fisheye"
    assert abs(ef.length_cm - ep.length_cm) / ep.length_cm < 0.005


@given(st.integers(2, 60))
@settings(max_examples=30, deadline=None)
def test_fisheye_pinhole_convergence(w):
    # theta = (w/2)/f; for w <= 60 and f = 800, theta <= 0.0375 < 0.05
    f = 800.0
    det = Detection("x", 1.0, BoundingBox(320 - w // 2, 238, w, 4))
    dm = uniform_depth(640, 480, 2.0)
    ep = estimate_length(det, dm, pinhole_cam(f))
    ef = estimate_length(det, dm, fisheye_cam(f))
    assert abs(ef.length_cm - ep.length_cm) / ep.length_cm < 0.01


def test_median_depth_outlier_robust():
    d = np.full((100, 100), 2.0)
    # corrupt 40% of box pixels (< 50%) with junk
    rng = np.random.default_rng(0)
    box = BoundingBox(10, 10, 50, 40)
    ys, xs = np.mgrid[10:50, 10:60]
    flat = np.stack([ys.ravel(), xs.ravel()], axis=1)
    idx = rng.choice(len(flat), size=int(0.4 * len(flat)), replace=False)
    for y, x in flat[idx]:
        d[y, x] = rng.uniform(0.01, 50.0)
    det = Detection("x", 1.0, box)
    est = estimate_length(det, DepthMap(d), pinhole_cam())
    assert est.depth_used_m == 2.0


def test_insufficient_depth_coverage_rejected():
    d = np.zeros((50, 50))
    d[0:10, 0:50] = 1.0  # valid band smaller than half of a 50x30 box
    det = Detection("x", 1.0, BoundingBox(0, 0, 50, 30))
    with pytest.raises(InsufficientDepthError):
        estimate_length(det, DepthMap(d), pinhole_cam())


def test_box_out_of_bounds_rejected():
    det = Detection("x", 1.0, BoundingBox(60, 0, 20, 10))
    with pytest.raises(BoxOutOfBoundsError):
        estimate_length(det, uniform_depth(64, 48, 1.0), pinhole_cam())


def test_scene_spec_json_roundtrip():
    doc = {
        "far_m": 4.5,
        "objects": [
            {"species": "perch", "depth_m": 1.2,
             "box": {"x": 5, "y": 6, "w": 7, "h": 8}},
        ],
    }
    scene = SceneSpec.from_json(doc)
    assert scene.far_m == 4.5
    assert scene.objects[0].box == BoundingBox(5, 6, 7, 8)
