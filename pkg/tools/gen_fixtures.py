#!/usr/bin/env python3
"""Regenerate the shipped fixtures (golden trace/log, sample rule packs).

The golden log is produced by replaying the golden trace once and freezing
the output; tests then demand byte-for-byte reproduction.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from catchkit.regulations import Decision, Reason, Verdict
from catchkit.replay import replay, write_trace
from catchkit.session import (
    DeviceEvent,
    FrameIn,
    MeasureDone,
    OperatorDecision,
    VerdictIn,
)
from catchkit.vision import BoundingBox, Detection, LengthEstimate


def det(species: str, w: int) -> Detection:
    return Detection(species, 1.0, BoundingBox(100, 80, w, 24))


def est(length_cm: float) -> LengthEstimate:
    return LengthEstimate(length_cm=length_cm, depth_used_m=1.0, method="pinhole")


def golden_events():
    # fish one: legal keeper
    yield FrameIn(10.0, 1, (det("striped_bass", 480),))
    yield MeasureDone(10.2, est(60.0))
    yield VerdictIn(10.3, Verdict(Decision.KEEP_ALLOWED))
    yield OperatorDecision(14.0, "keep")
    yield FrameIn(15.0, 2, ())
    # fish two: undersize, operator follows the recommendation
    yield FrameIn(40.0, 3, (det("striped_bass", 200),))
    yield MeasureDone(40.2, est(25.0))
    yield VerdictIn(40.3, Verdict(Decision.MUST_RELEASE, (Reason.UNDERSIZE,)))
    yield OperatorDecision(43.0, "release")
    yield FrameIn(44.0, 4, ())
    # orderly shutdown
    yield DeviceEvent(50.0, "bye")


REGS_LAKE = {
    "location": "sample_lake_north",
    "units": "cm",
    "rules": [
        {"species": "striped_bass", "min_length": 71.1, "bag_limit": 1,
         "season": {"open": "05-01", "close": "10-31"}},
        {"species": "perch", "min_length": 20.0, "bag_limit": 5},
        {"species": "pike", "min_length": 60.0, "max_length": 110.0, "bag_limit": 2,
         "season": {"open": "11-01", "close": "02-28"}},
    ],
}

REGS_COAST = {
    "location": "sample_coast_inches",
    "units": "in",
    "rules": [
        {"species": "striped_bass", "min_length": 28.0, "bag_limit": 1,
         "season": {"open": "04-15", "close": "11-30"}},
        {"species": "bluefish", "bag_limit": 3},
    ],
}

SCENE = {
    "far_m": 5.0,
    "objects": [
        {"species": "perch", "depth_m": 1.0,
         "box": {"x": 100, "y": 50, "w": 40, "h": 10}},
    ],
}

ANNOTATIONS = {
    "0": [],
    "1": [{"species": "perch", "confidence": 0.97,
           "x": 100, "y": 50, "w": 40, "h": 10}],
    "7": [
        {"species": "perch", "confidence": 0.9, "x": 10, "y": 20, "w": 64, "h": 16},
        {"species": "pike", "confidence": 0.8, "x": 150, "y": 90, "w": 120, "h": 30},
    ],
}

TENSION_CAL = [
    [0.030, 200.0, 0.6],
    [0.060, 200.0, 1.3],
    [0.090, 200.0, 2.0],
]


def main() -> None:
    fixtures = ROOT / "fixtures"
    (fixtures / "regs").mkdir(parents=True, exist_ok=True)

    trace_path = fixtures / "happy_path.trace"
    log_path = fixtures / "happy_path.log"
    write_trace(list(golden_events()), trace_path)
    if log_path.exists():
        log_path.unlink()
    _, records, _ = replay(trace_path, log_path)
    print(f"golden trace: {trace_path} ({len(records)} records)")

    (fixtures / "regs" / "sample_lake_north.json").write_text(
        json.dumps(REGS_LAKE, indent=2) + "\n")
    (fixtures / "regs" / "sample_coast_inches.json").write_text(
        json.dumps(REGS_COAST, indent=2) + "\n")
    (fixtures / "scene_single_perch.json").write_text(
        json.dumps(SCENE, indent=2) + "\n")
    (fixtures / "annotations_sample.json").write_text(
        json.dumps(ANNOTATIONS, indent=2) + "\n")
    (fixtures / "tension_cal.json").write_text(
        json.dumps(TENSION_CAL, indent=2) + "\n")
    print(f"fixtures written under {fixtures}")


if __name__ == "__main__":
    main()
