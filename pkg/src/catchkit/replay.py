"""Golden-replay driver: serialize session events to JSONL traces and re-run
them through the state machine. Replay is pure event application; timestamps
come from the trace, so the produced catch log is byte-reproducible."""

from __future__ import annotations

import json
from pathlib import Path

from catchkit.records import persist
from catchkit.regulations import Decision, Reason, Verdict
from catchkit.session import (
    AppendLog,
    DeviceEvent,
    FrameIn,
    MeasureDone,
    OperatorDecision,
    SessionConfig,
    SessionEvent,
    TimeoutEvent,
    VerdictIn,
    initial_state,
    step,
)
from catchkit.vision import BoundingBox, Detection, LengthEstimate


class TraceFormatError(ValueError):
    pass


def event_to_json(event: SessionEvent) -> dict:
    if isinstance(event, FrameIn):
        return {
            "t": event.t, "kind": "frame_in", "frame_id": event.frame_id,
            "detections": [
                {"species": d.species, "confidence": d.confidence,
                 "x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h}
                for d in event.detections
            ],
        }
    if isinstance(event, MeasureDone):
        est = None
        if event.estimate is not None:
            est = {"length_cm": event.estimate.length_cm,
                   "depth_used_m": event.estimate.depth_used_m,
                   "method": event.estimate.method}
        return {"t": event.t, "kind": "measure_done", "estimate": est}
    if isinstance(event, VerdictIn):
        return {"t": event.t, "kind": "verdict",
                "decision": event.verdict.decision.value,
                "reasons": [r.value for r in event.verdict.reasons]}
    if isinstance(event, OperatorDecision):
        return {"t": event.t, "kind": "operator", "choice": event.choice}
    if isinstance(event, DeviceEvent):
        out = {"t": event.t, "kind": "device", "device_kind": event.kind}
        if event.consumed_mah is not None:
            out["consumed_mah"] = event.consumed_mah
            out["capacity_mah"] = event.capacity_mah
        return out
    if isinstance(event, TimeoutEvent):
        return {"t": event.t, "kind": "timeout", "timeout_kind": event.kind}
    raise TraceFormatError(f"unknown event {event!r}")


def event_from_json(obj: dict) -> SessionEvent:
    try:
        kind = obj["kind"]
        t = float(obj["t"])
        if kind == "frame_in":
            dets = tuple(
                Detection(d["species"], float(d["confidence"]),
                          BoundingBox(int(d["x"]), int(d["y"]),
                                      int(d["w"]), int(d["h"])))
                for d in obj["detections"]
            )
            return FrameIn(t, int(obj["frame_id"]), dets)
        if kind == "measure_done":
            est = obj.get("estimate")
            estimate = None
            if est is not None:
                estimate = LengthEstimate(float(est["length_cm"]),
                                          float(est["depth_used_m"]),
                                          est["method"])
            return MeasureDone(t, estimate)
        if kind == "verdict":
            verdict = Verdict(Decision(obj["decision"]),
                              tuple(Reason(r) for r in obj["reasons"]))
            return VerdictIn(t, verdict)
        if kind == "operator":
            return OperatorDecision(t, obj["choice"])
        if kind == "device":
            return DeviceEvent(t, obj["device_kind"],
                               consumed_mah=obj.get("consumed_mah"),
                               capacity_mah=obj.get("capacity_mah"))
        if kind == "timeout":
            return TimeoutEvent(t, obj["timeout_kind"])
    except (KeyError, ValueError, TypeError) as e:
        raise TraceFormatError(f"bad trace event {obj!r}: {e}") from e
    raise TraceFormatError(f"unknown event kind {kind!r}")


def write_trace(events: list[SessionEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event_to_json(event), sort_keys=True) + "\n")


def read_trace(path: str | Path) -> list[SessionEvent]:
    events = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"trace line {i + 1}: {e.msg}") from e
        events.append(event_from_json(obj))
    return events


def replay(trace_path: str | Path, log_path: str | Path | None,
           config: SessionConfig = SessionConfig()):
    """Re-run a recorded event sequence. Returns (final state, records,
    all effects); appends each logged record to log_path when given."""
    state = initial_state()
    records = []
    effects_all = []
    for event in read_trace(trace_path):
        state, effects = step(state, event, config)
        effects_all.extend(effects)
        for effect in effects:
            if isinstance(effect, AppendLog):
                records.append(effect.record)
                if log_path is not None:
                    persist(effect.record, log_path)
    return state, records, effects_all
