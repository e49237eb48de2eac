"""Golden replay: the shipped trace must reproduce the shipped log exactly."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from catchkit.records import Outcome
from catchkit.replay import TraceFormatError, read_trace, replay, write_trace
from catchkit.session import MeasureDone, TimeoutEvent

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_golden_trace_reproduces_golden_log(tmp_path):
    out_log = tmp_path / "replayed.log"
    replay(FIXTURES / "happy_path.trace", out_log)
    assert out_log.read_bytes() == (FIXTURES / "happy_path.log").read_bytes()


def test_golden_log_content():
    _, records, _ = replay(FIXTURES / "happy_path.trace", None)
    assert [r.outcome for r in records] == [Outcome.KEPT, Outcome.RELEASED]
    assert records[0].species == "striped_bass"


def test_empty_trace_empty_log(tmp_path):
    trace = tmp_path / "empty.trace"
    trace.write_text("")
    log = tmp_path / "empty.log"
    _, records, _ = replay(trace, log)
    assert records == []
    assert not log.exists() or log.read_text() == ""


def test_trace_roundtrip(tmp_path):
    events = read_trace(FIXTURES / "happy_path.trace")
    out = tmp_path / "again.trace"
    write_trace(events, out)
    assert out.read_bytes() == (FIXTURES / "happy_path.trace").read_bytes()


def test_dropped_measure_with_timeout_yields_lost(tmp_path):
    events = read_trace(FIXTURES / "happy_path.trace")
    mutated = []
    injected = False
    for event in events:
        if isinstance(event, MeasureDone) and not injected:
            # the measurement never arrives; the watchdog fires instead
            mutated.append(TimeoutEvent(event.t + 10.0, "measure"))
            injected = True
            continue
        mutated.append(event)
    trace = tmp_path / "mutated.trace"
    write_trace(mutated, trace)
    _, records, _ = replay(trace, tmp_path / "mutated.log")
    assert records[0].outcome is Outcome.LOST


def test_malformed_trace_rejected(tmp_path):
    trace = tmp_path / "bad.trace"
    trace.write_text('{"kind": "frame_in"}\n')  # missing fields
    with pytest.raises(TraceFormatError):
        replay(trace, None)
    trace.write_text("not json\n")
    with pytest.raises(TraceFormatError):
        replay(trace, None)
