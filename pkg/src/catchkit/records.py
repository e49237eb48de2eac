"""Persisted catch telemetry: one JSON object per line, append-only.

A reader must survive a crash-truncated final line: every complete line is
recovered and the truncated tail is reported, never silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from catchkit.regulations import Decision, Reason


class Outcome(Enum):
    KEPT = "KEPT"
    RELEASED = "RELEASED"
    LOST = "LOST"


@dataclass(frozen=True)
class CatchRecord:
    timestamp: datetime
    species: str
    length_cm: float | None
    decision: Decision
    reasons: tuple[Reason, ...]
    outcome: Outcome
    frame_id: int

    def __post_init__(self):
        if self.outcome is Outcome.KEPT and self.decision is not Decision.KEEP_ALLOWED:
            raise ValueError("KEPT requires a KEEP_ALLOWED verdict")

    def to_json_line(self) -> str:
        return json.dumps({
            "ts": self.timestamp.isoformat(),
            "species": self.species,
            "length_cm": self.length_cm,
            "decision": self.decision.value,
            "reasons": [r.value for r in self.reasons],
            "outcome": self.outcome.value,
            "frame_id": self.frame_id,
        }, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "CatchRecord":
        obj = json.loads(line)
        return cls(
            timestamp=datetime.fromisoformat(obj["ts"]),
            species=obj["species"],
            length_cm=obj["length_cm"],
            decision=Decision(obj["decision"]),
            reasons=tuple(Reason(r) for r in obj["reasons"]),
            outcome=Outcome(obj["outcome"]),
            frame_id=obj["frame_id"],
        )


def epoch_to_utc(t: float) -> datetime:
    return datetime.fromtimestamp(t, tz=timezone.utc)


def persist(record: CatchRecord, log_path: str | Path) -> None:
    """Append one record as a single line+newline write."""
    line = record.to_json_line()
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
        fh.flush()


def load_catch_log(log_path: str | Path) -> tuple[list[CatchRecord], int]:
    """Read back all complete records; returns (records, truncated_lines)."""
    path = Path(log_path)
    if not path.exists():
        return [], 0
    records: list[CatchRecord] = []
    truncated = 0
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    incomplete_tail = lines[-1] != ""  # no trailing newline: last line may be cut
    for line in lines[:-1]:
        if not line:
            continue
        records.append(CatchRecord.from_json_line(line))
    if incomplete_tail:
        tail = lines[-1]
        try:
            records.append(CatchRecord.from_json_line(tail))
        except (json.JSONDecodeError, KeyError, ValueError):
            truncated = 1
    return records, truncated
