"""The orchestrating state machine.

Phases:  IDLE -> FISH_PRESENT -> MEASURED -> AWAITING_DECISION
         -> RELEASING | LANDING -> IDLE

``step`` is a pure transition function: (state, event) -> (state', effects).
The engine (or the replay driver) executes effects; nothing in here touches
a clock, a socket or the filesystem. Invalid (phase, event) pairs are
absorbed as no-ops that emit a Diagnostic effect, so step is total.

Transition summary:

  IDLE + FRAME_IN(>=1 det)      -> FISH_PRESENT   [SendLureOn, RequestDepth]
  FISH_PRESENT + MEASURE_DONE   -> MEASURED       [EvaluateRules]
  MEASURED + VERDICT            -> AWAITING_DECISION [NotifyUi(verdict)]
                                   (auto-release short-circuits MUST_RELEASE)
  AWAITING_DECISION + OPERATOR(RELEASE)           -> RELEASING
                                   [SendLureOff, AppendLog(RELEASED)]
  AWAITING_DECISION + OPERATOR(KEEP), KEEP_ALLOWED -> LANDING
                                   [AppendLog(KEPT)] (bag count +1)
  AWAITING_DECISION + OPERATOR(KEEP), otherwise    -> unchanged [NotifyUi(refusal)]
  RELEASING/LANDING + FRAME_IN(0 det) -> IDLE      (LANDING also drops the lure)
  FISH_PRESENT/MEASURED/AWAITING_DECISION + TIMEOUT -> IDLE
                                   [SendLureOff, AppendLog(LOST)]
  any + DEVICE(bye) -> IDLE        [+ SendLureOff, AppendLog(LOST) if mid-fish]

The lure drops exactly once per energize: on entering RELEASING, on leaving
LANDING, or on the abort paths (timeout / device loss).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum

from catchkit.records import CatchRecord, Outcome, epoch_to_utc
from catchkit.regulations import Decision, Verdict
from catchkit.vision import Detection, LengthEstimate


class Phase(Enum):
    IDLE = "IDLE"
    FISH_PRESENT = "FISH_PRESENT"
    MEASURED = "MEASURED"
    AWAITING_DECISION = "AWAITING_DECISION"
    RELEASING = "RELEASING"
    LANDING = "LANDING"


# -- events ------------------------------------------------------------------

@dataclass(frozen=True)
class FrameIn:
    t: float
    frame_id: int
    detections: tuple[Detection, ...]


@dataclass(frozen=True)
class MeasureDone:
    t: float
    estimate: LengthEstimate | None  # None = measurement unavailable


@dataclass(frozen=True)
class VerdictIn:
    t: float
    verdict: Verdict


@dataclass(frozen=True)
class OperatorDecision:
    t: float
    choice: str  # "keep" | "release"


@dataclass(frozen=True)
class DeviceEvent:
    t: float
    kind: str  # "ack" | "nack" | "battery" | "bye"
    consumed_mah: float | None = None
    capacity_mah: float | None = None


@dataclass(frozen=True)
class TimeoutEvent:
    t: float
    kind: str  # "measure" | "decision"


SessionEvent = FrameIn | MeasureDone | VerdictIn | OperatorDecision | DeviceEvent | TimeoutEvent


# -- effects -----------------------------------------------------------------

@dataclass(frozen=True)
class RequestDepth:
    frame_id: int
    detection: Detection


@dataclass(frozen=True)
class SendLureOn:
    pass


@dataclass(frozen=True)
class SendLureOff:
    pass


@dataclass(frozen=True)
class EvaluateRules:
    t: float
    species: str
    length_cm: float | None


@dataclass(frozen=True)
class AppendLog:
    record: CatchRecord


@dataclass(frozen=True)
class NotifyUi:
    payload: dict


@dataclass(frozen=True)
class Diagnostic:
    message: str


Effect = RequestDepth | SendLureOn | SendLureOff | EvaluateRules | AppendLog | NotifyUi | Diagnostic


# -- state -------------------------------------------------------------------

@dataclass(frozen=True)
class CurrentFish:
    frame_id: int
    detection: Detection
    estimate: LengthEstimate | None = None
    verdict: Verdict | None = None


@dataclass(frozen=True)
class SessionState:
    phase: Phase = Phase.IDLE
    current: CurrentFish | None = None
    bag_counts: tuple[tuple[str, int], ...] = ()
    bag_date: date | None = None

    def __post_init__(self):
        if self.phase is Phase.IDLE and self.current is not None:
            raise ValueError("IDLE state must carry no current fish")
        if self.phase in (Phase.MEASURED, Phase.AWAITING_DECISION, Phase.RELEASING,
                          Phase.LANDING, Phase.FISH_PRESENT) and self.current is None:
            raise ValueError(f"{self.phase.value} requires a current fish")
        if self.phase is Phase.AWAITING_DECISION and self.current.verdict is None:
            raise ValueError("AWAITING_DECISION requires a verdict")

    def bag_count(self, species: str) -> int:
        key = species.lower()
        for sp, n in self.bag_counts:
            if sp == key:
                return n
        return 0


@dataclass(frozen=True)
class SessionConfig:
    auto_release: bool = False
    measure_timeout_s: float = 10.0
    decision_timeout_s: float = 60.0


def initial_state() -> SessionState:
    return SessionState()


def select_detection(detections: tuple[Detection, ...]) -> Detection:
    """One fish at a time: highest confidence, tie -> largest area, then
    leftmost."""
    return min(detections, key=lambda d: (-d.confidence, -d.box.area, d.box.x))


def _bag_with(counts, day, species, t) -> tuple[tuple[tuple[str, int], ...], date]:
    """Increment the per-day bag map, resetting on calendar rollover."""
    today = epoch_to_utc(t).date()
    items = dict(counts) if day == today else {}
    key = species.lower()
    items[key] = items.get(key, 0) + 1
    return tuple(sorted(items.items())), today


def _verdict_card(fish: CurrentFish) -> dict:
    return {
        "type": "verdict",
        "frame_id": fish.frame_id,
        "species": fish.detection.species,
        "length_cm": fish.estimate.length_cm if fish.estimate else None,
        "decision": fish.verdict.decision.value,
        "reasons": [r.value for r in fish.verdict.reasons],
    }


def _close_out(state: SessionState, t: float, outcome: Outcome,
               extra: list[Effect]) -> tuple[SessionState, list[Effect]]:
    """Abort path: log the in-progress fish and return to IDLE."""
    fish = state.current
    record = CatchRecord(
        timestamp=epoch_to_utc(t),
        species=fish.detection.species,
        length_cm=fish.estimate.length_cm if fish.estimate else None,
        decision=fish.verdict.decision if fish.verdict else Decision.NO_RULE,
        reasons=fish.verdict.reasons if fish.verdict else (),
        outcome=outcome,
        frame_id=fish.frame_id,
    )
    new = replace(state, phase=Phase.IDLE, current=None)
    return new, extra + [AppendLog(record)]


def step(state: SessionState, event: SessionEvent,
         config: SessionConfig = SessionConfig()) -> tuple[SessionState, list[Effect]]:
    """Apply one event. Pure: same (state, event, config) -> same result."""

    # device loss aborts whatever is in progress, from any phase
    if isinstance(event, DeviceEvent) and event.kind == "bye":
        if state.phase in (Phase.FISH_PRESENT, Phase.MEASURED, Phase.AWAITING_DECISION):
            return _close_out(state, event.t, Outcome.LOST, [SendLureOff()])
        if state.phase is Phase.LANDING:
            # landed fish is already logged; still balance the lure
            return replace(state, phase=Phase.IDLE, current=None), [SendLureOff()]
        return replace(state, phase=Phase.IDLE, current=None), []

    if isinstance(event, DeviceEvent):
        # acks and battery reports carry no transition; surface battery to UI
        if event.kind == "battery":
            return state, [NotifyUi({
                "type": "state",
                "phase": state.phase.value,
                "battery": {"consumed_mah": event.consumed_mah,
                            "capacity_mah": event.capacity_mah},
            })]
        return state, []

    if isinstance(event, FrameIn):
        if state.phase is Phase.IDLE:
            if not event.detections:
                return state, []
            chosen = select_detection(event.detections)
            fish = CurrentFish(frame_id=event.frame_id, detection=chosen)
            return (replace(state, phase=Phase.FISH_PRESENT, current=fish),
                    [SendLureOn(), RequestDepth(event.frame_id, chosen)])
        if state.phase in (Phase.RELEASING, Phase.LANDING) and not event.detections:
            effects: list[Effect] = []
            if state.phase is Phase.LANDING:
                effects.append(SendLureOff())  # fish landed, release the clamp
            return replace(state, phase=Phase.IDLE, current=None), effects
        return state, []  # frames during an active catch carry no transition

    if isinstance(event, MeasureDone):
        if state.phase is not Phase.FISH_PRESENT:
            return state, [Diagnostic(f"MEASURE_DONE ignored in {state.phase.value}")]
        fish = replace(state.current, estimate=event.estimate)
        return (replace(state, phase=Phase.MEASURED, current=fish),
                [EvaluateRules(event.t, fish.detection.species,
                               event.estimate.length_cm if event.estimate else None)])

    if isinstance(event, VerdictIn):
        if state.phase is not Phase.MEASURED:
            return state, [Diagnostic(f"VERDICT ignored in {state.phase.value}")]
        fish = replace(state.current, verdict=event.verdict)
        awaiting = replace(state, phase=Phase.AWAITING_DECISION, current=fish)
        effects = [NotifyUi(_verdict_card(fish))]
        if config.auto_release and event.verdict.decision is Decision.MUST_RELEASE:
            released, more = _close_out(awaiting, event.t, Outcome.RELEASED,
                                        [SendLureOff()])
            return replace(released, phase=Phase.RELEASING, current=fish), effects + more
        return awaiting, effects

    if isinstance(event, OperatorDecision):
        if state.phase is not Phase.AWAITING_DECISION:
            return state, [Diagnostic(f"operator decision ignored in {state.phase.value}")]
        if event.choice not in ("keep", "release"):
            return state, [Diagnostic(f"unknown operator choice {event.choice!r}")]
        fish = state.current
        if event.choice == "release":
            released, effects = _close_out(state, event.t, Outcome.RELEASED,
                                           [SendLureOff()])
            return replace(released, phase=Phase.RELEASING, current=fish), effects
        if fish.verdict.decision is not Decision.KEEP_ALLOWED:
            return state, [NotifyUi({
                "type": "refusal",
                "message": f"cannot keep: verdict is {fish.verdict.decision.value}",
                "reasons": [r.value for r in fish.verdict.reasons],
            })]
        record = CatchRecord(
            timestamp=epoch_to_utc(event.t),
            species=fish.detection.species,
            length_cm=fish.estimate.length_cm if fish.estimate else None,
            decision=fish.verdict.decision,
            reasons=fish.verdict.reasons,
            outcome=Outcome.KEPT,
            frame_id=fish.frame_id,
        )
        counts, day = _bag_with(state.bag_counts, state.bag_date,
                                fish.detection.species, event.t)
        landed = replace(state, phase=Phase.LANDING, bag_counts=counts, bag_date=day)
        return landed, [AppendLog(record)]

    if isinstance(event, TimeoutEvent):
        if state.phase in (Phase.FISH_PRESENT, Phase.MEASURED, Phase.AWAITING_DECISION):
            return _close_out(state, event.t, Outcome.LOST, [SendLureOff()])
        return state, [Diagnostic(f"timeout ignored in {state.phase.value}")]

    return state, [Diagnostic(f"unhandled event {event!r}")]  # pragma: no cover
