"""Per-location fishing rules and the keep/release verdict.

Rules carry any of: a minimum/maximum legal length, a daily bag limit and an
open season given as recurring month-day endpoints (inclusive; seasons whose
close precedes their open wrap across the year end).

Legal-semantics choices worth knowing:
  * length exactly at the minimum is legal (strict < triggers UNDERSIZE)
  * a length-constrained rule with no measured length forces release
    (LENGTH_UNKNOWN), conservation first
  * NO_RULE is distinct from KEEP_ALLOWED so a UI can say "no regulation
    found, check locally" instead of showing a green light
"""

from __future__ import annotations

import calendar
import json
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path

INCHES_TO_CM = 2.54


class Decision(Enum):
    KEEP_ALLOWED = "KEEP_ALLOWED"
    MUST_RELEASE = "MUST_RELEASE"
    NO_RULE = "NO_RULE"


class Reason(Enum):
    UNDERSIZE = "UNDERSIZE"
    OVERSIZE = "OVERSIZE"
    LENGTH_UNKNOWN = "LENGTH_UNKNOWN"
    OUT_OF_SEASON = "OUT_OF_SEASON"
    BAG_LIMIT_REACHED = "BAG_LIMIT_REACHED"


class RegulationSyntaxError(ValueError):
    """Document is not valid JSON; message carries the reported position."""


class RegulationSchemaError(ValueError):
    """Document parsed but violates the rule schema; message names the field."""


def _check_month_day(value: str, field: str, species: str) -> tuple[int, int]:
    parts = value.split("-")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise RegulationSchemaError(
            f"rule {species!r}: {field} must be 'MM-DD', got {value!r}"
        )
    month, day = int(parts[0]), int(parts[1])
    # validate against a leap year so 02-29 is an acceptable recurring day
    if not (1 <= month <= 12) or not (1 <= day <= calendar.monthrange(2000, month)[1]):
        raise RegulationSchemaError(
            f"rule {species!r}: {field} {value!r} is not a valid month-day"
        )
    return (month, day)


@dataclass(frozen=True)
class Season:
    open: tuple[int, int]
    close: tuple[int, int]

    def contains(self, d: date) -> bool:
        md = (d.month, d.day)
        if self.open <= self.close:
            return self.open <= md <= self.close
        # wrap-around season spans the year end
        return md >= self.open or md <= self.close


@dataclass(frozen=True)
class Rule:
    species: str
    min_length_cm: float | None = None
    max_length_cm: float | None = None
    bag_limit: int | None = None
    season: Season | None = None

    def __post_init__(self):
        if not self.species:
            raise RegulationSchemaError("rule species must be non-empty")
        if self.min_length_cm is not None and not self.min_length_cm > 0:
            raise RegulationSchemaError(
                f"rule {self.species!r}: min_length must be > 0"
            )
        if self.max_length_cm is not None and not self.max_length_cm > 0:
            raise RegulationSchemaError(
                f"rule {self.species!r}: max_length must be > 0"
            )
        if (
            self.min_length_cm is not None
            and self.max_length_cm is not None
            and not self.min_length_cm < self.max_length_cm
        ):
            raise RegulationSchemaError(
                f"rule {self.species!r}: min_length must be < max_length"
            )
        if self.bag_limit is not None and self.bag_limit < 0:
            raise RegulationSchemaError(
                f"rule {self.species!r}: bag_limit must be >= 0"
            )

    @property
    def has_length_constraint(self) -> bool:
        return self.min_length_cm is not None or self.max_length_cm is not None


@dataclass(frozen=True)
class RegulationSet:
    location: str
    rules: tuple[Rule, ...]

    def __post_init__(self):
        if not self.location:
            raise RegulationSchemaError("location must be non-empty")
        seen = set()
        for rule in self.rules:
            key = rule.species.lower()
            if key in seen:
                raise RegulationSchemaError(f"duplicate species {rule.species!r}")
            seen.add(key)

    def rule_for(self, species: str) -> Rule | None:
        key = species.lower()
        for rule in self.rules:
            if rule.species.lower() == key:
                return rule
        return None


@dataclass(frozen=True)
class CatchContext:
    species: str
    date: date
    length_cm: float | None = None
    bag_count_today: int = 0

    def __post_init__(self):
        if self.bag_count_today < 0:
            raise ValueError("bag_count_today must be >= 0")
        if self.length_cm is not None and not self.length_cm > 0:
            raise ValueError("length_cm must be > 0 when present")


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    reasons: tuple[Reason, ...] = ()

    def __post_init__(self):
        if self.decision is Decision.MUST_RELEASE and not self.reasons:
            raise ValueError("MUST_RELEASE requires at least one reason")
        if self.decision is not Decision.MUST_RELEASE and self.reasons:
            raise ValueError(f"{self.decision.value} must carry no reasons")


def parse_regulations(doc: str | dict) -> RegulationSet:
    """Parse and validate a regulation document (JSON text or mapping)."""
    if isinstance(doc, str):
        try:
            data = json.loads(doc)
        except json.JSONDecodeError as e:
            raise RegulationSyntaxError(
                f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
            ) from e
    else:
        data = doc
    if not isinstance(data, dict):
        raise RegulationSchemaError("document root must be an object")

    location = data.get("location")
    if not isinstance(location, str) or not location:
        raise RegulationSchemaError("field 'location' must be a non-empty string")
    units = data.get("units", "cm")
    if units not in ("cm", "in"):
        raise RegulationSchemaError(f"field 'units' must be 'cm' or 'in', got {units!r}")
    scale = INCHES_TO_CM if units == "in" else 1.0

    raw_rules = data.get("rules", [])
    if not isinstance(raw_rules, list):
        raise RegulationSchemaError("field 'rules' must be a list")

    rules = []
    for i, raw in enumerate(raw_rules):
        if not isinstance(raw, dict):
            raise RegulationSchemaError(f"rules[{i}] must be an object")
        species = raw.get("species")
        if not isinstance(species, str) or not species:
            raise RegulationSchemaError(f"rules[{i}]: 'species' must be a non-empty string")
        for field in ("min_length", "max_length"):
            if field in raw and not isinstance(raw[field], (int, float)):
                raise RegulationSchemaError(f"rule {species!r}: {field} must be a number")
        if "bag_limit" in raw and (not isinstance(raw["bag_limit"], int) or isinstance(raw["bag_limit"], bool)):
            raise RegulationSchemaError(f"rule {species!r}: bag_limit must be an integer")

        season = None
        if "season" in raw and raw["season"] is not None:
            s = raw["season"]
            if not isinstance(s, dict) or "open" not in s or "close" not in s:
                raise RegulationSchemaError(
                    f"rule {species!r}: season needs 'open' and 'close'"
                )
            season = Season(
                open=_check_month_day(str(s["open"]), "season.open", species),
                close=_check_month_day(str(s["close"]), "season.close", species),
            )
        rules.append(Rule(
            species=species,
            min_length_cm=raw["min_length"] * scale if raw.get("min_length") is not None else None,
            max_length_cm=raw["max_length"] * scale if raw.get("max_length") is not None else None,
            bag_limit=raw.get("bag_limit"),
            season=season,
        ))
    return RegulationSet(location=location, rules=tuple(rules))


def load_regulations(path: str | Path) -> RegulationSet:
    return parse_regulations(Path(path).read_text())


def serialize_regulations(regs: RegulationSet) -> dict:
    """Emit the document form (always in cm) so parse round-trips."""
    def md(v: tuple[int, int]) -> str:
        return f"{v[0]:02d}-{v[1]:02d}"

    rules = []
    for r in regs.rules:
        entry: dict = {"species": r.species}
        if r.min_length_cm is not None:
            entry["min_length"] = r.min_length_cm
        if r.max_length_cm is not None:
            entry["max_length"] = r.max_length_cm
        if r.bag_limit is not None:
            entry["bag_limit"] = r.bag_limit
        if r.season is not None:
            entry["season"] = {"open": md(r.season.open), "close": md(r.season.close)}
        rules.append(entry)
    return {"location": regs.location, "units": "cm", "rules": rules}


def evaluate(ctx: CatchContext, regs: RegulationSet) -> Verdict:
    """Check a measured catch against the location's rules.

    Any violated constraint forces MUST_RELEASE with the accumulated reason
    codes; a species with no rule yields NO_RULE.
    """
    rule = regs.rule_for(ctx.species)
    if rule is None:
        return Verdict(Decision.NO_RULE)

    reasons: list[Reason] = []
    if ctx.length_cm is not None:
        if rule.min_length_cm is not None and ctx.length_cm < rule.min_length_cm:
            reasons.append(Reason.UNDERSIZE)
        if rule.max_length_cm is not None and ctx.length_cm > rule.max_length_cm:
            reasons.append(Reason.OVERSIZE)
    elif rule.has_length_constraint:
        reasons.append(Reason.LENGTH_UNKNOWN)
    if rule.season is not None and not rule.season.contains(ctx.date):
        reasons.append(Reason.OUT_OF_SEASON)
    if rule.bag_limit is not None and ctx.bag_count_today >= rule.bag_limit:
        reasons.append(Reason.BAG_LIMIT_REACHED)

    if reasons:
        return Verdict(Decision.MUST_RELEASE, tuple(reasons))
    return Verdict(Decision.KEEP_ALLOWED)


def bag_counter(log, species: str, on_date: date) -> int:
    """Kept fish of this species on this calendar day, from an ordered log.

    Records are CatchRecord-shaped (timestamp, species, outcome); released
    or lost fish never count. An unordered log is rejected.
    """
    previous = None
    count = 0
    key = species.lower()
    for record in log:
        if previous is not None and record.timestamp < previous:
            raise ValueError(
                f"log not chronological: {record.timestamp.isoformat()} after "
                f"{previous.isoformat()}"
            )
        previous = record.timestamp
        if (
            record.outcome.name == "KEPT"
            and record.species.lower() == key
            and record.timestamp.date() == on_date
        ):
            count += 1
    return count
