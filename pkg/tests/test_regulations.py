"""Rule parsing and verdict evaluation against a brute-force predicate oracle."""

from __future__ import annotations

import json
from datetime import date, datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from catchkit.records import CatchRecord, Outcome
from catchkit.regulations import (
    CatchContext,
    Decision,
    Reason,
    RegulationSchemaError,
    RegulationSyntaxError,
    RegulationSet,
    Rule,
    Season,
    Verdict,
    bag_counter,
    evaluate,
    parse_regulations,
    serialize_regulations,
)


# ---------------------------------------------------------------------------
# Oracle: predicate-by-predicate, no shared code with the implementation
# ---------------------------------------------------------------------------

def oracle_in_season(open_md, close_md, d: date) -> bool:
    md = (d.month, d.day)
    if open_md <= close_md:
        return open_md <= md <= close_md
    return md >= open_md or md <= close_md


def oracle_verdict(rule: dict | None, length, d: date, bag: int):
    """Returns (decision string, set of reason strings)."""
    if rule is None:
        return ("NO_RULE", set())
    reasons = set()
    has_length_rule = rule.get("min") is not None or rule.get("max") is not None
    if length is None:
        if has_length_rule:
            reasons.add("LENGTH_UNKNOWN")
    else:
        if rule.get("min") is not None and length < rule["min"]:
            reasons.add("UNDERSIZE")
        if rule.get("max") is not None and length > rule["max"]:
            reasons.add("OVERSIZE")
    if rule.get("season") is not None and not oracle_in_season(
        rule["season"][0], rule["season"][1], d
    ):
        reasons.add("OUT_OF_SEASON")
    if rule.get("bag") is not None and bag >= rule["bag"]:
        reasons.add("BAG_LIMIT_REACHED")
    return ("MUST_RELEASE", reasons) if reasons else ("KEEP_ALLOWED", set())


def make_regs(**kw) -> RegulationSet:
    season = kw.get("season")
    return RegulationSet(
        location="test_lake",
        rules=(
            Rule(
                species="striped_bass",
                min_length_cm=kw.get("min"),
                max_length_cm=kw.get("max"),
                bag_limit=kw.get("bag"),
                season=Season(season[0], season[1]) if season else None,
            ),
        ),
    )


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def test_parse_empty_rules():
    regs = parse_regulations({"location": "x", "rules": []})
    assert regs.location == "x"
    assert regs.rules == ()


def test_parse_full_rule_roundtrip_values():
    doc = {
        "location": "maine_coast",
        "units": "cm",
        "rules": [{
            "species": "striped_bass",
            "min_length": 71.1,
            "bag_limit": 1,
            "season": {"open": "05-01", "close": "10-31"},
        }],
    }
    regs = parse_regulations(json.dumps(doc))
    rule = regs.rules[0]
    assert rule.species == "striped_bass"
    assert rule.min_length_cm == 71.1
    assert rule.max_length_cm is None
    assert rule.bag_limit == 1
    assert rule.season == Season((5, 1), (10, 31))


def test_parse_inch_units_convert():
    doc = {"location": "x", "units": "in",
           "rules": [{"species": "s", "min_length": 10.0}]}
    regs = parse_regulations(doc)
    assert regs.rules[0].min_length_cm == pytest.approx(25.4)


def test_parse_min_above_max_names_species():
    doc = {"location": "x", "rules": [
        {"species": "pike", "min_length": 90.0, "max_length": 50.0}]}
    with pytest.raises(RegulationSchemaError, match="pike"):
        parse_regulations(doc)


def test_parse_duplicate_species_rejected():
    doc = {"location": "x", "rules": [
        {"species": "pike"}, {"species": "Pike"}]}
    with pytest.raises(RegulationSchemaError, match="duplicate"):
        parse_regulations(doc)


def test_parse_invalid_month_day_rejected():
    doc = {"location": "x", "rules": [
        {"species": "s", "season": {"open": "13-01", "close": "10-31"}}]}
    with pytest.raises(RegulationSchemaError, match="month-day"):
        parse_regulations(doc)
    doc["rules"][0]["season"] = {"open": "02-30", "close": "10-31"}
    with pytest.raises(RegulationSchemaError, match="month-day"):
        parse_regulations(doc)


def test_parse_syntax_error_reports_position():
    with pytest.raises(RegulationSyntaxError, match="line 1"):
        parse_regulations('{"location": "x", "rules": [')


def test_parse_serialize_roundtrip():
    doc = {
        "location": "two_rules",
        "rules": [
            {"species": "a", "min_length": 30.0, "max_length": 60.0, "bag_limit": 2,
             "season": {"open": "11-01", "close": "02-28"}},
            {"species": "b"},
        ],
    }
    regs = parse_regulations(doc)
    again = parse_regulations(serialize_regulations(regs))
    assert again == regs


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

IN_SEASON = date(2023, 7, 4)


def test_undersize_forces_release():
    regs = make_regs(min=50.0)
    v = evaluate(CatchContext("striped_bass", IN_SEASON, length_cm=30.0), regs)
    assert v.decision is Decision.MUST_RELEASE
    assert v.reasons == (Reason.UNDERSIZE,)


def test_all_constraints_satisfied_keeps():
    regs = make_regs(min=50.0, bag=2, season=((5, 1), (10, 31)))
    v = evaluate(CatchContext("striped_bass", IN_SEASON, length_cm=60.0,
                              bag_count_today=0), regs)
    assert v == Verdict(Decision.KEEP_ALLOWED)


def test_no_rule_is_distinct():
    regs = make_regs(min=50.0)
    v = evaluate(CatchContext("unknown_fish", IN_SEASON, length_cm=60.0), regs)
    assert v.decision is Decision.NO_RULE
    assert v.reasons == ()


def test_species_match_case_insensitive():
    regs = make_regs(min=50.0)
    v = evaluate(CatchContext("Striped_Bass", IN_SEASON, length_cm=60.0), regs)
    assert v.decision is Decision.KEEP_ALLOWED


def test_boundary_semantics():
    regs = make_regs(min=50.0, max=90.0, bag=2, season=((5, 1), (10, 31)))
    at_min = CatchContext("striped_bass", date(2023, 5, 1), length_cm=50.0)
    assert evaluate(at_min, regs).decision is Decision.KEEP_ALLOWED  # = min legal, open day legal
    at_close = CatchContext("striped_bass", date(2023, 10, 31), length_cm=90.0)
    assert evaluate(at_close, regs).decision is Decision.KEEP_ALLOWED  # = max legal, close day legal
    at_bag = CatchContext("striped_bass", IN_SEASON, length_cm=60.0, bag_count_today=2)
    v = evaluate(at_bag, regs)
    assert v.decision is Decision.MUST_RELEASE
    assert v.reasons == (Reason.BAG_LIMIT_REACHED,)


def test_missing_length_with_length_rule():
    regs = make_regs(min=50.0)
    v = evaluate(CatchContext("striped_bass", IN_SEASON, length_cm=None), regs)
    assert v.decision is Decision.MUST_RELEASE
    assert v.reasons == (Reason.LENGTH_UNKNOWN,)


def test_wraparound_season():
    regs = make_regs(season=((11, 1), (2, 28)))
    for d, expect in [
        (date(2023, 12, 25), Decision.KEEP_ALLOWED),
        (date(2023, 1, 15), Decision.KEEP_ALLOWED),
        (date(2023, 6, 1), Decision.MUST_RELEASE),
    ]:
        v = evaluate(CatchContext("striped_bass", d, length_cm=40.0), regs)
        assert v.decision is expect, d


def test_exhaustive_grid_matches_oracle():
    season = ((5, 1), (10, 31))
    wrap = ((11, 1), (2, 28))
    rule_std = {"min": 50.0, "max": 90.0, "bag": 2, "season": season}
    rule_wrap = {"min": 30.0, "max": None, "bag": 1, "season": wrap}

    cases = 0
    mismatches = []
    for rule_doc, dates in (
        (rule_std, [date(2023, 4, 30), date(2023, 5, 1), date(2023, 7, 15),
                    date(2023, 10, 31), date(2023, 11, 1)]),
        (rule_wrap, [date(2023, 10, 31), date(2023, 11, 1), date(2023, 12, 25),
                     date(2023, 1, 15), date(2023, 2, 28), date(2023, 6, 1)]),
    ):
        regs = make_regs(**rule_doc)
        for length in (None, 29.9, 30.0, 49.9, 50.0, 70.0, 90.0, 90.1):
            for d in dates:
                for bag in (0, 1, 2, 3):
                    ctx = CatchContext("striped_bass", d, length_cm=length,
                                       bag_count_today=bag)
                    got = evaluate(ctx, regs)
                    want_decision, want_reasons = oracle_verdict(rule_doc, length, d, bag)
                    cases += 1
                    if (got.decision.value != want_decision
                            or {r.value for r in got.reasons} != want_reasons):
                        mismatches.append((rule_doc, length, d, bag, got))
    assert cases >= 200
    assert mismatches == []


@given(
    st.floats(1.0, 200.0),
    st.floats(0.01, 100.0),
)
@settings(max_examples=60, deadline=None)
def test_min_only_rule_monotone_in_length(min_len, delta):
    regs = make_regs(min=min_len)
    base = CatchContext("striped_bass", IN_SEASON, length_cm=min_len)
    assert evaluate(base, regs).decision is Decision.KEEP_ALLOWED
    longer = CatchContext("striped_bass", IN_SEASON, length_cm=min_len + delta)
    assert evaluate(longer, regs).decision is Decision.KEEP_ALLOWED


def test_verdict_invariants_enforced():
    with pytest.raises(ValueError):
        Verdict(Decision.MUST_RELEASE, ())
    with pytest.raises(ValueError):
        Verdict(Decision.KEEP_ALLOWED, (Reason.UNDERSIZE,))


# ---------------------------------------------------------------------------
# bag_counter
# ---------------------------------------------------------------------------

def rec(day: int, hour: int, species: str, outcome: Outcome) -> CatchRecord:
    decision = Decision.KEEP_ALLOWED if outcome is Outcome.KEPT else Decision.NO_RULE
    if outcome is Outcome.RELEASED:
        decision = Decision.KEEP_ALLOWED  # operator may release a keepable fish
    return CatchRecord(
        timestamp=datetime(2023, 6, day, hour, 0, tzinfo=timezone.utc),
        species=species,
        length_cm=40.0,
        decision=decision,
        reasons=(),
        outcome=outcome,
        frame_id=day * 100 + hour,
    )


def test_bag_counter_empty_log():
    assert bag_counter([], "perch", date(2023, 6, 1)) == 0


def test_bag_counter_released_never_counts():
    log = [rec(1, h, "perch", Outcome.KEPT) for h in (8, 9, 10)]
    log += [rec(1, h, "perch", Outcome.RELEASED) for h in (11, 12)]
    assert bag_counter(log, "perch", date(2023, 6, 1)) == 3


def test_bag_counter_mixed_dates_matches_filter_oracle():
    log = []
    for day in (1, 1, 2, 2, 3):
        for sp, out in (("perch", Outcome.KEPT), ("pike", Outcome.KEPT),
                        ("perch", Outcome.LOST)):
            log.append(rec(day, len(log) % 24, sp, out))
    log.sort(key=lambda r: r.timestamp)
    for day in (1, 2, 3):
        want = sum(
            1 for r in log
            if r.species == "perch" and r.outcome is Outcome.KEPT
            and r.timestamp.date() == date(2023, 6, day)
        )
        assert bag_counter(log, "perch", date(2023, 6, day)) == want


def test_bag_counter_rejects_unordered_log():
    log = [rec(2, 8, "perch", Outcome.KEPT), rec(1, 8, "perch", Outcome.KEPT)]
    with pytest.raises(ValueError, match="chronological"):
        bag_counter(log, "perch", date(2023, 6, 1))
