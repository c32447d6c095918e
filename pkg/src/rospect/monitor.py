"""Incremental monitors and a definitional oracle for behavioural properties.

Semantics are finite-trace and three-valued. A trace is *closed* when its
end_time is known (observation finished) and *open* while still observing.
Verdicts latch: once TRUE or FALSE, later events never change them.

Interval rules:
  - globally: one interval from the start, closing only with the trace.
  - after E: one interval opening strictly after the first E-match.
  - until E: one interval from the start; the first E-match closes it and
    the terminating event itself lies outside the interval.
  - after P until Q: repeating intervals, opening strictly after each
    P-match while inactive and closing at each Q-match.

Pattern rules inside active intervals (indices are trace positions; an event
matching both roles of a binary pattern pairs only with strictly earlier
counterparts):
  - no E: an E-match is FALSE.
  - some E: an E-match is TRUE; an interval closing without one is FALSE.
  - A causes B [within d]: each A opens an obligation; a later B inside the
    interval (and the window, if d is given) discharges all open obligations
    it covers; window expiry or interval closure with a pending obligation
    is FALSE.
  - A forbids B [within d]: a B after an A inside the interval (and window)
    is FALSE.
  - A requires B [within d]: an A with no earlier B inside the interval
    (and look-back window) is FALSE.

At closure: absence/prevention/requirement never falsified are TRUE;
unsatisfied existence is FALSE (vacuously TRUE if the scope never
activated); pending response obligations are FALSE when their deadline has
expired by end_time and INCONCLUSIVE otherwise; everything discharged is
TRUE. Open traces stay INCONCLUSIVE until latched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .hpl import Cmp, Event, FieldRef, HplProperty, InRange, InSet, Lit, PredOp
from .msgs import MessageTypeDef, PayloadError, validate_payload


class VerdictValue(Enum):
    TRUE = "true"
    FALSE = "false"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Witness:
    event_indices: tuple[int, ...]
    explanation: str


@dataclass(frozen=True)
class Verdict:
    value: VerdictValue
    witness: Witness | None = None

    def __post_init__(self) -> None:
        if self.value is VerdictValue.FALSE and self.witness is None:
            raise ValueError("false verdicts carry a witness")

    @property
    def is_final(self) -> bool:
        return self.value is not VerdictValue.INCONCLUSIVE


INCONCLUSIVE = Verdict(VerdictValue.INCONCLUSIVE)


@dataclass(frozen=True)
class MessageEvent:
    time: float
    channel: str
    payload: dict


class TraceError(Exception):
    """Malformed trace input (bad records, out-of-order times, payload mismatch)."""


@dataclass
class Trace:
    """A time-ordered event sequence; end_time marks closure when known."""

    events: list[MessageEvent] = field(default_factory=list)
    end_time: float | None = None

    def __post_init__(self) -> None:
        last = None
        for i, event in enumerate(self.events):
            if last is not None and event.time < last:
                raise TraceError(f"event {i} out of order ({event.time} < {last})")
            last = event.time
        if self.end_time is not None and last is not None and self.end_time < last:
            raise TraceError(f"end_time {self.end_time} precedes last event at {last}")

    @property
    def is_closed(self) -> bool:
        return self.end_time is not None


# --- predicate evaluation ------------------------------------------------------


def _field_value(payload: dict, path: tuple[object, ...]) -> object:
    value: object = payload
    for step in path:
        if isinstance(step, int):
            if not isinstance(value, list) or step >= len(value):
                raise PayloadError(f"index {step} out of range")
            value = value[step]
        else:
            if not isinstance(value, dict) or step not in value:
                raise PayloadError(f"missing field {step!r}")
            value = value[step]
    return value


def _operand_value(operand: object, payload: dict) -> object:
    if isinstance(operand, Lit):
        return operand.value
    if isinstance(operand, FieldRef):
        return _field_value(payload, operand.path)
    raise PayloadError(f"cannot evaluate operand {operand!r}")


def _compatible(a: object, b: object) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool)
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return True
    return isinstance(a, str) and isinstance(b, str)


def eval_predicate(pred: object, payload: dict) -> bool:
    """Evaluate a predicate over a payload; raises PayloadError on bad access."""
    if isinstance(pred, Lit):
        if not isinstance(pred.value, bool):
            raise PayloadError(f"non-boolean literal {pred.value!r} as condition")
        return pred.value
    if isinstance(pred, FieldRef):
        value = _field_value(payload, pred.path)
        if not isinstance(value, bool):
            raise PayloadError(f"field {pred} is not boolean")
        return value
    if isinstance(pred, PredOp):
        if pred.op == "not":
            return not eval_predicate(pred.items[0], payload)
        left = eval_predicate(pred.items[0], payload)
        if pred.op == "and":
            return left and eval_predicate(pred.items[1], payload)
        if pred.op == "or":
            return left or eval_predicate(pred.items[1], payload)
        if pred.op == "implies":
            return (not left) or eval_predicate(pred.items[1], payload)
    if isinstance(pred, Cmp):
        left = _operand_value(pred.left, payload)
        right = _operand_value(pred.right, payload)
        if not _compatible(left, right):
            raise PayloadError(f"cannot compare {left!r} with {right!r}")
        return {
            "=": left == right,
            "!=": left != right,
            "<": left < right,
            "<=": left <= right,
            ">": left > right,
            ">=": left >= right,
        }[pred.op]
    if isinstance(pred, InSet):
        value = _operand_value(pred.item, payload)
        return any(_compatible(value, v) and value == v for v in pred.values)
    if isinstance(pred, InRange):
        value = _operand_value(pred.item, payload)
        if not _compatible(value, pred.low):
            raise PayloadError(f"range membership over non-numeric {value!r}")
        return pred.low <= value <= pred.high
    raise PayloadError(f"unknown predicate node {pred!r}")


def event_matches(spec: Event, event: MessageEvent) -> bool:
    if event.channel != spec.channel:
        return False
    if spec.predicate is None:
        return True
    return eval_predicate(spec.predicate, event.payload)


# --- the incremental automaton --------------------------------------------------


class MonitorAutomaton:
    """Observer for one property; feed events in order, then finish at closure."""

    def __init__(self, prop: HplProperty):
        self.property = prop
        self._scope = prop.scope
        self._pattern = prop.pattern
        self._deadline = float(prop.pattern.deadline) if prop.pattern.deadline is not None else None
        self._verdict: Verdict = INCONCLUSIVE
        self._n = 0
        self._last_time: float | None = None
        self._active = self._scope.kind in ("globally", "until")
        self._ever_active = self._active
        self._finished = False
        self._reset_interval()

    def _reset_interval(self) -> None:
        self._obligations: list[tuple[int, float]] = []  # response
        self._armed: list[tuple[int, float]] = []  # prevention
        self._b_seen = False  # requirement, no deadline
        self._recent_bs: list[tuple[int, float]] = []  # requirement, with deadline

    @property
    def verdict(self) -> Verdict:
        return self._verdict

    def _latch(self, value: VerdictValue, indices: tuple[int, ...], explanation: str) -> None:
        witness = Witness(indices, explanation)
        self._verdict = Verdict(value, witness)

    def feed(self, event: MessageEvent) -> Verdict:
        """Consume one event; amortized constant work per event."""
        if self._finished:
            raise TraceError("monitor already finished")
        if self._last_time is not None and event.time < self._last_time:
            raise TraceError(
                f"out-of-order event at {event.time} (last was {self._last_time})"
            )
        self._last_time = event.time
        index = self._n
        self._n += 1
        if self._verdict.is_final:
            return self._verdict

        kind = self._scope.kind
        if kind == "after" and not self._active:
            if event_matches(self._scope.activator, event):
                self._active = True
                self._ever_active = True
                self._reset_interval()
            return self._verdict
        if kind == "until":
            if self._active and event_matches(self._scope.terminator, event):
                self._close_interval(index)
                self._active = False
                return self._verdict
            if not self._active:
                return self._verdict
        if kind == "after_until":
            if not self._active:
                if event_matches(self._scope.activator, event):
                    self._active = True
                    self._ever_active = True
                    self._reset_interval()
                return self._verdict
            if event_matches(self._scope.terminator, event):
                self._close_interval(index)
                self._active = False
                return self._verdict

        self._step_pattern(index, event)
        return self._verdict

    def _step_pattern(self, index: int, event: MessageEvent) -> None:
        pattern = self._pattern
        deadline = self._deadline
        if pattern.kind == "absence":
            if event_matches(pattern.event_a, event):
                self._latch(VerdictValue.FALSE, (index,), f"forbidden event at index {index}")
            return
        if pattern.kind == "existence":
            if event_matches(pattern.event_a, event):
                self._latch(VerdictValue.TRUE, (index,), f"required event at index {index}")
            return
        if pattern.kind == "response":
            if self._obligations and event_matches(pattern.event_b, event):
                self._obligations = [
                    ob
                    for ob in self._obligations
                    if deadline is not None and event.time > ob[1] + deadline
                ]
            if deadline is not None:
                expired = [ob for ob in self._obligations if event.time > ob[1] + deadline]
                if expired:
                    self._latch(
                        VerdictValue.FALSE,
                        (expired[0][0],),
                        f"no response within {deadline}s of index {expired[0][0]}",
                    )
                    return
            if event_matches(pattern.event_a, event):
                self._obligations.append((index, event.time))
            return
        if pattern.kind == "prevention":
            if self._armed and event_matches(pattern.event_b, event):
                for armed_index, armed_time in self._armed:
                    if deadline is None or event.time <= armed_time + deadline:
                        self._latch(
                            VerdictValue.FALSE,
                            (armed_index, index),
                            f"forbidden response at index {index} to index {armed_index}",
                        )
                        return
            if deadline is not None:
                self._armed = [a for a in self._armed if event.time <= a[1] + deadline]
            if event_matches(pattern.event_a, event):
                if deadline is None:
                    if not self._armed:
                        self._armed.append((index, event.time))
                else:
                    self._armed.append((index, event.time))
            return
        if pattern.kind == "requirement":
            if event_matches(pattern.event_a, event):
                if deadline is None:
                    satisfied = self._b_seen
                else:
                    satisfied = any(bt >= event.time - deadline for _, bt in self._recent_bs)
                if not satisfied:
                    self._latch(
                        VerdictValue.FALSE,
                        (index,),
                        f"event at index {index} lacks its prerequisite",
                    )
                    return
            if event_matches(pattern.event_b, event):
                if deadline is None:
                    self._b_seen = True
                else:
                    self._recent_bs.append((index, event.time))
                    self._recent_bs = [
                        (bi, bt) for bi, bt in self._recent_bs if bt >= event.time - deadline
                    ]
            return

    def _close_interval(self, index: int) -> None:
        """A terminator ends the interval; the terminating event lies outside it."""
        if self._pattern.kind == "existence":
            self._latch(
                VerdictValue.FALSE,
                (index,),
                f"interval closed at index {index} without the required event",
            )
        elif self._pattern.kind == "response" and self._obligations:
            self._latch(
                VerdictValue.FALSE,
                (self._obligations[0][0],),
                f"interval closed at index {index} with a pending response",
            )
        self._reset_interval()

    def finish(self, end_time: float | None = None) -> Verdict:
        """Render the closed-trace verdict; idempotent."""
        if self._finished:
            return self._verdict
        if end_time is None:
            end_time = self._last_time if self._last_time is not None else 0.0
        if self._last_time is not None and end_time < self._last_time:
            raise TraceError(f"end_time {end_time} precedes last event at {self._last_time}")
        self._finished = True
        if self._verdict.is_final:
            return self._verdict
        pattern = self._pattern
        if pattern.kind == "existence":
            if self._active:
                self._latch(
                    VerdictValue.FALSE, (), "trace closed without the required event"
                )
            else:
                # Never-activated (or fully satisfied-and-closed) scopes are vacuous.
                self._verdict = Verdict(VerdictValue.TRUE)
        elif pattern.kind == "response":
            expired = [
                ob
                for ob in self._obligations
                if self._deadline is not None and end_time > ob[1] + self._deadline
            ]
            if expired:
                self._latch(
                    VerdictValue.FALSE,
                    (expired[0][0],),
                    f"no response within {self._deadline}s of index {expired[0][0]}",
                )
            elif self._obligations:
                self._verdict = INCONCLUSIVE
            else:
                self._verdict = Verdict(VerdictValue.TRUE)
        else:
            self._verdict = Verdict(VerdictValue.TRUE)
        return self._verdict


def compile_monitor(prop: HplProperty) -> MonitorAutomaton:
    """Build the incremental observer for a property."""
    return MonitorAutomaton(prop)


def check_trace(
    properties: list[HplProperty] | list[tuple[str, HplProperty]],
    trace: Trace,
    channel_types: dict[str, MessageTypeDef] | None = None,
    msg_index: dict[str, MessageTypeDef] | None = None,
) -> list[tuple[HplProperty, Verdict]]:
    """Run every property's monitor over one trace; verdicts are independent.

    When channel types are known, payloads are validated first; a
    non-conforming payload is fatal for the trace, naming the event index.
    """
    if channel_types:
        for i, event in enumerate(trace.events):
            msg = channel_types.get(event.channel)
            if msg is None:
                continue
            try:
                validate_payload(event.payload, msg, msg_index or {})
            except PayloadError as exc:
                raise TraceError(f"event {i} on {event.channel}: {exc}") from exc
    results = []
    for item in properties:
        prop = item[1] if isinstance(item, tuple) else item
        automaton = compile_monitor(prop)
        for event in trace.events:
            if automaton.verdict.is_final:
                break
            automaton.feed(event)
        if trace.is_closed:
            automaton.finish(trace.end_time)
        results.append((prop, automaton.verdict))
    return results


# --- the definitional oracle -----------------------------------------------------


def _scope_intervals(
    scope, events: list[MessageEvent], closed: bool
) -> list[tuple[int, int, bool]]:
    """Intervals as (first eligible index, end exclusive, terminated-by-event)."""
    n = len(events)
    if scope.kind == "globally":
        return [(0, n, False)]
    if scope.kind == "until":
        for i, e in enumerate(events):
            if event_matches(scope.terminator, e):
                return [(0, i, True)]
        return [(0, n, False)]
    if scope.kind == "after":
        for i, e in enumerate(events):
            if event_matches(scope.activator, e):
                return [(i + 1, n, False)]
        return []
    intervals = []
    active_from: int | None = None
    for i, e in enumerate(events):
        if active_from is None:
            if event_matches(scope.activator, e):
                active_from = i + 1
        elif event_matches(scope.terminator, e):
            intervals.append((active_from, i, True))
            active_from = None
    if active_from is not None:
        intervals.append((active_from, n, False))
    return intervals


def oracle_verdict(prop: HplProperty, trace: Trace) -> Verdict:
    """Evaluate the semantics by explicit quantification over event indices.

    Intended for small traces; must agree with the automaton on value.
    """
    events = trace.events
    closed = trace.is_closed
    horizon = trace.end_time if closed else (events[-1].time if events else 0.0)
    intervals = _scope_intervals(prop.scope, events, closed)
    pattern = prop.pattern
    deadline = float(pattern.deadline) if pattern.deadline is not None else None

    def in_interval(i: int) -> tuple[int, int, bool] | None:
        for iv in intervals:
            if iv[0] <= i < iv[1]:
                return iv
        return None

    if pattern.kind == "absence":
        for lo, hi, _term in intervals:
            for i in range(lo, hi):
                if event_matches(pattern.event_a, events[i]):
                    return Verdict(
                        VerdictValue.FALSE, Witness((i,), f"forbidden event at index {i}")
                    )
        return Verdict(VerdictValue.TRUE) if closed else INCONCLUSIVE

    if pattern.kind == "existence":
        for lo, hi, terminated in intervals:
            match = next(
                (i for i in range(lo, hi) if event_matches(pattern.event_a, events[i])), None
            )
            if match is not None:
                return Verdict(VerdictValue.TRUE, Witness((match,), f"required event at index {match}"))
            if terminated:
                return Verdict(
                    VerdictValue.FALSE,
                    Witness((hi,), f"interval closed at index {hi} without the required event"),
                )
            if closed:
                return Verdict(
                    VerdictValue.FALSE, Witness((), "trace closed without the required event")
                )
            return INCONCLUSIVE
        return Verdict(VerdictValue.TRUE) if closed else INCONCLUSIVE

    if pattern.kind == "response":
        pending = False
        for lo, hi, terminated in intervals:
            for i in range(lo, hi):
                if not event_matches(pattern.event_a, events[i]):
                    continue
                discharged = any(
                    event_matches(pattern.event_b, events[j])
                    and (deadline is None or events[j].time <= events[i].time + deadline)
                    for j in range(i + 1, hi)
                )
                if discharged:
                    continue
                if terminated:
                    return Verdict(
                        VerdictValue.FALSE,
                        Witness((i,), f"interval closed at index {hi} with a pending response"),
                    )
                if deadline is not None and horizon > events[i].time + deadline:
                    return Verdict(
                        VerdictValue.FALSE,
                        Witness((i,), f"no response within {deadline}s of index {i}"),
                    )
                pending = True
        if pending:
            return INCONCLUSIVE
        return Verdict(VerdictValue.TRUE) if closed else INCONCLUSIVE

    if pattern.kind == "prevention":
        for lo, hi, _term in intervals:
            for i in range(lo, hi):
                if not event_matches(pattern.event_a, events[i]):
                    continue
                for j in range(i + 1, hi):
                    if event_matches(pattern.event_b, events[j]) and (
                        deadline is None or events[j].time <= events[i].time + deadline
                    ):
                        return Verdict(
                            VerdictValue.FALSE,
                            Witness((i, j), f"forbidden response at index {j} to index {i}"),
                        )
        return Verdict(VerdictValue.TRUE) if closed else INCONCLUSIVE

    # requirement
    for lo, hi, _term in intervals:
        for i in range(lo, hi):
            if not event_matches(pattern.event_a, events[i]):
                continue
            satisfied = any(
                event_matches(pattern.event_b, events[j])
                and (deadline is None or events[j].time >= events[i].time - deadline)
                for j in range(lo, i)
            )
            if not satisfied:
                return Verdict(
                    VerdictValue.FALSE, Witness((i,), f"event at index {i} lacks its prerequisite")
                )
    return Verdict(VerdictValue.TRUE) if closed else INCONCLUSIVE


# --- trace files ------------------------------------------------------------------


def load_trace(path: str | Path) -> Trace:
    """Read a line-delimited trace file; scalars are shorthand for {data: scalar}."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(f"{path}:{lineno}: bad record: {exc}") from exc
            if not isinstance(record, dict) or "time" not in record or "topic" not in record:
                raise TraceError(f"{path}:{lineno}: records need time and topic fields")
            data = record.get("data", {})
            if not isinstance(data, dict):
                data = {"data": data}
            events.append(
                MessageEvent(time=float(record["time"]), channel=str(record["topic"]), payload=data)
            )
    end_time = events[-1].time if events else 0.0
    return Trace(events=events, end_time=end_time)


def trace_records(trace: Trace) -> list[dict]:
    return [
        {"time": e.time, "topic": e.channel, "data": e.payload} for e in trace.events
    ]


def dump_trace(trace: Trace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in trace_records(trace):
            fh.write(json.dumps(record, sort_keys=True) + "\n")
