"""Property-driven trace generation, campaign running and counterexample shrinking.

A testing schema compiled from a property narrows generated input traces
toward falsification: scope activators are published first, trigger events
match the property's trigger predicate, and numeric values are biased
toward predicate boundary literals. The driver owns a virtual clock; the
adapter stamps its outputs with the driver's clock when polled.
"""

from __future__ import annotations

import json
import os
import random
import select
import subprocess
from dataclasses import dataclass, field, replace

from .graph import RosGraph
from .hpl import Cmp, Event, FieldRef, HplProperty, InRange, InSet, Lit, PredOp
from .monitor import (
    MessageEvent,
    Trace,
    Verdict,
    VerdictValue,
    check_trace,
    eval_predicate,
)
from .msgs import INT_RANGES, FLOAT_TYPES, NUMERIC_TYPES, MessageTypeDef, builtin_messages


class SchemaError(Exception):
    """The property cannot be turned into a viable testing schema."""


class CampaignError(Exception):
    """Adapter or harness failure, distinct from property falsification."""


# --- adapters ----------------------------------------------------------------


class SutAdapter:
    """In-process harness boundary; subclasses implement on_message/on_reset.

    reset() restores the initial state; poll() returns pending outputs in
    time order, stamped with the driver's virtual clock.
    """

    input_channels: tuple[str, ...] = ()
    output_channels: tuple[str, ...] = ()

    def __init__(self) -> None:
        self.now = 0.0
        self._outbox: list[tuple[str, dict]] = []

    def reset(self) -> None:
        self.now = 0.0
        self._outbox = []
        self.on_reset()

    def advance_clock(self, seconds: float) -> None:
        if seconds < 0:
            raise CampaignError("clock can only advance")
        self.now += seconds

    def send(self, event: MessageEvent) -> None:
        self.now = max(self.now, event.time)
        self.on_message(event)

    def emit(self, channel: str, payload: dict) -> None:
        self._outbox.append((channel, payload))

    def poll(self) -> list[MessageEvent]:
        out = [MessageEvent(time=self.now, channel=ch, payload=data) for ch, data in self._outbox]
        self._outbox = []
        return out

    # Hooks for concrete systems under test.
    def on_reset(self) -> None:
        pass

    def on_message(self, event: MessageEvent) -> None:
        pass


class ProcessAdapter(SutAdapter):
    """Out-of-process adapter speaking trace records over stdin/stdout.

    The child process declares its channels in a header line
    {"inputs": [...], "outputs": [...]}; each send is one record per line;
    a blank line requests a poll flush, answered by records followed by a
    blank line. reset() restarts the process.
    """

    def __init__(self, command: list[str], timeout: float = 10.0):
        super().__init__()
        self.command = command
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._buffer = b""
        self._spawn()

    def _spawn(self) -> None:
        self._buffer = b""
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        header = self._read_line()
        try:
            declared = json.loads(header)
            self.input_channels = tuple(declared["inputs"])
            self.output_channels = tuple(declared["outputs"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CampaignError(f"adapter did not declare its channels: {exc}") from exc

    def _read_line(self) -> str:
        # select() works on the raw fd; buffered text streams would hide
        # already-read data from it.
        assert self._proc is not None and self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buffer:
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise CampaignError(f"adapter unresponsive after {self.timeout}s")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise CampaignError("adapter closed its output stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("utf-8")

    def reset(self) -> None:
        self.close()
        self.now = 0.0
        self._outbox = []
        self._spawn()

    def send(self, event: MessageEvent) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        self.now = max(self.now, event.time)
        record = {"time": event.time, "topic": event.channel, "data": event.payload}
        self._proc.stdin.write((json.dumps(record) + "\n").encode("utf-8"))
        self._proc.stdin.flush()

    def poll(self) -> list[MessageEvent]:
        assert self._proc is not None and self._proc.stdin is not None
        self._proc.stdin.write(b"\n")
        self._proc.stdin.flush()
        events = []
        while True:
            line = self._read_line()
            if not line.strip():
                break
            record = json.loads(line)
            events.append(
                MessageEvent(time=self.now, channel=str(record["topic"]), payload=record.get("data", {}))
            )
        return events

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except OSError:
                pass
            self._proc = None


# --- value generation ----------------------------------------------------------


@dataclass
class ValueStrategy:
    """Random payload generation for one message type, with boundary bias."""

    msg_type: MessageTypeDef
    msg_index: dict[str, MessageTypeDef] = field(default_factory=builtin_messages)
    boundaries: dict[tuple, list] = field(default_factory=dict)
    predicate: object | None = None  # generated payloads must satisfy it

    def generate(self, rng: random.Random) -> dict:
        for _ in range(200):
            payload = _generate_payload(self.msg_type, self.msg_index, rng, self.boundaries, ())
            if self.predicate is None:
                return payload
            try:
                if eval_predicate(self.predicate, payload):
                    return payload
            except Exception:
                continue
        raise SchemaError(
            f"could not generate a payload of {self.msg_type.qualified_name} "
            f"matching the trigger predicate"
        )


def _clamp(value: float, base: str) -> object:
    if base in INT_RANGES:
        lo, hi = INT_RANGES[base]
        return max(lo, min(hi, int(value)))
    return float(value)


def _generate_scalar(base: str, rng: random.Random, candidates: list | None) -> object:
    if candidates and base in NUMERIC_TYPES and rng.random() < 0.5:
        return _clamp(rng.choice(candidates), base)
    if base == "bool":
        return rng.random() < 0.5
    if base in INT_RANGES:
        lo, hi = INT_RANGES[base]
        # Small magnitudes are much more likely to be meaningful than the
        # full 64-bit range; mix both.
        if rng.random() < 0.7:
            lo, hi = max(lo, -100), min(hi, 100)
        return rng.randint(lo, hi)
    if base in FLOAT_TYPES:
        return rng.uniform(-100.0, 100.0)
    if base == "string":
        length = rng.randint(0, 16)
        return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(length))
    raise SchemaError(f"cannot generate values of builtin {base!r}")


def _generate_payload(
    msg: MessageTypeDef,
    index: dict[str, MessageTypeDef],
    rng: random.Random,
    boundaries: dict[tuple, list],
    prefix: tuple,
    in_progress: frozenset[str] = frozenset(),
) -> dict:
    if msg.qualified_name in in_progress:
        raise SchemaError(f"recursive message type {msg.qualified_name}")
    in_progress = in_progress | {msg.qualified_name}
    payload: dict = {}
    for name, ftype in msg.fields:
        path = prefix + (name,)
        candidates = boundaries.get(path)
        if ftype.is_array:
            length = ftype.array_len if ftype.array_len is not None else rng.randint(0, 8)
            if ftype.is_builtin:
                payload[name] = [_generate_scalar(ftype.base, rng, candidates) for _ in range(length)]
            else:
                nested = index.get(ftype.base)
                if nested is None:
                    raise SchemaError(f"unknown nested type {ftype.base!r}")
                payload[name] = [
                    _generate_payload(nested, index, rng, boundaries, path, in_progress)
                    for _ in range(length)
                ]
        elif ftype.is_builtin:
            payload[name] = _generate_scalar(ftype.base, rng, candidates)
        else:
            nested = index.get(ftype.base)
            if nested is None:
                raise SchemaError(f"unknown nested type {ftype.base!r}")
            payload[name] = _generate_payload(nested, index, rng, boundaries, path, in_progress)
    return payload


def generate_values(msg: MessageTypeDef, strategy: ValueStrategy | None, seed: int) -> dict:
    """Deterministic payload generation for a message type under a fixed seed."""
    rng = random.Random(seed)
    if strategy is None:
        strategy = ValueStrategy(msg_type=msg)
    return strategy.generate(rng)


def mine_boundaries(pred: object, prefix: tuple = ()) -> dict[tuple, list]:
    """Collect numeric literals next to field references: {lit-1, lit, lit+1}."""
    found: dict[tuple, list] = {}

    def adjacency(value: object) -> list:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return []
        if isinstance(value, int):
            return [value - 1, value, value + 1]
        return [value - 1.0, value, value + 1.0]

    def visit(node: object) -> None:
        if isinstance(node, PredOp):
            for item in node.items:
                visit(item)
        elif isinstance(node, Cmp):
            ref, lit = None, None
            if isinstance(node.left, FieldRef) and isinstance(node.right, Lit):
                ref, lit = node.left, node.right.value
            elif isinstance(node.right, FieldRef) and isinstance(node.left, Lit):
                ref, lit = node.right, node.left.value
            if ref is not None:
                found.setdefault(prefix + ref.path, []).extend(adjacency(lit))
        elif isinstance(node, InSet):
            if isinstance(node.item, FieldRef):
                for value in node.values:
                    found.setdefault(prefix + node.item.path, []).extend(adjacency(value))
        elif isinstance(node, InRange):
            if isinstance(node.item, FieldRef):
                for value in (node.low, node.high):
                    found.setdefault(prefix + node.item.path, []).extend(adjacency(value))

    if pred is not None:
        visit(pred)
    return {k: sorted(set(v)) for k, v in found.items() if v}


# --- schemas ---------------------------------------------------------------------


@dataclass
class Segment:
    purpose: str  # activate_scope | trigger | provoke | settle
    channel: str | None = None
    value_strategy: ValueStrategy | None = None
    count_range: tuple[int, int] = (1, 1)
    delay_range: tuple[float, float] = (0.05, 0.5)


@dataclass
class TestSchema:
    property: HplProperty
    segments: list[Segment]


@dataclass
class CampaignBudget:
    max_traces: int = 100
    max_events_per_trace: int = 256
    seed: int = 0


@dataclass
class Counterexample:
    property: HplProperty
    inputs: Trace
    observed: Trace
    verdict: Verdict
    shrunk: bool = False
    generation_seed: int = 0
    traces_run: int = 0


def _strategy_for(
    channel: str,
    graph: RosGraph | None,
    msg_index: dict[str, MessageTypeDef],
    prop: HplProperty,
    predicate: object | None,
) -> ValueStrategy:
    msg_type_name = None
    if graph is not None:
        topic = graph.topic_by_name(channel)
        if topic is not None:
            msg_type_name = topic.msg_type
    if msg_type_name is None:
        raise SchemaError(f"channel {channel} has no known message type")
    msg = msg_index.get(msg_type_name)
    if msg is None:
        raise SchemaError(f"message type {msg_type_name} is not defined")
    boundaries: dict[tuple, list] = {}
    for event in (prop.scope.activator, prop.scope.terminator, prop.pattern.event_a, prop.pattern.event_b):
        if event is not None and event.channel == channel:
            for path, values in mine_boundaries(event.predicate).items():
                boundaries.setdefault(path, []).extend(values)
    boundaries = {k: sorted(set(v)) for k, v in boundaries.items()}
    return ValueStrategy(msg_type=msg, msg_index=msg_index, boundaries=boundaries, predicate=predicate)


def derive_schema(
    prop: HplProperty,
    graph: RosGraph | None,
    msg_index: dict[str, MessageTypeDef] | None = None,
    input_channels: tuple[str, ...] | None = None,
) -> TestSchema:
    """Turn a property into a stimulation strategy against the SUT's inputs.

    Inputs default to the topics some node subscribes to in the graph.
    Trigger and activator channels must be inputs; monitored behaviour
    channels need not be.
    """
    msg_index = msg_index if msg_index is not None else builtin_messages()
    if input_channels is None:
        if graph is None:
            raise SchemaError("no graph and no explicit input channels")
        input_channels = tuple(
            sorted({l.resource for l in graph.links if l.role == "subscriber"})
        )
    segments: list[Segment] = []

    def input_strategy(event: Event, enforce: bool) -> ValueStrategy:
        if event.channel not in input_channels:
            raise SchemaError(f"cannot stimulate {event.channel}: not an input channel")
        return _strategy_for(
            event.channel, graph, msg_index, prop, event.predicate if enforce else None
        )

    if prop.scope.kind in ("after", "after_until"):
        segments.append(
            Segment(
                purpose="activate_scope",
                channel=prop.scope.activator.channel,
                value_strategy=input_strategy(prop.scope.activator, enforce=True),
                count_range=(1, 1),
            )
        )

    pattern = prop.pattern
    if pattern.kind in ("response", "requirement"):
        # Other inputs may put the system into a state that drops the
        # response; provoke them before triggering. Untyped channels cannot
        # be generated for and are left out.
        others = [c for c in input_channels if c != pattern.event_a.channel]
        for channel in others:
            try:
                strategy = _strategy_for(channel, graph, msg_index, prop, None)
            except SchemaError:
                continue
            segments.append(
                Segment(
                    purpose="provoke",
                    channel=channel,
                    value_strategy=strategy,
                    count_range=(0, 2),
                )
            )
        segments.append(
            Segment(
                purpose="trigger",
                channel=pattern.event_a.channel,
                value_strategy=input_strategy(pattern.event_a, enforce=True),
                count_range=(1, 3),
            )
        )
    else:
        # Absence/prevention: randomize broadly over every input.
        for channel in input_channels:
            try:
                strategy = _strategy_for(channel, graph, msg_index, prop, None)
            except SchemaError:
                continue
            segments.append(
                Segment(
                    purpose="provoke",
                    channel=channel,
                    value_strategy=strategy,
                    count_range=(0, 3),
                )
            )

    settle_time = max(1.0, 2.0 * float(pattern.deadline)) if pattern.deadline else 1.0
    segments.append(Segment(purpose="settle", delay_range=(settle_time, settle_time)))
    return TestSchema(property=prop, segments=segments)


# --- campaigns ---------------------------------------------------------------------


def _drive_inputs(
    adapter: SutAdapter,
    inputs: list[MessageEvent],
    end_time: float,
    max_events: int,
) -> Trace:
    """Replay input events on the virtual clock, interleaving polls."""
    adapter.reset()
    observed: list[MessageEvent] = []
    now = 0.0
    for event in inputs:
        if event.time > now:
            adapter.advance_clock(event.time - now)
            now = event.time
        adapter.send(event)
        observed.append(event)
        observed.extend(adapter.poll())
        if len(observed) > max_events:
            raise CampaignError("adapter exceeded the per-trace event budget")
    if end_time > now:
        adapter.advance_clock(end_time - now)
    observed.extend(adapter.poll())
    if len(observed) > max_events:
        raise CampaignError("adapter exceeded the per-trace event budget")
    return Trace(events=observed, end_time=end_time)


def _materialize(schema: TestSchema, rng: random.Random) -> tuple[list[MessageEvent], float]:
    inputs: list[MessageEvent] = []
    clock = 0.0
    settle = 1.0
    for segment in schema.segments:
        if segment.purpose == "settle":
            settle = segment.delay_range[0]
            continue
        count = rng.randint(*segment.count_range)
        for _ in range(count):
            clock += rng.uniform(*segment.delay_range)
            payload = segment.value_strategy.generate(rng) if segment.value_strategy else {}
            inputs.append(MessageEvent(time=round(clock, 6), channel=segment.channel, payload=payload))
    return inputs, round(clock + settle, 6)


def _falsified(
    properties: list[HplProperty], trace: Trace
) -> tuple[HplProperty, Verdict] | None:
    for prop, verdict in check_trace(properties, trace):
        if verdict.value is VerdictValue.FALSE:
            return prop, verdict
    return None


def run_campaign(
    schema: TestSchema,
    adapter: SutAdapter,
    monitors: list[HplProperty] | None = None,
    budget: CampaignBudget | None = None,
) -> Counterexample | None:
    """Generate traces until the property is falsified or the budget runs out."""
    budget = budget if budget is not None else CampaignBudget()
    properties = monitors if monitors is not None else [schema.property]
    for channel in {s.channel for s in schema.segments if s.channel is not None}:
        if channel not in adapter.input_channels:
            raise CampaignError(f"adapter does not accept input channel {channel}")
    for trace_index in range(budget.max_traces):
        rng = random.Random(f"{budget.seed}:{trace_index}")
        inputs, end_time = _materialize(schema, rng)
        observed = _drive_inputs(adapter, inputs, end_time, budget.max_events_per_trace)
        hit = _falsified(properties, observed)
        if hit is None:
            continue
        prop, verdict = hit
        cex = Counterexample(
            property=prop,
            inputs=Trace(events=inputs, end_time=end_time),
            observed=observed,
            verdict=verdict,
            shrunk=False,
            generation_seed=budget.seed,
            traces_run=trace_index + 1,
        )
        return shrink(cex, adapter, properties, budget)
    return None


# --- shrinking -----------------------------------------------------------------------


def _replay_falsifies(
    inputs: list[MessageEvent],
    end_time: float,
    adapter: SutAdapter,
    properties: list[HplProperty],
    max_events: int,
) -> tuple[bool, Trace]:
    observed = _drive_inputs(adapter, inputs, end_time, max_events)
    return _falsified(properties, observed) is not None, observed


def _shrink_int(value: int, still_fails) -> int:
    if value == 0:
        return 0
    sign = 1 if value > 0 else -1
    if still_fails(0):
        return 0
    lo, hi = 0, abs(value)  # lo known passing, hi known failing
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if still_fails(sign * mid):
            hi = mid
        else:
            lo = mid
    return sign * hi


def _shrink_float(value: float, still_fails) -> float:
    if value == 0.0:
        return 0.0
    if still_fails(0.0):
        return 0.0
    rounded = float(int(value))
    best = value
    if rounded != value and still_fails(rounded):
        best = rounded
    for _ in range(20):
        candidate = best / 2.0
        if abs(candidate) < 1e-9 or not still_fails(candidate):
            break
        best = candidate
    return best


def _payload_paths(payload: dict, prefix: tuple = ()) -> list[tuple]:
    paths = []
    for key, value in payload.items():
        path = prefix + (key,)
        if isinstance(value, dict):
            paths.extend(_payload_paths(value, path))
        elif isinstance(value, list):
            paths.append(path)
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    paths.extend(_payload_paths(item, path + (i,)))
                else:
                    paths.append(path + (i,))
        else:
            paths.append(path)
    return paths


def _get_path(payload, path):
    value = payload
    for step in path:
        value = value[step]
    return value


def _with_path(payload, path, new_value):
    import copy

    out = copy.deepcopy(payload)
    target = out
    for step in path[:-1]:
        target = target[step]
    target[path[-1]] = new_value
    return out


def shrink(
    cex: Counterexample,
    adapter: SutAdapter,
    monitors: list[HplProperty] | None = None,
    budget: CampaignBudget | None = None,
) -> Counterexample:
    """Greedy minimization: delete events, pull numerics toward 0, trim sequences.

    Every accepted step re-runs the inputs through the adapter and checks the
    property still fails; the result is 1-minimal under single-event deletion.
    A non-replayable counterexample is returned unchanged with shrunk=False.
    """
    budget = budget if budget is not None else CampaignBudget()
    properties = monitors if monitors is not None else [cex.property]
    end_time = cex.inputs.end_time if cex.inputs.end_time is not None else 0.0
    inputs = list(cex.inputs.events)

    ok, observed = _replay_falsifies(inputs, end_time, adapter, properties, budget.max_events_per_trace)
    if not ok:
        return replace(cex, shrunk=False)

    changed = True
    while changed:
        changed = False
        # Pass 1: drop input events one at a time.
        i = 0
        while i < len(inputs):
            candidate = inputs[:i] + inputs[i + 1 :]
            ok, obs = _replay_falsifies(candidate, end_time, adapter, properties, budget.max_events_per_trace)
            if ok:
                inputs = candidate
                observed = obs
                changed = True
            else:
                i += 1
        # Pass 2: move numeric fields toward zero.
        for idx, event in enumerate(inputs):
            for path in _payload_paths(event.payload):
                value = _get_path(event.payload, path)
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    continue

                def try_value(candidate_value) -> bool:
                    trial = inputs[:idx] + [
                        MessageEvent(
                            time=event.time,
                            channel=event.channel,
                            payload=_with_path(event.payload, path, candidate_value),
                        )
                    ] + inputs[idx + 1 :]
                    ok_trial, _ = _replay_falsifies(
                        trial, end_time, adapter, properties, budget.max_events_per_trace
                    )
                    return ok_trial

                if isinstance(value, int):
                    best = _shrink_int(value, try_value)
                else:
                    best = _shrink_float(value, try_value)
                if best != value:
                    inputs = inputs[:idx] + [
                        MessageEvent(
                            time=event.time,
                            channel=event.channel,
                            payload=_with_path(event.payload, path, best),
                        )
                    ] + inputs[idx + 1 :]
                    event = inputs[idx]
                    changed = True
        # Pass 3: shorten strings and arrays.
        for idx, event in enumerate(inputs):
            for path in _payload_paths(event.payload):
                value = _get_path(event.payload, path)
                if not isinstance(value, (str, list)):
                    continue
                while len(value) > 0:
                    shorter = value[: len(value) // 2] if len(value) > 1 else value[:0]
                    trial = inputs[:idx] + [
                        MessageEvent(
                            time=event.time,
                            channel=event.channel,
                            payload=_with_path(event.payload, path, shorter),
                        )
                    ] + inputs[idx + 1 :]
                    ok_trial, _ = _replay_falsifies(
                        trial, end_time, adapter, properties, budget.max_events_per_trace
                    )
                    if not ok_trial:
                        break
                    inputs = trial
                    event = inputs[idx]
                    value = shorter
                    changed = True

    ok, observed = _replay_falsifies(inputs, end_time, adapter, properties, budget.max_events_per_trace)
    assert ok, "shrinking must preserve falsification"
    final_hit = _falsified(properties, observed)
    assert final_hit is not None
    return Counterexample(
        property=cex.property,
        inputs=Trace(events=inputs, end_time=end_time),
        observed=observed,
        verdict=final_hit[1],
        shrunk=True,
        generation_seed=cex.generation_seed,
        traces_run=cex.traces_run,
    )
