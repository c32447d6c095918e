import random

import pytest

from randgen import random_property, random_trace
from rospect.hpl import parse_property
from rospect.monitor import (
    MessageEvent,
    Trace,
    TraceError,
    VerdictValue,
    check_trace,
    compile_monitor,
    dump_trace,
    load_trace,
    oracle_verdict,
)
from rospect.msgs import builtin_messages, parse_msg_text

BUMPER_BOUNDS = "globally: no /bumper {data < 0 or data > 7}"
BUMPER_CAUSES = "globally: /bumper causes /stop_cmd"


def _event(time, channel, **payload):
    return MessageEvent(time=time, channel=channel, payload=payload or {})


def _run(prop_text, events, end_time=None):
    prop = parse_property(prop_text)
    automaton = compile_monitor(prop)
    for event in events:
        automaton.feed(event)
    if end_time is not None:
        automaton.finish(end_time)
    return automaton.verdict


class TestAbsence:
    def test_in_range_trace_true(self):
        """All bumper values within bounds: TRUE on the closed trace."""
        verdict = _run(BUMPER_BOUNDS, [_event(1.0, "/bumper", data=3)], end_time=1.0)
        assert verdict.value is VerdictValue.TRUE

    def test_out_of_range_false_with_witness(self):
        """data=9 violates the upper bound; witness points at event 0."""
        verdict = _run(BUMPER_BOUNDS, [_event(2.0, "/bumper", data=9)], end_time=2.0)
        assert verdict.value is VerdictValue.FALSE
        assert verdict.witness.event_indices == (0,)

    def test_open_trace_inconclusive(self):
        """No closure marker: a safe prefix stays inconclusive."""
        verdict = _run(BUMPER_BOUNDS, [_event(1.0, "/bumper", data=3)])
        assert verdict.value is VerdictValue.INCONCLUSIVE


class TestResponse:
    def test_discharged_true(self):
        verdict = _run(
            BUMPER_CAUSES,
            [_event(1.0, "/bumper", data=1), _event(2.0, "/stop_cmd")],
            end_time=2.0,
        )
        assert verdict.value is VerdictValue.TRUE

    def test_pending_without_deadline_inconclusive(self):
        verdict = _run(BUMPER_CAUSES, [_event(1.0, "/bumper", data=1)], end_time=1.0)
        assert verdict.value is VerdictValue.INCONCLUSIVE

    def test_deadline_expiry_false(self):
        """With a 1 s deadline, closing at 2.5 s expires the obligation from 1.0 s."""
        verdict = _run(
            BUMPER_CAUSES + " within 1 s",
            [_event(1.0, "/bumper", data=1)],
            end_time=2.5,
        )
        assert verdict.value is VerdictValue.FALSE

    def test_expiry_detected_mid_trace(self):
        """A later unrelated event reveals the expired window before closure."""
        prop = parse_property(BUMPER_CAUSES + " within 1 s")
        automaton = compile_monitor(prop)
        automaton.feed(_event(1.0, "/bumper", data=1))
        verdict = automaton.feed(_event(2.5, "/laser", data=0))
        assert verdict.value is VerdictValue.FALSE

    def test_same_timestamp_later_index_discharges(self):
        """B at the same timestamp but a later index discharges the obligation."""
        verdict = _run(
            BUMPER_CAUSES,
            [_event(1.0, "/bumper", data=1), _event(1.0, "/stop_cmd")],
            end_time=1.0,
        )
        assert verdict.value is VerdictValue.TRUE

    def test_b_within_window_boundary(self):
        """A response exactly at the deadline boundary still counts."""
        verdict = _run(
            BUMPER_CAUSES + " within 1 s",
            [_event(1.0, "/bumper", data=1), _event(2.0, "/stop_cmd")],
            end_time=3.0,
        )
        assert verdict.value is VerdictValue.TRUE

    def test_terminator_with_pending_obligation_false(self):
        """An until-interval closing with an undischarged obligation is FALSE."""
        verdict = _run(
            "until /off: /req causes /ack",
            [_event(1.0, "/req"), _event(2.0, "/off")],
            end_time=2.0,
        )
        assert verdict.value is VerdictValue.FALSE


class TestPrevention:
    def test_window_expiry_not_falsified(self):
        """B arriving after the forbiddance window does not falsify."""
        verdict = _run(
            "globally: /a forbids /b within 1 s",
            [_event(0.0, "/a"), _event(1.5, "/b")],
            end_time=2.0,
        )
        assert verdict.value is VerdictValue.TRUE

    def test_b_inside_window_false(self):
        verdict = _run(
            "globally: /a forbids /b within 1 s",
            [_event(0.0, "/a"), _event(0.5, "/b")],
            end_time=1.0,
        )
        assert verdict.value is VerdictValue.FALSE

    def test_no_deadline_any_later_b_false(self):
        verdict = _run(
            "globally: /a forbids /b",
            [_event(0.0, "/a"), _event(9.0, "/b")],
            end_time=9.0,
        )
        assert verdict.value is VerdictValue.FALSE


class TestRequirement:
    def test_prior_b_discharges(self):
        verdict = _run(
            "globally: /a requires /b",
            [_event(0.0, "/b"), _event(1.0, "/a")],
            end_time=1.0,
        )
        assert verdict.value is VerdictValue.TRUE

    def test_a_without_prior_b_false(self):
        verdict = _run("globally: /a requires /b", [_event(1.0, "/a")], end_time=1.0)
        assert verdict.value is VerdictValue.FALSE

    def test_lookback_window(self):
        """The prerequisite must fall inside the look-back window."""
        verdict = _run(
            "globally: /a requires /b within 1 s",
            [_event(0.0, "/b"), _event(5.0, "/a")],
            end_time=5.0,
        )
        assert verdict.value is VerdictValue.FALSE

    def test_same_event_b_does_not_satisfy_own_a(self):
        """An event matching both roles pairs only with strictly earlier ones."""
        verdict = _run(
            "globally: /x {data > 0} requires /x",
            [_event(0.0, "/x", data=2)],
            end_time=0.0,
        )
        assert verdict.value is VerdictValue.FALSE


class TestExistence:
    def test_match_latches_true(self):
        verdict = _run("globally: some /x", [_event(1.0, "/x")])
        assert verdict.value is VerdictValue.TRUE

    def test_empty_closed_trace_false(self):
        """A closed trace without the required event fails the test."""
        verdict = _run("globally: some /x", [], end_time=0.0)
        assert verdict.value is VerdictValue.FALSE

    def test_empty_open_trace_inconclusive(self):
        verdict = _run("globally: some /x", [])
        assert verdict.value is VerdictValue.INCONCLUSIVE

    def test_never_activated_scope_vacuous_true(self):
        verdict = _run("after /go: some /x", [_event(1.0, "/y")], end_time=1.0)
        assert verdict.value is VerdictValue.TRUE

    def test_interval_closed_without_match_false(self):
        verdict = _run(
            "until /off: some /x", [_event(1.0, "/off")], end_time=1.0
        )
        assert verdict.value is VerdictValue.FALSE


class TestScopes:
    def test_activator_event_not_eligible(self):
        """The activating event itself cannot match the pattern."""
        verdict = _run("after /x: some /x", [_event(1.0, "/x")], end_time=1.0)
        assert verdict.value is VerdictValue.FALSE

    def test_terminator_event_outside_interval(self):
        """A terminator that also matches the forbidden event does not falsify."""
        verdict = _run("until /x: no /x", [_event(1.0, "/x")], end_time=1.0)
        assert verdict.value is VerdictValue.TRUE

    def test_after_until_repeats(self):
        verdict = _run(
            "after /on until /off: no /bad",
            [
                _event(0.0, "/on"),
                _event(1.0, "/off"),
                _event(2.0, "/bad"),  # between intervals: ignored
                _event(3.0, "/on"),
                _event(4.0, "/bad"),  # inside the second interval
            ],
            end_time=4.0,
        )
        assert verdict.value is VerdictValue.FALSE
        assert verdict.witness.event_indices == (4,)

    def test_events_outside_intervals_do_not_affect_verdict(self):
        base = [_event(1.0, "/on"), _event(2.0, "/ok")]
        with_noise = [_event(0.5, "/bad")] + base  # before activation
        a = _run("after /on: no /bad", base, end_time=2.0)
        b = _run("after /on: no /bad", with_noise, end_time=2.0)
        assert a.value == b.value == VerdictValue.TRUE


class TestFeedContract:
    def test_latch_is_stable(self):
        prop = parse_property(BUMPER_BOUNDS)
        automaton = compile_monitor(prop)
        automaton.feed(_event(1.0, "/bumper", data=9))
        latched = automaton.verdict
        assert latched.value is VerdictValue.FALSE
        for t in (2.0, 3.0):
            assert automaton.feed(_event(t, "/bumper", data=1)).value is VerdictValue.FALSE
        assert automaton.verdict.witness == latched.witness

    def test_out_of_order_event_rejected(self):
        automaton = compile_monitor(parse_property(BUMPER_BOUNDS))
        automaton.feed(_event(2.0, "/bumper", data=1))
        with pytest.raises(TraceError, match="out-of-order"):
            automaton.feed(_event(1.0, "/bumper", data=1))

    def test_finish_idempotent(self):
        automaton = compile_monitor(parse_property("globally: some /x"))
        first = automaton.finish(0.0)
        assert automaton.finish(0.0) == first


class TestCheckTrace:
    def test_independent_verdicts(self):
        props = [
            parse_property(BUMPER_BOUNDS),
            parse_property(BUMPER_CAUSES),
            parse_property("globally: some /never"),
        ]
        trace = Trace(
            events=[_event(1.0, "/bumper", data=9), _event(2.0, "/stop_cmd")],
            end_time=2.0,
        )
        values = [v.value for _, v in check_trace(props, trace)]
        assert values == [VerdictValue.FALSE, VerdictValue.TRUE, VerdictValue.FALSE]

    def test_nonconforming_payload_fatal_with_index(self):
        index = builtin_messages()
        bumper = parse_msg_text("int8 data", "fictibot_msgs/BumperState")
        index[bumper.qualified_name] = bumper
        trace = Trace(
            events=[_event(1.0, "/bumper", data=3), _event(2.0, "/bumper", data=4000)],
            end_time=2.0,
        )
        with pytest.raises(TraceError, match="event 1"):
            check_trace(
                [parse_property(BUMPER_BOUNDS)],
                trace,
                channel_types={"/bumper": bumper},
                msg_index=index,
            )


class TestOracle:
    def test_agreement_on_worked_examples(self):
        cases = [
            (BUMPER_BOUNDS, [_event(1.0, "/bumper", data=3)], 1.0),
            (BUMPER_BOUNDS, [_event(2.0, "/bumper", data=9)], 2.0),
            (BUMPER_CAUSES, [_event(1.0, "/bumper", data=1), _event(2.0, "/stop_cmd")], 2.0),
            (BUMPER_CAUSES, [_event(1.0, "/bumper", data=1)], 1.0),
        ]
        for text, events, end in cases:
            prop = parse_property(text)
            trace = Trace(events=events, end_time=end)
            assert oracle_verdict(prop, trace).value == check_trace([prop], trace)[0][1].value

    def test_empty_closed_existence_false_both_sides(self):
        prop = parse_property("globally: some /x")
        closed = Trace(events=[], end_time=0.0)
        assert oracle_verdict(prop, closed).value is VerdictValue.FALSE
        opened = Trace(events=[], end_time=None)
        assert oracle_verdict(prop, opened).value is VerdictValue.INCONCLUSIVE

    def test_differential_seeded(self):
        """Randomized differential: automaton verdict equals the oracle's on
        closed and open variants of every generated trace."""
        rng = random.Random(424242)
        mismatches = []
        for i in range(400):
            prop = random_property(rng)
            trace = random_trace(rng)
            expected = oracle_verdict(prop, trace)
            actual = check_trace([prop], trace)[0][1]
            if expected.value != actual.value:
                mismatches.append((i, str(prop), trace, expected.value, actual.value))
            open_trace = Trace(events=trace.events, end_time=None)
            expected_open = oracle_verdict(prop, open_trace)
            automaton = compile_monitor(prop)
            for event in open_trace.events:
                automaton.feed(event)
            if expected_open.value != automaton.verdict.value:
                mismatches.append(
                    (i, str(prop), open_trace, expected_open.value, automaton.verdict.value)
                )
        assert not mismatches, mismatches[:3]


class TestTraceIO:
    def test_scalar_shorthand(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text('{"time": 1.0, "topic": "/bumper", "data": 9}\n')
        trace = load_trace(path)
        assert trace.events[0].payload == {"data": 9}
        assert trace.end_time == 1.0

    def test_round_trip(self, tmp_path):
        trace = Trace(
            events=[_event(1.0, "/bumper", data=3), _event(2.0, "/stop_cmd")],
            end_time=2.0,
        )
        path = tmp_path / "t.jsonl"
        dump_trace(trace, path)
        again = load_trace(path)
        assert again.events == trace.events

    def test_bad_record_reports_line(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text('{"time": 1.0, "topic": "/a", "data": 1}\nnot json\n')
        with pytest.raises(TraceError, match=":2"):
            load_trace(path)

    def test_out_of_order_rejected(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(
            '{"time": 2.0, "topic": "/a", "data": 1}\n{"time": 1.0, "topic": "/a", "data": 1}\n'
        )
        with pytest.raises(TraceError):
            load_trace(path)
