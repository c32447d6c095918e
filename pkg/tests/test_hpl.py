from fractions import Fraction

import pytest

from rospect.hpl import (
    Cmp,
    HplError,
    PredOp,
    load_properties,
    parse_property,
    typecheck_property,
)
from rospect.issues import Severity
from rospect.msgs import builtin_messages, parse_msg_text

BUMPER_BOUNDS = "globally: no /bumper {data < 0 or data > 7}"
BUMPER_CAUSES = "globally: /bumper causes /stop_cmd"


class TestParsing:
    def test_bumper_bounds(self):
        prop = parse_property(BUMPER_BOUNDS)
        assert prop.scope.kind == "globally"
        assert prop.pattern.kind == "absence"
        assert prop.pattern.event_a.channel == "/bumper"
        pred = prop.pattern.event_a.predicate
        assert isinstance(pred, PredOp) and pred.op == "or"
        assert all(isinstance(side, Cmp) for side in pred.items)

    def test_bumper_causes(self):
        prop = parse_property(BUMPER_CAUSES)
        assert prop.pattern.kind == "response"
        assert prop.pattern.event_a.channel == "/bumper"
        assert prop.pattern.event_b.channel == "/stop_cmd"
        assert prop.pattern.event_a.predicate is None
        assert prop.pattern.deadline is None

    def test_deadline_illegal_on_absence(self):
        with pytest.raises(HplError, match="deadline"):
            parse_property("after /enable until /disable: no /cmd {v > 1.0} within 5 s")

    def test_after_until_prevention(self):
        prop = parse_property("after /enable until /disable: /cmd {v > 1.0} forbids /crash")
        assert prop.scope.kind == "after_until"
        assert prop.scope.activator.channel == "/enable"
        assert prop.scope.terminator.channel == "/disable"
        assert prop.pattern.kind == "prevention"

    @pytest.mark.parametrize(
        "text,kind",
        [
            ("globally: some /heartbeat", "existence"),
            ("until /shutdown: no /error", "absence"),
            ("after /boot: /ping causes /pong within 500 ms", "response"),
            ("globally: /move requires /enable within 2 s", "requirement"),
        ],
    )
    def test_pattern_inventory(self, text, kind):
        prop = parse_property(text)
        assert prop.pattern.kind == kind

    def test_time_units_normalized(self):
        prop = parse_property("globally: /a causes /b within 500 ms")
        assert prop.pattern.deadline == Fraction(1, 2)
        prop = parse_property("globally: /a causes /b within 2 s")
        assert prop.pattern.deadline == Fraction(2)

    def test_membership_predicates(self):
        prop = parse_property("globally: no /bumper {data in [0, 7] implies not (data = 3)}")
        assert prop.pattern.event_a.predicate is not None
        prop = parse_property('globally: no /mode {name in {"idle", "stop"}}')
        assert prop.pattern.event_a.predicate is not None

    def test_field_paths(self):
        prop = parse_property("globally: no /wheel {encoders[2] > 100 and status.ok = false}")
        assert prop.pattern.event_a.predicate is not None

    def test_syntax_error_with_position(self):
        with pytest.raises(HplError, match="column"):
            parse_property("globally: no bumper")

    def test_round_trip(self):
        texts = [
            BUMPER_BOUNDS,
            BUMPER_CAUSES,
            "after /enable until /disable: /cmd {v > 1.0} forbids /crash",
            "after /boot: /ping causes /pong within 500 ms",
            "until /off: some /ready",
            "globally: /move requires /enable within 2 s",
            'globally: no /mode {name in {"idle", "stop"} or level in [1, 3]}',
        ]
        for text in texts:
            prop = parse_property(text)
            again = parse_property(str(prop))
            assert (again.scope, again.pattern) == (prop.scope, prop.pattern)

    def test_single_parse_is_deterministic(self):
        a = parse_property(BUMPER_BOUNDS)
        b = parse_property(BUMPER_BOUNDS)
        assert (a.scope, a.pattern) == (b.scope, b.pattern)


def test_load_properties_file(fixtures_dir):
    props = load_properties(str(fixtures_dir / "fictibot.hpl"))
    assert len(props) == 2
    idents = [ident for ident, _ in props]
    assert idents[0].endswith("fictibot.hpl:2")
    assert idents[1].endswith("fictibot.hpl:3")


class TestTypecheck:
    def _index(self):
        index = builtin_messages()
        bumper = parse_msg_text("int8 data", "fictibot_msgs/BumperState")
        index[bumper.qualified_name] = bumper
        return index

    def test_bumper_predicate_well_typed(self, fictibot_graph, fictibot_state):
        prop = parse_property(BUMPER_BOUNDS)
        issues = typecheck_property(prop, fictibot_graph, fictibot_state.msg_index)
        assert issues == []

    def test_unknown_field_is_error(self, fictibot_graph, fictibot_state):
        prop = parse_property("globally: no /bumper {speed > 1}")
        issues = typecheck_property(prop, fictibot_graph, fictibot_state.msg_index)
        assert any(i.severity is Severity.ERROR and "speed" in i.message for i in issues)

    def test_absent_channel_only_warns(self, fictibot_graph, fictibot_state):
        prop = parse_property("globally: no /phantom {x = 1}")
        issues = typecheck_property(prop, fictibot_graph, fictibot_state.msg_index)
        assert issues
        assert all(i.severity is Severity.WARNING for i in issues)

    def test_type_compatibility(self, fictibot_graph, fictibot_state):
        prop = parse_property('globally: no /bumper {data = "hot"}')
        issues = typecheck_property(prop, fictibot_graph, fictibot_state.msg_index)
        assert any(i.severity is Severity.ERROR for i in issues)

    def test_typechecked_property_monitors_safely(self, fictibot_graph, fictibot_state):
        # Type soundness: a clean typecheck means monitoring conforming
        # payloads raises no field or type errors.
        from rospect.monitor import MessageEvent, Trace, check_trace

        prop = parse_property(BUMPER_BOUNDS)
        assert typecheck_property(prop, fictibot_graph, fictibot_state.msg_index) == []
        trace = Trace(
            events=[MessageEvent(time=float(i), channel="/bumper", payload={"data": i})
                    for i in range(8)],
            end_time=10.0,
        )
        results = check_trace([prop], trace)
        assert len(results) == 1
