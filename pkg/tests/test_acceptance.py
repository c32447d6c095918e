"""Acceptance suite: one test per release criterion, printed pass/fail per line.

Each test prints "ACCEPT <n> ok: <summary>" once its assertions hold, so a
verbose run doubles as the acceptance report.
"""

import random
import time
from pathlib import Path

from randgen import random_property, random_trace
from rospect.cli import main
from rospect.graph import ChannelResource, Link, NodeInstance, RosGraph
from rospect.hpl import parse_property
from rospect.monitor import (
    MessageEvent,
    Trace,
    VerdictValue,
    check_trace,
    compile_monitor,
    oracle_verdict,
)
from rospect.msgs import builtin_messages, parse_msg_text
from rospect.pipeline import PipelineOptions, run_analysis
from rospect.query import eval_query, parse_query
from rospect.report import export_json
from rospect.testgen import (
    CampaignBudget,
    SutAdapter,
    derive_schema,
    run_campaign,
)

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden" / "multiplex_graph.json"


def _accept(n, summary):
    print(f"ACCEPT {n} ok: {summary}")


def _run_fictibot(project="fictibot.yaml", **kwargs):
    return run_analysis(
        PipelineOptions(
            project_file=FIXTURES / project,
            workspace=FIXTURES / "fictibot_ws",
            **kwargs,
        )
    )


class TestCriterion1Extraction:
    def test_graph_matches_frozen_golden_and_is_deterministic(self, tmp_path):
        started = time.monotonic()
        state_a = _run_fictibot()
        export_json(state_a.report, tmp_path / "a")
        state_b = _run_fictibot()
        export_json(state_b.report, tmp_path / "b")
        elapsed = time.monotonic() - started

        golden = GOLDEN.read_bytes()
        first = (tmp_path / "a" / "graphs" / "multiplex.json").read_bytes()
        second = (tmp_path / "b" / "graphs" / "multiplex.json").read_bytes()
        assert first == golden, "graph export deviates from the frozen golden"
        assert first == second, "two runs over identical inputs must be byte-identical"
        assert (tmp_path / "a" / "report.json").read_bytes() == (
            tmp_path / "b" / "report.json"
        ).read_bytes()
        assert elapsed < 5.0, f"pipeline took {elapsed:.2f}s, budget is 5s"
        _accept(1, f"golden byte-match, double-run identical, {elapsed:.2f}s < 5s")


class TestCriterion2Hints:
    def test_without_hint_unresolved_with_hint_exact(self):
        bare = _run_fictibot("fictibot_nohints.yaml")
        graph = bare.graphs["multiplex"]
        placeholder = [
            l for l in graph.links if l.node == "/ficticontrol" and l.role == "publisher"
            and l.resource.startswith("?")
        ]
        assert placeholder, "unhinted publisher must appear as an unresolved placeholder"
        r6 = [
            i for i in bare.report.issues
            if ":R6:" in i.id and "?/ficticontrol/advertise/0" in i.scope
        ]
        assert r6, "the unresolved publisher must be reported by R6"
        assert not any(
            l.resource == "/controller_cmd" and l.role == "publisher" for l in graph.links
        )

        hinted = _run_fictibot()
        graph = hinted.graphs["multiplex"]
        links = [
            l for l in graph.links
            if l.node == "/ficticontrol" and l.role == "publisher"
            and l.resource == "/controller_cmd"
        ]
        assert len(links) == 1
        assert links[0].msg_type == "std_msgs/Float64"
        assert links[0].provenance == "hint"
        assert not any(l.resource.startswith("?") for l in graph.links)
        assert not any(
            ":R6:" in i.id and "/ficticontrol" in i.scope for i in hinted.report.issues
        )
        _accept(2, "R6 without hint; /controller_cmd std_msgs/Float64 provenance=hint with it")


class TestCriterion3ConditionalQuery:
    SEEDED = {
        ("/fictibase", "publisher", "/diagnostics",
         "fictibot_drivers/src/fictibot_driver.cpp", 14),
        ("/ficticontrol", "publisher", "/controller_state",
         "fictibot_controller/scripts/ficticontrol.py", 18),
        ("/fictimux", "subscriber", "/high_cmd",
         "fictibot_multiplex/src/fictibot_multiplex.cpp", 12),
    }

    def test_query_returns_exactly_seeded_sites(self):
        state = _run_fictibot()
        graph = state.graphs["multiplex"]
        query = parse_query(
            "nodes/publishers[self.conditions] | nodes/subscribers[self.conditions]"
        )
        base = str((FIXTURES / "fictibot_ws").resolve())
        found = set()
        for match in eval_query(query, graph):
            link = match.entity
            path, line = link.loc
            if path.startswith(base):
                path = path[len(base) + 1 :]
            found.add((link.node, link.role, link.resource, path, line))
        assert found == self.SEEDED
        _accept(3, f"conditional pub/sub query = {len(found)} seeded sites, set equality")


class TestCriterion4TypeRule:
    def test_mismatch_yields_exactly_one_r1(self):
        mismatched = run_analysis(
            PipelineOptions(
                project_file=FIXTURES / "mismatch.yaml",
                workspace=FIXTURES / "mismatch_ws",
                configurations=["pair"],
            )
        )
        r1 = [i for i in mismatched.report.issues if ":R1:" in i.id]
        assert len(r1) == 1
        assert r1[0].scope == "entity:/state"
        assert "/sender" in r1[0].message and "/receiver" in r1[0].message
        assert "std_msgs/Int32" in r1[0].message and "std_msgs/Float64" in r1[0].message

        fixed = run_analysis(
            PipelineOptions(
                project_file=FIXTURES / "mismatch.yaml",
                workspace=FIXTURES / "mismatch_ws",
                configurations=["pair_fixed"],
            )
        )
        assert not any(":R1:" in i.id for i in fixed.report.issues)
        _accept(4, "one R1 naming both endpoints on mismatch; zero R1 once fixed")


class TestCriterion5Differential:
    def test_automaton_equals_oracle(self):
        started = time.monotonic()
        rng = random.Random(20250808)
        properties = []
        # Full grid: every pattern in every scope, binary patterns with and
        # without deadlines, plus extra random draws.
        for pattern in ("absence", "existence", "response", "prevention", "requirement"):
            for scope in ("globally", "after", "until", "after_until"):
                properties.append(random_property(rng, pattern=pattern, scope=scope))
                if pattern in ("response", "prevention", "requirement"):
                    properties.append(
                        random_property(rng, pattern=pattern, scope=scope, deadline=True)
                    )
        assert len(properties) >= 20
        traces = [random_trace(rng) for _ in range(1000)]
        checked = 0
        for prop in properties:
            for trace in traces:
                expected = oracle_verdict(prop, trace)
                actual = check_trace([prop], trace)[0][1]
                assert expected.value == actual.value, (
                    f"divergence on {prop} over {trace.events} (closed at "
                    f"{trace.end_time}): oracle {expected.value} vs automaton {actual.value}"
                )
                checked += 1
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"differential took {elapsed:.1f}s, budget is 60s"
        _accept(5, f"{checked} automaton/oracle agreements over {len(properties)} properties, "
                   f"{elapsed:.1f}s < 60s")


class TestCriterion6PaperProperties:
    def test_bumper_bounds_verdicts(self):
        bounds = parse_property("globally: no /bumper {data < 0 or data > 7}")
        violating = Trace(
            events=[MessageEvent(2.0, "/bumper", {"data": 9})], end_time=2.0
        )
        assert check_trace([bounds], violating)[0][1].value is VerdictValue.FALSE
        in_range = Trace(
            events=[MessageEvent(float(i), "/bumper", {"data": i}) for i in range(8)],
            end_time=8.0,
        )
        assert check_trace([bounds], in_range)[0][1].value is VerdictValue.TRUE

    def test_bumper_causes_verdicts(self):
        causes = parse_property("globally: /bumper causes /stop_cmd")
        true_trace = Trace(
            events=[MessageEvent(1.0, "/bumper", {"data": 1}),
                    MessageEvent(2.0, "/stop_cmd", {})],
            end_time=2.0,
        )
        assert check_trace([causes], true_trace)[0][1].value is VerdictValue.TRUE
        pending = Trace(events=[MessageEvent(1.0, "/bumper", {"data": 1})], end_time=1.0)
        assert check_trace([causes], pending)[0][1].value is VerdictValue.INCONCLUSIVE
        with_deadline = parse_property("globally: /bumper causes /stop_cmd within 1 s")
        expired = Trace(events=[MessageEvent(1.0, "/bumper", {"data": 1})], end_time=2.5)
        assert check_trace([with_deadline], expired)[0][1].value is VerdictValue.FALSE
        _accept(6, "bumper bounds FALSE/TRUE and causes TRUE/INCONCLUSIVE/FALSE exact")


class _CorrectMux(SutAdapter):
    input_channels = ("/bumper", "/high_cmd")
    output_channels = ("/stop_cmd",)

    def on_message(self, event):
        if event.channel == "/bumper":
            self.emit("/stop_cmd", {})


class _BuggyMux(SutAdapter):
    def __init__(self):
        super().__init__()
        self.priority = False

    input_channels = ("/bumper", "/high_cmd")
    output_channels = ("/stop_cmd",)

    def on_reset(self):
        self.priority = False

    def on_message(self, event):
        if event.channel == "/high_cmd":
            self.priority = True
        elif event.channel == "/bumper" and not self.priority:
            self.emit("/stop_cmd", {})


def _mux_graph():
    graph = RosGraph(configuration="mux")
    graph.nodes = [NodeInstance(name="/mux", package="p", node_type="mux")]
    graph.topics = [
        ChannelResource(name="/bumper", kind="topic", msg_type="fictibot_msgs/BumperState"),
        ChannelResource(name="/high_cmd", kind="topic", msg_type="std_msgs/Bool"),
        ChannelResource(name="/stop_cmd", kind="topic", msg_type="std_msgs/Empty"),
    ]
    graph.links = [
        Link(node="/mux", resource="/bumper", role="subscriber",
             msg_type="fictibot_msgs/BumperState"),
        Link(node="/mux", resource="/high_cmd", role="subscriber", msg_type="std_msgs/Bool"),
        Link(node="/mux", resource="/stop_cmd", role="publisher", msg_type="std_msgs/Empty"),
    ]
    return graph


def _mux_msg_index():
    index = builtin_messages()
    bumper = parse_msg_text("int8 data", "fictibot_msgs/BumperState")
    index[bumper.qualified_name] = bumper
    return index


_FOUND_COUNTEREXAMPLES = []


class TestCriterion7BugFinding:
    def test_buggy_falsified_correct_clean(self):
        started = time.monotonic()
        prop = parse_property("globally: /bumper causes /stop_cmd within 1 s")
        schema = derive_schema(prop, _mux_graph(), _mux_msg_index())

        cex = run_campaign(
            schema, _BuggyMux(), [prop], CampaignBudget(max_traces=500, seed=1729)
        )
        assert cex is not None, "the dropped stop command must be found within 500 traces"
        assert cex.traces_run <= 500
        assert cex.shrunk
        assert len(cex.inputs.events) <= 3
        _FOUND_COUNTEREXAMPLES.append((prop, cex, _BuggyMux))

        clean = run_campaign(
            schema, _CorrectMux(), [prop], CampaignBudget(max_traces=100, seed=1729)
        )
        assert clean is None, "the correct adapter must survive 100 traces"
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"campaigns took {elapsed:.1f}s, budget is 60s"
        _accept(
            7,
            f"buggy falsified in {cex.traces_run} traces, shrunk to "
            f"{len(cex.inputs.events)} inputs; correct clean over 100; {elapsed:.1f}s < 60s",
        )


class TestCriterion8ShrinkMinimality:
    def test_every_counterexample_is_one_minimal(self):
        from rospect.testgen import _replay_falsifies

        assert _FOUND_COUNTEREXAMPLES, "criterion 7 must run first and find a counterexample"
        checked = 0
        for prop, cex, adapter_cls in _FOUND_COUNTEREXAMPLES:
            adapter = adapter_cls()
            for i in range(len(cex.inputs.events)):
                reduced = cex.inputs.events[:i] + cex.inputs.events[i + 1 :]
                still_fails, _ = _replay_falsifies(
                    reduced, cex.inputs.end_time, adapter, [prop], 256
                )
                assert not still_fails, (
                    f"deleting input {i} of a shrunk counterexample must make "
                    f"the property pass"
                )
                checked += 1
        _accept(8, f"single-event deletions checked exhaustively ({checked} deletions)")


class TestCriterion9Latching:
    def test_latched_verdicts_survive_extensions(self):
        rng = random.Random(90210)
        latched_seen = 0
        for _ in range(1000):
            prop = random_property(rng)
            trace = random_trace(rng, closed=False)
            automaton = compile_monitor(prop)
            latch = None
            for event in trace.events:
                verdict = automaton.feed(event)
                if latch is None and verdict.value is not VerdictValue.INCONCLUSIVE:
                    latch = verdict.value
            if latch is None:
                continue
            latched_seen += 1
            last = trace.events[-1].time if trace.events else 0.0
            for k in range(5):
                extension = MessageEvent(
                    time=last + 0.5 * (k + 1),
                    channel=rng.choice(["/a", "/b", "/c", "/noise"]),
                    payload={"data": rng.randint(0, 3)},
                )
                assert automaton.feed(extension).value is latch
        assert latched_seen > 100, "the random mix must exercise latching often"
        _accept(9, f"{latched_seen} latched runs stayed latched under 5-event extensions")


class TestCriterion10CliContract:
    def test_exit_codes(self, tmp_path, capsys):
        clean = main(
            [
                "analyse",
                "-p", str(FIXTURES / "fictibot.yaml"),
                "--home", str(FIXTURES / "fictibot_ws"),
            ]
        )
        assert clean == 0

        violating = main(
            [
                "check-trace",
                "-p", str(FIXTURES / "fictibot.yaml"),
                "--home", str(FIXTURES / "fictibot_ws"),
                "--config", "multiplex",
                "--properties", str(FIXTURES / "fictibot.hpl"),
                "--trace", str(FIXTURES / "traces" / "bumper_violation.jsonl"),
            ]
        )
        assert violating == 1

        fatal = main(
            [
                "analyse",
                "-p", str(tmp_path / "missing.yaml"),
                "--home", str(FIXTURES / "fictibot_ws"),
            ]
        )
        assert fatal == 2
        capsys.readouterr()
        _accept(10, "exit codes 0 (clean), 1 (violating trace), 2 (missing project)")
