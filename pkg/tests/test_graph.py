from rospect.extract import ExtractedCall, NodeExtraction
from rospect.graph import build_graph, graph_statistics, serialize_graph
from rospect.issues import IssueLog
from rospect.launch import ALWAYS, Condition, LaunchInterpretation, LaunchedNode
from rospect.workspace import NodeTarget


def _node(name, node_type="t", package="p", remaps=None, condition=ALWAYS):
    return LaunchedNode(
        name=name,
        package=package,
        node_type=node_type,
        namespace="/",
        remaps=remaps or {},
        condition=condition,
    )


def _extraction(node_type, calls, package="p"):
    target = NodeTarget(package=package, target_name=node_type, sources=[])
    return NodeExtraction(target=target, calls=calls)


def _targets(*node_types, package="p"):
    return [NodeTarget(package=package, target_name=t, sources=[]) for t in node_types]


def test_empty_interpretation_empty_graph():
    graph = build_graph(LaunchInterpretation(), {}, [])
    assert graph.nodes == [] and graph.topics == [] and graph.links == []
    stats = graph_statistics(graph)
    assert stats.nodes == stats.topics == stats.links == 0


def test_single_chain():
    launch = LaunchInterpretation(nodes=[_node("/n", "talker")])
    ext = _extraction(
        "talker",
        [ExtractedCall(kind="advertise", name_arg="state", type_arg="std_msgs/Int32")],
    )
    graph = build_graph(launch, {"p/talker": ext}, _targets("talker"))
    stats = graph_statistics(graph)
    assert (stats.nodes, stats.topics, stats.links) == (1, 1, 1)
    assert graph.topics[0].name == "/state"


def test_fictibot_fixture_wiring(fictibot_graph):
    names = {t.name for t in fictibot_graph.topics}
    assert {"/bumper", "/controller_cmd", "/high_cmd", "/stop_cmd", "/cmd_vel", "/laser"} <= names
    assert [n.name for n in fictibot_graph.nodes] == [
        "/fictibase",
        "/ficticontrol",
        "/fictimux",
    ]


def test_fictibot_conditional_count_matches_seeded(fictibot_graph):
    # Three call sites sit in branches in the fixture sources.
    stats = graph_statistics(fictibot_graph)
    assert stats.conditional_links == 3


def test_remap_connects_endpoints():
    launch = LaunchInterpretation(
        nodes=[
            _node("/a", "talker", remaps={"/chat": "/rendezvous"}),
            _node("/b", "listener"),
        ]
    )
    exts = {
        "p/talker": _extraction(
            "talker", [ExtractedCall(kind="advertise", name_arg="chat", type_arg="std_msgs/String")]
        ),
        "p/listener": _extraction(
            "listener",
            [ExtractedCall(kind="subscribe", name_arg="/rendezvous", type_arg="std_msgs/String")],
        ),
    }
    graph = build_graph(launch, exts, _targets("talker", "listener"))
    assert [t.name for t in graph.topics] == ["/rendezvous"]
    assert len(graph.links) == 2


def test_type_conflict_keeps_both_links():
    launch = LaunchInterpretation(nodes=[_node("/a", "ta"), _node("/b", "tb")])
    exts = {
        "p/ta": _extraction(
            "ta", [ExtractedCall(kind="advertise", name_arg="/t", type_arg="std_msgs/Int32")]
        ),
        "p/tb": _extraction(
            "tb", [ExtractedCall(kind="subscribe", name_arg="/t", type_arg="std_msgs/Float64")]
        ),
    }
    graph = build_graph(launch, exts, _targets("ta", "tb"))
    assert len(graph.topics) == 1
    types = sorted(l.msg_type for l in graph.links)
    assert types == ["std_msgs/Float64", "std_msgs/Int32"]


def test_unknown_name_stable_placeholder():
    calls = [
        ExtractedCall(kind="advertise", name_arg=None, type_arg="std_msgs/Bool", loc=("f", 2)),
        ExtractedCall(kind="advertise", name_arg=None, type_arg="std_msgs/Int32", loc=("f", 5)),
    ]
    launch = LaunchInterpretation(nodes=[_node("/n", "t")])
    graph1 = build_graph(launch, {"p/t": _extraction("t", calls)}, _targets("t"))
    graph2 = build_graph(launch, {"p/t": _extraction("t", calls)}, _targets("t"))
    names = sorted(t.name for t in graph1.topics)
    assert names == ["?/n/advertise/0", "?/n/advertise/1"]
    assert names == sorted(t.name for t in graph2.topics)
    assert all(t.unresolved_name for t in graph1.topics)


def test_unmatched_node_reported():
    launch = LaunchInterpretation(nodes=[_node("/ghost", "missing")])
    issues = IssueLog()
    graph = build_graph(launch, {}, [], issues=issues)
    assert [n.name for n in graph.nodes] == ["/ghost"]
    assert any("no source associated" in i.message for i in issues.finalize())


def test_name_collision_issue():
    launch = LaunchInterpretation(nodes=[_node("/a", "ta"), _node("/b", "tb")])
    exts = {
        "p/ta": _extraction(
            "ta", [ExtractedCall(kind="advertise", name_arg="/x", type_arg="std_msgs/Bool")]
        ),
        "p/tb": _extraction(
            "tb", [ExtractedCall(kind="service_server", name_arg="/x", type_arg=None)]
        ),
    }
    issues = IssueLog()
    graph = build_graph(launch, exts, _targets("ta", "tb"), issues=issues)
    assert len(graph.topics) == 1 and len(graph.services) == 1
    assert any("name collision" in i.message or "used as" in i.message
               for i in issues.finalize())


def test_duplicate_calls_merge_weakest_condition():
    calls = [
        ExtractedCall(kind="advertise", name_arg="/t", type_arg="std_msgs/Bool",
                      conditional=True, condition_text="x", loc=("f", 1)),
        ExtractedCall(kind="advertise", name_arg="/t", type_arg="std_msgs/Bool", loc=("f", 9)),
    ]
    launch = LaunchInterpretation(nodes=[_node("/n", "t")])
    graph = build_graph(launch, {"p/t": _extraction("t", calls)}, _targets("t"))
    assert len(graph.links) == 1
    assert not graph.links[0].conditional


def test_launch_condition_inherited_by_links():
    condition = Condition("expr", "if $(arg x)")
    launch = LaunchInterpretation(nodes=[_node("/n", "t", condition=condition)])
    ext = _extraction("t", [ExtractedCall(kind="advertise", name_arg="/t", type_arg="std_msgs/Bool")])
    graph = build_graph(launch, {"p/t": ext}, _targets("t"))
    assert graph.links[0].conditions == ["if $(arg x)"]
    # Condition monotonicity: an always-link implies an always-node.
    for link in graph.links:
        node = graph.node_by_name(link.node)
        if not link.conditions:
            assert node.condition.is_always


def test_resource_from_any_unconditional_creator_is_unconditional():
    launch = LaunchInterpretation(nodes=[_node("/a", "ta"), _node("/b", "tb")])
    exts = {
        "p/ta": _extraction(
            "ta",
            [ExtractedCall(kind="advertise", name_arg="/t", type_arg="std_msgs/Bool",
                           conditional=True, condition_text="x")],
        ),
        "p/tb": _extraction(
            "tb", [ExtractedCall(kind="subscribe", name_arg="/t", type_arg="std_msgs/Bool")]
        ),
    }
    graph = build_graph(launch, exts, _targets("ta", "tb"))
    assert graph.topics[0].condition.is_always


def test_double_build_serializes_identically(fictibot_state, fictibot_ws, fictibot_project):
    from rospect.pipeline import PipelineOptions, run_analysis

    state2 = run_analysis(
        PipelineOptions(project_file=fictibot_project, workspace=fictibot_ws)
    )
    base = str(fictibot_ws.resolve())
    assert serialize_graph(fictibot_state.graphs["multiplex"], base) == serialize_graph(
        state2.graphs["multiplex"], base
    )


def test_referential_integrity(fictibot_graph):
    node_names = {n.name for n in fictibot_graph.nodes}
    resource_names = (
        {t.name for t in fictibot_graph.topics}
        | {s.name for s in fictibot_graph.services}
        | {p.name for p in fictibot_graph.parameters}
    )
    for link in fictibot_graph.links:
        assert link.node in node_names
        assert link.resource in resource_names
