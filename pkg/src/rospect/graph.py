"""The extracted runtime model: node instances, channels, parameters, links."""

from __future__ import annotations

from dataclasses import dataclass, field

from .extract import NodeExtraction
from .issues import Category, IssueLog, Severity, entity_scope
from .launch import ALWAYS, Condition, LaunchInterpretation, NameError_, UNKNOWN, resolve_name
from .workspace import NodeTarget

_ROLE_FOR_KIND = {
    "advertise": ("publisher", "topic"),
    "subscribe": ("subscriber", "topic"),
    "service_server": ("server", "service"),
    "service_client": ("client", "service"),
    "param_read": ("param_read", "parameter"),
    "param_write": ("param_write", "parameter"),
}


@dataclass
class NodeInstance:
    name: str
    package: str
    node_type: str
    condition: Condition = ALWAYS
    provenance: str = "launch"

    @property
    def conditions(self) -> list[str]:
        return [] if self.condition.is_always else [self.condition.text]


@dataclass
class ChannelResource:
    name: str
    kind: str  # "topic" or "service"
    msg_type: str | None = None  # None = unknown
    condition: Condition = ALWAYS
    unresolved_name: bool = False  # placeholder for an unknown name

    @property
    def conditions(self) -> list[str]:
        return [] if self.condition.is_always else [self.condition.text]


@dataclass
class ParamResource:
    name: str
    value: object = None
    known_value: bool = False
    condition: Condition = ALWAYS

    @property
    def conditions(self) -> list[str]:
        return [] if self.condition.is_always else [self.condition.text]


@dataclass
class Link:
    node: str
    resource: str
    role: str
    msg_type: str | None = None
    queue_size: int | None = None
    conditional: bool = False
    condition_text: str | None = None
    provenance: str = "source"
    loc: tuple[str, int] | None = None
    launch_condition: Condition = ALWAYS

    @property
    def conditions(self) -> list[str]:
        out = []
        if not self.launch_condition.is_always:
            out.append(self.launch_condition.text)
        if self.conditional and self.condition_text:
            out.append(self.condition_text)
        elif self.conditional and not self.condition_text:
            out.append("<unlabelled branch>")
        return out


@dataclass
class RosGraph:
    configuration: str
    nodes: list[NodeInstance] = field(default_factory=list)
    topics: list[ChannelResource] = field(default_factory=list)
    services: list[ChannelResource] = field(default_factory=list)
    parameters: list[ParamResource] = field(default_factory=list)
    links: list[Link] = field(default_factory=list)

    def node_by_name(self, name: str) -> NodeInstance | None:
        return next((n for n in self.nodes if n.name == name), None)

    def topic_by_name(self, name: str) -> ChannelResource | None:
        return next((t for t in self.topics if t.name == name), None)

    def service_by_name(self, name: str) -> ChannelResource | None:
        return next((s for s in self.services if s.name == name), None)

    def links_for_resource(self, name: str, roles: tuple[str, ...] | None = None) -> list[Link]:
        return [
            l for l in self.links if l.resource == name and (roles is None or l.role in roles)
        ]

    def links_for_node(self, name: str, roles: tuple[str, ...] | None = None) -> list[Link]:
        return [l for l in self.links if l.node == name and (roles is None or l.role in roles)]


@dataclass
class GraphStats:
    nodes: int = 0
    topics: int = 0
    services: int = 0
    parameters: int = 0
    links: int = 0
    conditional_links: int = 0
    conditional_entities: int = 0
    unresolved_entities: int = 0

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "topics": self.topics,
            "services": self.services,
            "parameters": self.parameters,
            "links": self.links,
            "conditional_links": self.conditional_links,
            "conditional_entities": self.conditional_entities,
            "unresolved_entities": self.unresolved_entities,
        }


def build_graph(
    launch: LaunchInterpretation,
    extractions: dict[str, NodeExtraction],
    targets: list[NodeTarget],
    configuration: str = "",
    issues: IssueLog | None = None,
) -> RosGraph:
    """Instantiate per-node extractions under their launch names into one graph.

    Call names resolve with the node's namespace, name and remaps; resources
    merge by resolved global name; unknown names become stable placeholders
    '?<node>/<kind>/<ordinal>' flagged unresolved.
    """
    issues = issues if issues is not None else IssueLog()
    graph = RosGraph(configuration=configuration)
    target_keys = {f"{t.package}/{t.target_name}" for t in targets}

    resources: dict[tuple[str, str], ChannelResource] = {}
    params: dict[str, ParamResource] = {}
    links: dict[tuple[str, str, str], Link] = {}

    for g_name, value, condition in launch.parameters:
        if g_name in params:
            continue
        params[g_name] = ParamResource(
            name=g_name,
            value=None if value is UNKNOWN else value,
            known_value=value is not UNKNOWN,
            condition=condition,
        )

    for node in sorted(launch.nodes, key=lambda n: n.name):
        inst = NodeInstance(
            name=node.name,
            package=node.package,
            node_type=node.node_type,
            condition=node.condition,
        )
        graph.nodes.append(inst)
        key = f"{node.package}/{node.node_type}"
        if key not in target_keys:
            issues.add(
                Category.MODEL,
                "no-source",
                Severity.WARNING,
                entity_scope(node.name),
                f"no source associated with node {node.name} ({key})",
            )
            continue
        # Per-node entries (hint-fused) take precedence over per-target ones.
        extraction = extractions.get(node.name, extractions.get(key))
        if extraction is None:
            continue
        placeholder_counts: dict[str, int] = {}
        for call in extraction.calls:
            role, res_kind = _ROLE_FOR_KIND[call.kind]
            if call.name_arg is not None:
                try:
                    resolved = resolve_name(
                        call.name_arg, node.namespace, node.name, node.remaps
                    )
                except NameError_:
                    resolved = None
            else:
                resolved = None
            unresolved = resolved is None
            if resolved is None:
                ordinal = placeholder_counts.get(call.kind, 0)
                placeholder_counts[call.kind] = ordinal + 1
                resolved = f"?{node.name}/{call.kind}/{ordinal}"

            call_cond = (
                Condition("expr", call.condition_text or "<unlabelled branch>", call.loc)
                if call.conditional
                else ALWAYS
            )
            creator_cond = node.condition
            if creator_cond.is_always:
                creator_cond = call_cond
            elif not call_cond.is_always:
                creator_cond = Condition(
                    "expr", f"{creator_cond.text} and {call_cond.text}", call.loc
                )
            if res_kind == "parameter":
                if resolved not in params:
                    params[resolved] = ParamResource(
                        name=resolved, condition=creator_cond
                    )
            else:
                existing = resources.get((res_kind, resolved))
                if existing is None:
                    resources[(res_kind, resolved)] = ChannelResource(
                        name=resolved,
                        kind=res_kind,
                        msg_type=call.type_arg,
                        condition=creator_cond,
                        unresolved_name=unresolved,
                    )
                else:
                    if existing.msg_type is None and call.type_arg is not None:
                        existing.msg_type = call.type_arg
                    # A resource created by any unconditional endpoint exists
                    # unconditionally; it stays conditional only while every
                    # creating link is conditional.
                    if creator_cond.is_always:
                        existing.condition = ALWAYS
                    elif not existing.condition.is_always:
                        existing.condition = Condition(
                            "expr",
                            f"{existing.condition.text} or {creator_cond.text}",
                            existing.condition.loc,
                        )

            link_key = (node.name, resolved, role)
            new_link = Link(
                node=node.name,
                resource=resolved,
                role=role,
                msg_type=call.type_arg,
                queue_size=call.queue_size,
                conditional=call.conditional,
                condition_text=call.condition_text,
                provenance=call.provenance,
                loc=call.loc,
                launch_condition=node.condition,
            )
            existing_link = links.get(link_key)
            if existing_link is None:
                links[link_key] = new_link
            else:
                # Duplicate calls by one node merge with the weakest condition.
                if not new_link.conditional or not existing_link.conditional:
                    existing_link.conditional = False
                    existing_link.condition_text = None
                if existing_link.msg_type is None and new_link.msg_type is not None:
                    existing_link.msg_type = new_link.msg_type
                if existing_link.queue_size is None and new_link.queue_size is not None:
                    existing_link.queue_size = new_link.queue_size

    name_to_kinds: dict[str, set[str]] = {}
    for (res_kind, name) in resources:
        name_to_kinds.setdefault(name, set()).add(res_kind)
    for name in params:
        name_to_kinds.setdefault(name, set()).add("parameter")
    for name, kinds in sorted(name_to_kinds.items()):
        if len(kinds) > 1:
            issues.add(
                Category.MODEL,
                "name-collision",
                Severity.WARNING,
                entity_scope(name),
                f"name {name} used as {' and '.join(sorted(kinds))}; both kept",
            )

    graph.topics = sorted(
        (r for (k, _), r in resources.items() if k == "topic"), key=lambda r: r.name
    )
    graph.services = sorted(
        (r for (k, _), r in resources.items() if k == "service"), key=lambda r: r.name
    )
    graph.parameters = sorted(params.values(), key=lambda p: p.name)
    graph.links = sorted(links.values(), key=lambda l: (l.node, l.resource, l.role))
    _check_referential_integrity(graph)
    return graph


def _check_referential_integrity(graph: RosGraph) -> None:
    node_names = {n.name for n in graph.nodes}
    resource_names = (
        {t.name for t in graph.topics}
        | {s.name for s in graph.services}
        | {p.name for p in graph.parameters}
    )
    for link in graph.links:
        if link.node not in node_names or link.resource not in resource_names:
            raise AssertionError(f"dangling link {link.node} -> {link.resource}")


def is_unresolved_link(link: Link) -> bool:
    return link.msg_type is None and link.role not in ("param_read", "param_write")


def graph_statistics(graph: RosGraph) -> GraphStats:
    """Entity and link counts, plus conditional/unresolved tallies."""
    stats = GraphStats(
        nodes=len(graph.nodes),
        topics=len(graph.topics),
        services=len(graph.services),
        parameters=len(graph.parameters),
        links=len(graph.links),
    )
    stats.conditional_links = sum(1 for l in graph.links if l.conditions)
    stats.conditional_entities = (
        sum(1 for n in graph.nodes if n.conditions)
        + sum(1 for t in graph.topics if t.conditions)
        + sum(1 for s in graph.services if s.conditions)
        + sum(1 for p in graph.parameters if p.conditions)
        + stats.conditional_links
    )
    stats.unresolved_entities = (
        sum(1 for t in graph.topics if t.unresolved_name or t.msg_type is None)
        + sum(1 for s in graph.services if s.unresolved_name or s.msg_type is None)
        + sum(1 for l in graph.links if is_unresolved_link(l))
    )
    return stats


def serialize_graph(graph: RosGraph, base: str | None = None) -> dict:
    """Canonical, order-stable dict form of a graph (for JSON export and goldens).

    File locations are made relative to ``base`` so exports do not depend on
    where the workspace happens to live.
    """

    def relative(loc: tuple[str, int] | None) -> list | None:
        if loc is None:
            return None
        path, line = loc
        if base is not None and path.startswith(base.rstrip("/") + "/"):
            path = path[len(base.rstrip("/")) + 1 :]
        return [path, line]

    def cond(c: Condition) -> dict | None:
        return None if c.is_always else {"expr": c.text}

    return {
        "configuration": graph.configuration,
        "nodes": [
            {
                "name": n.name,
                "package": n.package,
                "node_type": n.node_type,
                "condition": cond(n.condition),
            }
            for n in sorted(graph.nodes, key=lambda n: n.name)
        ],
        "topics": [
            {
                "name": t.name,
                "msg_type": t.msg_type,
                "condition": cond(t.condition),
                "unresolved": t.unresolved_name or t.msg_type is None,
            }
            for t in sorted(graph.topics, key=lambda t: t.name)
        ],
        "services": [
            {
                "name": s.name,
                "srv_type": s.msg_type,
                "condition": cond(s.condition),
                "unresolved": s.unresolved_name or s.msg_type is None,
            }
            for s in sorted(graph.services, key=lambda s: s.name)
        ],
        "parameters": [
            {
                "name": p.name,
                "value": p.value if p.known_value else None,
                "known": p.known_value,
                "condition": cond(p.condition),
            }
            for p in sorted(graph.parameters, key=lambda p: p.name)
        ],
        "links": [
            {
                "node": l.node,
                "resource": l.resource,
                "role": l.role,
                "msg_type": l.msg_type,
                "queue_size": l.queue_size,
                "conditions": l.conditions,
                "provenance": l.provenance,
                "loc": relative(l.loc),
            }
            for l in sorted(graph.links, key=lambda l: (l.node, l.resource, l.role))
        ],
    }
