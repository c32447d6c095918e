"""Path-expression queries and builtin architectural rules over a graph.

The language is small: a root collection (nodes, topics, services,
parameters), slash-separated navigation steps, bracketed filters over
entity attributes, and union with '|'. Filters evaluate three-valued:
a missing attribute makes the entity silently not match.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from string import Template

from .graph import Link, RosGraph, is_unresolved_link
from .issues import Category, Issue, IssueLog, Severity, entity_scope

ROOTS = ("nodes", "topics", "services", "parameters")
STEPS = ("publishers", "subscribers", "servers", "clients", "reads", "writes", "node", "resource")

_STEP_ROLES = {
    "publishers": "publisher",
    "subscribers": "subscriber",
    "servers": "server",
    "clients": "client",
    "reads": "param_read",
    "writes": "param_write",
}


class QueryError(Exception):
    """Query syntax or name errors, with a source span."""

    def __init__(self, message: str, span: tuple[int, int] | None = None):
        super().__init__(message if span is None else f"{message} (at {span[0]}..{span[1]})")
        self.span = span


# --- AST ---------------------------------------------------------------------


@dataclass
class Attr:
    path: list[str]
    span: tuple[int, int]


@dataclass
class Literal:
    value: object
    span: tuple[int, int]


@dataclass
class Compare:
    op: str
    left: object
    right: object


@dataclass
class BoolOp:
    op: str  # "and" | "or"
    items: list


@dataclass
class Not:
    item: object


@dataclass
class Step:
    name: str | None  # None for a bare filter on the root
    predicate: object | None
    span: tuple[int, int]


@dataclass
class PathExpr:
    root: str
    steps: list[Step]
    span: tuple[int, int]


@dataclass
class QueryExpr:
    paths: list[PathExpr]


@dataclass
class Query:
    name: str
    severity: Severity
    expr: QueryExpr
    message_template: str
    source: str = ""


@dataclass
class Match:
    entity: object
    entity_name: str
    bindings: dict = field(default_factory=dict)


# --- Parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>\||\[|\]|\(|\)|/|\.|!=|>=|<=|=|<|>)
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, tuple[int, int]]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QueryError(f"unexpected character {text[pos]!r}", (pos, pos + 1))
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup or "punct", m.group(0), (m.start(), m.end())))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def _peek(self) -> tuple[str, str, tuple[int, int]] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self) -> tuple[str, str, tuple[int, int]]:
        tok = self._peek()
        if tok is None:
            raise QueryError("unexpected end of query", (len(self.text), len(self.text)))
        self.i += 1
        return tok

    def _expect(self, value: str) -> tuple[str, str, tuple[int, int]]:
        tok = self._next()
        if tok[1] != value:
            raise QueryError(f"expected {value!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> QueryExpr:
        paths = [self._path()]
        while self._peek() is not None and self._peek()[1] == "|":
            self._next()
            paths.append(self._path())
        tok = self._peek()
        if tok is not None:
            raise QueryError(f"trailing input {tok[1]!r}", tok[2])
        return QueryExpr(paths)

    def _path(self) -> PathExpr:
        tok = self._next()
        if tok[0] != "name" or tok[1] not in ROOTS:
            raise QueryError(f"unknown root collection {tok[1]!r}", tok[2])
        start = tok[2][0]
        steps: list[Step] = []
        while True:
            nxt = self._peek()
            if nxt is None or nxt[1] == "|":
                break
            if nxt[1] == "/":
                self._next()
                name_tok = self._next()
                if name_tok[0] != "name" or name_tok[1] not in STEPS:
                    raise QueryError(f"unknown step {name_tok[1]!r}", name_tok[2])
                predicate = None
                after = self._peek()
                if after is not None and after[1] == "[":
                    predicate = self._filter()
                steps.append(Step(name_tok[1], predicate, name_tok[2]))
            elif nxt[1] == "[":
                predicate = self._filter()
                steps.append(Step(None, predicate, nxt[2]))
            else:
                raise QueryError(f"unexpected token {nxt[1]!r}", nxt[2])
        end = self.tokens[self.i - 1][2][1] if self.i else start
        return PathExpr(tok[1], steps, (start, end))

    def _filter(self) -> object:
        self._expect("[")
        pred = self._or_expr()
        self._expect("]")
        return pred

    def _or_expr(self) -> object:
        items = [self._and_expr()]
        while self._peek() is not None and self._peek()[1] == "or":
            self._next()
            items.append(self._and_expr())
        return items[0] if len(items) == 1 else BoolOp("or", items)

    def _and_expr(self) -> object:
        items = [self._not_expr()]
        while self._peek() is not None and self._peek()[1] == "and":
            self._next()
            items.append(self._not_expr())
        return items[0] if len(items) == 1 else BoolOp("and", items)

    def _not_expr(self) -> object:
        tok = self._peek()
        if tok is not None and tok[1] == "not":
            self._next()
            return Not(self._not_expr())
        return self._comparison()

    def _comparison(self) -> object:
        left = self._operand()
        tok = self._peek()
        if tok is not None and tok[1] in ("=", "!=", "<", "<=", ">", ">="):
            op = self._next()[1]
            right = self._operand()
            return Compare(op, left, right)
        return left

    def _operand(self) -> object:
        tok = self._next()
        if tok[1] == "(":
            inner = self._or_expr()
            self._expect(")")
            return inner
        if tok[0] == "number":
            value = float(tok[1]) if "." in tok[1] else int(tok[1])
            return Literal(value, tok[2])
        if tok[0] == "string":
            return Literal(tok[1][1:-1], tok[2])
        if tok[0] == "name" and tok[1] in ("true", "false"):
            return Literal(tok[1] == "true", tok[2])
        if tok[0] == "name" and tok[1] == "self":
            path = []
            start = tok[2][0]
            while self._peek() is not None and self._peek()[1] == ".":
                self._next()
                attr = self._next()
                if attr[0] != "name":
                    raise QueryError(f"expected attribute name, found {attr[1]!r}", attr[2])
                path.append(attr[1])
            return Attr(path, (start, self.tokens[self.i - 1][2][1]))
        raise QueryError(f"unexpected token {tok[1]!r}", tok[2])


def parse_query_expr(text: str) -> QueryExpr:
    return _Parser(text).parse()


def parse_query(
    text: str,
    name: str = "query",
    severity: Severity = Severity.WARNING,
    message_template: str = "${entity} matched",
) -> Query:
    """Parse a query expression into an evaluable Query record."""
    return Query(
        name=name,
        severity=severity,
        expr=parse_query_expr(text),
        message_template=message_template,
        source=text,
    )


# --- Evaluation ---------------------------------------------------------------

_MISSING = object()


def _entity_attr(graph: RosGraph, entity: object, name: str) -> object:
    """Attribute lookup used by filters; returns _MISSING when undefined."""
    if name == "conditions":
        return getattr(entity, "conditions", _MISSING)
    if isinstance(entity, Link):
        direct = {
            "node": entity.node,
            "resource": entity.resource,
            "name": entity.resource,
            "role": entity.role,
            "msg_type": entity.msg_type if entity.msg_type is not None else _MISSING,
            "queue_size": entity.queue_size if entity.queue_size is not None else _MISSING,
            "conditional": bool(entity.conditions),
            "provenance": entity.provenance,
        }
        return direct.get(name, _MISSING)
    if name in _STEP_ROLES:
        entity_name = getattr(entity, "name", None)
        if entity_name is None:
            return _MISSING
        role = _STEP_ROLES[name]
        return [l for l in graph.links if l.resource == entity_name and l.role == role] or [
            l for l in graph.links if l.node == entity_name and l.role == role
        ]
    value = getattr(entity, name, _MISSING)
    if value is None:
        return _MISSING
    return value


def _eval_pred(pred: object, graph: RosGraph, entity: object) -> bool | None:
    """Three-valued predicate evaluation: None propagates from missing attributes."""
    if isinstance(pred, Literal):
        return bool(pred.value)
    if isinstance(pred, Attr):
        value = _resolve_attr(pred, graph, entity)
        if value is _MISSING:
            return None
        if isinstance(value, (list, tuple, set)):
            return bool(value)
        return bool(value)
    if isinstance(pred, Not):
        inner = _eval_pred(pred.item, graph, entity)
        return None if inner is None else not inner
    if isinstance(pred, BoolOp):
        results = [_eval_pred(item, graph, entity) for item in pred.items]
        if pred.op == "and":
            if any(r is False for r in results):
                return False
            if any(r is None for r in results):
                return None
            return True
        if any(r is True for r in results):
            return True
        if any(r is None for r in results):
            return None
        return False
    if isinstance(pred, Compare):
        left = _value_of(pred.left, graph, entity)
        right = _value_of(pred.right, graph, entity)
        if left is _MISSING or right is _MISSING:
            return None
        # Link collections compare by count against numbers.
        if isinstance(left, (list, tuple, set)) and isinstance(right, (int, float)):
            left = len(left)
        if isinstance(right, (list, tuple, set)) and isinstance(left, (int, float)):
            right = len(right)
        try:
            if pred.op == "=":
                return left == right
            if pred.op == "!=":
                return left != right
            if pred.op == "<":
                return left < right
            if pred.op == "<=":
                return left <= right
            if pred.op == ">":
                return left > right
            if pred.op == ">=":
                return left >= right
        except TypeError:
            return None
    return None


def _resolve_attr(attr: Attr, graph: RosGraph, entity: object) -> object:
    value: object = entity
    for name in attr.path:
        value = _entity_attr(graph, value, name)
        if value is _MISSING:
            return _MISSING
    if value is entity:
        return _MISSING  # bare 'self' has no truthiness
    return value


def _value_of(operand: object, graph: RosGraph, entity: object) -> object:
    if isinstance(operand, Literal):
        return operand.value
    if isinstance(operand, Attr):
        return _resolve_attr(operand, graph, entity)
    result = _eval_pred(operand, graph, entity)
    return _MISSING if result is None else result


def _root_entities(graph: RosGraph, root: str) -> list:
    return {
        "nodes": list(graph.nodes),
        "topics": list(graph.topics),
        "services": list(graph.services),
        "parameters": list(graph.parameters),
    }[root]


def _navigate(graph: RosGraph, entities: list, step_name: str) -> list:
    out: list = []
    for entity in entities:
        if step_name in _STEP_ROLES:
            role = _STEP_ROLES[step_name]
            name = getattr(entity, "name", None)
            if isinstance(entity, Link) or name is None:
                continue
            if hasattr(entity, "node_type"):  # a node instance
                out.extend(l for l in graph.links if l.node == name and l.role == role)
            else:
                out.extend(l for l in graph.links if l.resource == name and l.role == role)
        elif step_name == "node":
            if isinstance(entity, Link):
                node = graph.node_by_name(entity.node)
                if node is not None:
                    out.append(node)
        elif step_name == "resource":
            if isinstance(entity, Link):
                res = (
                    graph.topic_by_name(entity.resource)
                    or graph.service_by_name(entity.resource)
                    or next((p for p in graph.parameters if p.name == entity.resource), None)
                )
                if res is not None:
                    out.append(res)
    return out


def _display_name(entity: object) -> str:
    if isinstance(entity, Link):
        return f"{entity.node} {entity.role} {entity.resource}"
    return getattr(entity, "name", str(entity))


def eval_query(query: Query, graph: RosGraph) -> list[Match]:
    """Evaluate a query; matches are returned in deterministic name order."""
    matches: dict[str, Match] = {}
    for path in query.expr.paths:
        entities = _root_entities(graph, path.root)
        for step in path.steps:
            if step.name is not None:
                entities = _navigate(graph, entities, step.name)
            if step.predicate is not None:
                entities = [e for e in entities if _eval_pred(step.predicate, graph, e) is True]
        for entity in entities:
            name = _display_name(entity)
            bindings = {"entity": name}
            for attr in ("name", "node", "resource", "role", "msg_type"):
                value = getattr(entity, attr, None)
                if value is not None:
                    bindings[attr] = str(value)
            matches.setdefault(name, Match(entity=entity, entity_name=name, bindings=bindings))
    return [matches[k] for k in sorted(matches)]


def render_issues(query: Query, matches: list[Match], issues: IssueLog) -> None:
    for match in matches:
        message = Template(query.message_template).safe_substitute(match.bindings)
        issues.add(Category.QUERY, query.name, query.severity, entity_scope(match.entity_name), message)


# --- Builtin rules -------------------------------------------------------------


def _typed_links(links: list[Link]) -> list[Link]:
    return [l for l in links if l.msg_type is not None]


def builtin_rules(graph: RosGraph, issues: IssueLog | None = None) -> list[Issue]:
    """Run the fixed architectural rule set (R1..R6) over a graph."""
    log = IssueLog()

    # R1/R2: all typed links on one channel must agree on the type.
    for resources, rule, category in (
        (graph.topics, "R1", Category.TYPECHECK),
        (graph.services, "R2", Category.TYPECHECK),
    ):
        for res in resources:
            typed = _typed_links(graph.links_for_resource(res.name))
            types = sorted({l.msg_type for l in typed})
            if len(types) > 1:
                endpoints = ", ".join(
                    f"{l.node} ({l.role}, {l.msg_type})"
                    for l in sorted(typed, key=lambda l: (l.node, l.role))
                )
                log.add(
                    category,
                    rule,
                    Severity.ERROR,
                    entity_scope(res.name),
                    f"type mismatch on {res.name}: {endpoints}",
                )

    # R3: multi-publisher topics.
    for res in graph.topics:
        pubs = graph.links_for_resource(res.name, ("publisher",))
        if len(pubs) > 1:
            log.add(
                Category.QUERY,
                "R3",
                Severity.WARNING,
                entity_scope(res.name),
                f"topic {res.name} has {len(pubs)} publishers",
            )

    # R4: conditional publishers/subscribers.
    for link in graph.links:
        if link.role in ("publisher", "subscriber") and link.conditions:
            log.add(
                Category.QUERY,
                "R4",
                Severity.WARNING,
                entity_scope(f"{link.node} {link.role} {link.resource}"),
                f"{link.node} is a conditional {link.role} of {link.resource}"
                f" (condition: {'; '.join(link.conditions)})",
            )

    # R5: orphan topics (publishers without subscribers or vice versa).
    for res in graph.topics:
        pubs = graph.links_for_resource(res.name, ("publisher",))
        subs = graph.links_for_resource(res.name, ("subscriber",))
        if pubs and not subs:
            log.add(
                Category.QUERY,
                "R5",
                Severity.INFO,
                entity_scope(res.name),
                f"topic {res.name} is published but never subscribed",
            )
        elif subs and not pubs:
            log.add(
                Category.QUERY,
                "R5",
                Severity.INFO,
                entity_scope(res.name),
                f"topic {res.name} is subscribed but never published",
            )

    # R6: unresolved entities (unknown names or types).
    for res in list(graph.topics) + list(graph.services):
        if res.unresolved_name:
            log.add(
                Category.MODEL,
                "R6",
                Severity.WARNING,
                entity_scope(res.name),
                f"{res.kind} name could not be resolved ({res.name})",
            )
    for link in graph.links:
        if is_unresolved_link(link):
            log.add(
                Category.MODEL,
                "R6",
                Severity.WARNING,
                entity_scope(f"{link.node} {link.role} {link.resource}"),
                f"{link.node} {link.role} on {link.resource} has unknown type",
            )

    if issues is not None:
        issues.extend(log)
    return log.finalize()


# --- Query file ----------------------------------------------------------------


def load_queries(path: str) -> list[Query]:
    """Load user queries: a YAML list of {name, severity, query, message} records."""
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return []
    if not isinstance(data, list):
        raise QueryError(f"{path}: query file must be a list of records")
    queries = []
    for i, record in enumerate(data):
        if not isinstance(record, dict) or "query" not in record:
            raise QueryError(f"{path}: record {i} must be a mapping with a 'query' key")
        severity = Severity(record.get("severity", "warning"))
        queries.append(
            parse_query(
                record["query"],
                name=str(record.get("name", f"user-{i}")),
                severity=severity,
                message_template=str(record.get("message", "${entity} matched")),
            )
        )
    return queries
