"""Behavioural property language: scopes and patterns over message channels.

A property pairs a temporal scope (globally / after E / until E /
after E until E) with a pattern (no E, some E, A causes B, A forbids B,
A requires B), where events are channel names with optional predicates
over message fields, and binary patterns may carry a deadline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .graph import RosGraph
from .issues import Category, IssueLog, Severity, entity_scope
from .msgs import (
    FLOAT_TYPES,
    INT_RANGES,
    FieldType,
    MessageTypeDef,
    MsgError,
    NUMERIC_TYPES,
    field_type_at,
)

SCOPE_KINDS = ("globally", "after", "until", "after_until")
PATTERN_KINDS = ("absence", "existence", "response", "prevention", "requirement")

_PATTERN_KEYWORDS = {"causes": "response", "forbids": "prevention", "requires": "requirement"}
_TIME_UNITS = {"s": Fraction(1), "ms": Fraction(1, 1000)}


class HplError(Exception):
    """Syntax errors, with position information."""

    def __init__(self, message: str, pos: int | None = None):
        super().__init__(message if pos is None else f"{message} (at column {pos + 1})")
        self.pos = pos


# --- Predicate AST -------------------------------------------------------------


@dataclass(frozen=True)
class FieldRef:
    path: tuple[object, ...]  # str segments and int indexes

    def __str__(self) -> str:
        out = ""
        for step in self.path:
            out += f"[{step}]" if isinstance(step, int) else (f".{step}" if out else str(step))
        return out


@dataclass(frozen=True)
class Lit:
    value: object

    def __str__(self) -> str:
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if isinstance(self.value, str):
            return '"' + self.value + '"'
        return str(self.value)


@dataclass(frozen=True)
class Cmp:
    op: str  # = != < <= > >=
    left: object
    right: object

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class InSet:
    item: object
    values: tuple[object, ...]

    def __str__(self) -> str:
        return f"{self.item} in {{{', '.join(str(Lit(v)) for v in self.values)}}}"


@dataclass(frozen=True)
class InRange:
    item: object
    low: object
    high: object

    def __str__(self) -> str:
        return f"{self.item} in [{Lit(self.low)}, {Lit(self.high)}]"


@dataclass(frozen=True)
class PredOp:
    op: str  # and | or | implies | not
    items: tuple[object, ...]

    def __str__(self) -> str:
        if self.op == "not":
            return f"not ({self.items[0]})"
        return f"({self.items[0]}) {self.op} ({self.items[1]})"


@dataclass(frozen=True)
class Event:
    channel: str
    predicate: object | None = None

    def __str__(self) -> str:
        if self.predicate is None:
            return self.channel
        return f"{self.channel} {{{self.predicate}}}"


@dataclass(frozen=True)
class Scope:
    kind: str
    activator: Event | None = None
    terminator: Event | None = None

    def __str__(self) -> str:
        if self.kind == "globally":
            return "globally"
        if self.kind == "after":
            return f"after {self.activator}"
        if self.kind == "until":
            return f"until {self.terminator}"
        return f"after {self.activator} until {self.terminator}"


@dataclass(frozen=True)
class Pattern:
    kind: str
    event_a: Event
    event_b: Event | None = None
    deadline: Fraction | None = None

    def __str__(self) -> str:
        if self.kind == "absence":
            return f"no {self.event_a}"
        if self.kind == "existence":
            return f"some {self.event_a}"
        keyword = {v: k for k, v in _PATTERN_KEYWORDS.items()}[self.kind]
        out = f"{self.event_a} {keyword} {self.event_b}"
        if self.deadline is not None:
            out += f" within {float(self.deadline):g} s"
        return out


@dataclass(frozen=True)
class HplProperty:
    scope: Scope
    pattern: Pattern
    source_text: str = ""

    def __str__(self) -> str:
        return f"{self.scope}: {self.pattern}"

    def channels(self) -> list[str]:
        events = [self.scope.activator, self.scope.terminator, self.pattern.event_a, self.pattern.event_b]
        seen = []
        for e in events:
            if e is not None and e.channel not in seen:
                seen.append(e.channel)
        return seen


# --- Tokenizer -----------------------------------------------------------------

_HPL_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<channel>/[A-Za-z0-9_]+(?:/[A-Za-z0-9_]+)*)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>!=|>=|<=|[{}():,\[\]=<>.])
    """,
    re.VERBOSE,
)


def _hpl_tokens(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _HPL_TOKEN_RE.match(text, pos)
        if m is None:
            raise HplError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup or "punct", m.group(0), m.start()))
        pos = m.end()
    return tokens


class _HplParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _hpl_tokens(text)
        self.i = 0

    def _peek(self, offset: int = 0):
        idx = self.i + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise HplError("unexpected end of property", len(self.text))
        self.i += 1
        return tok

    def _expect(self, value: str):
        tok = self._next()
        if tok[1] != value:
            raise HplError(f"expected {value!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> HplProperty:
        scope = self._scope()
        self._expect(":")
        pattern = self._pattern()
        tok = self._peek()
        if tok is not None:
            raise HplError(f"trailing input {tok[1]!r}", tok[2])
        return HplProperty(scope=scope, pattern=pattern, source_text=self.text)

    def _scope(self) -> Scope:
        tok = self._next()
        if tok[1] == "globally":
            return Scope("globally")
        if tok[1] == "after":
            activator = self._event()
            nxt = self._peek()
            if nxt is not None and nxt[1] == "until":
                self._next()
                terminator = self._event()
                return Scope("after_until", activator=activator, terminator=terminator)
            return Scope("after", activator=activator)
        if tok[1] == "until":
            return Scope("until", terminator=self._event())
        raise HplError(f"expected a scope keyword, found {tok[1]!r}", tok[2])

    def _pattern(self) -> Pattern:
        tok = self._peek()
        if tok is None:
            raise HplError("missing pattern", len(self.text))
        if tok[1] in ("no", "some"):
            self._next()
            kind = "absence" if tok[1] == "no" else "existence"
            event = self._event()
            nxt = self._peek()
            if nxt is not None and nxt[1] == "within":
                raise HplError(f"deadline not allowed on {kind} patterns", nxt[2])
            return Pattern(kind, event_a=event)
        event_a = self._event()
        keyword = self._next()
        if keyword[1] not in _PATTERN_KEYWORDS:
            raise HplError(
                f"expected causes/forbids/requires, found {keyword[1]!r}", keyword[2]
            )
        event_b = self._event()
        deadline = None
        nxt = self._peek()
        if nxt is not None and nxt[1] == "within":
            self._next()
            deadline = self._duration()
        return Pattern(_PATTERN_KEYWORDS[keyword[1]], event_a=event_a, event_b=event_b, deadline=deadline)

    def _duration(self) -> Fraction:
        number = self._next()
        if number[0] != "number":
            raise HplError(f"expected a number, found {number[1]!r}", number[2])
        unit = self._next()
        if unit[1] not in _TIME_UNITS:
            raise HplError(f"expected a time unit (s, ms), found {unit[1]!r}", unit[2])
        value = Fraction(number[1]) * _TIME_UNITS[unit[1]]
        if value < 0:
            raise HplError("deadlines must be non-negative", number[2])
        return value

    def _event(self) -> Event:
        tok = self._next()
        if tok[0] != "channel":
            raise HplError(f"expected a channel name, found {tok[1]!r}", tok[2])
        predicate = None
        nxt = self._peek()
        if nxt is not None and nxt[1] == "{":
            self._next()
            predicate = self._pred()
            self._expect("}")
        return Event(channel=tok[1], predicate=predicate)

    # Predicates: implies < or < and < not < atoms.
    def _pred(self):
        left = self._pred_or()
        tok = self._peek()
        if tok is not None and tok[1] == "implies":
            self._next()
            right = self._pred()
            return PredOp("implies", (left, right))
        return left

    def _pred_or(self):
        items = [self._pred_and()]
        while self._peek() is not None and self._peek()[1] == "or":
            self._next()
            items.append(self._pred_and())
        node = items[0]
        for item in items[1:]:
            node = PredOp("or", (node, item))
        return node

    def _pred_and(self):
        items = [self._pred_not()]
        while self._peek() is not None and self._peek()[1] == "and":
            self._next()
            items.append(self._pred_not())
        node = items[0]
        for item in items[1:]:
            node = PredOp("and", (node, item))
        return node

    def _pred_not(self):
        tok = self._peek()
        if tok is not None and tok[1] == "not":
            self._next()
            return PredOp("not", (self._pred_not(),))
        return self._pred_atom()

    def _pred_atom(self):
        tok = self._peek()
        if tok is None:
            raise HplError("unexpected end of predicate", len(self.text))
        if tok[1] == "(":
            self._next()
            inner = self._pred()
            self._expect(")")
            return inner
        left = self._term()
        nxt = self._peek()
        if nxt is not None and nxt[1] in ("=", "!=", "<", "<=", ">", ">="):
            op = self._next()[1]
            right = self._term()
            return Cmp(op, left, right)
        if nxt is not None and nxt[1] == "in":
            self._next()
            opener = self._next()
            if opener[1] == "{":
                values = [self._literal_value()]
                while self._peek() is not None and self._peek()[1] == ",":
                    self._next()
                    values.append(self._literal_value())
                self._expect("}")
                return InSet(left, tuple(values))
            if opener[1] == "[":
                low = self._literal_value()
                self._expect(",")
                high = self._literal_value()
                self._expect("]")
                return InRange(left, low, high)
            raise HplError(f"expected '{{' or '[' after in, found {opener[1]!r}", opener[2])
        return left

    def _term(self):
        tok = self._peek()
        if tok is None:
            raise HplError("unexpected end of predicate", len(self.text))
        if tok[0] == "number" or tok[0] == "string" or tok[1] in ("true", "false"):
            return Lit(self._literal_value())
        if tok[0] == "name":
            return self._field_ref()
        raise HplError(f"unexpected token {tok[1]!r}", tok[2])

    def _literal_value(self):
        tok = self._next()
        if tok[0] == "number":
            return float(tok[1]) if "." in tok[1] else int(tok[1])
        if tok[0] == "string":
            return tok[1][1:-1]
        if tok[1] in ("true", "false"):
            return tok[1] == "true"
        raise HplError(f"expected a literal, found {tok[1]!r}", tok[2])

    def _field_ref(self) -> FieldRef:
        tok = self._next()
        path: list[object] = [tok[1]]
        while True:
            nxt = self._peek()
            if nxt is not None and nxt[1] == ".":
                self._next()
                seg = self._next()
                if seg[0] != "name":
                    raise HplError(f"expected field name, found {seg[1]!r}", seg[2])
                path.append(seg[1])
            elif nxt is not None and nxt[1] == "[":
                self._next()
                idx = self._next()
                if idx[0] != "number" or "." in idx[1] or idx[1].startswith("-"):
                    raise HplError(f"array index must be a non-negative integer", idx[2])
                self._expect("]")
                path.append(int(idx[1]))
            else:
                break
        return FieldRef(tuple(path))


def parse_property(text: str) -> HplProperty:
    """Parse one property; raises HplError with position on bad syntax."""
    return _HplParser(text.strip()).parse()


def load_properties(path: str, issues: IssueLog | None = None) -> list[tuple[str, HplProperty]]:
    """Load a properties file: one property per line, '#' comments.

    Returns (identity, property) pairs where identity is "<file>:<line>".
    """
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            ident = f"{path}:{lineno}"
            try:
                out.append((ident, parse_property(stripped)))
            except HplError as exc:
                if issues is None:
                    raise HplError(f"{ident}: {exc}") from exc
                issues.add(Category.HPL, "syntax", Severity.ERROR, f"file:{ident}", str(exc))
    return out


# --- Type checking ---------------------------------------------------------------


def _category_of(ftype: FieldType) -> str:
    if ftype.is_array:
        return "array"
    if ftype.base == "bool":
        return "bool"
    if ftype.base in NUMERIC_TYPES:
        return "numeric"
    if ftype.base == "string":
        return "string"
    return "message"


def _literal_category(value: object) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "numeric"
    return "string"


class _PredChecker:
    def __init__(self, msg: MessageTypeDef, index: dict[str, MessageTypeDef], report) -> None:
        self.msg = msg
        self.index = index
        self.report = report

    def check(self, pred: object) -> None:
        if isinstance(pred, PredOp):
            for item in pred.items:
                self.check(item)
            return
        if isinstance(pred, Cmp):
            left = self._operand_category(pred.left)
            right = self._operand_category(pred.right)
            if left and right and left != right:
                self.report(f"cannot compare {left} with {right} in {pred}")
            elif left in ("array", "message"):
                self.report(f"cannot compare non-scalar field in {pred}")
            return
        if isinstance(pred, InSet):
            item_cat = self._operand_category(pred.item)
            for value in pred.values:
                if item_cat and _literal_category(value) != item_cat:
                    self.report(f"set member {value!r} does not match {item_cat} in {pred}")
            return
        if isinstance(pred, InRange):
            item_cat = self._operand_category(pred.item)
            if item_cat and item_cat != "numeric":
                self.report(f"range membership needs a numeric field in {pred}")
            for value in (pred.low, pred.high):
                if _literal_category(value) != "numeric":
                    self.report(f"range bound {value!r} is not numeric in {pred}")
            return
        if isinstance(pred, FieldRef):
            category = self._operand_category(pred)
            if category and category != "bool":
                self.report(f"bare field {pred} used as a condition is not bool")
            return
        # Bare literals are fine.

    def _operand_category(self, operand: object) -> str | None:
        if isinstance(operand, Lit):
            return _literal_category(operand.value)
        if isinstance(operand, FieldRef):
            try:
                ftype = field_type_at(self.msg, list(operand.path), self.index)
            except MsgError as exc:
                self.report(str(exc))
                return None
            return _category_of(ftype)
        return None


def typecheck_property(
    prop: HplProperty,
    graph: RosGraph | None,
    msg_index: dict[str, MessageTypeDef],
    issues: IssueLog | None = None,
    ident: str = "",
) -> list:
    """Check channels against the graph and predicates against message types.

    All findings are issues: a channel absent from the graph is a warning
    (it may have been pruned by conditions); bad fields or operand types
    are errors.
    """
    log = IssueLog()
    label = ident or str(prop)

    for event in (prop.scope.activator, prop.scope.terminator, prop.pattern.event_a, prop.pattern.event_b):
        if event is None:
            continue
        msg_type: str | None = None
        if graph is not None:
            topic = graph.topic_by_name(event.channel)
            if topic is None:
                log.add(
                    Category.HPL,
                    "unknown-channel",
                    Severity.WARNING,
                    entity_scope(event.channel),
                    f"{label}: channel {event.channel} is not a topic in the graph",
                )
            else:
                msg_type = topic.msg_type
                if msg_type is None:
                    log.add(
                        Category.HPL,
                        "untyped-channel",
                        Severity.WARNING,
                        entity_scope(event.channel),
                        f"{label}: channel {event.channel} has unknown message type",
                    )
        if event.predicate is not None and msg_type is not None:
            msg = msg_index.get(msg_type)
            if msg is None:
                log.add(
                    Category.HPL,
                    "unknown-type",
                    Severity.WARNING,
                    entity_scope(event.channel),
                    f"{label}: message type {msg_type} is not defined in the workspace",
                )
                continue

            def report(message: str, channel: str = event.channel) -> None:
                log.add(
                    Category.HPL,
                    "type-error",
                    Severity.ERROR,
                    entity_scope(channel),
                    f"{label}: {message}",
                )

            _PredChecker(msg, msg_index, report).check(event.predicate)

    if issues is not None:
        issues.extend(log)
    return log.finalize()
