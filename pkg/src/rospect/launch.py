"""Launch file interpretation: which nodes start, under which names and conditions."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from xml.parsers import expat

from .issues import Category, IssueLog, Severity, file_scope
from .project import ConfigSpec
from .workspace import Package


class LaunchError(Exception):
    """Fatal problems interpreting a configuration's launch files."""


class NameError_(Exception):
    """Graph-name resolution failure (private name without node context)."""


# A sentinel for values that cannot be determined statically.
class _Unknown:
    def __repr__(self) -> str:
        return "UNKNOWN"

    def __deepcopy__(self, memo: dict) -> "_Unknown":
        return self


UNKNOWN = _Unknown()


@dataclass(frozen=True)
class Condition:
    """Trivially true, or an opaque expression with its source location."""

    kind: str  # "always" or "expr"
    text: str = ""
    loc: tuple[str, int] | None = None

    def __post_init__(self) -> None:
        if self.kind == "always" and self.text:
            raise ValueError("always-conditions carry no text")

    @property
    def is_always(self) -> bool:
        return self.kind == "always"


ALWAYS = Condition("always")


def _conjoin(a: Condition, b: Condition) -> Condition:
    if a.is_always:
        return b
    if b.is_always:
        return a
    return Condition("expr", f"{a.text} and {b.text}", a.loc or b.loc)


@dataclass
class LaunchedNode:
    name: str  # resolved global graph name
    package: str
    node_type: str  # executable / target name
    namespace: str
    remaps: dict[str, str] = field(default_factory=dict)
    condition: Condition = ALWAYS
    source_loc: tuple[str, int] | None = None


@dataclass
class LaunchInterpretation:
    nodes: list[LaunchedNode] = field(default_factory=list)
    parameters: list[tuple[str, object, Condition]] = field(default_factory=list)
    arg_values: dict[str, object] = field(default_factory=dict)
    includes: list[Path] = field(default_factory=list)


def _normalize(name: str) -> str:
    parts = [p for p in name.split("/") if p]
    return "/" + "/".join(parts)


def resolve_name(
    name: str,
    namespace: str = "/",
    node_name: str | None = None,
    remaps: dict[str, str] | None = None,
) -> str:
    """Resolve a graph name to global form, then apply remappings once.

    Global names are invariant; '~x' resolves against the node name; relative
    names resolve against the namespace. Remapping is by exact match on the
    resolved name.
    """
    if not namespace.startswith("/"):
        raise NameError_(f"namespace {namespace!r} is not global")
    if name.startswith("/"):
        resolved = _normalize(name)
    elif name.startswith("~"):
        if node_name is None:
            raise NameError_(f"private name {name!r} used without a node context")
        resolved = _normalize(node_name + "/" + name[1:])
    else:
        resolved = _normalize(namespace + "/" + name)
    if remaps:
        resolved = remaps.get(resolved, resolved)
    return resolved


# --- XML with line numbers -------------------------------------------------


@dataclass
class _XmlElement:
    tag: str
    attrib: dict[str, str]
    line: int
    children: list["_XmlElement"] = field(default_factory=list)
    text: str = ""


def _parse_xml(path: Path) -> _XmlElement:
    parser = expat.ParserCreate()
    root: list[_XmlElement] = []
    stack: list[_XmlElement] = []

    def start(tag: str, attrs: dict[str, str]) -> None:
        elem = _XmlElement(tag=tag, attrib=attrs, line=parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(elem)
        else:
            root.append(elem)
        stack.append(elem)

    def end(_tag: str) -> None:
        stack.pop()

    def chardata(data: str) -> None:
        if stack:
            stack[-1].text += data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chardata
    try:
        parser.Parse(path.read_bytes(), True)
    except expat.ExpatError as exc:
        raise LaunchError(f"{path}:{exc.lineno}: malformed XML: {expat.errors.messages[exc.code]}")
    if not root:
        raise LaunchError(f"{path}: empty document")
    return root[0]


# --- substitution arguments ------------------------------------------------

_SUBST_RE = re.compile(r"\$\(([^$()]*)\)")


def _resolve_substitutions(
    value: str,
    args: dict[str, object],
    packages: dict[str, Package],
) -> object:
    """Expand $(arg), $(find), $(env); $(eval) and unresolved args yield UNKNOWN."""

    unresolved = False

    def repl(match: re.Match) -> str:
        nonlocal unresolved
        inner = match.group(1).strip()
        parts = inner.split(None, 1)
        kind = parts[0] if parts else ""
        rest = parts[1] if len(parts) > 1 else ""
        if kind == "arg":
            if rest in args and args[rest] is not UNKNOWN:
                return str(args[rest])
            unresolved = True
            return ""
        if kind == "find":
            pkg = packages.get(rest)
            if pkg is not None:
                return str(pkg.root)
            unresolved = True
            return ""
        if kind == "env":
            if rest in os.environ:
                return os.environ[rest]
            unresolved = True
            return ""
        # $(eval ...) and anything else is never evaluated.
        unresolved = True
        return ""

    expanded = _SUBST_RE.sub(repl, value)
    return UNKNOWN if unresolved else expanded


_TRUE_LITERALS = {"true", "1"}
_FALSE_LITERALS = {"false", "0"}


@dataclass
class _Scope:
    namespace: str
    condition: Condition
    remaps: dict[str, str]
    args: dict[str, object]


class _Interpreter:
    def __init__(self, packages: list[Package], issues: IssueLog) -> None:
        self.packages = {p.name: p for p in packages}
        self.issues = issues
        self.result = LaunchInterpretation()
        self._include_stack: list[Path] = []

    # Condition handling: literal booleans prune or keep; everything else
    # stays as a conditional entity.
    def _evaluate_condition(self, elem: _XmlElement, scope: _Scope, path: Path) -> Condition | None:
        condition = ALWAYS
        for attr, negate in (("if", False), ("unless", True)):
            if attr not in elem.attrib:
                continue
            raw = elem.attrib[attr]
            value = _resolve_substitutions(raw, scope.args, self.packages)
            if value is not UNKNOWN and str(value).strip().lower() in _TRUE_LITERALS:
                if negate:
                    return None  # pruned
                continue
            if value is not UNKNOWN and str(value).strip().lower() in _FALSE_LITERALS:
                if not negate:
                    return None
                continue
            condition = _conjoin(
                condition,
                Condition("expr", f"{attr} {raw}", (str(path), elem.line)),
            )
        return _conjoin(scope.condition, condition)

    def _resolve_attr(self, elem: _XmlElement, attr: str, scope: _Scope) -> object:
        raw = elem.attrib.get(attr)
        if raw is None:
            return None
        return _resolve_substitutions(raw, scope.args, self.packages)

    def interpret_file(self, path: Path, scope: _Scope) -> None:
        path = path.resolve()
        if path in self._include_stack:
            cycle = " -> ".join(str(p) for p in self._include_stack + [path])
            raise LaunchError(f"cyclic include: {cycle}")
        if not path.is_file():
            raise LaunchError(f"launch file {path} not found")
        self._include_stack.append(path)
        try:
            root = _parse_xml(path)
            if root.tag != "launch":
                raise LaunchError(f"{path}:{root.line}: root element must be <launch>")
            self._walk_children(root, scope, path)
        finally:
            self._include_stack.pop()

    def _walk_children(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        for child in elem.children:
            self._dispatch(child, scope, path)

    def _dispatch(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        handler = getattr(self, f"_handle_{elem.tag}", None)
        if handler is None:
            self.issues.add(
                Category.MODEL,
                "unsupported-element",
                Severity.INFO,
                file_scope(str(path), elem.line),
                f"launch element <{elem.tag}> is not interpreted",
            )
            return
        handler(elem, scope, path)

    def _handle_arg(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        if self._evaluate_condition(elem, scope, path) is None:
            return
        name = elem.attrib.get("name")
        if not name:
            raise LaunchError(f"{path}:{elem.line}: <arg> needs a name")
        if "value" in elem.attrib:
            scope.args[name] = self._resolve_attr(elem, "value", scope)
        elif "default" in elem.attrib:
            # Later defaults never override earlier assignments.
            if name not in scope.args:
                scope.args[name] = self._resolve_attr(elem, "default", scope)
        else:
            scope.args.setdefault(name, UNKNOWN)
        if len(self._include_stack) == 1:
            self.result.arg_values[name] = scope.args[name]

    def _handle_group(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        condition = self._evaluate_condition(elem, scope, path)
        if condition is None:
            return
        namespace = scope.namespace
        ns = self._resolve_attr(elem, "ns", scope)
        if ns is UNKNOWN:
            self.issues.add(
                Category.MODEL,
                "unresolved-namespace",
                Severity.WARNING,
                file_scope(str(path), elem.line),
                "group namespace could not be resolved; contents skipped",
            )
            return
        if ns:
            namespace = resolve_name(str(ns), scope.namespace)
        inner = _Scope(namespace, condition, dict(scope.remaps), scope.args)
        self._walk_children(elem, inner, path)

    def _handle_remap(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        if self._evaluate_condition(elem, scope, path) is None:
            return
        source = self._resolve_attr(elem, "from", scope)
        target = self._resolve_attr(elem, "to", scope)
        if source in (None, UNKNOWN) or target in (None, UNKNOWN):
            self.issues.add(
                Category.MODEL,
                "unresolved-remap",
                Severity.WARNING,
                file_scope(str(path), elem.line),
                "remap endpoints could not be resolved; remap ignored",
            )
            return
        key = resolve_name(str(source), scope.namespace)
        scope.remaps[key] = resolve_name(str(target), scope.namespace)

    def _handle_param(self, elem: _XmlElement, scope: _Scope, path: Path, node: LaunchedNode | None = None) -> None:
        condition = self._evaluate_condition(elem, scope, path)
        if condition is None:
            return
        name = elem.attrib.get("name")
        if not name:
            raise LaunchError(f"{path}:{elem.line}: <param> needs a name")
        value = self._resolve_attr(elem, "value", scope)
        if value is None:
            value = UNKNOWN  # command= / textfile= forms are not evaluated
        if node is not None:
            global_name = resolve_name(
                name if name.startswith(("/", "~")) else "~" + name,
                node.namespace,
                node.name,
            )
        else:
            global_name = resolve_name(name, scope.namespace)
        self.result.parameters.append((global_name, value, condition))

    def _handle_rosparam(self, elem: _XmlElement, scope: _Scope, path: Path, node: LaunchedNode | None = None) -> None:
        condition = self._evaluate_condition(elem, scope, path)
        if condition is None:
            return
        name = elem.attrib.get("param")
        text = elem.text.strip()
        if name and text and "\n" not in text and ":" not in text:
            value: object = text
        else:
            # Structured dumps become one unknown-valued subtree.
            value = UNKNOWN
            name = name or ""
        base = node.name if node is not None else scope.namespace
        global_name = resolve_name(name or ".", base) if name else _normalize(base)
        self.result.parameters.append((global_name, value, condition))

    def _handle_node(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        condition = self._evaluate_condition(elem, scope, path)
        if condition is None:
            return
        for attr in ("machine", "launch-prefix"):
            if attr in elem.attrib:
                self.issues.add(
                    Category.MODEL,
                    "ignored-attribute",
                    Severity.INFO,
                    file_scope(str(path), elem.line),
                    f"node attribute {attr!r} ignored",
                )
        name = self._resolve_attr(elem, "name", scope)
        pkg = self._resolve_attr(elem, "pkg", scope)
        node_type = self._resolve_attr(elem, "type", scope)
        ns = self._resolve_attr(elem, "ns", scope)
        if name in (None, UNKNOWN) or pkg in (None, UNKNOWN) or node_type in (None, UNKNOWN):
            self.issues.add(
                Category.MODEL,
                "unresolved-node",
                Severity.WARNING,
                file_scope(str(path), elem.line),
                "node with unresolvable name/pkg/type skipped",
            )
            return
        namespace = scope.namespace
        if ns not in (None, UNKNOWN) and ns:
            namespace = resolve_name(str(ns), scope.namespace)
        elif ns is UNKNOWN:
            self.issues.add(
                Category.MODEL,
                "unresolved-namespace",
                Severity.WARNING,
                file_scope(str(path), elem.line),
                f"namespace of node {name!r} unresolved; using parent namespace",
            )
        node = LaunchedNode(
            name=resolve_name(str(name), namespace),
            package=str(pkg),
            node_type=str(node_type),
            namespace=namespace,
            remaps=dict(scope.remaps),
            condition=condition,
            source_loc=(str(path), elem.line),
        )
        node_scope = _Scope(namespace, condition, node.remaps, scope.args)
        for child in elem.children:
            if child.tag == "remap":
                self._handle_remap(child, node_scope, path)
            elif child.tag == "param":
                self._handle_param(child, node_scope, path, node=node)
            elif child.tag == "rosparam":
                self._handle_rosparam(child, node_scope, path, node=node)
            else:
                self.issues.add(
                    Category.MODEL,
                    "unsupported-element",
                    Severity.INFO,
                    file_scope(str(path), child.line),
                    f"node child <{child.tag}> is not interpreted",
                )
        self.result.nodes.append(node)

    def _handle_include(self, elem: _XmlElement, scope: _Scope, path: Path) -> None:
        condition = self._evaluate_condition(elem, scope, path)
        if condition is None:
            return
        file_attr = self._resolve_attr(elem, "file", scope)
        if file_attr in (None, UNKNOWN):
            self.issues.add(
                Category.MODEL,
                "unresolved-include",
                Severity.WARNING,
                file_scope(str(path), elem.line),
                "include with unresolvable file skipped",
            )
            return
        namespace = scope.namespace
        ns = self._resolve_attr(elem, "ns", scope)
        if ns not in (None, UNKNOWN) and ns:
            namespace = resolve_name(str(ns), scope.namespace)
        passed: dict[str, object] = {}
        for child in elem.children:
            if child.tag != "arg":
                continue
            arg_name = child.attrib.get("name")
            if not arg_name:
                continue
            if "value" in child.attrib:
                passed[arg_name] = _resolve_substitutions(
                    child.attrib["value"], scope.args, self.packages
                )
            elif "default" in child.attrib:
                passed.setdefault(
                    arg_name,
                    _resolve_substitutions(child.attrib["default"], scope.args, self.packages),
                )
        include_path = Path(str(file_attr))
        self.result.includes.append(include_path)
        inner = _Scope(namespace, condition, dict(scope.remaps), passed)
        self.interpret_file(include_path, inner)


def interpret_launch(
    config: ConfigSpec,
    packages: list[Package],
    issues: IssueLog | None = None,
) -> LaunchInterpretation:
    """Interpret a configuration's launch files into started nodes and parameters."""
    issues = issues if issues is not None else IssueLog()
    interp = _Interpreter(packages, issues)
    for launch_ref in config.launch_files:
        pkg_name, _, rel = launch_ref.partition("/")
        pkg = interp.packages.get(pkg_name)
        if pkg is None:
            raise LaunchError(f"launch file {launch_ref!r}: package {pkg_name!r} not indexed")
        scope = _Scope(namespace="/", condition=ALWAYS, remaps={}, args={})
        interp.interpret_file(pkg.root / rel, scope)
    return interp.result
