"""Project file parsing: analysis targets, configurations and extraction hints."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .issues import Category, IssueLog, Severity, file_scope

HINT_KINDS = ("publishers", "subscribers", "servers", "clients", "parameters")

_KNOWN_TOP_KEYS = {"project", "packages", "configurations"}
_KNOWN_CONFIG_KEYS = {"launch", "hints"}
_KNOWN_HINT_ENTRY_KEYS = {"topic", "service", "param", "msg_type", "srv_type", "queue_size", "value"}


class ProjectError(Exception):
    """Malformed or invalid project file."""


@dataclass(frozen=True)
class Hint:
    """One user-supplied model fact: a link the extraction may have missed."""

    kind: str  # one of HINT_KINDS
    name: str  # topic, service or parameter name
    type_name: str | None = None  # "pkg/Type"
    queue_size: int | None = None
    value: object | None = None  # parameter hints only

    def to_mapping(self) -> dict:
        out: dict = {}
        if self.kind in ("publishers", "subscribers"):
            out["topic"] = self.name
            if self.type_name is not None:
                out["msg_type"] = self.type_name
        elif self.kind in ("servers", "clients"):
            out["service"] = self.name
            if self.type_name is not None:
                out["srv_type"] = self.type_name
        else:
            out["param"] = self.name
            if self.value is not None:
                out["value"] = self.value
        if self.queue_size is not None:
            out["queue_size"] = self.queue_size
        return out


@dataclass
class NodeHints:
    """Optional per-node hint lists, keyed by link kind; any subset may be absent."""

    hints: dict[str, list[Hint]] = field(default_factory=dict)

    def all_hints(self) -> list[Hint]:
        return [h for kind in HINT_KINDS for h in self.hints.get(kind, [])]

    def to_mapping(self) -> dict:
        return {kind: [h.to_mapping() for h in hs] for kind, hs in self.hints.items() if hs}


@dataclass
class HintSet:
    """Hints grouped by global node name (names begin with '/')."""

    nodes: dict[str, NodeHints] = field(default_factory=dict)

    def for_node(self, name: str) -> NodeHints:
        return self.nodes.get(name, NodeHints())

    def to_mapping(self) -> dict:
        return {"nodes": {name: nh.to_mapping() for name, nh in self.nodes.items()}}


@dataclass
class ConfigSpec:
    """A named application: an ordered list of launch files plus hints."""

    launch_files: list[str]
    hints: HintSet = field(default_factory=HintSet)

    def to_mapping(self) -> dict:
        out: dict = {"launch": list(self.launch_files)}
        if self.hints.nodes:
            out["hints"] = self.hints.to_mapping()
        return out


@dataclass
class ProjectSpec:
    """Validated project file contents."""

    project_name: str
    packages: list[str]
    configurations: dict[str, ConfigSpec] = field(default_factory=dict)

    def to_mapping(self) -> dict:
        return {
            "project": self.project_name,
            "packages": list(self.packages),
            "configurations": {
                name: cfg.to_mapping() for name, cfg in self.configurations.items()
            },
        }


def _scan_for_anchors(text: str, path: str) -> None:
    # Anchors and aliases are rejected: inputs must be a plain data subset.
    try:
        for event in yaml.parse(text):
            if isinstance(event, yaml.AliasEvent):
                mark = event.start_mark
                raise ProjectError(f"{path}:{mark.line + 1}: aliases are not supported")
            anchor = getattr(event, "anchor", None)
            if anchor is not None and not isinstance(event, yaml.AliasEvent):
                mark = event.start_mark
                raise ProjectError(f"{path}:{mark.line + 1}: anchors are not supported")
    except yaml.YAMLError as exc:
        raise _as_parse_error(exc, path)


def _as_parse_error(exc: yaml.YAMLError, path: str) -> ProjectError:
    mark = getattr(exc, "problem_mark", None)
    if mark is not None:
        return ProjectError(f"{path}:{mark.line + 1}: {getattr(exc, 'problem', exc)}")
    return ProjectError(f"{path}: {exc}")


def _parse_hint_entry(kind: str, raw: object, where: str, issues: IssueLog) -> Hint:
    if not isinstance(raw, dict):
        raise ProjectError(f"{where}: hint entries must be mappings")
    for key in raw:
        if key not in _KNOWN_HINT_ENTRY_KEYS:
            issues.add(
                Category.INDEXING,
                "unknown-key",
                Severity.WARNING,
                where,
                f"unknown hint key {key!r} ignored",
            )
    if kind in ("publishers", "subscribers"):
        name = raw.get("topic")
        type_name = raw.get("msg_type")
    elif kind in ("servers", "clients"):
        name = raw.get("service")
        type_name = raw.get("srv_type")
    else:
        name = raw.get("param")
        type_name = None
    if not isinstance(name, str) or not name:
        raise ProjectError(f"{where}: hint entry needs a name for kind {kind!r}")
    queue = raw.get("queue_size")
    if queue is not None and (not isinstance(queue, int) or isinstance(queue, bool) or queue < 0):
        raise ProjectError(f"{where}: queue_size must be a non-negative integer")
    if type_name is not None and not isinstance(type_name, str):
        raise ProjectError(f"{where}: type must be a string")
    return Hint(kind=kind, name=name, type_name=type_name, queue_size=queue, value=raw.get("value"))


def _parse_hints(raw: object, where: str, issues: IssueLog) -> HintSet:
    hints = HintSet()
    if raw is None:
        return hints
    if not isinstance(raw, dict):
        raise ProjectError(f"{where}: hints must be a mapping")
    for key in raw:
        if key != "nodes":
            issues.add(
                Category.INDEXING,
                "unknown-key",
                Severity.WARNING,
                where,
                f"unknown hints key {key!r} ignored",
            )
    nodes = raw.get("nodes") or {}
    if not isinstance(nodes, dict):
        raise ProjectError(f"{where}: hints.nodes must be a mapping")
    for node_name, kinds in nodes.items():
        if not isinstance(node_name, str) or not node_name.startswith("/"):
            raise ProjectError(f"{where}: hint node names must be global (begin with '/')")
        node_hints = NodeHints()
        if kinds is None:
            kinds = {}
        if not isinstance(kinds, dict):
            raise ProjectError(f"{where}: hints for {node_name} must be a mapping")
        for kind, entries in kinds.items():
            if kind not in HINT_KINDS:
                issues.add(
                    Category.INDEXING,
                    "unknown-key",
                    Severity.WARNING,
                    where,
                    f"unknown hint kind {kind!r} for {node_name} ignored",
                )
                continue
            if not isinstance(entries, list):
                raise ProjectError(f"{where}: {node_name}.{kind} must be a list")
            node_hints.hints[kind] = [
                _parse_hint_entry(kind, e, f"{where}:{node_name}.{kind}", issues) for e in entries
            ]
        hints.nodes[node_name] = node_hints
    return hints


def parse_project_mapping(data: object, where: str, issues: IssueLog | None = None) -> ProjectSpec:
    """Validate an already-parsed project mapping (round-trip entry point)."""
    issues = issues if issues is not None else IssueLog()
    if not isinstance(data, dict):
        raise ProjectError(f"{where}: project file must be a mapping")
    for key in data:
        if key not in _KNOWN_TOP_KEYS:
            issues.add(
                Category.INDEXING,
                "unknown-key",
                Severity.WARNING,
                where,
                f"unknown top-level key {key!r} ignored",
            )
    name = data.get("project")
    if not isinstance(name, str) or not name:
        raise ProjectError(f"{where}: missing or empty required key 'project'")
    packages = data.get("packages")
    if not isinstance(packages, list) or not all(isinstance(p, str) for p in packages):
        raise ProjectError(f"{where}: missing required key 'packages' (list of names)")
    seen: set[str] = set()
    for pkg in packages:
        if "/" in pkg or "\\" in pkg or not pkg:
            raise ProjectError(f"{where}: invalid package name {pkg!r}")
        if pkg in seen:
            raise ProjectError(f"{where}: duplicate package {pkg!r}")
        seen.add(pkg)
    configurations: dict[str, ConfigSpec] = {}
    raw_configs = data.get("configurations") or {}
    if not isinstance(raw_configs, dict):
        raise ProjectError(f"{where}: configurations must be a mapping")
    for cfg_name, raw_cfg in raw_configs.items():
        cfg_where = f"{where}:configurations.{cfg_name}"
        if not isinstance(raw_cfg, dict):
            raise ProjectError(f"{cfg_where}: must be a mapping")
        for key in raw_cfg:
            if key not in _KNOWN_CONFIG_KEYS:
                issues.add(
                    Category.INDEXING,
                    "unknown-key",
                    Severity.WARNING,
                    cfg_where,
                    f"unknown configuration key {key!r} ignored",
                )
        launch = raw_cfg.get("launch")
        if not isinstance(launch, list) or not launch or not all(isinstance(p, str) for p in launch):
            raise ProjectError(f"{cfg_where}: 'launch' must be a non-empty list of paths")
        for launch_path in launch:
            pkg = launch_path.split("/", 1)[0]
            if "/" not in launch_path or not pkg:
                raise ProjectError(
                    f"{cfg_where}: launch path {launch_path!r} must have form <package>/<path>"
                )
            if pkg not in seen:
                raise ProjectError(
                    f"{cfg_where}: launch path {launch_path!r} references package "
                    f"{pkg!r} outside the package list"
                )
        hints = _parse_hints(raw_cfg.get("hints"), cfg_where, issues)
        configurations[cfg_name] = ConfigSpec(launch_files=list(launch), hints=hints)
    return ProjectSpec(project_name=name, packages=list(packages), configurations=configurations)


def parse_project_file(path: str | Path, issues: IssueLog | None = None) -> ProjectSpec:
    """Parse and validate a project file; unknown keys warn, they never fail."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    _scan_for_anchors(text, str(path))
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise _as_parse_error(exc, str(path))
    issues = issues if issues is not None else IssueLog()
    return parse_project_mapping(data, file_scope(str(path)), issues)


def dump_project(spec: ProjectSpec) -> str:
    """Serialize a ProjectSpec so that re-parsing yields an equal value."""
    return yaml.safe_dump(spec.to_mapping(), sort_keys=False, default_flow_style=False)
