"""Report assembly and export: canonical JSON, DOT graphs, static HTML dashboard."""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from pathlib import Path

from .graph import GraphStats, RosGraph, graph_statistics, serialize_graph
from .issues import Issue, Severity
from .monitor import Trace, Verdict, trace_records


@dataclass
class Statistics:
    packages: int = 0
    source_files: int = 0
    lines_of_code: int = 0
    launch_files: int = 0
    msg_types: int = 0
    issues_total: int = 0
    issues_by_severity: dict[str, int] = field(default_factory=dict)
    graphs: dict[str, GraphStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "packages": self.packages,
            "source_files": self.source_files,
            "lines_of_code": self.lines_of_code,
            "launch_files": self.launch_files,
            "msg_types": self.msg_types,
            "issues_total": self.issues_total,
            "issues_by_severity": dict(sorted(self.issues_by_severity.items())),
            "graphs": {name: g.to_dict() for name, g in sorted(self.graphs.items())},
        }


@dataclass
class PropertyResult:
    identity: str
    property_text: str
    verdict: Verdict

    def to_dict(self) -> dict:
        out = {
            "property": self.property_text,
            "identity": self.identity,
            "verdict": self.verdict.value.value,
        }
        if self.verdict.witness is not None:
            out["witness"] = {
                "event_indices": list(self.verdict.witness.event_indices),
                "explanation": self.verdict.witness.explanation,
            }
        return out


@dataclass
class CampaignResult:
    identity: str
    property_text: str
    seed: int
    traces_run: int
    falsified: bool
    counterexample_inputs: Trace | None = None
    counterexample_observed: Trace | None = None
    shrunk: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "property": self.property_text,
            "identity": self.identity,
            "seed": self.seed,
            "traces_run": self.traces_run,
            "falsified": self.falsified,
            "shrunk": self.shrunk,
        }
        if self.counterexample_inputs is not None:
            out["counterexample"] = {
                "inputs": trace_records(self.counterexample_inputs),
                "observed": trace_records(self.counterexample_observed)
                if self.counterexample_observed is not None
                else [],
            }
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class AnalysisReport:
    project: str
    statistics: Statistics = field(default_factory=Statistics)
    issues: list[Issue] = field(default_factory=list)
    graphs: list[RosGraph] = field(default_factory=list)
    property_results: list[PropertyResult] = field(default_factory=list)
    campaign_results: list[CampaignResult] = field(default_factory=list)
    workspace_root: str | None = None

    def finalize_statistics(self) -> None:
        self.statistics.issues_total = len(self.issues)
        by_severity: dict[str, int] = {}
        for issue in self.issues:
            by_severity[issue.severity.value] = by_severity.get(issue.severity.value, 0) + 1
        self.statistics.issues_by_severity = by_severity
        self.statistics.graphs = {g.configuration: graph_statistics(g) for g in self.graphs}

    def has_error_issues(self) -> bool:
        return any(i.severity is Severity.ERROR for i in self.issues)

    def to_dict(self) -> dict:
        return {
            "project": self.project,
            "statistics": self.statistics.to_dict(),
            "issues": [i.to_dict() for i in self.issues],
            "graphs": [serialize_graph(g, base=self.workspace_root) for g in self.graphs],
            "property_results": [r.to_dict() for r in self.property_results],
            "campaign_results": [r.to_dict() for r in self.campaign_results],
        }


def _canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def export_json(report: AnalysisReport, directory: str | Path) -> list[Path]:
    """Write report.json plus one graphs/<config>.json per configuration.

    Serialization is canonical: keys sorted, entities sorted by name, no
    timestamps; identical runs are byte-identical.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    report_path = directory / "report.json"
    report_path.write_text(_canonical_json(report.to_dict()), encoding="utf-8")
    written.append(report_path)
    if report.graphs:
        graph_dir = directory / "graphs"
        graph_dir.mkdir(exist_ok=True)
        for graph in report.graphs:
            path = graph_dir / f"{graph.configuration or 'default'}.json"
            path.write_text(
                _canonical_json(serialize_graph(graph, base=report.workspace_root)),
                encoding="utf-8",
            )
            written.append(path)
    return written


# --- DOT ---------------------------------------------------------------------


def _dot_quote(name: str) -> str:
    return '"' + name.replace('"', '\\"') + '"'


def export_dot(graph: RosGraph, highlight: set[str] | None = None) -> str:
    """Graph description text: nodes as ellipses, channels as boxes.

    Conditional entities are dashed; entities named in ``highlight`` (for
    error-severity issues) get a red highlight.
    """
    highlight = highlight or set()
    lines = [f"digraph {_dot_quote(graph.configuration or 'rosgraph')} {{"]
    lines.append("  rankdir=LR;")
    for node in sorted(graph.nodes, key=lambda n: n.name):
        attrs = ["shape=ellipse"]
        if node.conditions:
            attrs.append("style=dashed")
        if node.name in highlight:
            attrs.append("color=red")
            attrs.append("penwidth=2")
        lines.append(f"  {_dot_quote(node.name)} [{', '.join(attrs)}];")
    for res in sorted(list(graph.topics) + list(graph.services), key=lambda r: (r.kind, r.name)):
        attrs = ["shape=box"]
        if res.conditions:
            attrs.append("style=dashed")
        if res.name in highlight:
            attrs.append("color=red")
            attrs.append("penwidth=2")
        label = res.name if res.msg_type is None else f"{res.name}\\n{res.msg_type}"
        attrs.append(f"label={_dot_quote(label)}")
        lines.append(f"  {_dot_quote(res.kind + ':' + res.name)} [{', '.join(attrs)}];")
    for link in sorted(graph.links, key=lambda l: (l.node, l.resource, l.role)):
        if link.role == "publisher":
            edge = (link.node, "topic:" + link.resource)
        elif link.role == "subscriber":
            edge = ("topic:" + link.resource, link.node)
        elif link.role == "client":
            edge = (link.node, "service:" + link.resource)
        elif link.role == "server":
            edge = ("service:" + link.resource, link.node)
        else:
            continue  # parameter links are not drawn
        attrs = []
        if link.conditions:
            attrs.append("style=dashed")
        entity = f"{link.node} {link.role} {link.resource}"
        if entity in highlight:
            attrs.append("color=red")
            attrs.append("penwidth=2")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_dot_quote(edge[0])} -> {_dot_quote(edge[1])}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def highlight_entities(report: AnalysisReport) -> set[str]:
    """Entity names referenced by error-severity issues."""
    out = set()
    for issue in report.issues:
        if issue.severity is Severity.ERROR and issue.scope.startswith("entity:"):
            out.add(issue.scope[len("entity:") :])
    return out


# --- history ------------------------------------------------------------------


def append_history(report: AnalysisReport, directory: str | Path) -> list[dict]:
    """Append this run's statistics to the local history file; returns all runs.

    Runs are keyed by ordinal, not wall-clock time, to keep outputs
    deterministic.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "history.jsonl"
    runs: list[dict] = []
    if path.is_file():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                runs.append(json.loads(line))
    entry = {
        "run": len(runs) + 1,
        "issues": report.statistics.issues_total,
        "issues_by_severity": dict(sorted(report.statistics.issues_by_severity.items())),
        "nodes": sum(g.nodes for g in report.statistics.graphs.values()),
        "topics": sum(g.topics for g in report.statistics.graphs.values()),
        "lines_of_code": report.statistics.lines_of_code,
    }
    runs.append(entry)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return runs


# --- HTML ---------------------------------------------------------------------

_PAGE_STYLE = """
body { font-family: sans-serif; margin: 2em; color: #222; }
h1, h2 { color: #123; }
table { border-collapse: collapse; margin: 1em 0; }
td, th { border: 1px solid #aaa; padding: 0.3em 0.8em; text-align: left; }
th { background: #eef; }
.panel { display: inline-block; vertical-align: top; margin: 0 2em 1em 0; }
.severity-error { color: #a00; font-weight: bold; }
.severity-warning { color: #a60; }
.severity-info { color: #07a; }
img { max-width: 100%; border: 1px solid #ccc; margin: 0.5em 0; }
pre { background: #f5f5f5; padding: 0.8em; overflow-x: auto; }
"""


def _stats_panel(stats: Statistics) -> str:
    rows = [
        ("packages", stats.packages),
        ("source files", stats.source_files),
        ("lines of code", stats.lines_of_code),
        ("launch files", stats.launch_files),
        ("message types", stats.msg_types),
    ]
    body = "".join(f"<tr><td>{k}</td><td>{v}</td></tr>" for k, v in rows)
    return f"<div class='panel'><h2>Source statistics</h2><table>{body}</table></div>"


def _issues_panel(stats: Statistics) -> str:
    rows = "".join(
        f"<tr><td class='severity-{sev}'>{sev}</td><td>{count}</td></tr>"
        for sev, count in sorted(stats.issues_by_severity.items())
    )
    return (
        "<div class='panel'><h2>Analysis statistics</h2>"
        f"<table><tr><th>severity</th><th>issues</th></tr>{rows}"
        f"<tr><td>total</td><td>{stats.issues_total}</td></tr></table></div>"
    )


def _history_panel(runs: list[dict]) -> str:
    rows = "".join(
        f"<tr><td>{r['run']}</td><td>{r['issues']}</td><td>{r.get('nodes', 0)}</td>"
        f"<td>{r.get('topics', 0)}</td></tr>"
        for r in runs
    )
    return (
        "<div class='panel'><h2>History</h2>"
        f"<table><tr><th>run</th><th>issues</th><th>nodes</th><th>topics</th></tr>{rows}</table>"
        "</div>"
    )


def _issue_listing(report: AnalysisReport) -> str:
    by_category: dict[str, list[Issue]] = {}
    for issue in report.issues:
        by_category.setdefault(issue.category.value, []).append(issue)
    sections = []
    for category in sorted(by_category):
        rows = "".join(
            f"<tr><td>{html.escape(i.id)}</td>"
            f"<td class='severity-{i.severity.value}'>{i.severity.value}</td>"
            f"<td>{html.escape(i.scope)}</td><td>{html.escape(i.message)}</td></tr>"
            for i in by_category[category]
        )
        sections.append(
            f"<h3>{html.escape(category)} ({len(by_category[category])})</h3>"
            f"<table><tr><th>id</th><th>severity</th><th>scope</th><th>message</th></tr>{rows}</table>"
        )
    if not sections:
        sections.append("<p>No issues reported.</p>")
    return "<h2>Issues by category</h2>" + "".join(sections)


def _verdict_listing(report: AnalysisReport) -> str:
    if not report.property_results and not report.campaign_results:
        return ""
    parts = []
    if report.property_results:
        rows = "".join(
            f"<tr><td><code>{html.escape(r.property_text)}</code></td>"
            f"<td>{r.verdict.value.value}</td>"
            f"<td>{html.escape(r.verdict.witness.explanation) if r.verdict.witness else ''}</td></tr>"
            for r in report.property_results
        )
        parts.append(
            "<h2>Property verdicts</h2>"
            f"<table><tr><th>property</th><th>verdict</th><th>witness</th></tr>{rows}</table>"
        )
    if report.campaign_results:
        rows = "".join(
            f"<tr><td><code>{html.escape(r.property_text)}</code></td>"
            f"<td>{'falsified' if r.falsified else 'no counterexample'}</td>"
            f"<td>{r.traces_run}</td><td>{r.seed}</td></tr>"
            for r in report.campaign_results
        )
        parts.append(
            "<h2>Test campaigns</h2>"
            f"<table><tr><th>property</th><th>outcome</th><th>traces</th><th>seed</th></tr>{rows}</table>"
        )
    return "".join(parts)


def export_html(
    report: AnalysisReport,
    directory: str | Path,
    figures: dict[str, Path] | None = None,
    dot_sources: dict[str, str] | None = None,
    runs: list[dict] | None = None,
) -> Path:
    """Write the static dashboard bundle; returns the index page path.

    The page embeds pre-rendered figure files by relative path so the whole
    directory is self-contained. ``runs`` carries an already-appended history;
    left out, this run is appended here.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if runs is None:
        runs = append_history(report, directory)
    figures = figures or {}
    dot_sources = dot_sources or {}

    figure_sections = []
    for title in sorted(figures):
        rel = figures[title].relative_to(directory)
        figure_sections.append(f"<h3>{html.escape(title)}</h3><img src='{rel}' alt='{html.escape(title)}'/>")
    graph_sections = []
    for name in sorted(dot_sources):
        graph_sections.append(
            f"<h3>Graph source: {html.escape(name)}</h3><pre>{html.escape(dot_sources[name])}</pre>"
        )

    page = f"""<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>{html.escape(report.project)} analysis report</title>
<style>{_PAGE_STYLE}</style></head>
<body>
<h1>{html.escape(report.project)} analysis report</h1>
{_stats_panel(report.statistics)}
{_issues_panel(report.statistics)}
{_history_panel(runs)}
{"".join(figure_sections)}
{_issue_listing(report)}
{_verdict_listing(report)}
{"".join(graph_sections)}
</body>
</html>
"""
    index = directory / "index.html"
    index.write_text(page, encoding="utf-8")
    return index
