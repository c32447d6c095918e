"""End-to-end analysis pipeline: index, interpret, extract, build, check, report."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .extract import NodeExtraction, extract_node, fuse_hints
from .graph import RosGraph, build_graph
from .hpl import HplProperty, load_properties, typecheck_property
from .issues import Category, IssueLog, Severity, config_scope
from .launch import LaunchError, interpret_launch
from .monitor import Trace, TraceError, VerdictValue, check_trace
from .msgs import MessageTypeDef
from .project import ProjectSpec, parse_project_file
from .query import QueryError, builtin_rules, eval_query, load_queries, render_issues
from .report import AnalysisReport, PropertyResult, Statistics
from .workspace import (
    NodeTarget,
    Package,
    WorkspaceError,
    associate_targets,
    index_workspace,
    message_index,
)

ANALYSES = ("rules", "queries", "typecheck")


class PipelineError(Exception):
    """Fatal pipeline failure; carries the stage that failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineOptions:
    project_file: Path
    workspace: Path = Path(".")
    queries_file: Path | None = None
    properties_file: Path | None = None
    skip: set[str] = field(default_factory=set)
    configurations: list[str] | None = None  # None = all


@dataclass
class PipelineState:
    """Everything the pipeline produced, for the CLI and further commands."""

    spec: ProjectSpec
    packages: list[Package]
    targets: list[NodeTarget]
    msg_index: dict[str, MessageTypeDef]
    graphs: dict[str, RosGraph]
    properties: list[tuple[str, HplProperty]]
    issues: IssueLog
    report: AnalysisReport


def _source_statistics(packages: list[Package]) -> Statistics:
    return Statistics(
        packages=len(packages),
        source_files=sum(len(p.source_files) for p in packages),
        lines_of_code=sum(sf.line_count for p in packages for sf in p.source_files),
        launch_files=sum(len(p.launch_files) for p in packages),
        msg_types=sum(len(p.msg_defs) for p in packages),
    )


def run_analysis(options: PipelineOptions) -> PipelineState:
    """Run the static pipeline: project file through graphs, queries and typecheck."""
    issues = IssueLog()

    if not Path(options.project_file).is_file():
        raise PipelineError("project", f"project file {options.project_file} not found")
    try:
        spec = parse_project_file(options.project_file, issues)
    except Exception as exc:
        raise PipelineError("project", str(exc)) from exc

    try:
        packages = index_workspace(options.workspace, spec, issues)
    except WorkspaceError as exc:
        raise PipelineError("indexing", str(exc)) from exc

    msg_idx = message_index(packages)
    targets: list[NodeTarget] = []
    for pkg in packages:
        targets.extend(associate_targets(pkg, issues))

    extractions: dict[str, NodeExtraction] = {}
    for target in targets:
        extractions[f"{target.package}/{target.target_name}"] = extract_node(
            target, msg_idx, issues
        )

    wanted = options.configurations
    graphs: dict[str, RosGraph] = {}
    for name, config in spec.configurations.items():
        if wanted is not None and name not in wanted:
            continue
        try:
            launch = interpret_launch(config, packages, issues)
        except LaunchError as exc:
            raise PipelineError("launch", f"configuration {name!r}: {exc}") from exc
        per_config = dict(extractions)
        for node in launch.nodes:
            key = f"{node.package}/{node.node_type}"
            if key in extractions:
                per_config[node.name] = fuse_hints(
                    extractions[key], config.hints, node.name, issues
                )
        graphs[name] = build_graph(launch, per_config, targets, configuration=name, issues=issues)
    if wanted is not None:
        missing = [name for name in wanted if name not in graphs]
        if missing:
            raise PipelineError(
                "launch", f"configuration {missing[0]!r} is not defined in the project file"
            )

    if "rules" not in options.skip:
        for graph in graphs.values():
            builtin_rules(graph, issues)

    if options.queries_file is not None and "queries" not in options.skip:
        try:
            queries = load_queries(str(options.queries_file))
        except (QueryError, OSError) as exc:
            raise PipelineError("queries", str(exc)) from exc
        for graph in graphs.values():
            for query in queries:
                render_issues(query, eval_query(query, graph), issues)

    properties: list[tuple[str, HplProperty]] = []
    if options.properties_file is not None:
        try:
            properties = load_properties(str(options.properties_file), issues)
        except OSError as exc:
            raise PipelineError("properties", str(exc)) from exc
        if "typecheck" not in options.skip:
            for ident, prop in properties:
                for graph in graphs.values():
                    typecheck_property(prop, graph, msg_idx, issues, ident=ident)

    report = AnalysisReport(
        project=spec.project_name,
        statistics=_source_statistics(packages),
        graphs=[graphs[name] for name in sorted(graphs)],
        workspace_root=str(Path(options.workspace).resolve()),
    )
    state = PipelineState(
        spec=spec,
        packages=packages,
        targets=targets,
        msg_index=msg_idx,
        graphs=graphs,
        properties=properties,
        issues=issues,
        report=report,
    )
    finalize_report(state)
    return state


def finalize_report(state: PipelineState) -> AnalysisReport:
    state.report.issues = state.issues.finalize()
    state.report.finalize_statistics()
    return state.report


def channel_types_for(graph: RosGraph, msg_index: dict[str, MessageTypeDef]) -> dict[str, MessageTypeDef]:
    """Map each typed topic to its message definition, for payload validation."""
    out = {}
    for topic in graph.topics:
        if topic.msg_type is not None and topic.msg_type in msg_index:
            out[topic.name] = msg_index[topic.msg_type]
    return out


def run_trace_check(state: PipelineState, config: str, trace: Trace) -> list[PropertyResult]:
    """Check every loaded property against a recorded trace; FALSE becomes an error."""
    graph = state.graphs.get(config)
    if graph is None:
        raise PipelineError("trace", f"configuration {config!r} was not analysed")
    if not state.properties:
        raise PipelineError("trace", "no properties loaded (use --properties)")
    channel_types = channel_types_for(graph, state.msg_index)
    try:
        verdicts = check_trace(
            state.properties, trace, channel_types=channel_types, msg_index=state.msg_index
        )
    except TraceError as exc:
        raise PipelineError("trace", str(exc)) from exc
    results = []
    for (ident, prop), (_, verdict) in zip(state.properties, verdicts):
        results.append(PropertyResult(identity=ident, property_text=str(prop), verdict=verdict))
        if verdict.value is VerdictValue.FALSE:
            explanation = verdict.witness.explanation if verdict.witness else ""
            state.issues.add(
                Category.RUNTIME,
                "violation",
                Severity.ERROR,
                config_scope(config),
                f"property falsified on trace: {prop} ({explanation})",
            )
    state.report.property_results = results
    finalize_report(state)
    return results
