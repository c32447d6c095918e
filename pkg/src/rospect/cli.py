"""Command-line entry point: analyse, check-trace, gen-tests, export."""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from .issues import Category, Severity, config_scope
from .monitor import load_trace
from .pipeline import (
    ANALYSES,
    PipelineError,
    PipelineOptions,
    PipelineState,
    finalize_report,
    run_analysis,
    run_trace_check,
)
from .report import (
    CampaignResult,
    append_history,
    export_dot,
    export_html,
    export_json,
    highlight_entities,
)
from .testgen import (
    CampaignBudget,
    CampaignError,
    ProcessAdapter,
    SchemaError,
    derive_schema,
    run_campaign,
)

EXIT_CLEAN = 0
EXIT_ISSUES = 1
EXIT_FATAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rospect",
        description="Static analysis and verification toolkit for ROS 1 workspaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("-p", "--project", required=True, help="project file path")
        p.add_argument("--home", default=".", help="workspace root (default: cwd)")
        p.add_argument("--export-dir", default=None, help="directory for exported files")
        p.add_argument("--properties", default=None, help="behavioural properties file")

    analyse = sub.add_parser("analyse", help="extract models and run architectural checks")
    common(analyse)
    analyse.add_argument("--queries", default=None, help="user query file (YAML records)")
    analyse.add_argument(
        "--skip",
        action="append",
        default=[],
        choices=ANALYSES,
        help="blacklist an analysis (repeatable)",
    )

    check = sub.add_parser("check-trace", help="check properties against a recorded trace")
    common(check)
    check.add_argument("--config", required=True, help="configuration name")
    check.add_argument("--trace", required=True, help="trace file (one record per line)")

    gen = sub.add_parser("gen-tests", help="generate falsifying traces against an adapter")
    common(gen)
    gen.add_argument("--config", required=True, help="configuration name")
    gen.add_argument("--adapter", required=True, help="adapter command line")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--max-traces", type=int, default=100)

    export = sub.add_parser("export", help="run the pipeline and export one format")
    common(export)
    export.add_argument("--format", required=True, choices=("json", "dot", "html"))
    export.add_argument("--queries", default=None, help="user query file (YAML records)")

    return parser


def _options(args: argparse.Namespace, configurations: list[str] | None = None) -> PipelineOptions:
    return PipelineOptions(
        project_file=Path(args.project),
        workspace=Path(args.home),
        queries_file=Path(args.queries) if getattr(args, "queries", None) else None,
        properties_file=Path(args.properties) if args.properties else None,
        skip=set(getattr(args, "skip", [])),
        configurations=configurations,
    )


def _export_all(state: PipelineState, directory: Path) -> None:
    from .figures import render_report_figures

    export_json(state.report, directory)
    highlight = highlight_entities(state.report)
    dot_sources = {}
    for name, graph in sorted(state.graphs.items()):
        dot = export_dot(graph, highlight=highlight)
        (directory / f"{name}.dot").write_text(dot, encoding="utf-8")
        dot_sources[name] = dot
    runs = append_history(state.report, directory)
    figures = render_report_figures(state.report, directory, runs=runs, highlight=highlight)
    export_html(state.report, directory, figures=figures, dot_sources=dot_sources, runs=runs)


def _print_summary(state: PipelineState) -> None:
    stats = state.report.statistics
    print(
        f"{state.report.project}: {stats.packages} packages, "
        f"{stats.source_files} source files, {len(state.graphs)} configuration(s)"
    )
    for name in sorted(state.graphs):
        g = stats.graphs.get(name)
        if g:
            print(
                f"  [{name}] nodes={g.nodes} topics={g.topics} services={g.services} "
                f"params={g.parameters} links={g.links} conditional={g.conditional_links}"
            )
    by_severity = stats.issues_by_severity
    print(
        f"issues: {stats.issues_total} "
        f"(error={by_severity.get('error', 0)}, warning={by_severity.get('warning', 0)}, "
        f"info={by_severity.get('info', 0)})"
    )


def _exit_code(state: PipelineState) -> int:
    return EXIT_ISSUES if state.report.has_error_issues() else EXIT_CLEAN


def _cmd_analyse(args: argparse.Namespace) -> int:
    state = run_analysis(_options(args))
    if args.export_dir:
        _export_all(state, Path(args.export_dir))
    _print_summary(state)
    return _exit_code(state)


def _cmd_check_trace(args: argparse.Namespace) -> int:
    state = run_analysis(_options(args, configurations=[args.config]))
    trace = load_trace(args.trace)
    results = run_trace_check(state, args.config, trace)
    for result in results:
        print(f"[{result.verdict.value.value:>12}] {result.property_text}")
        if result.verdict.witness is not None:
            print(f"               {result.verdict.witness.explanation}")
    if args.export_dir:
        _export_all(state, Path(args.export_dir))
    return _exit_code(state)


def _cmd_gen_tests(args: argparse.Namespace) -> int:
    state = run_analysis(_options(args, configurations=[args.config]))
    if not state.properties:
        raise PipelineError("testing", "no properties loaded (use --properties)")
    graph = state.graphs[args.config]
    budget = CampaignBudget(max_traces=args.max_traces, seed=args.seed)
    results = []
    adapter = ProcessAdapter(shlex.split(args.adapter))
    try:
        for ident, prop in state.properties:
            try:
                schema = derive_schema(
                    prop, graph, state.msg_index, input_channels=adapter.input_channels
                )
            except SchemaError as exc:
                state.issues.add(
                    Category.TESTING,
                    "schema",
                    Severity.WARNING,
                    config_scope(args.config),
                    f"{prop}: {exc}",
                )
                results.append(
                    CampaignResult(
                        identity=ident,
                        property_text=str(prop),
                        seed=args.seed,
                        traces_run=0,
                        falsified=False,
                        error=str(exc),
                    )
                )
                continue
            cex = run_campaign(schema, adapter, [prop], budget)
            if cex is None:
                print(f"[   no counterexample] {prop} ({budget.max_traces} traces)")
                results.append(
                    CampaignResult(
                        identity=ident,
                        property_text=str(prop),
                        seed=args.seed,
                        traces_run=budget.max_traces,
                        falsified=False,
                    )
                )
                continue
            print(
                f"[FALSIFIED in {cex.traces_run:>4} traces] {prop} "
                f"(shrunk to {len(cex.inputs.events)} input event(s))"
            )
            state.issues.add(
                Category.TESTING,
                "counterexample",
                Severity.ERROR,
                config_scope(args.config),
                f"property falsified by generated trace: {prop}",
            )
            results.append(
                CampaignResult(
                    identity=ident,
                    property_text=str(prop),
                    seed=args.seed,
                    traces_run=cex.traces_run,
                    falsified=True,
                    counterexample_inputs=cex.inputs,
                    counterexample_observed=cex.observed,
                    shrunk=cex.shrunk,
                )
            )
    finally:
        adapter.close()
    state.report.campaign_results = results
    finalize_report(state)
    if args.export_dir:
        _export_all(state, Path(args.export_dir))
    return _exit_code(state)


def _cmd_export(args: argparse.Namespace) -> int:
    state = run_analysis(_options(args))
    directory = Path(args.export_dir or "rospect-export")
    directory.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        export_json(state.report, directory)
    elif args.format == "dot":
        highlight = highlight_entities(state.report)
        for name, graph in sorted(state.graphs.items()):
            (directory / f"{name}.dot").write_text(
                export_dot(graph, highlight=highlight), encoding="utf-8"
            )
    else:
        from .figures import render_report_figures

        highlight = highlight_entities(state.report)
        dot_sources = {
            name: export_dot(graph, highlight=highlight)
            for name, graph in sorted(state.graphs.items())
        }
        runs = append_history(state.report, directory)
        figures = render_report_figures(state.report, directory, runs=runs, highlight=highlight)
        export_html(state.report, directory, figures=figures, dot_sources=dot_sources, runs=runs)
    print(f"exported {args.format} to {directory}")
    return _exit_code(state)


_COMMANDS = {
    "analyse": _cmd_analyse,
    "check-trace": _cmd_check_trace,
    "gen-tests": _cmd_gen_tests,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (CampaignError, OSError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
