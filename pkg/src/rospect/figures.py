"""Matplotlib rendering of report figures: issue charts, history, graph drawings."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.lines import Line2D
from matplotlib.patches import Ellipse, FancyArrowPatch, Rectangle

from .graph import RosGraph
from .report import AnalysisReport

_SEVERITY_COLORS = {"error": "#c0392b", "warning": "#e67e22", "info": "#2980b9"}

_SAVE_KWARGS = {"dpi": 110, "metadata": {"Software": None}}


def render_issue_chart(report: AnalysisReport, path: Path) -> Path:
    """Bar chart of issue counts per category, stacked by severity."""
    by_category: dict[str, dict[str, int]] = {}
    for issue in report.issues:
        per = by_category.setdefault(issue.category.value, {})
        per[issue.severity.value] = per.get(issue.severity.value, 0) + 1
    categories = sorted(by_category)
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    bottoms = [0] * len(categories)
    for severity in ("error", "warning", "info"):
        counts = [by_category[c].get(severity, 0) for c in categories]
        ax.bar(categories, counts, bottom=bottoms, label=severity,
               color=_SEVERITY_COLORS[severity])
        bottoms = [b + c for b, c in zip(bottoms, counts)]
    ax.set_ylabel("issues")
    ax.set_title("Issues by category")
    if categories:
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no issues", ha="center", va="center", transform=ax.transAxes)
        ax.set_xticks([])
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return path


def render_history_chart(runs: list[dict], path: Path) -> Path:
    """Issue count over run ordinals."""
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    if runs:
        xs = [r["run"] for r in runs]
        ax.plot(xs, [r["issues"] for r in runs], marker="o", label="issues")
        ax.plot(xs, [r.get("nodes", 0) for r in runs], marker="s", label="nodes")
        ax.set_xticks(xs)
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no runs yet", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("run")
    ax.set_title("History")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return path


def _layout_columns(graph: RosGraph) -> dict[str, tuple[float, float]]:
    """Simple bipartite layout: node instances left, channels right."""
    positions: dict[str, tuple[float, float]] = {}
    nodes = sorted(n.name for n in graph.nodes)
    channels = sorted(
        [("topic:" + t.name) for t in graph.topics] + [("service:" + s.name) for s in graph.services]
    )
    for i, name in enumerate(nodes):
        positions[name] = (0.0, -float(i))
    for i, name in enumerate(channels):
        offset = (len(channels) - len(nodes)) / 2.0 if nodes else 0.0
        positions[name] = (1.0, -(float(i) - offset))
    return positions


def render_graph_figure(
    graph: RosGraph, path: Path, highlight: set[str] | None = None
) -> Path:
    """Draw the computation graph: ellipses for nodes, boxes for channels.

    Conditional entities are dashed, highlighted entities red, matching the
    DOT export conventions.
    """
    highlight = highlight or set()
    positions = _layout_columns(graph)
    n_rows = max(len(graph.nodes), len(graph.topics) + len(graph.services), 1)
    fig, ax = plt.subplots(figsize=(9.0, 1.0 + 0.8 * n_rows))
    ax.axis("off")

    def draw_entity(name: str, display: str, shape: str, conditional: bool, x: float, y: float) -> None:
        color = "#c0392b" if display in highlight or name in highlight else "#34495e"
        style = (0, (4, 3)) if conditional else "solid"
        if shape == "ellipse":
            patch = Ellipse((x, y), 0.42, 0.42, fill=False, edgecolor=color, linestyle=style, lw=1.5)
        else:
            patch = Rectangle((x - 0.24, y - 0.16), 0.48, 0.32, fill=False,
                              edgecolor=color, linestyle=style, lw=1.5)
        ax.add_patch(patch)
        ax.text(x, y, display, ha="center", va="center", fontsize=8, color=color)

    for node in graph.nodes:
        x, y = positions[node.name]
        draw_entity(node.name, node.name, "ellipse", bool(node.conditions), x, y)
    for res in list(graph.topics) + list(graph.services):
        x, y = positions[res.kind + ":" + res.name]
        draw_entity(res.kind + ":" + res.name, res.name, "box", bool(res.conditions), x, y)

    for link in graph.links:
        if link.role in ("publisher", "client"):
            src, dst = link.node, None
        elif link.role in ("subscriber", "server"):
            src, dst = None, link.node
        else:
            continue
        kind = "topic" if link.role in ("publisher", "subscriber") else "service"
        channel_key = f"{kind}:{link.resource}"
        if channel_key not in positions:
            continue
        a = positions[src] if src else positions[channel_key]
        b = positions[channel_key] if src else positions[dst]
        entity = f"{link.node} {link.role} {link.resource}"
        color = "#c0392b" if entity in highlight else "#7f8c8d"
        style = (0, (4, 3)) if link.conditions else "solid"
        arrow = FancyArrowPatch(
            a, b, arrowstyle="-|>", mutation_scale=12, color=color,
            linestyle=style, shrinkA=16, shrinkB=16, lw=1.2,
        )
        ax.add_patch(arrow)

    xs = [p[0] for p in positions.values()] or [0.0]
    ys = [p[1] for p in positions.values()] or [0.0]
    ax.set_xlim(min(xs) - 0.5, max(xs) + 0.5)
    ax.set_ylim(min(ys) - 0.6, max(ys) + 0.6)
    legend = [
        Line2D([0], [0], color="#34495e", linestyle=(0, (4, 3)), label="conditional"),
        Line2D([0], [0], color="#c0392b", label="issue highlight"),
    ]
    ax.legend(handles=legend, loc="lower center", ncol=2, fontsize=8, frameon=False)
    ax.set_title(f"configuration: {graph.configuration or 'default'}")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return path


def render_report_figures(
    report: AnalysisReport,
    directory: str | Path,
    runs: list[dict] | None = None,
    highlight: set[str] | None = None,
) -> dict[str, Path]:
    """Render every report figure into <directory>/figures; returns title -> path."""
    directory = Path(directory)
    fig_dir = directory / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    out: dict[str, Path] = {}
    out["Issues by category"] = render_issue_chart(report, fig_dir / "issues_by_category.png")
    out["History"] = render_history_chart(runs or [], fig_dir / "history.png")
    for graph in report.graphs:
        name = graph.configuration or "default"
        out[f"Computation graph: {name}"] = render_graph_figure(
            graph, fig_dir / f"graph_{name}.png", highlight=highlight
        )
    return out
