"""rospect: static analysis and verification toolkit for ROS 1 workspaces.

Reverse-engineers a computation-graph model from source artefacts without
executing code, then checks architectural queries and behavioural properties
over that model via runtime monitors, trace checking and property-based
trace generation.
"""

__version__ = "0.1.0"

from .graph import RosGraph, build_graph, graph_statistics
from .hpl import HplProperty, parse_property
from .issues import Issue, IssueLog, Severity
from .monitor import (
    MessageEvent,
    MonitorAutomaton,
    Trace,
    Verdict,
    VerdictValue,
    check_trace,
    compile_monitor,
    oracle_verdict,
)
from .project import ProjectSpec, parse_project_file
from .workspace import index_workspace

__all__ = [
    "__version__",
    "RosGraph",
    "build_graph",
    "graph_statistics",
    "HplProperty",
    "parse_property",
    "Issue",
    "IssueLog",
    "Severity",
    "MessageEvent",
    "MonitorAutomaton",
    "Trace",
    "Verdict",
    "VerdictValue",
    "check_trace",
    "compile_monitor",
    "oracle_verdict",
    "ProjectSpec",
    "parse_project_file",
    "index_workspace",
]
