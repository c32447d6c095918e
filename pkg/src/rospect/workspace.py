"""Workspace indexing: package discovery, message parsing, build-target association."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from xml.etree import ElementTree

from .issues import Category, IssueLog, Severity, file_scope, package_scope
from .msgs import MessageTypeDef, MsgError, builtin_messages, parse_msg_file
from .project import ProjectSpec

_CPP_EXTENSIONS = {".c", ".cc", ".cpp", ".h", ".hpp"}


class WorkspaceError(Exception):
    """Fatal workspace problems (missing root)."""


@dataclass(frozen=True)
class SourceFile:
    path: Path  # absolute
    dialect: str  # "cpp" or "py"
    line_count: int


@dataclass
class Package:
    name: str
    root: Path
    source_files: list[SourceFile] = field(default_factory=list)
    msg_defs: list[MessageTypeDef] = field(default_factory=list)
    launch_files: list[Path] = field(default_factory=list)
    build_file: Path | None = None


@dataclass
class NodeTarget:
    """An executable (or script) tied to the sources that implement it."""

    package: str
    target_name: str
    sources: list[SourceFile] = field(default_factory=list)


def _dialect_for(path: Path) -> str | None:
    if path.suffix in _CPP_EXTENSIONS:
        return "cpp"
    if path.suffix == ".py":
        return "py"
    return None


def _read_manifest_name(manifest: Path) -> str | None:
    try:
        tree = ElementTree.parse(manifest)
    except ElementTree.ParseError:
        return None
    elem = tree.getroot().find("name")
    if elem is None or elem.text is None:
        return None
    return elem.text.strip()


def _index_package(root: Path, issues: IssueLog) -> Package | None:
    name = _read_manifest_name(root / "package.xml")
    if name is None:
        issues.add(
            Category.INDEXING,
            "bad-manifest",
            Severity.WARNING,
            file_scope(str(root / "package.xml")),
            "manifest has no readable <name> element",
        )
        return None
    pkg = Package(name=name, root=root)
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        dialect = _dialect_for(path)
        if dialect is not None:
            try:
                line_count = len(path.read_text(encoding="utf-8", errors="replace").splitlines())
            except OSError as exc:
                issues.add(
                    Category.INDEXING,
                    "unreadable-file",
                    Severity.WARNING,
                    file_scope(str(path)),
                    f"could not read source file: {exc}",
                )
                continue
            pkg.source_files.append(SourceFile(path=path, dialect=dialect, line_count=line_count))
        elif path.suffix == ".launch":
            pkg.launch_files.append(path)
        elif path.suffix == ".msg":
            try:
                pkg.msg_defs.append(parse_msg_file(path, name))
            except MsgError as exc:
                issues.add(
                    Category.INDEXING,
                    "bad-msg",
                    Severity.ERROR,
                    file_scope(str(path)),
                    str(exc),
                )
    build = root / "CMakeLists.txt"
    if build.is_file():
        pkg.build_file = build
    return pkg


def index_workspace(ws_root: str | Path, spec: ProjectSpec, issues: IssueLog | None = None) -> list[Package]:
    """Locate whitelisted packages under ws_root; missing ones become issues.

    A package is any directory holding a package.xml; discovery does not
    descend into a found package looking for nested ones.
    """
    issues = issues if issues is not None else IssueLog()
    ws_root = Path(ws_root)
    if not ws_root.is_dir():
        raise WorkspaceError(f"workspace root {ws_root} does not exist")
    ws_root = ws_root.resolve()
    wanted = set(spec.packages)
    found: dict[str, Package] = {}

    def walk(directory: Path) -> None:
        if (directory / "package.xml").is_file():
            name = _read_manifest_name(directory / "package.xml")
            if name in wanted and name not in found:
                pkg = _index_package(directory, issues)
                if pkg is not None:
                    found[pkg.name] = pkg
            return  # no nesting below a package root
        try:
            children = sorted(p for p in directory.iterdir() if p.is_dir())
        except OSError as exc:
            issues.add(
                Category.INDEXING,
                "unreadable-dir",
                Severity.WARNING,
                file_scope(str(directory)),
                f"could not list directory: {exc}",
            )
            return
        for child in children:
            walk(child)

    walk(ws_root)
    for missing in sorted(wanted - set(found)):
        issues.add(
            Category.INDEXING,
            "package-not-found",
            Severity.WARNING,
            package_scope(missing),
            f"package {missing!r} not found in workspace",
        )
    # Cross-resolve message references now that all packages are known.
    known = set(builtin_messages()) | {
        md.qualified_name for pkg in found.values() for md in pkg.msg_defs
    }
    for pkg in found.values():
        for md in pkg.msg_defs:
            for fname, ftype in md.fields:
                if not ftype.is_builtin and ftype.base not in known:
                    issues.add(
                        Category.INDEXING,
                        "unresolved-msg-type",
                        Severity.ERROR,
                        package_scope(pkg.name),
                        f"{md.qualified_name}.{fname}: unresolvable type {ftype.base!r}",
                    )
    return [found[name] for name in sorted(found)]


def message_index(packages: list[Package]) -> dict[str, MessageTypeDef]:
    """Builtins plus every message defined in the indexed packages."""
    index = builtin_messages()
    for pkg in packages:
        for md in pkg.msg_defs:
            index[md.qualified_name] = md
    return index


# CMake scanning is lexical: statements are NAME ( args... ); only the
# project-name variable is substituted.
_CMAKE_STMT_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)", re.DOTALL)
_CMAKE_COMMENT_RE = re.compile(r"#[^\n]*")


def _scan_cmake(text: str) -> list[tuple[str, list[str]]]:
    text = _CMAKE_COMMENT_RE.sub("", text)
    statements = []
    for m in _CMAKE_STMT_RE.finditer(text):
        name = m.group(1).lower()
        args = m.group(2).split()
        statements.append((name, args))
    return statements


def associate_targets(pkg: Package, issues: IssueLog | None = None) -> list[NodeTarget]:
    """Map executables to source files: CMake targets for C++, scripts for Python."""
    issues = issues if issues is not None else IssueLog()
    targets: list[NodeTarget] = []
    sources_by_path = {sf.path: sf for sf in pkg.source_files}

    if pkg.build_file is not None:
        statements = _scan_cmake(pkg.build_file.read_text(encoding="utf-8", errors="replace"))
        project_name = pkg.name
        for name, args in statements:
            if name == "project" and args:
                project_name = args[0]
                break
        for name, args in statements:
            if name != "add_executable" or not args:
                continue
            target_name = args[0].replace("${PROJECT_NAME}", project_name)
            target = NodeTarget(package=pkg.name, target_name=target_name)
            for arg in args[1:]:
                arg = arg.replace("${PROJECT_NAME}", project_name)
                src = (pkg.root / arg).resolve()
                if src in sources_by_path:
                    target.sources.append(sources_by_path[src])
                else:
                    issues.add(
                        Category.INDEXING,
                        "missing-source",
                        Severity.WARNING,
                        package_scope(pkg.name),
                        f"target {target_name!r} lists missing source {arg!r}",
                    )
            targets.append(target)
    else:
        has_cpp = any(sf.dialect == "cpp" for sf in pkg.source_files)
        if has_cpp:
            issues.add(
                Category.INDEXING,
                "no-build-file",
                Severity.INFO,
                package_scope(pkg.name),
                "package has C++ sources but no build file; no targets associated",
            )

    for subdir in ("scripts", "nodes"):
        script_dir = pkg.root / subdir
        if not script_dir.is_dir():
            continue
        for path in sorted(script_dir.iterdir()):
            if not path.is_file():
                continue
            executable = bool(path.stat().st_mode & 0o111)
            if path.suffix == ".py" or executable:
                sf = sources_by_path.get(path.resolve())
                sources = [sf] if sf is not None else []
                targets.append(
                    NodeTarget(package=pkg.name, target_name=path.name, sources=sources)
                )

    targets.sort(key=lambda t: t.target_name)
    return targets
