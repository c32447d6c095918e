"""Static extraction of topic/service/parameter usage from node sources.

Recognition is pattern-level: a lightweight tokenizer plus bracket/indent
tracking, not a full parser. Anything that is not a literal at a call site
is kept as an unknown, to be repaired by user hints.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .issues import Category, IssueLog, Severity, file_scope
from .project import HintSet
from .workspace import NodeTarget, SourceFile

CALL_KINDS = (
    "advertise",
    "subscribe",
    "service_server",
    "service_client",
    "param_read",
    "param_write",
)

_HINT_KIND_TO_CALL = {
    "publishers": "advertise",
    "subscribers": "subscribe",
    "servers": "service_server",
    "clients": "service_client",
    "parameters": "param_read",
}


@dataclass(frozen=True)
class ExtractedCall:
    kind: str
    name_arg: str | None  # None = unknown
    type_arg: str | None = None  # "pkg/Type"; None = unknown
    queue_size: int | None = None
    conditional: bool = False
    condition_text: str | None = None
    loc: tuple[str, int] | None = None
    provenance: str = "source"  # "source" or "hint"


@dataclass
class NodeExtraction:
    target: NodeTarget
    calls: list[ExtractedCall] = field(default_factory=list)
    uses_private_handle_ns: str | None = None


# --- Python ------------------------------------------------------------------

_PY_IMPORT_FROM_RE = re.compile(r"^\s*from\s+([\w.]+)\.(msg|srv)\s+import\s+(.+)$")
_PY_BLOCK_RE = re.compile(
    r"^(\s*)(if|elif|else|for|while|with|def|class|try|except|finally)\b\s*(.*?):\s*(?:#.*)?$"
)
_PY_CALL_RE = re.compile(
    r"(?:\brospy\s*\.\s*|\b)"
    r"(Publisher|Subscriber|Service|ServiceProxy|get_param|set_param)\s*\("
)

_PY_KIND = {
    "Publisher": "advertise",
    "Subscriber": "subscribe",
    "Service": "service_server",
    "ServiceProxy": "service_client",
    "get_param": "param_read",
    "set_param": "param_write",
}

_STRING_LITERAL_RE = re.compile(r"""^\s*(['"])(.*)\1\s*$""", re.DOTALL)
_INT_LITERAL_RE = re.compile(r"^\s*(\d+)\s*$")


def _py_import_map(lines: list[str]) -> dict[str, str]:
    imports: dict[str, str] = {}
    for line in lines:
        m = _PY_IMPORT_FROM_RE.match(line)
        if not m:
            continue
        pkg = m.group(1).split(".")[-1]
        for item in m.group(3).split(","):
            item = item.strip()
            if not item:
                continue
            if " as " in item:
                orig, alias = (p.strip() for p in item.split(" as ", 1))
                imports[alias] = f"{pkg}/{orig}"
            else:
                imports[item] = f"{pkg}/{item}"
    return imports


def _split_args(text: str) -> list[str]:
    """Split call arguments on top-level commas, respecting quotes and brackets."""
    args: list[str] = []
    depth = 0
    quote: str | None = None
    current = []
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            current.append(ch)
            if ch == "\\":
                if i + 1 < len(text):
                    current.append(text[i + 1])
                    i += 1
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            current.append(ch)
        elif ch in "([{<":
            depth += 1
            current.append(ch)
        elif ch in ")]}>":
            depth -= 1
            current.append(ch)
        elif ch == "," and depth == 0:
            args.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
        i += 1
    tail = "".join(current).strip()
    if tail:
        args.append(tail)
    return args


def _balanced_call_text(source: str, open_paren: int) -> str | None:
    """Return the text between the call's parentheses, or None if unbalanced."""
    depth = 0
    quote: str | None = None
    i = open_paren
    while i < len(source):
        ch = source[i]
        if quote:
            if ch == "\\":
                i += 1
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return source[open_paren + 1 : i]
        i += 1
    return None


def _string_arg(arg: str | None) -> str | None:
    if arg is None:
        return None
    m = _STRING_LITERAL_RE.match(arg)
    return m.group(2) if m else None


def _int_arg(arg: str | None) -> int | None:
    if arg is None:
        return None
    m = _INT_LITERAL_RE.match(arg)
    return int(m.group(1)) if m else None


def _py_type_arg(arg: str | None, imports: dict[str, str]) -> str | None:
    if arg is None:
        return None
    arg = arg.strip()
    literal = _string_arg(arg)
    if literal is not None and "/" in literal:
        return literal
    dotted = re.match(r"^([\w]+)\.(?:msg|srv)\.(\w+)$", arg)
    if dotted:
        return f"{dotted.group(1)}/{dotted.group(2)}"
    if re.match(r"^\w+$", arg):
        return imports.get(arg)
    return None


def _extract_python(sf: SourceFile, issues: IssueLog) -> list[ExtractedCall]:
    try:
        source = sf.path.read_text(encoding="utf-8")
    except OSError as exc:
        issues.add(
            Category.MODEL,
            "unreadable-source",
            Severity.WARNING,
            file_scope(str(sf.path)),
            f"could not read source: {exc}",
        )
        return []
    lines = source.splitlines()
    imports = _py_import_map(lines)
    calls: list[ExtractedCall] = []
    # Stack of (indent, is_branch, condition_text) for open suites.
    stack: list[tuple[int, bool, str | None]] = []
    offsets = [0]
    for line in lines:
        offsets.append(offsets[-1] + len(line) + 1)

    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(line) - len(line.lstrip())
        while stack and indent <= stack[-1][0]:
            stack.pop()
        block = _PY_BLOCK_RE.match(line)
        if block:
            keyword = block.group(2)
            expr = block.group(3).strip()
            if keyword in ("if", "elif"):
                stack.append((indent, True, expr or None))
            elif keyword == "else":
                stack.append((indent, True, "else"))
            else:
                # Loops, functions and handlers do not make calls conditional.
                stack.append((indent, False, None))
            continue
        for m in _PY_CALL_RE.finditer(line):
            open_paren = offsets[lineno - 1] + m.end() - 1
            arg_text = _balanced_call_text(source, open_paren)
            if arg_text is None:
                continue
            args = _split_args(arg_text)
            kwargs = {}
            positional = []
            for a in args:
                kw = re.match(r"^(\w+)\s*=\s*(.+)$", a, re.DOTALL)
                if kw and not a.lstrip().startswith(("'", '"')):
                    kwargs[kw.group(1)] = kw.group(2)
                else:
                    positional.append(a)
            kind = _PY_KIND[m.group(1)]
            name = _string_arg(positional[0]) if positional else None
            type_arg = None
            queue = None
            if kind in ("advertise", "subscribe", "service_server", "service_client"):
                type_arg = _py_type_arg(positional[1] if len(positional) > 1 else None, imports)
            if kind == "advertise":
                queue = _int_arg(kwargs.get("queue_size"))
            elif kind == "subscribe":
                queue = _int_arg(kwargs.get("queue_size"))
            branch_frames = [f for f in stack if f[1]]
            conditional = bool(branch_frames)
            condition_text = branch_frames[-1][2] if branch_frames else None
            calls.append(
                ExtractedCall(
                    kind=kind,
                    name_arg=name,
                    type_arg=type_arg,
                    queue_size=queue,
                    conditional=conditional,
                    condition_text=condition_text,
                    loc=(str(sf.path), lineno),
                )
            )
    return calls


# --- C++ ----------------------------------------------------------------------

_CPP_METHODS = {
    "advertise": "advertise",
    "subscribe": "subscribe",
    "advertiseService": "service_server",
    "serviceClient": "service_client",
    "param": "param_read",
    "getParam": "param_read",
    "setParam": "param_write",
}


@dataclass
class _Tok:
    kind: str  # ident | string | number | punct
    value: str
    line: int
    start: int = 0
    end: int = 0


_CPP_TOKEN_RE = re.compile(
    r"""
    (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<char>'(?:[^'\\]|\\.)*')
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<number>\d[\w.]*)
  | (?P<punct>::|<<|>>|[{}()\[\];,<>.&*=!+\-/|~%?:])
    """,
    re.VERBOSE,
)


def _strip_cpp_comments(text: str) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "/" and nxt == "*":
            i += 2
            while i + 1 < n and not (text[i] == "*" and text[i + 1] == "/"):
                if text[i] == "\n":
                    out.append("\n")
                i += 1
            i += 2
        elif ch == '"':
            out.append(ch)
            i += 1
            while i < n:
                out.append(text[i])
                if text[i] == "\\":
                    i += 1
                    if i < n:
                        out.append(text[i])
                elif text[i] == '"':
                    break
                i += 1
            i += 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _tokenize_cpp(text: str) -> list[_Tok]:
    tokens = []
    line = 1
    pos = 0
    for m in _CPP_TOKEN_RE.finditer(text):
        line += text.count("\n", pos, m.start())
        pos = m.start()
        kind = m.lastgroup or "punct"
        if kind == "char":
            kind = "string"
        tokens.append(_Tok(kind, m.group(0), line, m.start(), m.end()))
    return tokens


def _cpp_type_name(tokens: list[_Tok]) -> str | None:
    names = [t.value for t in tokens if t.kind == "ident"]
    if not names:
        return None
    return "/".join(names) if len(names) > 1 else names[0]


class _CppScanner:
    def __init__(self, path: str, source: str, tokens: list[_Tok]):
        self.path = path
        self.source = source  # decommented, offsets match tokens
        self.tokens = tokens
        self.i = 0
        self.calls: list[ExtractedCall] = []
        # Brace frames: ("branch", text) for if/else blocks, None for plain blocks.
        self.frames: list[tuple[str, str | None] | None] = []
        self.pending: tuple[str, str | None] | None = None  # awaiting '{' or statement
        self.single_stmt: list[tuple[str, str | None]] = []  # braceless bodies, popped at ';'
        self.handles: dict[str, str] = {}  # NodeHandle variable -> prefix
        self.private_ns: str | None = None

    def _peek(self, offset: int = 0) -> _Tok | None:
        idx = self.i + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def _collect_parens(self, start: int) -> tuple[list[_Tok], int]:
        """Tokens inside a balanced paren group starting at index of '('."""
        depth = 0
        inner: list[_Tok] = []
        i = start
        while i < len(self.tokens):
            tok = self.tokens[i]
            if tok.value == "(":
                depth += 1
                if depth > 1:
                    inner.append(tok)
            elif tok.value == ")":
                depth -= 1
                if depth == 0:
                    return inner, i
                inner.append(tok)
            else:
                inner.append(tok)
            i += 1
        return inner, i

    def _collect_template(self, start: int) -> tuple[list[_Tok], int]:
        depth = 0
        inner: list[_Tok] = []
        i = start
        while i < len(self.tokens):
            tok = self.tokens[i]
            if tok.value == "<":
                depth += 1
                if depth > 1:
                    inner.append(tok)
            elif tok.value == ">":
                depth -= 1
                if depth == 0:
                    return inner, i
                inner.append(tok)
            else:
                inner.append(tok)
            i += 1
        return inner, i

    def _split_token_args(self, tokens: list[_Tok]) -> list[list[_Tok]]:
        args: list[list[_Tok]] = []
        depth = 0
        current: list[_Tok] = []
        for tok in tokens:
            if tok.value in "([{<":
                depth += 1
            elif tok.value in ")]}>":
                depth -= 1
            if tok.value == "," and depth == 0:
                args.append(current)
                current = []
            else:
                current.append(tok)
        if current:
            args.append(current)
        return args

    def _conditional(self) -> tuple[bool, str | None]:
        conds = [c for c in self.frames if c is not None] + self.single_stmt
        if not conds:
            return False, None
        return True, conds[-1][1]

    def _condition_span(self, inner: list[_Tok]) -> str | None:
        # The condition text is kept only when it is a single-line expression.
        if not inner:
            return None
        span = self.source[inner[0].start : inner[-1].end]
        return None if "\n" in span else span.strip()

    def _maybe_node_handle(self) -> bool:
        # ros::NodeHandle nh("~");  or  NodeHandle nh;
        tok = self._peek()
        if tok is None or tok.value != "NodeHandle":
            return False
        j = self.i + 1
        var = self._peek(1)
        if var is None or var.kind != "ident":
            return False
        prefix = ""
        after = self._peek(2)
        if after is not None and after.value == "(":
            inner, end = self._collect_parens(self.i + 2)
            strings = [t for t in inner if t.kind == "string"]
            if strings:
                prefix = strings[0].value.strip('"')
            self.i = end
        else:
            self.i = j
        self.handles[var.value] = prefix
        if prefix == "~":
            self.private_ns = "~"
        return True

    def _apply_handle_prefix(self, handle: str | None, name: str | None) -> str | None:
        if name is None or handle is None:
            return name
        prefix = self.handles.get(handle, "")
        if not prefix or name.startswith(("/", "~")):
            return name
        if prefix == "~":
            return "~" + name
        return prefix.rstrip("/") + "/" + name

    def scan(self) -> None:
        while self.i < len(self.tokens):
            tok = self.tokens[self.i]
            if tok.kind == "ident" and tok.value == "if":
                nxt = self._peek(1)
                if nxt is not None and nxt.value == "(":
                    inner, end = self._collect_parens(self.i + 1)
                    self.pending = ("if", self._condition_span(inner))
                    self.i = end + 1
                    continue
            elif tok.kind == "ident" and tok.value == "else":
                nxt = self._peek(1)
                if nxt is not None and nxt.value == "if":
                    self.i += 1  # merged into the following if
                    continue
                self.pending = ("else", "else")
                self.i += 1
                continue
            elif tok.kind == "ident" and (tok.value in ("for", "while", "switch")):
                nxt = self._peek(1)
                if nxt is not None and nxt.value == "(":
                    _, end = self._collect_parens(self.i + 1)
                    self.i = end + 1
                    self.pending = None  # loops do not set conditionality
                    continue
            elif tok.value == "{":
                self.frames.append(self.pending)
                self.pending = None
                self.i += 1
                continue
            elif tok.value == "}":
                if self.frames:
                    self.frames.pop()
                self.i += 1
                continue
            elif tok.value == ";":
                self.single_stmt = []
                self.i += 1
                continue
            elif tok.kind == "ident" and self._maybe_node_handle():
                self.i += 1
                continue

            if self.pending is not None and tok.value not in ("{",):
                # Braceless conditional body: applies until the closing ';'.
                self.single_stmt.append(self.pending)
                self.pending = None

            if tok.kind == "ident" and tok.value in _CPP_METHODS:
                prev = self.tokens[self.i - 1] if self.i > 0 else None
                handle = None
                if prev is not None and prev.value == ".":
                    handle_tok = self.tokens[self.i - 2] if self.i > 1 else None
                    if handle_tok is not None and handle_tok.kind == "ident":
                        handle = handle_tok.value
                self._handle_call(tok, handle)
                continue
            self.i += 1

    def _handle_call(self, tok: _Tok, handle: str | None) -> None:
        kind = _CPP_METHODS[tok.value]
        j = self.i + 1
        type_arg: str | None = None
        nxt = self._peek(1)
        if nxt is not None and nxt.value == "<":
            inner, end = self._collect_template(j)
            if tok.value != "param":  # nh.param<T> names a value type, not a message
                type_arg = _cpp_type_name(inner)
            j = end + 1
            nxt = self.tokens[j] if j < len(self.tokens) else None
        if nxt is None or nxt.value != "(":
            self.i += 1
            return
        inner, end = self._collect_parens(j)
        args = self._split_token_args(inner)
        name = None
        queue = None
        if args:
            strings = [t for t in args[0] if t.kind == "string"]
            if len(strings) == 1 and len(args[0]) == 1:
                name = strings[0].value.strip('"')
        if kind in ("advertise", "subscribe") and len(args) > 1:
            numbers = [t for t in args[1] if t.kind == "number"]
            if len(numbers) == 1 and len(args[1]) == 1 and numbers[0].value.isdigit():
                queue = int(numbers[0].value)
        name = self._apply_handle_prefix(handle, name)
        conditional, condition_text = self._conditional()
        self.calls.append(
            ExtractedCall(
                kind=kind,
                name_arg=name,
                type_arg=type_arg,
                queue_size=queue,
                conditional=conditional,
                condition_text=condition_text,
                loc=(self.path, tok.line),
            )
        )
        self.i = end + 1


def _extract_cpp(sf: SourceFile, issues: IssueLog) -> tuple[list[ExtractedCall], str | None]:
    try:
        source = sf.path.read_text(encoding="utf-8")
    except OSError as exc:
        issues.add(
            Category.MODEL,
            "unreadable-source",
            Severity.WARNING,
            file_scope(str(sf.path)),
            f"could not read source: {exc}",
        )
        return [], None
    decommented = _strip_cpp_comments(source)
    scanner = _CppScanner(str(sf.path), decommented, _tokenize_cpp(decommented))
    scanner.scan()
    return scanner.calls, scanner.private_ns


def extract_node(
    target: NodeTarget,
    msg_index: dict | None = None,
    issues: IssueLog | None = None,
) -> NodeExtraction:
    """Extract client-library calls from a target's sources, in (file, line) order."""
    issues = issues if issues is not None else IssueLog()
    extraction = NodeExtraction(target=target)
    for sf in target.sources:
        if sf.dialect == "py":
            extraction.calls.extend(_extract_python(sf, issues))
        else:
            calls, private_ns = _extract_cpp(sf, issues)
            extraction.calls.extend(calls)
            if private_ns and extraction.uses_private_handle_ns is None:
                extraction.uses_private_handle_ns = private_ns
    extraction.calls.sort(key=lambda c: (c.loc or ("", 0)))
    return extraction


def fuse_hints(
    extraction: NodeExtraction,
    hints: HintSet,
    node_name: str,
    issues: IssueLog | None = None,
) -> NodeExtraction:
    """Fill extraction gaps from user hints; hints never delete extracted facts.

    A hint matches a call on kind + name when the call's name is known,
    otherwise on kind + type. Unmatched hints append new hint-originated calls.
    On a type conflict the hint wins and the conflict is recorded.
    """
    issues = issues if issues is not None else IssueLog()
    if not node_name.startswith("/"):
        raise ValueError(f"node name {node_name!r} is not global")
    node_hints = hints.for_node(node_name)
    calls = list(extraction.calls)
    for hint in node_hints.all_hints():
        kind = _HINT_KIND_TO_CALL[hint.kind]
        match_idx = None
        for i, call in enumerate(calls):
            if call.kind != kind:
                continue
            if call.name_arg is not None:
                if call.name_arg == hint.name:
                    match_idx = i
                    break
            elif hint.type_name is not None and call.type_arg == hint.type_name:
                match_idx = i
                break
        if match_idx is None:
            calls.append(
                ExtractedCall(
                    kind=kind,
                    name_arg=hint.name,
                    type_arg=hint.type_name,
                    queue_size=hint.queue_size,
                    provenance="hint",
                )
            )
            continue
        call = calls[match_idx]
        updates: dict = {}
        if call.name_arg is None:
            updates["name_arg"] = hint.name
        if hint.type_name is not None:
            if call.type_arg is None:
                updates["type_arg"] = hint.type_name
            elif call.type_arg != hint.type_name:
                issues.add(
                    Category.MODEL,
                    "hint-conflict",
                    Severity.WARNING,
                    file_scope(*call.loc) if call.loc else f"entity:{node_name}",
                    f"hint type {hint.type_name!r} contradicts extracted "
                    f"{call.type_arg!r} for {kind} {hint.name!r}; hint wins",
                )
                updates["type_arg"] = hint.type_name
        if call.queue_size is None and hint.queue_size is not None:
            updates["queue_size"] = hint.queue_size
        if updates:
            # A call repaired by a hint is hint-provenance: the model fact
            # came from the user, not the source alone.
            updates["provenance"] = "hint"
            calls[match_idx] = replace(call, **updates)
    return NodeExtraction(
        target=extraction.target,
        calls=calls,
        uses_private_handle_ns=extraction.uses_private_handle_ns,
    )
