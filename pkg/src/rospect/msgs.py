"""Message type definitions: the .msg line grammar, builtins, payload checks."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

BUILTIN_FIELD_TYPES = frozenset(
    {
        "bool",
        "int8",
        "int16",
        "int32",
        "int64",
        "uint8",
        "uint16",
        "uint32",
        "uint64",
        "float32",
        "float64",
        "string",
    }
)

INT_RANGES = {
    "int8": (-(2**7), 2**7 - 1),
    "int16": (-(2**15), 2**15 - 1),
    "int32": (-(2**31), 2**31 - 1),
    "int64": (-(2**63), 2**63 - 1),
    "uint8": (0, 2**8 - 1),
    "uint16": (0, 2**16 - 1),
    "uint32": (0, 2**32 - 1),
    "uint64": (0, 2**64 - 1),
}

FLOAT_TYPES = frozenset({"float32", "float64"})
NUMERIC_TYPES = frozenset(INT_RANGES) | FLOAT_TYPES


class MsgError(Exception):
    """Raised for malformed or unresolvable message definitions."""


@dataclass(frozen=True)
class FieldType:
    """A field's type: a builtin or 'pkg/Type', possibly an array of it."""

    base: str
    is_array: bool = False
    array_len: int | None = None  # None means unbounded when is_array

    @property
    def is_builtin(self) -> bool:
        return self.base in BUILTIN_FIELD_TYPES

    def __str__(self) -> str:
        if not self.is_array:
            return self.base
        return f"{self.base}[{self.array_len}]" if self.array_len is not None else f"{self.base}[]"


@dataclass
class MessageTypeDef:
    """A parsed message type: ordered fields plus named constants."""

    qualified_name: str
    fields: list[tuple[str, FieldType]] = field(default_factory=list)
    constants: list[tuple[str, FieldType, str]] = field(default_factory=list)

    def field_map(self) -> dict[str, FieldType]:
        return dict(self.fields)


_FIELD_RE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*(?:/[A-Za-z_][A-Za-z0-9_]*)?)"
    r"(\[(\d*)\])?\s+([A-Za-z_][A-Za-z0-9_]*)\s*$"
)
_CONST_RE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$"
)


def _parse_type_token(token: str, array_suffix: str | None, array_len: str | None, package: str) -> FieldType:
    if "/" in token:
        base = token
    elif token in BUILTIN_FIELD_TYPES:
        base = token
    else:
        # Bare non-builtin names refer to a type in the same package.
        base = f"{package}/{token}"
    if array_suffix is None:
        return FieldType(base)
    return FieldType(base, is_array=True, array_len=int(array_len) if array_len else None)


def parse_msg_text(
    text: str,
    qualified_name: str,
    known_types: set[str] | None = None,
) -> MessageTypeDef:
    """Parse the standard line-oriented .msg grammar.

    One field per non-comment line ("type name"), constants as "type NAME=value".
    When ``known_types`` is given, non-builtin field types must resolve inside it.
    """
    package = qualified_name.split("/", 1)[0]
    msg = MessageTypeDef(qualified_name)
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        # String constants keep everything after '=', including '#'.
        stripped = raw.strip()
        if stripped.startswith("string") and "=" in stripped.split("#", 1)[0]:
            line = stripped
        else:
            line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            m = _CONST_RE.match(line)
            if not m:
                raise MsgError(f"{qualified_name}:{lineno}: malformed constant: {raw.strip()!r}")
            type_tok, name, value = m.groups()
            if type_tok not in BUILTIN_FIELD_TYPES:
                raise MsgError(f"{qualified_name}:{lineno}: unknown constant type {type_tok!r}")
            msg.constants.append((name, FieldType(type_tok), value))
            continue
        m = _FIELD_RE.match(line)
        if not m:
            raise MsgError(f"{qualified_name}:{lineno}: malformed field: {raw.strip()!r}")
        type_tok, array_suffix, array_len, name = m.groups()
        ftype = _parse_type_token(type_tok, array_suffix, array_len, package)
        if not ftype.is_builtin and known_types is not None and ftype.base not in known_types:
            raise MsgError(f"{qualified_name}:{lineno}: unresolvable type {type_tok!r}")
        if name in seen:
            raise MsgError(f"{qualified_name}:{lineno}: duplicate field {name!r}")
        seen.add(name)
        msg.fields.append((name, ftype))
    return msg


def parse_msg_file(
    path: str | Path,
    package: str,
    known_types: set[str] | None = None,
) -> MessageTypeDef:
    path = Path(path)
    if path.suffix != ".msg":
        raise MsgError(f"{path}: not a .msg file")
    qualified = f"{package}/{path.stem}"
    return parse_msg_text(path.read_text(encoding="utf-8"), qualified, known_types)


def builtin_messages() -> dict[str, MessageTypeDef]:
    """The std_msgs subset shipped with the tool: Bool, Int32, Float64, String, Empty."""
    defs = {}
    for name, base in [
        ("std_msgs/Bool", "bool"),
        ("std_msgs/Int32", "int32"),
        ("std_msgs/Float64", "float64"),
        ("std_msgs/String", "string"),
    ]:
        defs[name] = MessageTypeDef(name, fields=[("data", FieldType(base))])
    defs["std_msgs/Empty"] = MessageTypeDef("std_msgs/Empty")
    return defs


class PayloadError(Exception):
    """A trace payload does not conform to the channel's message type."""


def _check_scalar(value: object, base: str, where: str) -> None:
    if base == "bool":
        if not isinstance(value, bool):
            raise PayloadError(f"{where}: expected bool, got {value!r}")
    elif base in INT_RANGES:
        if isinstance(value, bool) or not isinstance(value, int):
            raise PayloadError(f"{where}: expected {base}, got {value!r}")
        lo, hi = INT_RANGES[base]
        if not lo <= value <= hi:
            raise PayloadError(f"{where}: {value} out of range for {base}")
    elif base in FLOAT_TYPES:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise PayloadError(f"{where}: expected {base}, got {value!r}")
    elif base == "string":
        if not isinstance(value, str):
            raise PayloadError(f"{where}: expected string, got {value!r}")
    else:
        raise PayloadError(f"{where}: {base} is not a builtin type")


def validate_payload(
    payload: dict,
    msg: MessageTypeDef,
    index: dict[str, MessageTypeDef],
    where: str = "",
) -> None:
    """Check a payload dict against a message definition; raises PayloadError."""
    where = where or msg.qualified_name
    if not isinstance(payload, dict):
        raise PayloadError(f"{where}: payload must be an object, got {payload!r}")
    fields = msg.field_map()
    for key in payload:
        if key not in fields:
            raise PayloadError(f"{where}: unexpected field {key!r}")
    for name, ftype in msg.fields:
        if name not in payload:
            raise PayloadError(f"{where}: missing field {name!r}")
        value = payload[name]
        if ftype.is_array:
            if not isinstance(value, list):
                raise PayloadError(f"{where}.{name}: expected array")
            if ftype.array_len is not None and len(value) != ftype.array_len:
                raise PayloadError(
                    f"{where}.{name}: expected {ftype.array_len} elements, got {len(value)}"
                )
            for i, item in enumerate(value):
                _validate_element(item, ftype.base, index, f"{where}.{name}[{i}]")
        else:
            _validate_element(value, ftype.base, index, f"{where}.{name}")


def _validate_element(value: object, base: str, index: dict[str, MessageTypeDef], where: str) -> None:
    if base in BUILTIN_FIELD_TYPES:
        _check_scalar(value, base, where)
    else:
        nested = index.get(base)
        if nested is None:
            raise PayloadError(f"{where}: unknown message type {base!r}")
        validate_payload(value, nested, index, where)  # type: ignore[arg-type]


def field_type_at(
    msg: MessageTypeDef,
    path: list[str | int],
    index: dict[str, MessageTypeDef],
) -> FieldType:
    """Resolve a dotted/indexed field path to its type; raises MsgError."""
    current: FieldType | None = None
    ctx = msg
    for step in path:
        if isinstance(step, int):
            if current is None or not current.is_array:
                raise MsgError(f"{msg.qualified_name}: index applied to non-array")
            current = FieldType(current.base)
            continue
        if current is not None:
            if current.is_array:
                raise MsgError(f"{msg.qualified_name}: field access on array {current}")
            if current.is_builtin:
                raise MsgError(f"{msg.qualified_name}: field {step!r} on builtin {current.base}")
            nested = index.get(current.base)
            if nested is None:
                raise MsgError(f"{msg.qualified_name}: unknown type {current.base!r}")
            ctx = nested
        fields = ctx.field_map()
        if step not in fields:
            raise MsgError(f"{ctx.qualified_name}: no field {step!r}")
        current = fields[step]
    if current is None:
        raise MsgError(f"{msg.qualified_name}: empty field path")
    return current
