"""Unified issue records shared by every analysis stage.

Every finding, from a missing package to a falsified behavioural property,
is reported through the same :class:`Issue` record so that the final report
is the single place results appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


class Category(str, Enum):
    MODEL = "model"
    QUERY = "query"
    TYPECHECK = "typecheck"
    HPL = "hpl"
    RUNTIME = "runtime"
    TESTING = "testing"
    INDEXING = "indexing"


@dataclass(frozen=True)
class Issue:
    """A single analysis finding.

    ``id`` has the form ``<category>:<rule>:<ordinal>`` and is stable across
    runs over identical inputs.  ``scope`` names the artefact or graph entity
    the finding is about, e.g. ``pkg:fictibot_drivers``,
    ``file:src/driver.cpp:12``, ``config:multiplex`` or ``entity:/bumper``.
    """

    id: str
    severity: Severity
    category: Category
    scope: str
    message: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "severity": self.severity.value,
            "category": self.category.value,
            "scope": self.scope,
            "message": self.message,
        }


def package_scope(name: str) -> str:
    return f"pkg:{name}"


def file_scope(path: str, line: int | None = None) -> str:
    return f"file:{path}" if line is None else f"file:{path}:{line}"


def config_scope(name: str) -> str:
    return f"config:{name}"


def entity_scope(name: str) -> str:
    return f"entity:{name}"


@dataclass
class IssueLog:
    """Accumulates raw findings; ids are assigned once at `finalize`.

    Ordinals are assigned per (category, rule) after sorting by
    (scope, message), so they do not depend on the order stages ran in.
    """

    _records: list[tuple[Category, str, Severity, str, str]] = field(default_factory=list)

    def add(
        self,
        category: Category,
        rule: str,
        severity: Severity,
        scope: str,
        message: str,
    ) -> None:
        self._records.append((category, rule, severity, scope, message))

    def extend(self, other: "IssueLog") -> None:
        self._records.extend(other._records)

    def __len__(self) -> int:
        return len(self._records)

    def has_errors(self) -> bool:
        return any(sev is Severity.ERROR for _, _, sev, _, _ in self._records)

    def finalize(self) -> list[Issue]:
        """Assign stable ids and return issues sorted by id."""
        counters: dict[tuple[Category, str], int] = {}
        issues = []
        ordered = sorted(
            self._records,
            key=lambda r: (r[0].value, r[1], r[3], r[4]),
        )
        for category, rule, severity, scope, message in ordered:
            ordinal = counters.get((category, rule), 0)
            counters[(category, rule)] = ordinal + 1
            issues.append(
                Issue(
                    id=f"{category.value}:{rule}:{ordinal}",
                    severity=severity,
                    category=category,
                    scope=scope,
                    message=message,
                )
            )
        return issues
