"""Exception hierarchy.

Every error the engine raises on bad input derives from ``LakeError``; the CLI
maps those to exit status 1 and anything else to exit status 2.
"""

from __future__ import annotations

from typing import Optional


class LakeError(Exception):
    """Base class for user-facing engine errors."""

    stage = "engine"

    def __init__(self, message: str, *, node: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.node = node

    def __str__(self) -> str:
        if self.node:
            return f"node {self.node}: {self.message}"
        return self.message


class KindMismatch(LakeError):
    stage = "evaluate"


class ProgramSyntaxError(LakeError):
    stage = "parse"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(LakeError):
    stage = "validate"

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class ManifestError(LakeError):
    stage = "manifest"


class EmptySource(LakeError):
    stage = "discovery"


class NoSourceFound(LakeError):
    stage = "discovery"


class UnknownGoldSource(LakeError):
    stage = "discovery"


class UnknownTable(LakeError):
    stage = "execute"


class UnknownAttribute(LakeError):
    stage = "execute"


class UnknownProperty(LakeError):
    stage = "execute"


class MissingIdColumn(LakeError):
    stage = "execute"


class SchemaMismatch(LakeError):
    stage = "execute"


class UncompilableCondition(LakeError):
    stage = "plan"


class UnknownMode(LakeError):
    stage = "execute"


class EmptyQuery(LakeError):
    stage = "execute"


class UnsupportedOperatorForModality(LakeError):
    stage = "compile"


class NoOutputs(LakeError):
    stage = "verify"


class PlanError(LakeError):
    stage = "plan"
