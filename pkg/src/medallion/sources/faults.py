"""Fault profiles for the simulated connectors.

Exactly one mode is active per connector per scenario. The profile itself is
immutable; attempt counting for the fail-then-recover modes lives in the hub
so a profile can be shared between runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping


class FaultMode(str, Enum):
    NONE = "none"
    SILENT_TRUNCATION = "silent_truncation"
    TIMEOUT = "timeout"
    SCHEMA_RENAME = "schema_rename"
    RATE_LIMIT = "rate_limit"
    EXPIRED_CREDENTIALS = "expired_credentials"


@dataclass(frozen=True)
class FaultProfile:
    mode: FaultMode = FaultMode.NONE
    # silent_truncation: pages at or past this index come back empty with a
    # success status. 0 makes the whole day look like a quiet one.
    truncate_after_page: int = 0
    # schema_rename: (old, new) payload field name.
    renamed_field: tuple[str, str] | None = None
    # timeout / rate_limit: how many fetches fail before the source recovers.
    # Negative means it never recovers.
    failures_before_success: int = -1

    def __post_init__(self):
        if self.mode is FaultMode.SCHEMA_RENAME and self.renamed_field is None:
            raise ValueError("schema_rename fault needs renamed_field=(old, new)")
        if self.truncate_after_page < 0:
            raise ValueError("truncate_after_page must be >= 0")

    def to_doc(self) -> dict:
        doc: dict[str, Any] = {"mode": self.mode.value}
        if self.mode is FaultMode.SILENT_TRUNCATION:
            doc["truncate_after_page"] = self.truncate_after_page
        if self.renamed_field is not None:
            doc["renamed_field"] = list(self.renamed_field)
        if self.mode in (FaultMode.TIMEOUT, FaultMode.RATE_LIMIT):
            doc["failures_before_success"] = self.failures_before_success
        return doc

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "FaultProfile":
        renamed = doc.get("renamed_field")
        return cls(
            mode=FaultMode(doc.get("mode", "none")),
            truncate_after_page=int(doc.get("truncate_after_page", 0)),
            renamed_field=tuple(renamed) if renamed else None,
            failures_before_success=int(doc.get("failures_before_success", -1)),
        )


NO_FAULT = FaultProfile()
