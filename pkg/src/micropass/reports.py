"""Pass reports: the audit trail every transformation emits."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class EditSite:
    """One edit location, precise enough to re-check with grep."""

    path: str
    line: int
    before: str
    after: str

    def to_dict(self) -> dict:
        return {"path": self.path, "line": self.line,
                "before": self.before, "after": self.after}


@dataclass
class PassReport:
    """What a pass did: every edit site plus aggregate counts."""

    name: str
    kind: str
    edits: list[EditSite] = field(default_factory=list)
    files_added: list[str] = field(default_factory=list)
    files_removed: list[str] = field(default_factory=list)
    files_moved: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def edit_count(self) -> int:
        return len(self.edits)

    @property
    def files_changed(self) -> list[str]:
        """Sorted paths this pass touched in any way (old and new names)."""
        touched = {e.path for e in self.edits}
        touched.update(self.files_added)
        touched.update(self.files_removed)
        touched.update(self.files_moved)
        touched.update(self.files_moved.values())
        return sorted(touched)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "edit_count": self.edit_count,
            "edits": [e.to_dict() for e in self.edits],
            "files_added": list(self.files_added),
            "files_removed": list(self.files_removed),
            "files_moved": dict(self.files_moved),
            "files_changed": self.files_changed,
            "warnings": list(self.warnings),
            "notes": list(self.notes),
        }
