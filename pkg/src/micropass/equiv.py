"""Normalizers and the equivalence harness.

Normalizers are idempotent text rewrites that erase differences deemed
irrelevant (whitespace runs, blank lines, `./` path prefixes, seeded
identifiers, line order in selected regions).  The harness renders both
trees (optionally through macro expansion), normalizes, diffs, and issues
an equivalent / not-equivalent verdict with the residual attached.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import MicropassError, PlanError
from .snapshot import DiffResidual, Snapshot, diff_snapshots

NORMALIZER_KINDS = ("space-runs", "blank-lines", "dot-slash-paths",
                    "seeded-ids", "sort-lines")

_SPACE_RUN = re.compile(r"[ \t]+")
_BLANK_LINE = re.compile(r"^[ \t]*$")
_DOT_SLASH = re.compile(r"(?:(?<=^)|(?<=[\s\"']))(?:\./)+", re.MULTILINE)
_SEEDED_ID = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)_[0-9a-f]{8}\b")


def _norm_space_runs(text: str, pattern: str | None) -> str:
    out = []
    for line in text.split("\n"):
        line = _SPACE_RUN.sub(" ", line)
        out.append(line.rstrip(" "))
    return "\n".join(out)


def _norm_blank_lines(text: str, pattern: str | None) -> str:
    ended_nl = text.endswith("\n")
    lines = [ln for ln in text.split("\n") if not _BLANK_LINE.fullmatch(ln)]
    joined = "\n".join(lines)
    if joined and ended_nl:
        joined += "\n"
    return joined


def _norm_dot_slash(text: str, pattern: str | None) -> str:
    return _DOT_SLASH.sub("", text)


def _norm_seeded_ids(text: str, pattern: str | None) -> str:
    return _SEEDED_ID.sub(lambda m: m.group(1) + "_########", text)


def _norm_sort_lines(text: str, pattern: str | None) -> str:
    """Sort each maximal run of consecutive lines matching the selector."""
    if not pattern:
        return text
    selector = re.compile(pattern)
    ended_nl = text.endswith("\n")
    lines = text.split("\n")
    if ended_nl:
        lines = lines[:-1]
    out: list[str] = []
    run: list[str] = []
    for line in lines:
        if selector.search(line):
            run.append(line)
        else:
            out.extend(sorted(run))
            run = []
            out.append(line)
    out.extend(sorted(run))
    joined = "\n".join(out)
    if ended_nl and (joined or lines):
        joined += "\n"
    return joined


_IMPLS = {
    "space-runs": _norm_space_runs,
    "blank-lines": _norm_blank_lines,
    "dot-slash-paths": _norm_dot_slash,
    "seeded-ids": _norm_seeded_ids,
    "sort-lines": _norm_sort_lines,
}


@dataclass(frozen=True)
class Normalizer:
    kind: str
    scope: tuple[str, ...] = ()  # include globs; empty means all files
    pattern: str | None = None   # sort-lines line selector

    def __post_init__(self):
        if self.kind not in NORMALIZER_KINDS:
            raise PlanError(f"unknown normalizer kind: {self.kind!r}")
        if self.kind == "sort-lines" and not self.pattern:
            raise PlanError("sort-lines requires a line-selection pattern")
        if self.pattern is not None:
            try:
                re.compile(self.pattern)
            except re.error as exc:
                raise PlanError(f"bad normalizer pattern: {exc}")

    def applies_to(self, path: str | None) -> bool:
        if path is None or not self.scope:
            return True
        return any(fnmatch.fnmatchcase(path, g) for g in self.scope)

    def run(self, text: str) -> str:
        return _IMPLS[self.kind](text, self.pattern)

    def to_spec(self) -> dict:
        spec: dict = {"kind": self.kind}
        if self.scope:
            spec["scope"] = list(self.scope)
        if self.pattern is not None:
            spec["pattern"] = self.pattern
        return spec


class NormalizerChain:
    """Ordered normalizers applied in sequence; identified by a spec digest."""

    def __init__(self, normalizers: list[Normalizer] | tuple[Normalizer, ...] = ()):
        self.normalizers = tuple(normalizers)

    @classmethod
    def from_spec(cls, spec: list) -> "NormalizerChain":
        normalizers = []
        for item in spec:
            if isinstance(item, str):
                item = {"kind": item}
            normalizers.append(Normalizer(
                kind=item["kind"],
                scope=tuple(item.get("scope", ())),
                pattern=item.get("pattern"),
            ))
        return cls(normalizers)

    def to_spec(self) -> list[dict]:
        return [n.to_spec() for n in self.normalizers]

    @property
    def chain_id(self) -> str:
        blob = json.dumps(self.to_spec(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    def __bool__(self) -> bool:
        return bool(self.normalizers)

    def __repr__(self) -> str:
        kinds = "+".join(n.kind for n in self.normalizers) or "empty"
        return f"NormalizerChain({kinds})"

    def apply(self, data: bytes, path: str | None = None) -> bytes:
        """Non-UTF-8 content passes through untouched (binary safety).

        The chain is iterated to a fixpoint so the result is stable under
        reapplication even when one normalizer exposes work for an earlier
        one (e.g. dot-slash leaving a blank line behind).
        """
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            return data
        active = [n for n in self.normalizers if n.applies_to(path)]
        for _ in range(10):
            new = text
            for norm in active:
                new = norm.run(new)
            if new == text:
                break
            text = new
        return text.encode("utf-8")


def normalize(data: bytes, chain: NormalizerChain, path: str | None = None) -> bytes:
    return chain.apply(data, path=path)


GRAPH_ENTRY_PATH = "__dependency_graph__"


@dataclass(frozen=True)
class EquivalenceVerdict:
    status: str  # equivalent | not-equivalent
    residual: DiffResidual
    chain_used: str
    ir_based: bool
    notes: tuple[str, ...] = field(default=())

    @property
    def equivalent(self) -> bool:
        return self.status == "equivalent"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "chain_used": self.chain_used,
            "ir_based": self.ir_based,
            "changed_lines": self.residual.changed_lines,
            "residual": self.residual.to_dict(),
            "notes": list(self.notes),
        }


def check_equivalence(before: Snapshot, after: Snapshot, chain: NormalizerChain,
                      ir: bool = False, seed: str = "0") -> EquivalenceVerdict:
    """Compare two snapshots file-by-file after normalization.

    With `ir` set, both sides are macro-expanded (two-phase) first and their
    dependency graphs are compared as well; a graph difference shows up as a
    synthetic residual entry so the verdict invariant (equivalent iff zero
    changed lines) holds by construction.
    """
    notes: list[str] = []
    if ir:
        from . import macrolang
        from .depgraph import render_graph_text

        def expand_side(side: str, snap: Snapshot) -> tuple[Snapshot, bytes]:
            try:
                ir_tree, graph = macrolang.expand(snap, "two-phase", seed)
            except MicropassError as exc:
                raise MicropassError(f"expansion failed on {side} snapshot: {exc}")
            return ir_tree, render_graph_text(graph).encode("utf-8")

        ir_before, graph_before = expand_side("before", before)
        ir_after, graph_after = expand_side("after", after)
        left = ir_before.with_changes({GRAPH_ENTRY_PATH: graph_before})
        right = ir_after.with_changes({GRAPH_ENTRY_PATH: graph_after})
    else:
        left, right = before, after

    residual = diff_snapshots(left, right, chain)
    if any(e.path == GRAPH_ENTRY_PATH for e in residual.entries):
        notes.append("dependency graphs differ")
    status = "equivalent" if residual.changed_lines == 0 else "not-equivalent"
    return EquivalenceVerdict(status=status, residual=residual,
                              chain_used=chain.chain_id, ir_based=ir,
                              notes=tuple(notes))
