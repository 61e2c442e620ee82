"""Immutable codebase snapshots, normalized diffs, and the pass journal.

A Snapshot is an ordered, content-addressed map from relative paths to raw
bytes.  Every transformation consumes one Snapshot and produces a new one;
nothing here ever mutates in place.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from pathlib import Path
from typing import TYPE_CHECKING, Iterator, Mapping

from .errors import TreeError
from .reports import PassReport

if TYPE_CHECKING:
    from .equiv import EquivalenceVerdict, NormalizerChain

logger = logging.getLogger(__name__)

DEFAULT_IGNORE = (".git/**", "journal/**")
DIGEST_ALGORITHM = "sha256"
CONTEXT_LINES = 3

# Above this many total lines the minimal (Myers) differ is skipped in
# favour of difflib, whose output may be slightly non-minimal.
_MYERS_LINE_LIMIT = 8000


def normalize_path(path: str) -> str:
    """Validate a snapshot path: `/`-separated, relative, no dot components."""
    if "\\" in path:
        raise TreeError(f"backslash in path: {path!r}")
    if path.startswith("/") or not path:
        raise TreeError(f"path must be relative and non-empty: {path!r}")
    parts = path.split("/")
    if any(p in ("", ".", "..") for p in parts):
        raise TreeError(f"path contains empty or dot components: {path!r}")
    return path


class Snapshot:
    """Immutable path -> bytes map with a content-derived id."""

    __slots__ = ("_files", "_id")

    def __init__(self, files: Mapping[str, bytes]):
        items = sorted(files.items())
        for path, data in items:
            normalize_path(path)
            if not isinstance(data, bytes):
                raise TreeError(f"content of {path!r} must be bytes")
        self._files = dict(items)
        self._id: str | None = None

    @property
    def files(self) -> Mapping[str, bytes]:
        return self._files

    @property
    def paths(self) -> list[str]:
        return list(self._files)

    @property
    def id(self) -> str:
        """Hex digest of contents; insertion order never matters."""
        if self._id is None:
            h = hashlib.new(DIGEST_ALGORITHM)
            for path, data in self._files.items():
                pb = path.encode("utf-8")
                h.update(b"%d:" % len(pb))
                h.update(pb)
                h.update(b"%d:" % len(data))
                h.update(data)
            self._id = h.hexdigest()
        return self._id

    def __contains__(self, path: str) -> bool:
        return path in self._files

    def __getitem__(self, path: str) -> bytes:
        return self._files[path]

    def __len__(self) -> int:
        return len(self._files)

    def __iter__(self) -> Iterator[str]:
        return iter(self._files)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Snapshot) and self._files == other._files

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"Snapshot({len(self._files)} files, id={self.id[:12]})"

    def with_changes(self, changes: Mapping[str, bytes | None]) -> "Snapshot":
        """New snapshot with updates applied; a None value deletes the path."""
        files = dict(self._files)
        for path, data in changes.items():
            if data is None:
                files.pop(path, None)
            else:
                files[path] = data
        return Snapshot(files)


def _ignored(path: str, ignore_globs: tuple[str, ...]) -> bool:
    return any(fnmatch.fnmatchcase(path, pat) for pat in ignore_globs)


def load_tree(root: str | Path, ignore_globs: tuple[str, ...] = DEFAULT_IGNORE) -> Snapshot:
    """Load every regular file under root; symlinks and specials are skipped.

    Skipped entries are reported through the module logger.
    """
    root = Path(root)
    if not root.is_dir():
        raise TreeError(f"not a readable directory: {root}")
    files: dict[str, bytes] = {}
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        rel_dir = Path(dirpath).relative_to(root)
        for name in sorted(filenames):
            try:
                name.encode("utf-8")
            except UnicodeEncodeError:
                raise TreeError(f"non-decodable file name under {rel_dir}: {name!r}")
            rel = str(rel_dir / name) if str(rel_dir) != "." else name
            rel = rel.replace(os.sep, "/")
            if _ignored(rel, tuple(ignore_globs)):
                continue
            full = Path(dirpath) / name
            if full.is_symlink() or not full.is_file():
                logger.warning("skipping non-regular file: %s", rel)
                continue
            files[rel] = full.read_bytes()
    return Snapshot(files)


def write_tree(snap: Snapshot, root: str | Path, overwrite: bool = False) -> None:
    """Materialize a snapshot; refuses a non-empty root unless overwrite."""
    root = Path(root)
    if root.exists():
        if any(root.iterdir()) and not overwrite:
            raise TreeError(f"refusing to write into non-empty directory: {root}")
    else:
        root.mkdir(parents=True)
    for path, data in snap.files.items():
        target = root / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)


# ---------------------------------------------------------------------------
# Line diffing


def split_lines(text: str) -> list[str]:
    """Split on `\\n` only, keeping line endings (`\\r` stays in the line)."""
    parts = text.split("\n")
    lines = [p + "\n" for p in parts[:-1]]
    if parts[-1]:
        lines.append(parts[-1])
    return lines


def decode_lossless(data: bytes) -> str:
    return data.decode("utf-8", errors="surrogateescape")


def _myers_opcodes(a: list[str], b: list[str]) -> list[tuple[str, int, int, int, int]]:
    """Minimal edit script between two line lists, difflib-style opcodes."""
    n, m = len(a), len(b)
    if n + m > _MYERS_LINE_LIMIT:
        return SequenceMatcher(None, a, b, autojunk=False).get_opcodes()
    # Forward O(ND) search recording the frontier per edit distance.
    v = {1: 0}
    trace: list[dict[int, int]] = []
    depth = None
    for d in range(n + m + 1):
        trace.append(dict(v))
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v.get(k - 1, -1) < v.get(k + 1, -1)):
                x = v[k + 1]
            else:
                x = v[k - 1] + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                depth = d
                break
        if depth is not None:
            break
    # Backtrack into unit steps, then coalesce runs.
    steps: list[tuple[str, int, int]] = []  # (tag, i, j) for single elements
    x, y = n, m
    for d in range(depth, 0, -1):
        vd = trace[d]
        k = x - y
        if k == -d or (k != d and vd.get(k - 1, -1) < vd.get(k + 1, -1)):
            pk = k + 1
        else:
            pk = k - 1
        px = vd[pk]
        py = px - pk
        while x > px and y > py:
            x -= 1
            y -= 1
            steps.append(("equal", x, y))
        if d > 0:
            if x == px:
                y -= 1
                steps.append(("insert", x, y))
            else:
                x -= 1
                steps.append(("delete", x, y))
    while x > 0 and y > 0:
        x -= 1
        y -= 1
        steps.append(("equal", x, y))
    steps.reverse()

    opcodes: list[tuple[str, int, int, int, int]] = []
    i = j = 0
    idx = 0
    while idx < len(steps):
        tag = steps[idx][0]
        if tag == "equal":
            start_i, start_j = i, j
            while idx < len(steps) and steps[idx][0] == "equal":
                i += 1
                j += 1
                idx += 1
            opcodes.append(("equal", start_i, i, start_j, j))
        else:
            start_i, start_j = i, j
            while idx < len(steps) and steps[idx][0] != "equal":
                if steps[idx][0] == "delete":
                    i += 1
                else:
                    j += 1
                idx += 1
            if i > start_i and j > start_j:
                opcodes.append(("replace", start_i, i, start_j, j))
            elif i > start_i:
                opcodes.append(("delete", start_i, i, start_j, j))
            else:
                opcodes.append(("insert", start_i, i, start_j, j))
    return opcodes


def _grouped_opcodes(opcodes, n: int = CONTEXT_LINES):
    """Split opcodes into hunk groups with n lines of context (difflib logic)."""
    codes = [op for op in opcodes]
    if not codes or all(tag == "equal" for tag, *_ in codes):
        return []
    if codes[0][0] == "equal":
        tag, i1, i2, j1, j2 = codes[0]
        codes[0] = (tag, max(i1, i2 - n), i2, max(j1, j2 - n), j2)
    if codes[-1][0] == "equal":
        tag, i1, i2, j1, j2 = codes[-1]
        codes[-1] = (tag, i1, min(i2, i1 + n), j1, min(j2, j1 + n))
    groups = []
    group: list[tuple[str, int, int, int, int]] = []
    for tag, i1, i2, j1, j2 in codes:
        if tag == "equal" and i2 - i1 > 2 * n:
            group.append((tag, i1, min(i2, i1 + n), j1, min(j2, j1 + n)))
            groups.append(group)
            group = [(tag, max(i1, i2 - n), i2, max(j1, j2 - n), j2)]
            continue
        group.append((tag, i1, i2, j1, j2))
    if group and not (len(group) == 1 and group[0][0] == "equal"):
        groups.append(group)
    return groups


@dataclass(frozen=True)
class Hunk:
    """One unified-diff hunk; lines carry their ' ', '-', '+' prefixes."""

    old_start: int  # 0-based offset into the old line list
    old_len: int
    new_start: int
    new_len: int
    lines: tuple[str, ...]

    @property
    def added(self) -> int:
        return sum(1 for ln in self.lines if ln.startswith("+"))

    @property
    def removed(self) -> int:
        return sum(1 for ln in self.lines if ln.startswith("-"))

    def header(self) -> str:
        return "@@ -%s +%s @@" % (
            _format_range(self.old_start, self.old_len),
            _format_range(self.new_start, self.new_len),
        )

    def render(self) -> str:
        out = [self.header() + "\n"]
        for ln in self.lines:
            if ln.endswith("\n"):
                out.append(ln)
            else:
                out.append(ln + "\n\\ No newline at end of file\n")
        return "".join(out)


def _format_range(start: int, length: int) -> str:
    beginning = start + 1
    if length == 1:
        return str(beginning)
    if not length:
        beginning -= 1
    return f"{beginning},{length}"


def _hunks_for(old_text: str, new_text: str) -> tuple[Hunk, ...]:
    a = split_lines(old_text)
    b = split_lines(new_text)
    hunks = []
    for group in _grouped_opcodes(_myers_opcodes(a, b)):
        i1, j1 = group[0][1], group[0][3]
        i2, j2 = group[-1][2], group[-1][4]
        lines: list[str] = []
        for tag, gi1, gi2, gj1, gj2 in group:
            if tag == "equal":
                lines.extend(" " + ln for ln in a[gi1:gi2])
                continue
            lines.extend("-" + ln for ln in a[gi1:gi2])
            lines.extend("+" + ln for ln in b[gj1:gj2])
        hunks.append(Hunk(i1, i2 - i1, j1, j2 - j1, tuple(lines)))
    return tuple(hunks)


@dataclass(frozen=True)
class FileDiff:
    path: str
    status: str  # added | removed | modified
    hunks: tuple[Hunk, ...]

    @property
    def changed_lines(self) -> int:
        return sum(h.added + h.removed for h in self.hunks)


@dataclass(frozen=True)
class DiffResidual:
    """Per-file normalized diff entries; empty means the trees compare equal.

    A path present on only one side is compared against empty content, so an
    added or removed file whose normalized content is empty produces no entry.
    """

    entries: tuple[FileDiff, ...]

    @property
    def changed_lines(self) -> int:
        return sum(e.changed_lines for e in self.entries)

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def to_dict(self) -> dict:
        return {
            "changed_lines": self.changed_lines,
            "entries": [
                {"path": e.path, "status": e.status, "changed_lines": e.changed_lines}
                for e in self.entries
            ],
        }


def diff_snapshots(a: Snapshot, b: Snapshot,
                   chain: "NormalizerChain | None" = None) -> DiffResidual:
    """Diff two snapshots after normalizing each file through `chain`."""
    entries = []
    for path in sorted(set(a.paths) | set(b.paths)):
        da = a.files.get(path)
        db = b.files.get(path)
        na = _apply_chain(chain, path, da)
        nb = _apply_chain(chain, path, db)
        if na == nb:
            continue
        if da is None:
            status = "added"
        elif db is None:
            status = "removed"
        else:
            status = "modified"
        hunks = _hunks_for(decode_lossless(na), decode_lossless(nb))
        entries.append(FileDiff(path, status, hunks))
    return DiffResidual(tuple(entries))


def _apply_chain(chain, path: str, data: bytes | None) -> bytes:
    if data is None:
        return b""
    if chain is None:
        return data
    return chain.apply(data, path=path)


def render_patch(residual: DiffResidual, a_prefix: str = "a/", b_prefix: str = "b/") -> str:
    """Unified-diff text with 3 context lines, git-style path prefixes."""
    out: list[str] = []
    for entry in residual.entries:
        old_name = "/dev/null" if entry.status == "added" else a_prefix + entry.path
        new_name = "/dev/null" if entry.status == "removed" else b_prefix + entry.path
        out.append(f"--- {old_name}\n")
        out.append(f"+++ {new_name}\n")
        for hunk in entry.hunks:
            out.append(hunk.render())
    return "".join(out)


# ---------------------------------------------------------------------------
# Journal


@dataclass
class PassRecord:
    """Outcome of one pass: ids chain, report, and the check's residual."""

    name: str
    index: int
    input_id: str
    output_id: str | None
    report: PassReport | None
    status: str = "ok"  # ok | failed
    error: str | None = None
    verdict: "EquivalenceVerdict | None" = None
    residual: DiffResidual | None = None
    input_snapshot: Snapshot | None = None
    output_snapshot: Snapshot | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "index": self.index,
            "input_snapshot": self.input_id,
            "output_snapshot": self.output_id,
            "status": self.status,
            "error": self.error,
            "verdict": self.verdict.to_dict() if self.verdict is not None else None,
            "residual": self.residual.to_dict() if self.residual is not None else None,
            "report": self.report.to_dict() if self.report is not None else None,
        }


@dataclass
class Journal:
    """Ordered pass records; the artifact's analogue of a rebased history."""

    initial_snapshot: Snapshot
    seed: str = "0"
    plan_digest: str = ""
    digest_algorithm: str = DIGEST_ALGORITHM
    records: list[PassRecord] = field(default_factory=list)

    @property
    def final_snapshot(self) -> Snapshot:
        for record in reversed(self.records):
            if record.status == "ok" and record.output_snapshot is not None:
                return record.output_snapshot
        return self.initial_snapshot

    @property
    def halted(self) -> bool:
        return any(r.status == "failed" for r in self.records)

    def verify_chain(self) -> None:
        prev = self.initial_snapshot.id
        for record in self.records:
            assert record.input_id == prev, (
                f"journal chain broken at record {record.index}: "
                f"{record.input_id} != {prev}"
            )
            if record.output_id is not None:
                prev = record.output_id

    def header_dict(self) -> dict:
        return {
            "digest_algorithm": self.digest_algorithm,
            "seed": self.seed,
            "plan_digest": self.plan_digest,
            "initial_snapshot": self.initial_snapshot.id,
            "final_snapshot": self.final_snapshot.id,
            "records": len(self.records),
            "halted": self.halted,
        }


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def save_journal(journal: Journal, out_dir: str | Path) -> Path:
    """Persist as `journal/NNN-<pass-name>/` with report.json and diff.patch."""
    journal.verify_chain()
    root = Path(out_dir) / "journal"
    root.mkdir(parents=True, exist_ok=True)
    (root / "header.json").write_bytes(_json_bytes(journal.header_dict()))
    for record in journal.records:
        rec_dir = root / f"{record.index + 1:03d}-{record.name}"
        rec_dir.mkdir(parents=True, exist_ok=True)
        (rec_dir / "report.json").write_bytes(_json_bytes(record.to_dict()))
        if record.input_snapshot is not None and record.output_snapshot is not None:
            raw = diff_snapshots(record.input_snapshot, record.output_snapshot)
            (rec_dir / "diff.patch").write_text(render_patch(raw), encoding="utf-8",
                                                errors="surrogateescape")
    return root
