"""Dependency graphs: construction, reachability, and dead-code analysis."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import GraphError
from .reports import PassReport
from .snapshot import Snapshot

PROVENANCE_LINK = "link-directive"
PROVENANCE_PATTERN = "pattern-rule"


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    provenance: str

    def render(self) -> str:
        return f"{self.src} -> {self.dst} [{self.provenance}]"


@dataclass(frozen=True)
class DependencyGraph:
    """Directed graph over paths/symbols; endpoints need not exist as files."""

    nodes: frozenset[str]
    edges: frozenset[Edge]
    declared_roots: frozenset[str] = frozenset()
    files: frozenset[str] = frozenset()  # snapshot paths known at build time

    @classmethod
    def from_edges(cls, edges, extra_nodes=(), declared_roots=(), files=()):
        edges = frozenset(edges)
        nodes = {e.src for e in edges} | {e.dst for e in edges} | set(extra_nodes)
        return cls(nodes=frozenset(nodes), edges=edges,
                   declared_roots=frozenset(declared_roots),
                   files=frozenset(files))

    def successors(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges:
            out[e.src].add(e.dst)
        return out

    def predecessors(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges:
            out[e.dst].add(e.src)
        return out

    def dangling_edges(self) -> list[Edge]:
        """Edges whose target is not a known file (when files are known)."""
        if not self.files:
            return []
        return sorted((e for e in self.edges if e.dst not in self.files),
                      key=lambda e: (e.src, e.dst, e.provenance))


@dataclass(frozen=True)
class LivenessReport:
    live: frozenset[str]
    dead: frozenset[str]
    dangling: tuple[Edge, ...]

    def to_dict(self) -> dict:
        return {"live": sorted(self.live), "dead": sorted(self.dead),
                "dangling": [e.render() for e in self.dangling]}


@dataclass(frozen=True)
class ReferenceRule:
    """A reference-recognition rule: regex with one capture group."""

    pattern: str
    kind: str = "path-ref"
    compiled: re.Pattern = field(compare=False, hash=False, default=None)

    def __post_init__(self):
        try:
            rx = re.compile(self.pattern, re.MULTILINE)
        except re.error as exc:
            raise GraphError(f"bad reference rule {self.pattern!r}: {exc}")
        if rx.groups != 1:
            raise GraphError(
                f"reference rule must have exactly one capture group: {self.pattern!r}")
        object.__setattr__(self, "compiled", rx)


def build_graph(snap: Snapshot, rules: list[ReferenceRule] = (),
                include_links: bool = True,
                declared_roots: frozenset[str] | set[str] = frozenset()) -> DependencyGraph:
    """Edges from macro link directives plus pattern-rule references.

    Every snapshot file becomes a node so isolated files are visible to
    liveness analysis.
    """
    edges: set[Edge] = set()
    if include_links:
        from . import macrolang  # deferred: macrolang returns this module's type

        for src, dst in macrolang.collect_link_edges(snap):
            edges.add(Edge(src, dst, PROVENANCE_LINK))
    for path, data in snap.files.items():
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            continue
        for rule in rules:
            for m in rule.compiled.finditer(text):
                edges.add(Edge(path, m.group(1), PROVENANCE_PATTERN))
    return DependencyGraph.from_edges(
        edges, extra_nodes=snap.paths, declared_roots=declared_roots,
        files=snap.paths)


def _forward_reach(graph: DependencyGraph, starts: set[str]) -> set[str]:
    succ = graph.successors()
    seen = set(starts)
    stack = list(starts)
    while stack:
        node = stack.pop()
        for nxt in succ.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def reverse_closure(graph: DependencyGraph, targets: set[str]) -> set[str]:
    """All nodes with a directed path into `targets`, plus the targets.

    The result never has an in-edge from outside itself; asserted because
    dead-code deletion depends on it.
    """
    pred = graph.predecessors()
    seen = set(targets)
    stack = list(targets)
    while stack:
        node = stack.pop()
        for prv in pred.get(node, ()):
            if prv not in seen:
                seen.add(prv)
                stack.append(prv)
    for e in graph.edges:
        assert not (e.dst in seen and e.src not in seen), \
            f"reverse closure leaked an in-edge: {e.render()}"
    return seen


def dead_closure(graph: DependencyGraph, roots: set[str]) -> LivenessReport:
    unknown = set(roots) - graph.nodes
    if unknown:
        raise GraphError(f"unknown root node(s): {sorted(unknown)}")
    live = _forward_reach(graph, set(roots))
    dead = graph.nodes - live
    return LivenessReport(live=frozenset(live), dead=frozenset(dead),
                          dangling=tuple(graph.dangling_edges()))


def obsolete_roots(graph: DependencyGraph, roots: set[str],
                   removal: set[str]) -> set[str]:
    """True roots of the obsolete subgraph over a removal set.

    Returns the zero-in-degree ancestors of `removal`: deleting the whole
    reverse closure rooted there leaves no dangling in-edges.  If a live
    root can reach the removal set the graph is refused with one witness
    path.
    """
    unknown = set(removal) - graph.nodes
    if unknown:
        raise GraphError(f"removal set contains unknown node(s): {sorted(unknown)}")
    closure = reverse_closure(graph, set(removal))
    live_hit = closure & set(roots)
    if live_hit:
        root = sorted(live_hit)[0]
        path = _witness_path(graph, root, set(removal))
        raise GraphError(
            f"live root depends on removal set: {root} (path: {' -> '.join(path)})")
    pred = graph.predecessors()
    return {n for n in closure if not pred.get(n)}


def _witness_path(graph: DependencyGraph, start: str, targets: set[str]) -> list[str]:
    succ = graph.successors()
    stack = [(start, [start])]
    seen = {start}
    while stack:
        node, path = stack.pop()
        if node in targets:
            return path
        for nxt in sorted(succ.get(node, ())):
            if nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, path + [nxt]))
    return [start]


def eliminate_dead(snap: Snapshot, graph: DependencyGraph,
                   roots: set[str]) -> tuple[Snapshot, PassReport]:
    """Remove files unreachable from the roots; survivors stay byte-identical."""
    report = PassReport(name="eliminate_dead", kind="eliminate_dead")
    liveness = dead_closure(graph, roots)
    removals = sorted(p for p in liveness.dead if p in snap)
    result = snap.with_changes({p: None for p in removals})
    report.files_removed = removals
    for edge in liveness.dangling:
        report.warnings.append(f"dangling reference: {edge.render()}")
    # deleting unreachable files can never orphan a live reference
    for e in graph.edges:
        assert not (e.src in liveness.live and e.dst in liveness.dead)
    report.notes.append(f"{len(liveness.live)} live, {len(liveness.dead)} dead nodes")
    return result, report


def render_graph_text(graph: DependencyGraph) -> str:
    lines = sorted(e.render() for e in graph.edges)
    return "".join(line + "\n" for line in lines)


def render_graph_dot(graph: DependencyGraph) -> str:
    out = ["digraph dependencies {\n"]
    for node in sorted(graph.nodes):
        shape = ' [shape=box]' if node in graph.declared_roots else ""
        out.append(f'  "{node}"{shape};\n')
    for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.provenance)):
        out.append(f'  "{e.src}" -> "{e.dst}" [label="{e.provenance}"];\n')
    out.append("}\n")
    return "".join(out)
