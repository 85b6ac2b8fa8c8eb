"""Game graphs: grid generation, adjacency import and scenario checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AsymmetricUndirectedEdge,
    DuplicateNeighbor,
    OutOfRangeNeighbor,
    OutOfRangeVertex,
    ValidationError,
)


@dataclass(frozen=True)
class Graph:
    """Immutable arena for one game.

    ``adjacency[v]`` is the ordered tuple of vertices reachable from ``v`` in
    one move. ``weights`` is carried for import/export only; no solver reads it.
    """

    vertex_count: int
    adjacency: tuple[tuple[int, ...], ...]
    exits: frozenset[int] = frozenset()
    directed: bool = False
    weights: dict[tuple[int, int], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.vertex_count < 1:
            raise ValidationError("graph needs at least one vertex")
        if len(self.adjacency) != self.vertex_count:
            raise ValidationError("adjacency length does not match vertex_count")
        n = self.vertex_count
        for u, nbrs in enumerate(self.adjacency):
            if len(set(nbrs)) != len(nbrs):
                raise DuplicateNeighbor(f"vertex {u} lists a neighbor twice: {list(nbrs)}")
            for v in nbrs:
                if not 0 <= v < n:
                    raise OutOfRangeNeighbor(f"vertex {u} lists neighbor {v} outside [0, {n})")
        if not self.directed:
            for u, nbrs in enumerate(self.adjacency):
                for v in nbrs:
                    if u not in self.adjacency[v]:
                        raise AsymmetricUndirectedEdge(f"{u} lists {v} but {v} omits {u}")
        for x in self.exits:
            if not 0 <= x < n:
                raise OutOfRangeVertex(f"exit {x} outside [0, {n})")

    @property
    def edge_count(self) -> int:
        total = sum(len(a) for a in self.adjacency)
        return total if self.directed else total // 2

    def edges(self) -> list[tuple[int, int]]:
        if self.directed:
            return [(u, v) for u, a in enumerate(self.adjacency) for v in a]
        return [(u, v) for u, a in enumerate(self.adjacency) for v in a if u < v]

    def with_exits(self, exits: Iterable[int]) -> "Graph":
        return Graph(self.vertex_count, self.adjacency, frozenset(int(x) for x in exits),
                     self.directed, self.weights)

    def to_adjacency(self) -> list[list[int]]:
        return [list(a) for a in self.adjacency]


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    side_exist_prob: float = 1.0
    diagonal_exist_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        for name in ("side_exist_prob", "diagonal_exist_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


def generate_grid(spec: GridSpec) -> Graph:
    """Sample an undirected grid graph with row-major vertex ids.

    Candidate edges are drawn in a fixed order (all side edges row-major, then
    all diagonal edges row-major), one uniform draw each, so the seed alone
    determines the result.
    """
    rows, cols = spec.rows, spec.cols
    rng = np.random.default_rng(spec.seed)
    nbrs: list[set[int]] = [set() for _ in range(rows * cols)]

    def add(u, v):
        nbrs[u].add(v)
        nbrs[v].add(u)

    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols and rng.random() < spec.side_exist_prob:
                add(u, u + 1)
            if r + 1 < rows and rng.random() < spec.side_exist_prob:
                add(u, u + cols)
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if r + 1 < rows and c + 1 < cols and rng.random() < spec.diagonal_exist_prob:
                add(u, u + cols + 1)
            if r + 1 < rows and c >= 1 and rng.random() < spec.diagonal_exist_prob:
                add(u, u + cols - 1)
    return Graph(rows * cols, tuple(tuple(sorted(s)) for s in nbrs))


def from_adjacency(lists: Sequence[Sequence[int]], directed: bool = False,
                   exits: Iterable[int] = ()) -> Graph:
    """Build a graph from per-vertex neighbor lists.

    Undirected input must already be symmetric; it is checked, not repaired.
    """
    return Graph(len(lists), tuple(tuple(int(v) for v in a) for a in lists),
                 frozenset(int(x) for x in exits), bool(directed))


def neighbors(graph: Graph, v: int, allow_stay: bool = True) -> list[int]:
    if not 0 <= v < graph.vertex_count:
        raise OutOfRangeVertex(f"vertex {v} outside [0, {graph.vertex_count})")
    adj = list(graph.adjacency[v])
    return [v] + adj if allow_stay else adj


def move_options(graph: Graph, v: int, allow_stay: bool = True) -> list[int]:
    """Moves actually available at ``v``: a dead end forces the mover to stay."""
    opts = neighbors(graph, v, allow_stay)
    return opts if opts else [v]


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self):
        return f"{self.code}: {self.detail}"


def validate_scenario(graph: Graph, config) -> list[Violation]:
    """Return every problem with ``config`` on ``graph``; empty means ok."""
    out = []
    n = graph.vertex_count
    if not graph.exits:
        out.append(Violation("NoExits", "scenario has no exit vertices"))
    for x in sorted(graph.exits):
        if not 0 <= x < n:
            out.append(Violation("ExitOutOfRange", f"exit {x} not in [0, {n})"))
    if len(config.pursuer_starts) < 1:
        out.append(Violation("NoPursuers", "at least one pursuer is required"))
    for i, p in enumerate(config.pursuer_starts):
        if not 0 <= p < n:
            out.append(Violation("PositionOutOfRange", f"pursuer {i} starts at {p}, not in [0, {n})"))
    if not 0 <= config.evader_start < n:
        out.append(Violation("PositionOutOfRange",
                             f"evader starts at {config.evader_start}, not in [0, {n})"))
    if config.horizon < 1:
        out.append(Violation("HorizonTooShort", f"horizon must be >= 1, got {config.horizon}"))
    return out
