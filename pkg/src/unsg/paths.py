"""Evader open-loop strategies: timed routes from the start to an exit."""

from __future__ import annotations

import enum
import io
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import NoFeasiblePath, PathExplosion, ValidationError
from .graph import Graph, move_options

DEFAULT_PATH_CAP = 5_000_000

# An evader path is the tuple of vertices occupied at t = 0, 1, ..., k.
EvaderPath = tuple


class PathMode(str, enum.Enum):
    SIMPLE = "simple"
    WALKS = "walks"


@dataclass(frozen=True)
class PathSet:
    paths: tuple[EvaderPath, ...]
    mode: PathMode
    max_len: int

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def __getitem__(self, i):
        return self.paths[i]

    @property
    def exact(self) -> bool:
        """Whether the set covers every open-loop evader strategy up to ``max_len``."""
        return self.mode is PathMode.WALKS

    @property
    def note(self) -> str:
        if self.exact:
            return "walks: complete open-loop strategy space"
        return "simple paths only: evader strategies that wait or revisit are excluded"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("path\n")
        for p in self.paths:
            buf.write(";".join(str(v) for v in p) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, mode=PathMode.SIMPLE, max_len: int | None = None) -> "PathSet":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if rows and rows[0] == "path":
            rows = rows[1:]
        paths = sorted({tuple(int(v) for v in r.split(";")) for r in rows})
        if max_len is None:
            max_len = max((len(p) - 1 for p in paths), default=0)
        return cls(tuple(paths), PathMode(mode), max_len)

    @classmethod
    def of(cls, paths: Iterable[EvaderPath], mode=PathMode.SIMPLE, max_len: int | None = None):
        ps = sorted({tuple(int(v) for v in p) for p in paths})
        if max_len is None:
            max_len = max((len(p) - 1 for p in ps), default=0)
        return cls(tuple(ps), PathMode(mode), max_len)


def enumerate_paths(graph: Graph, start: int, max_len: int, mode=PathMode.SIMPLE,
                    allow_stay: bool = True, cap: int = DEFAULT_PATH_CAP) -> PathSet:
    """All routes from ``start`` that end at the first exit they touch.

    ``simple`` routes never repeat a vertex. ``walks`` allows revisits and,
    with ``allow_stay``, waiting in place. Raises PathExplosion rather than
    returning a truncated set when more than ``cap`` routes exist.
    """
    mode = PathMode(mode)
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    exits = graph.exits
    if start in exits:
        return PathSet(((start,),), mode, max_len)

    found: list[EvaderPath] = []
    path = [start]
    simple = mode is PathMode.SIMPLE
    on_path = [False] * graph.vertex_count
    on_path[start] = True
    if simple:
        options = [list(a) for a in graph.adjacency]
    else:
        options = [move_options(graph, v, allow_stay) for v in range(graph.vertex_count)]

    def dfs(v, depth):
        for w in options[v]:
            if simple and on_path[w]:
                continue
            if w in exits:
                found.append(tuple(path) + (w,))
                if len(found) > cap:
                    raise PathExplosion(f"more than {cap} evader paths (max_len={max_len}, mode={mode.value})")
                continue
            if depth + 1 < max_len:
                path.append(w)
                on_path[w] = True
                dfs(w, depth + 1)
                on_path[w] = False
                path.pop()

    dfs(start, 0)
    found.sort()
    return PathSet(tuple(found), mode, max_len)


UNREACHABLE = None


def shortest_exit_distance(graph: Graph, start: int) -> int | None:
    """Breadth-first move count from ``start`` to the nearest exit, or None."""
    if start in graph.exits:
        return 0
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in graph.adjacency[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                if w in graph.exits:
                    return dist[w]
                queue.append(w)
    return UNREACHABLE


def sample_simplified_br(graph: Graph, start: int, max_len: int,
                         rng: np.random.Generator, cap: int = DEFAULT_PATH_CAP) -> EvaderPath:
    """Pick a reachable exit uniformly, then a simple path to it uniformly.

    This is the cheap evader response many learning methods train against; it
    is not an exact best response.
    """
    paths = enumerate_paths(graph, start, max_len, PathMode.SIMPLE, cap=cap).paths
    if not paths:
        raise NoFeasiblePath(f"no exit reachable from {start} within {max_len} moves")
    by_exit: dict[int, list[EvaderPath]] = {}
    for p in paths:
        by_exit.setdefault(p[-1], []).append(p)
    exits = sorted(by_exit)
    chosen = by_exit[exits[int(rng.integers(len(exits)))]]
    return chosen[int(rng.integers(len(chosen)))]


def is_legal_path(path: EvaderPath, graph: Graph, allow_stay: bool = True) -> bool:
    if not path:
        return False
    for u, v in zip(path, path[1:]):
        if u in graph.exits:
            return False
        if v not in move_options(graph, u, allow_stay):
            return False
    return True
