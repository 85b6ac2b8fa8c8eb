"""Exact best responses used by the double-oracle loop."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Generic, Sequence, TypeVar

import numpy as np

from .dynamics import GameConfig
from .errors import (
    EmptyPathSet,
    InfoCaseUnsupported,
    StateSpaceTooLarge,
    WeightMismatch,
)
from .evaluation import JOINT_STATE_BOUND, EvaderView, PolicyKind, PursuerPolicy, worst_case_reward
from .paths import EvaderPath, PathSet

S = TypeVar("S")
_TIE = 1e-12


@dataclass
class MixedStrategy(Generic[S]):
    support: list[S]
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not self.support:
            raise WeightMismatch("mixed strategy needs a nonempty support")
        if self.weights.shape != (len(self.support),):
            raise WeightMismatch(f"{len(self.support)} strategies but {self.weights.size} weights")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise WeightMismatch("weights must be nonnegative and sum to 1")

    @classmethod
    def pure(cls, s: S) -> "MixedStrategy[S]":
        return cls([s], np.ones(1))

    @classmethod
    def uniform(cls, support: Sequence[S]) -> "MixedStrategy[S]":
        return cls(list(support), np.full(len(support), 1.0 / len(support)))


@dataclass
class PrefixNode:
    vertex: int
    depth: int
    prefix: tuple[int, ...]
    weight: float = 0.0
    children: dict[int, int] = field(default_factory=dict)
    terminal: bool = False


@dataclass
class PrefixTree:
    """Merged evader path prefixes with the probability mass passing through each."""

    nodes: list[PrefixNode]

    @property
    def root(self) -> PrefixNode:
        return self.nodes[0]

    def child_nodes(self, node: PrefixNode) -> list[PrefixNode]:
        return [self.nodes[node.children[v]] for v in sorted(node.children)]

    def __len__(self):
        return len(self.nodes)


def build_prefix_tree(paths: Sequence[EvaderPath], weights: Sequence[float]) -> PrefixTree:
    weights = np.asarray(weights, dtype=np.float64)
    if len(paths) != weights.size:
        raise WeightMismatch(f"{len(paths)} paths but {weights.size} weights")
    if not paths:
        raise WeightMismatch("no paths given")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise WeightMismatch("path weights must be nonnegative and sum to 1")
    starts = {p[0] for p in paths}
    if len(starts) != 1:
        raise WeightMismatch(f"paths start at different vertices: {sorted(starts)}")
    root_v = paths[0][0]
    nodes = [PrefixNode(root_v, 0, (root_v,))]
    for path, w in zip(paths, weights):
        if w <= 0:
            continue
        cur = 0
        nodes[0].weight += w
        for d, v in enumerate(path[1:], start=1):
            nxt = nodes[cur].children.get(v)
            if nxt is None:
                nxt = len(nodes)
                nodes.append(PrefixNode(v, d, tuple(path[: d + 1])))
                nodes[cur].children[v] = nxt
            nodes[nxt].weight += w
            cur = nxt
        nodes[cur].terminal = True
    return PrefixTree(nodes)


def evader_best_response(pursuer_mixture: MixedStrategy[PursuerPolicy], path_set: PathSet | Sequence[EvaderPath],
                         config: GameConfig, workers: int = 1) -> tuple[EvaderPath, float]:
    """Path minimising the mixture's expected catch probability (lexicographic ties)."""
    paths = sorted(tuple(p) for p in path_set)
    if not paths:
        raise EmptyPathSet("evader best response needs at least one path")
    total = np.zeros(len(paths))
    for w, policy in zip(pursuer_mixture.weights, pursuer_mixture.support):
        if w == 0:
            continue
        total += w * np.array(worst_case_reward(policy, paths, config, workers=workers).per_path)
    best = int(np.argmin(total))
    return paths[best], float(total[best])


def pursuer_best_response(evader_mixture: MixedStrategy[EvaderPath], config: GameConfig,
                          bound: int = JOINT_STATE_BOUND) -> tuple[PursuerPolicy, float]:
    """Deterministic joint pursuer policy maximising catch probability against a path mixture.

    Backward induction over (pursuer positions, evader prefix). The pursuers
    must observe the evader: the prefix seen so far is the sufficient
    statistic for which paths remain possible. Among equally good joint moves
    the first in product order wins. The returned policy stays put on any
    evader prefix outside the mixture's support.
    """
    if not config.info_case.pursuer_sees_evader:
        raise InfoCaseUnsupported(
            f"exact pursuer best response needs the evader position; info case is {config.info_case.value}")
    paths = [tuple(p) for p in evader_mixture.support]
    tree = build_prefix_tree(paths, evader_mixture.weights)
    exits = config.graph.exits
    T = config.horizon
    for p in paths:
        if p[-1] not in exits and len(p) - 1 <= T:
            raise ValueError(f"path {p} stops off-exit before the horizon")

    move_cache: dict[tuple, list[tuple]] = {}
    memo: dict[tuple, float] = {}
    table: dict = {}

    def joint_moves(pos):
        ms = move_cache.get(pos)
        if ms is None:
            ms = list(itertools.product(*(config.moves(u) for u in pos)))
            move_cache[pos] = ms
        return ms

    def value(pos: tuple, ix: int) -> float:
        key = (pos, ix)
        hit = memo.get(key)
        if hit is not None:
            return hit
        node = tree.nodes[ix]
        v = node.vertex
        if v in pos and (config.capture_before_escape or v not in exits):
            out = 1.0
        elif node.terminal and v in exits:
            out = 0.0
        elif node.depth >= T:
            out = 1.0
        else:
            kids = tree.child_nodes(node)
            best, arg = -1.0, None
            for move in joint_moves(pos):
                val = sum(c.weight * value(move, node.children[c.vertex]) for c in kids) / node.weight
                if val > best + _TIE:
                    best, arg = val, move
                    if best >= 1.0 - _TIE:
                        break
            table[(pos, node.prefix, node.depth)] = {arg: 1.0}
            out = best
        memo[key] = out
        if len(memo) > bound:
            raise StateSpaceTooLarge(f"pursuer best response visited more than {bound} states")
        return out

    root_value = value(config.pursuer_starts, 0)
    policy = PursuerPolicy(PolicyKind.JOINT, [table], EvaderView.HISTORY, fallback="stay", name="br")
    return policy, min(1.0, max(0.0, root_value))
