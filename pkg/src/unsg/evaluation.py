"""Catch probability of a pursuer policy against fixed evader paths.

Two exact routes are provided. The factored route tracks each pursuer's
uncaught occupancy separately and multiplies survival probabilities; it is
only valid for independent policies keyed on each pursuer's own position.
The joint route tracks the distribution over position tuples and works for
any policy, up to a state-count bound. A vectorized Monte Carlo estimator
covers instances too large for either.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .dynamics import GameConfig, GameState, initial_state, step
from .errors import EmptyPathSet, PolicyIncompatible, StateSpaceTooLarge
from .paths import EvaderPath, PathSet

JOINT_STATE_BOUND = 2**24
PROB_TOL = 1e-9


class PolicyKind(str, enum.Enum):
    INDEPENDENT = "independent_markov"
    JOINT = "joint_markov"


class EvaderView(str, enum.Enum):
    """What the evader-dependent part of an observation key holds."""

    NONE = "none"
    POSITION = "position"
    HISTORY = "history"


class Method(str, enum.Enum):
    FACTORED = "exact_factored"
    JOINT = "exact_joint"
    MONTE_CARLO = "monte_carlo"


@dataclass
class PursuerPolicy:
    """Tabular stochastic pursuer policy.

    Independent policies hold one table per pursuer keyed by
    ``(own vertex, evader observation, t)``; joint policies hold a single
    table keyed by ``(pursuer tuple, evader observation, t)`` whose moves are
    target tuples. A key with ``t=None`` applies at every time step. The
    evader observation is ``None``, the evader vertex, or the tuple of evader
    vertices seen so far, depending on ``evader_view``.

    With ``fallback="stay"`` an unlisted key means "stay put" (or the first
    legal move where staying is not allowed); otherwise lookups of unlisted
    keys raise PolicyIncompatible.
    """

    kind: PolicyKind
    tables: list[dict]
    evader_view: EvaderView = EvaderView.NONE
    fallback: str | None = None
    name: str = ""

    def __post_init__(self):
        self.kind = PolicyKind(self.kind)
        self.evader_view = EvaderView(self.evader_view)
        if self.kind is PolicyKind.JOINT and len(self.tables) != 1:
            raise PolicyIncompatible("a joint policy has exactly one table")

    @property
    def independent(self) -> bool:
        return self.kind is PolicyKind.INDEPENDENT

    def evader_obs(self, path: EvaderPath, t: int):
        if self.evader_view is EvaderView.NONE:
            return None
        if self.evader_view is EvaderView.POSITION:
            return path[t]
        return tuple(path[: t + 1])

    def lookup(self, table: int, own, obs, t: int, config: GameConfig) -> dict:
        tab = self.tables[table]
        dist = tab.get((own, obs, t))
        if dist is None:
            dist = tab.get((own, obs, None))
        if dist is None:
            if self.fallback != "stay":
                raise PolicyIncompatible(f"policy has no entry for own={own!r} evader={obs!r} t={t}")
            if self.independent:
                return {config.moves(own)[0]: 1.0}
            return {tuple(config.moves(u)[0] for u in own): 1.0}
        return dist

    def joint_distribution(self, positions: tuple, obs, t: int, config: GameConfig) -> dict:
        if not self.independent:
            return self.lookup(0, positions, obs, t, config)
        parts = [self.lookup(i, u, obs, t, config).items() for i, u in enumerate(positions)]
        out = {}
        for combo in itertools.product(*parts):
            p = 1.0
            for _, q in combo:
                p *= q
            if p > 0.0:
                move = tuple(m for m, _ in combo)
                out[move] = out.get(move, 0.0) + p
        return out

    def check(self, config: GameConfig) -> None:
        """Raise PolicyIncompatible unless every entry is a legal distribution."""
        if self.evader_view is not EvaderView.NONE and not config.info_case.pursuer_sees_evader:
            raise PolicyIncompatible(
                f"policy reads the evader position but info case is {config.info_case.value}")
        if self.independent and len(self.tables) != config.pursuer_count:
            raise PolicyIncompatible(
                f"{len(self.tables)} pursuer tables for {config.pursuer_count} pursuers")
        for tab in self.tables:
            for (own, _obs, _t), dist in tab.items():
                total = sum(dist.values())
                if abs(total - 1.0) > PROB_TOL:
                    raise PolicyIncompatible(f"distribution at own={own!r} sums to {total}")
                if any(p < 0 for p in dist.values()):
                    raise PolicyIncompatible(f"negative probability at own={own!r}")
                for move, p in dist.items():
                    if p == 0:
                        continue
                    if self.independent:
                        legal = move in config.moves(own)
                    else:
                        legal = len(move) == len(own) == config.pursuer_count and all(
                            m in config.moves(u) for u, m in zip(own, move))
                    if not legal:
                        raise PolicyIncompatible(f"illegal move {move!r} from {own!r}")

    def content_key(self) -> Hashable:
        """Hashable identity of the policy's behaviour, used for deduplication."""
        return (self.kind.value, self.evader_view.value, self.fallback,
                tuple(tuple(sorted(((k, tuple(sorted(d.items(), key=repr))) for k, d in tab.items()),
                                   key=repr))
                      for tab in self.tables))

    # serialization -----------------------------------------------------

    def to_json(self) -> str:
        def enc(x):
            return list(x) if isinstance(x, tuple) else x

        tables = []
        for tab in self.tables:
            rows = []
            for (own, obs, t), dist in sorted(tab.items(), key=lambda kv: repr(kv[0])):
                rows.append({"own": enc(own), "evader": enc(obs), "t": t,
                             "moves": [[enc(m), p] for m, p in dist.items()]})
            tables.append(rows)
        return json.dumps({"kind": self.kind.value, "evader_view": self.evader_view.value,
                           "fallback": self.fallback, "name": self.name, "tables": tables},
                          indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PursuerPolicy":
        data = json.loads(text)

        def dec(x):
            return tuple(x) if isinstance(x, list) else x

        tables = []
        for rows in data["tables"]:
            tab = {}
            for r in rows:
                tab[(dec(r["own"]), dec(r["evader"]), r["t"])] = {dec(m): float(p) for m, p in r["moves"]}
            tables.append(tab)
        return cls(data["kind"], tables, data.get("evader_view", "none"),
                   data.get("fallback"), data.get("name", ""))


def stationary_policy(config: GameConfig, choose: Callable[[int, int], dict],
                      name: str = "") -> PursuerPolicy:
    """Independent time-invariant policy; ``choose(i, v)`` gives pursuer i's distribution at v."""
    n = config.graph.vertex_count
    tables = [{(v, None, None): choose(i, v) for v in range(n)} for i in range(config.pursuer_count)]
    return PursuerPolicy(PolicyKind.INDEPENDENT, tables, name=name)


def stay_policy(config: GameConfig) -> PursuerPolicy:
    return stationary_policy(config, lambda i, v: {config.moves(v)[0]: 1.0}, name="stay")


def uniform_policy(config: GameConfig) -> PursuerPolicy:
    def choose(i, v):
        opts = config.moves(v)
        return {w: 1.0 / len(opts) for w in opts}

    return stationary_policy(config, choose, name="uniform")


def random_policy(config: GameConfig, rng: np.random.Generator,
                  evader_view: EvaderView = EvaderView.NONE, sparsity: float = 0.0) -> PursuerPolicy:
    """Random time-dependent independent policy, for testing.

    With ``sparsity`` > 0 some moves get probability zero (at least one survives).
    """
    n = config.graph.vertex_count
    T = config.horizon
    if evader_view is EvaderView.NONE:
        obs_values = [None]
    elif evader_view is EvaderView.POSITION:
        obs_values = list(range(n))
    else:
        raise ValueError("random_policy does not enumerate history keys")
    tables = []
    for _ in range(config.pursuer_count):
        tab = {}
        for v in range(n):
            opts = config.moves(v)
            for obs in obs_values:
                for t in range(T):
                    w = rng.dirichlet(np.ones(len(opts)))
                    if sparsity > 0:
                        keep = rng.random(len(opts)) >= sparsity
                        keep[rng.integers(len(opts))] = True
                        w = np.where(keep, w, 0.0)
                    w = w / w.sum()
                    tab[(v, obs, t)] = {o: float(p) for o, p in zip(opts, w) if p > 0}
        tables.append(tab)
    return PursuerPolicy(PolicyKind.INDEPENDENT, tables, evader_view)


# exact evaluation ---------------------------------------------------------


def _capture_applies(v: int, config: GameConfig) -> bool:
    return config.capture_before_escape or v not in config.graph.exits


def _effective_length(path: EvaderPath, config: GameConfig) -> tuple[int, bool]:
    """(last evaluated time step, whether the path runs past the horizon)."""
    k = len(path) - 1
    return min(k, config.horizon), k > config.horizon


class _Transitions:
    """Cache of one pursuer's move kernel as flat (src, dst, prob) arrays."""

    def __init__(self, policy: PursuerPolicy, config: GameConfig):
        self.policy = policy
        self.config = config
        self.cache: dict = {}

    def get(self, i: int, obs, t: int):
        key = (i, obs, t)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        src, dst, prob, missing = [], [], [], []
        for u in range(self.config.graph.vertex_count):
            try:
                dist = self.policy.lookup(i, u, obs, t, self.config)
            except PolicyIncompatible:
                missing.append(u)
                continue
            for w, p in dist.items():
                src.append(u)
                dst.append(w)
                prob.append(p)
        hit = (np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
               np.array(prob, dtype=np.float64), np.array(missing, dtype=np.intp))
        self.cache[key] = hit
        return hit


def _factored(policy: PursuerPolicy, path: EvaderPath, config: GameConfig,
              kernels: _Transitions | None = None) -> float:
    if not policy.independent:
        raise PolicyIncompatible("factored evaluation needs an independent policy")
    K, overrun = _effective_length(path, config)
    if overrun:
        return 1.0
    kernels = kernels or _Transitions(policy, config)
    n = config.graph.vertex_count
    survival = 1.0
    for i, start in enumerate(config.pursuer_starts):
        mass = np.zeros(n)
        mass[start] = 1.0
        for t in range(K + 1):
            v = path[t]
            if _capture_applies(v, config):
                mass[v] = 0.0
            if t == K:
                break
            src, dst, prob, missing = kernels.get(i, policy.evader_obs(path, t), t)
            if missing.size and np.any(mass[missing] > 0):
                u = int(missing[np.argmax(mass[missing] > 0)])
                raise PolicyIncompatible(f"pursuer {i} reaches vertex {u} at t={t} with no policy entry")
            mass = np.bincount(dst, weights=mass[src] * prob, minlength=n)
        survival *= float(mass.sum())
    return 1.0 - survival


def _joint(policy: PursuerPolicy, path: EvaderPath, config: GameConfig,
           bound: int = JOINT_STATE_BOUND) -> float:
    K, overrun = _effective_length(path, config)
    if overrun:
        return 1.0
    dist = {config.pursuer_starts: 1.0}
    for t in range(K + 1):
        v = path[t]
        if _capture_applies(v, config):
            dist = {s: p for s, p in dist.items() if v not in s}
        if t == K:
            break
        obs = policy.evader_obs(path, t)
        nxt: dict = {}
        for s, p in dist.items():
            for move, q in policy.joint_distribution(s, obs, t, config).items():
                nxt[move] = nxt.get(move, 0.0) + p * q
        if len(nxt) > bound:
            raise StateSpaceTooLarge(f"joint distribution has {len(nxt)} states (bound {bound})")
        dist = nxt
    return 1.0 - math.fsum(dist.values())


def catch_probability_exact(policy: PursuerPolicy, path: EvaderPath, config: GameConfig,
                            method: Method | str | None = None,
                            bound: int = JOINT_STATE_BOUND) -> float:
    """Exact probability that the pursuers win against the scripted ``path``.

    A path that has not reached its exit by the horizon counts as a catch.
    ``method`` defaults to the factored DP for independent policies and the
    joint DP otherwise.
    """
    if method is None:
        method = Method.FACTORED if policy.independent else Method.JOINT
    method = Method(method)
    if policy.evader_view is not EvaderView.NONE and not config.info_case.pursuer_sees_evader:
        raise PolicyIncompatible(f"policy reads the evader position under {config.info_case.value}")
    if method is Method.FACTORED:
        value = _factored(policy, path, config)
    elif method is Method.JOINT:
        value = _joint(policy, path, config, bound)
    else:
        raise ValueError("use catch_probability_mc for Monte Carlo estimates")
    return min(1.0, max(0.0, value))


# Monte Carlo ----------------------------------------------------------------


def catch_probability_mc(policy: PursuerPolicy, path: EvaderPath, config: GameConfig,
                         samples: int, seed: int | Sequence[int] = 0) -> tuple[float, float]:
    """Monte Carlo estimate ``(mean, stderr)`` of the catch probability.

    All ``samples`` rollouts advance together; per step, samples sharing a
    policy key draw their moves with one vectorized call.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    K, overrun = _effective_length(path, config)
    if overrun:
        return 1.0, 0.0
    n_p = config.pursuer_count
    pos = np.tile(np.array(config.pursuer_starts, dtype=np.int64), (samples, 1))
    caught = np.zeros(samples, dtype=bool)
    for t in range(K + 1):
        v = path[t]
        if _capture_applies(v, config):
            caught |= np.any(pos == v, axis=1)
        if t == K:
            break
        obs = policy.evader_obs(path, t)
        alive = np.flatnonzero(~caught)
        if alive.size == 0:
            break
        if policy.independent:
            for i in range(n_p):
                col = pos[alive, i]
                for u in np.unique(col):
                    idx = alive[col == u]
                    dist = policy.lookup(i, int(u), obs, t, config)
                    pos[idx, i] = _draw(dist, idx.size, rng)
        else:
            rows = pos[alive]
            uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            for g, s in enumerate(uniq):
                idx = alive[inverse == g]
                dist = policy.lookup(0, tuple(int(x) for x in s), obs, t, config)
                pos[idx] = _draw(dist, idx.size, rng)
    outcome = caught.astype(np.float64)
    mean = float(outcome.mean())
    std = float(outcome.std(ddof=1)) if samples > 1 else 0.0
    return mean, std / math.sqrt(samples)


def _draw(dist: dict, count: int, rng: np.random.Generator) -> np.ndarray:
    moves = list(dist.keys())
    probs = np.fromiter(dist.values(), dtype=np.float64, count=len(moves))
    if len(moves) == 1:
        choice = np.zeros(count, dtype=np.intp)
    else:
        cum = np.cumsum(probs)
        choice = np.searchsorted(cum, rng.random(count) * cum[-1], side="right")
        choice = np.minimum(choice, len(moves) - 1)
    return np.array(moves, dtype=np.int64)[choice]


def rollout(policy: PursuerPolicy, path: EvaderPath, config: GameConfig,
            rng: np.random.Generator) -> GameState:
    """Play one game through the dynamics with the evader scripted to ``path``."""
    state = initial_state(config)
    while not state.status.terminal:
        t = state.t
        obs = policy.evader_obs(path, t)
        dist = policy.joint_distribution(state.pursuer_locs, obs, t, config)
        moves = list(dist)
        k = rng.choice(len(moves), p=np.array([dist[m] for m in moves]) / sum(dist.values()))
        ev = path[t + 1] if t + 1 < len(path) else path[-1]
        state = step(state, moves[k], ev, config)
    return state


# worst-case sweep -----------------------------------------------------------


@dataclass
class EvalReport:
    value: float
    method: Method
    stderr: float | None = None
    worst_path: EvaderPath | None = None
    per_path: list[float] = field(default_factory=list, repr=False)

    CSV_HEADER = "scenario,method,value,stderr,worst_path"

    def csv_row(self, scenario_id: str) -> str:
        se = "" if self.stderr is None else f"{self.stderr:.6g}"
        wp = "" if self.worst_path is None else ";".join(str(v) for v in self.worst_path)
        return f"{scenario_id},{self.method.value},{self.value:.10g},{se},{wp}"


def worst_case_reward(policy: PursuerPolicy, path_set: PathSet | Sequence[EvaderPath],
                      config: GameConfig, method: Method | str | None = None,
                      samples: int = 100_000, seed: int = 0, workers: int = 1,
                      bound: int = JOINT_STATE_BOUND) -> EvalReport:
    """Minimum catch probability over ``path_set`` and the path attaining it.

    Ties go to the lexicographically smallest path. Path evaluations are
    independent; ``workers`` > 1 spreads them over threads with results
    identical to a sequential sweep.
    """
    paths = sorted(tuple(p) for p in path_set)
    if not paths:
        raise EmptyPathSet("worst-case sweep needs at least one evader path")
    if method is None:
        method = Method.FACTORED if policy.independent else Method.JOINT
    method = Method(method)
    if method is Method.FACTORED and not policy.independent:
        raise PolicyIncompatible("factored evaluation needs an independent policy")
    policy.check(config)

    if method is Method.MONTE_CARLO:
        def one(ix):
            return catch_probability_mc(policy, paths[ix], config, samples, (seed, ix))
    elif method is Method.FACTORED:
        kernels = _Transitions(policy, config)

        def one(ix):
            return min(1.0, max(0.0, _factored(policy, paths[ix], config, kernels))), None
    else:
        def one(ix):
            return catch_probability_exact(policy, paths[ix], config, Method.JOINT, bound), None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(paths))))
    else:
        results = [one(ix) for ix in range(len(paths))]

    best = 0
    for ix in range(1, len(paths)):
        if results[ix][0] < results[best][0]:
            best = ix
    value, se = results[best]
    return EvalReport(value, method, se, paths[best], [r[0] for r in results])
