"""Tabular CFR on the turn-based form of a small game.

Each simultaneous step becomes two decisions: the pursuer team picks a joint
move, then the evader picks its move without seeing it. Information sets
hold whatever each side has observed under the game's info case. The tree is
stored breadth-first in flat arrays, children of a node contiguous, so the
CFR passes are tight loops compiled with numba.
"""

from __future__ import annotations

import enum
import io
import itertools
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .dynamics import GameConfig, GameState, classify, initial_state
from .errors import TreeTooLarge

DEFAULT_TREE_CAP = 10**7
PURSUER, EVADER, TERMINAL = 0, 1, 2


class Variant(str, enum.Enum):
    VANILLA = "vanilla"
    PLUS = "plus_averaging"


@dataclass
class GameTree:
    config: GameConfig
    player: np.ndarray
    infoset: np.ndarray
    first_child: np.ndarray
    payoff: np.ndarray
    parent: np.ndarray
    action: np.ndarray
    level_start: np.ndarray
    slot_start: np.ndarray
    n_actions: np.ndarray
    slot_player: np.ndarray
    infoset_keys: list
    infoset_actions: list
    key_index: dict

    @property
    def size(self) -> int:
        return int(self.player.size)

    @property
    def slots(self) -> int:
        return int(self.slot_player.size)

    def actions_to(self, node: int) -> list:
        """Moves taken from the root to ``node``, as (player, move) pairs."""
        out = []
        while node != 0:
            p = self.parent[node]
            out.append((int(self.player[p]), self.infoset_actions[self.infoset[p]][self.action[node]]))
            node = int(p)
        return out[::-1]


def infoset_key(role: int, t: int, pursuer_hist: tuple, evader_hist: tuple, config: GameConfig):
    """Observation history of ``role`` at step ``t``; never includes a pending opponent move."""
    case = config.info_case
    if role == PURSUER:
        return ("p", t, pursuer_hist, evader_hist if case.pursuer_sees_evader else None)
    return ("e", t, evader_hist, pursuer_hist if case.evader_sees_pursuers else None)


def estimate_tree_size(config: GameConfig, cap: int = DEFAULT_TREE_CAP,
                       state_budget: int = 1_000_000) -> int:
    """Number of turn-based tree nodes, counted by history multiplicity per state.

    Raises TreeTooLarge as soon as the running count passes ``cap``.
    """
    s0 = initial_state(config)
    if s0.status.terminal:
        return 1
    total = 1
    level = {(s0.pursuer_locs, s0.evader_loc): 1}
    for t in range(config.horizon):
        nxt: dict = {}
        for (P, e), c in level.items():
            pm = list(itertools.product(*(config.moves(u) for u in P)))
            em = config.moves(e)
            total += c * len(pm) + c * len(pm) * len(em)
            if total > cap:
                raise TreeTooLarge(f"game tree has more than {cap} nodes")
            for m in pm:
                for w in em:
                    if not classify(t + 1, m, w, config).terminal:
                        nxt[(m, w)] = nxt.get((m, w), 0) + c
        if len(nxt) > state_budget:
            raise TreeTooLarge(f"more than {state_budget} distinct states at t={t + 1}")
        level = nxt
        if not level:
            break
    return total


def build_tree(config: GameConfig, cap: int = DEFAULT_TREE_CAP) -> GameTree:
    estimate_tree_size(config, cap)
    s0 = initial_state(config)
    player, infoset, first_child, payoff, parent, action = [], [], [], [], [], []
    key_index: dict = {}
    keys: list = []
    acts: list = []
    # queue entries: (state, pursuer_hist, evader_hist, pending pursuer move or None)
    queue = [(s0, (s0.pursuer_locs,), (s0.evader_loc,), None)]
    parent.append(-1)
    action.append(-1)
    level_start = [0]
    depth_of = [0]
    head = 0
    move_cache: dict = {}

    def pursuer_moves(P):
        ms = move_cache.get(P)
        if ms is None:
            ms = list(itertools.product(*(config.moves(u) for u in P)))
            move_cache[P] = ms
        return ms

    while head < len(queue):
        state, ph, eh, pending = queue[head]
        h = head
        head += 1
        if depth_of[h] != len(level_start) - 1:
            level_start.append(h)
        if state.status.terminal:
            player.append(TERMINAL)
            infoset.append(-1)
            first_child.append(-1)
            payoff.append(0.0 if state.status.value == "evader_win" else 1.0)
            continue
        role = PURSUER if pending is None else EVADER
        key = infoset_key(role, state.t, ph, eh, config)
        moves = pursuer_moves(state.pursuer_locs) if role == PURSUER else config.moves(state.evader_loc)
        I = key_index.get(key)
        if I is None:
            I = len(keys)
            key_index[key] = I
            keys.append(key)
            acts.append(list(moves))
        player.append(role)
        infoset.append(I)
        first_child.append(len(queue))
        payoff.append(0.0)
        for a, m in enumerate(moves):
            if role == PURSUER:
                queue.append((state, ph, eh, m))
            else:
                t = state.t + 1
                nxt = GameState(t, pending, m, classify(t, pending, m, config))
                queue.append((nxt, ph + (pending,), eh + (m,), None))
            parent.append(h)
            action.append(a)
            depth_of.append(depth_of[h] + 1)
    level_start.append(len(queue))

    n_actions = np.array([len(a) for a in acts], dtype=np.int64)
    slot_start = np.zeros(len(acts), dtype=np.int64)
    if len(acts) > 1:
        slot_start[1:] = np.cumsum(n_actions)[:-1]
    slot_player = np.repeat(np.array([PURSUER if k[0] == "p" else EVADER for k in keys], dtype=np.int64),
                            n_actions) if keys else np.zeros(0, dtype=np.int64)
    return GameTree(config, np.array(player, dtype=np.int64), np.array(infoset, dtype=np.int64),
                    np.array(first_child, dtype=np.int64), np.array(payoff, dtype=np.float64),
                    np.array(parent, dtype=np.int64), np.array(action, dtype=np.int64),
                    np.array(level_start, dtype=np.int64), slot_start, n_actions, slot_player,
                    keys, acts, key_index)


# numba kernels --------------------------------------------------------------


@numba.njit(cache=True)
def _regret_match(R, slot_start, n_actions, sigma):
    for I in range(slot_start.size):
        s0 = slot_start[I]
        k = n_actions[I]
        tot = 0.0
        for a in range(k):
            if R[s0 + a] > 0:
                tot += R[s0 + a]
        for a in range(k):
            if tot > 0:
                sigma[s0 + a] = R[s0 + a] / tot if R[s0 + a] > 0 else 0.0
            else:
                sigma[s0 + a] = 1.0 / k


@numba.njit(cache=True)
def _reach(player, infoset, first_child, slot_start, n_actions, sigma, reach_p, reach_e):
    reach_p[0] = 1.0
    reach_e[0] = 1.0
    for h in range(player.size):
        if player[h] == 2:
            continue
        s0 = slot_start[infoset[h]]
        c0 = first_child[h]
        for a in range(n_actions[infoset[h]]):
            c = c0 + a
            if player[h] == 0:
                reach_p[c] = reach_p[h] * sigma[s0 + a]
                reach_e[c] = reach_e[h]
            else:
                reach_p[c] = reach_p[h]
                reach_e[c] = reach_e[h] * sigma[s0 + a]


@numba.njit(cache=True)
def _values(player, infoset, first_child, payoff, slot_start, n_actions, sigma, val):
    for h in range(player.size - 1, -1, -1):
        if player[h] == 2:
            val[h] = payoff[h]
            continue
        s0 = slot_start[infoset[h]]
        c0 = first_child[h]
        v = 0.0
        for a in range(n_actions[infoset[h]]):
            v += sigma[s0 + a] * val[c0 + a]
        val[h] = v


@numba.njit(cache=True)
def _cfr_run(player, infoset, first_child, payoff, slot_start, n_actions, slot_player,
             R, S, sigma, first_iter, n_iters, plus):
    N = player.size
    reach_p = np.zeros(N)
    reach_e = np.zeros(N)
    val = np.zeros(N)
    inst = np.zeros(R.size)
    for it in range(first_iter, first_iter + n_iters):
        w = float(it) if plus else 1.0
        # plus: alternate pursuer then evader; vanilla: one simultaneous pass
        passes = 2 if plus else 1
        for ps in range(passes):
            _regret_match(R, slot_start, n_actions, sigma)
            _reach(player, infoset, first_child, slot_start, n_actions, sigma, reach_p, reach_e)
            _values(player, infoset, first_child, payoff, slot_start, n_actions, sigma, val)
            inst[:] = 0.0
            for h in range(N):
                p = player[h]
                if p == 2 or (plus and p != ps):
                    continue
                s0 = slot_start[infoset[h]]
                c0 = first_child[h]
                if p == 0:
                    opp = reach_e[h]
                    own = reach_p[h]
                    sign = 1.0
                else:
                    opp = reach_p[h]
                    own = reach_e[h]
                    sign = -1.0
                for a in range(n_actions[infoset[h]]):
                    inst[s0 + a] += opp * sign * (val[c0 + a] - val[h])
                    S[s0 + a] += w * own * sigma[s0 + a]
            for s in range(R.size):
                if plus and slot_player[s] != ps:
                    continue
                R[s] += inst[s]
                if plus and R[s] < 0:
                    R[s] = 0.0


@numba.njit(cache=True)
def _best_response_value(br, player, infoset, first_child, payoff, slot_start, n_actions,
                         sigma, level_start):
    """Value of the game when ``br`` best-responds to ``sigma`` (max for pursuer, min for evader)."""
    N = player.size
    reach_p = np.zeros(N)
    reach_e = np.zeros(N)
    _reach(player, infoset, first_child, slot_start, n_actions, sigma, reach_p, reach_e)
    val = np.zeros(N)
    W = np.zeros(sigma.size)
    choice = np.full(slot_start.size, -1)
    for L in range(level_start.size - 2, -1, -1):
        lo = level_start[L]
        hi = level_start[L + 1]
        for h in range(lo, hi):
            p = player[h]
            if p == 2:
                val[h] = payoff[h]
            elif p != br:
                s0 = slot_start[infoset[h]]
                v = 0.0
                for a in range(n_actions[infoset[h]]):
                    v += sigma[s0 + a] * val[first_child[h] + a]
                val[h] = v
            else:
                opp = reach_e[h] if br == 0 else reach_p[h]
                s0 = slot_start[infoset[h]]
                for a in range(n_actions[infoset[h]]):
                    W[s0 + a] += opp * val[first_child[h] + a]
        for h in range(lo, hi):
            if player[h] != br:
                continue
            I = infoset[h]
            if choice[I] < 0:
                s0 = slot_start[I]
                best = 0
                for a in range(1, n_actions[I]):
                    if br == 0:
                        if W[s0 + a] > W[s0 + best]:
                            best = a
                    elif W[s0 + a] < W[s0 + best]:
                        best = a
                choice[I] = best
            val[h] = val[first_child[h] + choice[I]]
    return val[0]


# public API -----------------------------------------------------------------


@dataclass
class Profile:
    """Behaviour strategies for both sides, keyed by information set."""

    pursuer: dict
    evader: dict

    def sigma(self, tree: GameTree) -> np.ndarray:
        out = np.zeros(tree.slots)
        for I, key in enumerate(tree.infoset_keys):
            table = self.pursuer if key[0] == "p" else self.evader
            if key not in table:
                raise KeyError(f"profile has no strategy for information set {key!r}")
            dist = table[key]
            s0 = tree.slot_start[I]
            for a, m in enumerate(tree.infoset_actions[I]):
                out[s0 + a] = dist.get(m, 0.0)
        return out


def _profile_from_sigma(tree: GameTree, sigma: np.ndarray) -> Profile:
    pur, eva = {}, {}
    for I, key in enumerate(tree.infoset_keys):
        s0 = tree.slot_start[I]
        dist = {m: float(sigma[s0 + a]) for a, m in enumerate(tree.infoset_actions[I])}
        (pur if key[0] == "p" else eva)[key] = dist
    return Profile(pur, eva)


def uniform_profile(config: GameConfig, tree: GameTree | None = None) -> Profile:
    tree = tree or build_tree(config)
    return _profile_from_sigma(tree, np.repeat(1.0 / tree.n_actions, tree.n_actions))


def _sigma_of(profile, tree):
    return profile if isinstance(profile, np.ndarray) else profile.sigma(tree)


def profile_value(profile: Profile | np.ndarray, tree: GameTree) -> float:
    sigma = _sigma_of(profile, tree)
    val = np.zeros(tree.size)
    _values(tree.player, tree.infoset, tree.first_child, tree.payoff, tree.slot_start,
            tree.n_actions, sigma, val)
    return float(val[0])


def best_response_values(profile: Profile | np.ndarray, tree: GameTree) -> tuple[float, float]:
    """(pursuer best-response value, evader best-response value) against ``profile``."""
    sigma = _sigma_of(profile, tree)
    args = (tree.player, tree.infoset, tree.first_child, tree.payoff, tree.slot_start,
            tree.n_actions, sigma, tree.level_start)
    return float(_best_response_value(0, *args)), float(_best_response_value(1, *args))


def exploitability(profile: Profile | np.ndarray, config: GameConfig,
                   tree: GameTree | None = None, cap: int = DEFAULT_TREE_CAP) -> float:
    """Pursuer best-response gain plus evader best-response gain; 0 at equilibrium."""
    tree = tree or build_tree(config, cap)
    if tree.slots == 0:
        return 0.0
    hi, lo = best_response_values(profile, tree)
    return max(0.0, hi - lo)


@dataclass
class CFRResult:
    pursuer: dict
    evader: dict
    value: float
    iterations: int
    exploitability: float
    log: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.pursuer, self.evader, self.value))

    LOG_HEADER = "iteration,value,exploitability"

    def log_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.LOG_HEADER + "\n")
        for it, v, e in self.log:
            buf.write(f"{it},{v:.10g},{e:.10g}\n")
        return buf.getvalue()


def cfr_solve(config: GameConfig, iterations: int, variant: Variant | str = Variant.PLUS,
              target_exploitability: float | None = None, cap: int = DEFAULT_TREE_CAP,
              tree: GameTree | None = None) -> CFRResult:
    """Full-tree CFR for ``iterations`` rounds.

    The average profile's value and exploitability are logged at iterations
    1, 2, 4, 8, ... and at the end; with ``target_exploitability`` the run
    stops at the first logged point that reaches it.
    """
    variant = Variant(variant)
    tree = tree or build_tree(config, cap)
    if tree.slots == 0:
        v = float(tree.payoff[0])
        return CFRResult({}, {}, v, 0, 0.0, [(0, v, 0.0)])
    R = np.zeros(tree.slots)
    S = np.zeros(tree.slots)
    sigma = np.zeros(tree.slots)
    plus = variant is Variant.PLUS
    log = []
    done = 0
    checkpoint = 1
    avg = None
    gap = math.inf
    while done < iterations:
        n = min(checkpoint, iterations) - done
        _cfr_run(tree.player, tree.infoset, tree.first_child, tree.payoff, tree.slot_start,
                 tree.n_actions, tree.slot_player, R, S, sigma, done + 1, n, plus)
        done += n
        avg = _average(S, tree)
        gap = exploitability(avg, config, tree)
        log.append((done, profile_value(avg, tree), gap))
        if target_exploitability is not None and gap <= target_exploitability:
            break
        checkpoint *= 2
    prof = _profile_from_sigma(tree, avg)
    return CFRResult(prof.pursuer, prof.evader, profile_value(avg, tree), done, gap, log)


def _average(S: np.ndarray, tree: GameTree) -> np.ndarray:
    out = np.empty_like(S)
    for I in range(tree.slot_start.size):
        s0, k = tree.slot_start[I], tree.n_actions[I]
        tot = S[s0:s0 + k].sum()
        out[s0:s0 + k] = S[s0:s0 + k] / tot if tot > 0 else 1.0 / k
    return out
