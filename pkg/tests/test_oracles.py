import functools
import itertools

import numpy as np
import pytest

from oracles import (
    deterministic_prefix_policies,
    legal_moves,
    matrix_game_value,
    play,
    play_prefix_policy,
    sequence_form_value,
)
from unsg.dynamics import GameConfig, InfoCase
from unsg.errors import EmptyPathSet, InfoCaseUnsupported, StateSpaceTooLarge, WeightMismatch
from unsg.evaluation import (
    EvaderView,
    PolicyKind,
    PursuerPolicy,
    catch_probability_exact,
    uniform_policy,
    worst_case_reward,
)
from unsg.graph import GridSpec, from_adjacency, generate_grid
from unsg.oracles import MixedStrategy, build_prefix_tree, evader_best_response, pursuer_best_response
from unsg.paths import PathMode, enumerate_paths

GRID = generate_grid(GridSpec(3, 3)).with_exits([2, 6])


def test_prefix_tree_chain():
    tree = build_prefix_tree([(0, 1, 2)], [1.0])
    assert len(tree.nodes) == 3
    assert [n.vertex for n in tree.nodes] == [0, 1, 2]
    assert [n.terminal for n in tree.nodes] == [False, False, True]
    assert tree.root.depth == 0 and tree.root.weight == 1.0


def test_prefix_tree_shared_prefix_and_duplicates():
    tree = build_prefix_tree([(0, 1, 4, 5), (0, 1, 4, 7), (0, 3)], [0.5, 0.25, 0.25])
    assert len(tree.nodes) == 1 + 1 + 1 + 2 + 1
    node = tree.root
    kids = tree.child_nodes(node)
    assert [k.vertex for k in kids] == [1, 3]
    assert kids[0].weight == pytest.approx(0.75)
    dup = build_prefix_tree([(0, 1, 2), (0, 1, 2)], [0.5, 0.5])
    assert len(dup.nodes) == 3 and dup.nodes[-1].weight == pytest.approx(1.0)


def test_prefix_tree_weights_per_depth_sum_to_one():
    paths = list(enumerate_paths(GRID, 0, 4, PathMode.WALKS))
    w = np.random.default_rng(0).dirichlet(np.ones(len(paths)))
    tree = build_prefix_tree(paths, w)
    assert len(tree.nodes) <= sum(len(p) for p in paths) + 1
    for node in tree.nodes:
        kids = tree.child_nodes(node)
        if kids:
            ending = node.weight - sum(k.weight for k in kids)
            assert ending == pytest.approx(node.weight if node.terminal else 0.0, abs=1e-12)
            assert all(k.weight > 0 for k in kids)
    # mass at depth d: paths still running through d plus those that already ended
    for d in range(5):
        alive = sum(n.weight for n in tree.nodes if n.depth == d)
        ended = sum(n.weight for n in tree.nodes if n.terminal and n.depth < d)
        assert alive + ended == pytest.approx(1.0, abs=1e-12)


def test_prefix_tree_weight_mismatch():
    with pytest.raises(WeightMismatch):
        build_prefix_tree([(0, 1)], [0.5, 0.5])
    with pytest.raises(WeightMismatch):
        MixedStrategy([(0, 1)], [0.7])
    with pytest.raises(WeightMismatch):
        MixedStrategy([], [])


def test_evader_br_single_policy_matches_sweep():
    c = GameConfig(GRID, (8,), 0, 4)
    pol = uniform_policy(c)
    paths = enumerate_paths(GRID, 0, 4)
    rep = worst_case_reward(pol, paths, c)
    assert evader_best_response(MixedStrategy.pure(pol), paths, c) == (rep.worst_path, rep.value)


def test_evader_br_against_two_exit_blockers():
    c = GameConfig(GRID, (2, 8), 0, 3)
    stay = {(v, None, None): {v: 1.0} for v in range(9)}
    walk_2_to_8 = {(2, None, None): {5: 1.0}, (5, None, None): {8: 1.0}, (8, None, None): {8: 1.0}}
    walk_8_to_6 = {(8, None, None): {7: 1.0}, (7, None, None): {6: 1.0}, (6, None, None): {6: 1.0}}
    covers_2 = PursuerPolicy(PolicyKind.INDEPENDENT, [stay, stay])
    covers_6 = PursuerPolicy(PolicyKind.INDEPENDENT, [walk_2_to_8, walk_8_to_6])
    paths = [(0, 1, 2), (0, 3, 6)]
    m = [[catch_probability_exact(p, q, c) for q in paths] for p in (covers_2, covers_6)]
    assert m == [[1.0, 0.0], [0.0, 1.0]]
    path, value = evader_best_response(MixedStrategy([covers_2, covers_6], [0.5, 0.5]), paths, c)
    assert value == pytest.approx(0.5)
    assert path == (0, 1, 2)


def test_evader_br_unreachable_path():
    g = from_adjacency([[1, 3], [0, 2], [1], [0, 4], [3], [6], [5]], exits=[2, 4])
    c = GameConfig(g, (5,), 0, 3)
    path, value = evader_best_response(MixedStrategy.pure(uniform_policy(c)), [(0, 1, 2), (0, 3, 4)], c)
    assert (path, value) == ((0, 1, 2), 0.0)
    with pytest.raises(EmptyPathSet):
        evader_best_response(MixedStrategy.pure(uniform_policy(c)), [], c)


def _trajectory_search(config, path):
    """Best deterministic open-loop pursuer trajectory against one path (exhaustive)."""
    best = 0.0
    cur = [tuple(config.pursuer_starts)]

    def rec(traj):
        nonlocal best
        if len(traj) == config.horizon + 1:
            best = max(best, play(config, traj, path))
            return
        for move in itertools.product(*(legal_moves(config, u) for u in traj[-1])):
            rec(traj + [move])

    rec(cur)
    return best


def test_pursuer_br_waits_on_path():
    c = GameConfig(GRID, (1,), 0, 2)
    policy, value = pursuer_best_response(MixedStrategy.pure((0, 1, 2)), c)
    assert value == 1.0 == _trajectory_search(c, (0, 1, 2))
    assert catch_probability_exact(policy, (0, 1, 2), c) == 1.0


def test_pursuer_br_disconnected():
    g = from_adjacency([[1], [0, 2], [1], [4], [3]], exits=[2])
    c = GameConfig(g, (3,), 0, 3)
    _, value = pursuer_best_response(MixedStrategy.pure((0, 1, 2)), c)
    assert value == 0.0


def test_pursuer_br_two_branches():
    c = GameConfig(GRID, (8,), 0, 2)
    paths = [(0, 1, 2), (0, 3, 6)]
    policy, value = pursuer_best_response(MixedStrategy(paths, [0.5, 0.5]), c)
    assert value == pytest.approx(0.5)
    pure = [[_trajectory_search(c, p) for p in paths]]
    assert pure == [[1.0, 1.0]]
    forward = 0.5 * sum(catch_probability_exact(policy, p, c) for p in paths)
    assert forward == pytest.approx(value, abs=1e-10)
    assert policy.kind is PolicyKind.JOINT and policy.evader_view is EvaderView.HISTORY


def test_pursuer_br_needs_evader_observation():
    for case in (InfoCase.NEITHER_SEES, InfoCase.EVADER_SEES_PURSUERS):
        c = GameConfig(GRID, (8,), 0, 2, info_case=case)
        with pytest.raises(InfoCaseUnsupported):
            pursuer_best_response(MixedStrategy.pure((0, 1, 2)), c)
    both = GameConfig(GRID, (8,), 0, 2, info_case=InfoCase.BOTH_SEE)
    assert pursuer_best_response(MixedStrategy.pure((0, 1, 2)), both)[1] == 1.0


def test_pursuer_br_state_bound():
    g = generate_grid(GridSpec(4, 4)).with_exits([15])
    c = GameConfig(g, (0, 5), 3, 5)
    paths = list(enumerate_paths(g, 3, 5, PathMode.WALKS))
    with pytest.raises(StateSpaceTooLarge):
        pursuer_best_response(MixedStrategy.uniform(paths), c, bound=20)


@functools.lru_cache(maxsize=None)
def _tiny_cases():
    """3x3 games with a strictly mixed value and a small reduced policy space."""
    rng = np.random.default_rng(21)
    out = []
    while len(out) < 6:
        g = generate_grid(GridSpec(3, 3, float(rng.uniform(0.7, 1)), float(rng.uniform(0, 0.6)),
                                   int(rng.integers(2**32))))
        order = rng.permutation(9)
        T = int(rng.integers(2, 4))
        c = GameConfig(g.with_exits([int(order[0]), int(order[1])]), (int(order[2]),), int(order[3]), T)
        paths = list(enumerate_paths(c.graph, c.evader_start, T, PathMode.WALKS))
        if len(paths) < 2:
            continue
        v = sequence_form_value(c, paths)
        if v < 1e-9 or v > 1 - 1e-9:
            continue
        try:
            pols = deterministic_prefix_policies(c, paths, limit=3_000)
        except RuntimeError:
            continue
        out.append((c, paths, rng.dirichlet(np.ones(len(paths))), pols))
    return out


@pytest.mark.parametrize("case", range(6))
def test_pursuer_br_dominates_every_deterministic_policy(case):
    c, paths, w, pols = _tiny_cases()[case]
    policy, value = pursuer_best_response(MixedStrategy(paths, w), c)
    forward = sum(wi * catch_probability_exact(policy, p, c) for wi, p in zip(w, paths))
    assert forward == pytest.approx(value, abs=1e-10)
    best = max(sum(wi * play_prefix_policy(c, pol, p) for wi, p in zip(w, paths))
               for pol in pols)
    assert value == pytest.approx(best, abs=1e-12)


def test_sequence_form_oracle_matches_policy_enumeration():
    # the LP oracle and explicit reduced-policy enumeration must agree before
    # the LP is trusted on larger instances
    for c, paths, _, pols in _tiny_cases():
        M = np.array([[play_prefix_policy(c, pol, p) for p in paths] for pol in pols])
        assert matrix_game_value(M)[0] == pytest.approx(sequence_form_value(c, paths), abs=1e-8)
