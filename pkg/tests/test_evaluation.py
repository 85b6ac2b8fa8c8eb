import numpy as np
import pytest

from oracles import trajectory_catch_probability
from unsg.dynamics import GameConfig, InfoCase, Status, pursuer_payoff
from unsg.errors import EmptyPathSet, PolicyIncompatible, StateSpaceTooLarge
from unsg.evaluation import (
    EvalReport,
    EvaderView,
    Method,
    PolicyKind,
    PursuerPolicy,
    catch_probability_exact,
    catch_probability_mc,
    random_policy,
    rollout,
    stationary_policy,
    stay_policy,
    uniform_policy,
    worst_case_reward,
)
from unsg.graph import GridSpec, from_adjacency, generate_grid
from unsg.paths import PathMode, enumerate_paths

PATH3 = from_adjacency([[1], [0, 2], [1]], exits=[2])
GRID = generate_grid(GridSpec(3, 3)).with_exits([2, 6])


def table_dist(policy):
    def move_dist(i, u, t, path):
        return policy.lookup(i, u, policy.evader_obs(path, t), t, None)
    return move_dist


def test_parked_pursuer_catches():
    c = GameConfig(GRID, (1,), 0, 4)
    assert catch_probability_exact(stay_policy(c), (0, 1, 2), c) == 1.0
    assert catch_probability_exact(stay_policy(c), (0, 3, 6), c) == 0.0


def test_disjoint_component_never_catches():
    g = from_adjacency([[1], [0, 2], [1], [4], [3]], exits=[2])
    c = GameConfig(g, (3,), 0, 5)
    assert catch_probability_exact(uniform_policy(c), (0, 1, 2), c) == 0.0


def test_uniform_pursuer_on_path_graph_matches_trajectory_sum():
    c = GameConfig(PATH3, (2,), 0, 2)
    pol = uniform_policy(c)
    expected = trajectory_catch_probability(c, table_dist(pol), (0, 1, 2))
    assert expected == pytest.approx(0.75, abs=1e-15)
    for method in (Method.FACTORED, Method.JOINT):
        assert catch_probability_exact(pol, (0, 1, 2), c, method) == pytest.approx(expected, abs=1e-12)


def test_path_longer_than_horizon_counts_as_catch():
    c = GameConfig(GRID, (8,), 0, 1)
    assert catch_probability_exact(stay_policy(c), (0, 1, 2), c) == 1.0
    assert catch_probability_mc(stay_policy(c), (0, 1, 2), c, 10) == (1.0, 0.0)


def test_capture_on_exit_ordering():
    c = GameConfig(GRID, (2,), 0, 3)
    relaxed = GameConfig(GRID, (2,), 0, 3, capture_before_escape=False)
    assert catch_probability_exact(stay_policy(c), (0, 1, 2), c) == 1.0
    assert catch_probability_exact(stay_policy(relaxed), (0, 1, 2), relaxed) == 0.0


def _random_case(rng, view=EvaderView.NONE):
    rows, cols = int(rng.integers(2, 4)), int(rng.integers(2, 4))
    g = generate_grid(GridSpec(rows, cols, float(rng.uniform(0.6, 1)), float(rng.uniform(0, 0.5)),
                               int(rng.integers(2**32))))
    n = rows * cols
    order = rng.permutation(n)
    exits = [int(order[0])]
    evader = int(order[1])
    pursuers = tuple(int(v) for v in rng.choice(order[2:], size=int(rng.integers(1, 4))))
    T = int(rng.integers(2, 5))
    c = GameConfig(g.with_exits(exits), pursuers, evader, T)
    paths = list(enumerate_paths(c.graph, evader, T, PathMode.WALKS))
    return c, random_policy(c, rng, view, sparsity=0.3), paths


@pytest.mark.parametrize("view", [EvaderView.NONE, EvaderView.POSITION])
def test_exact_methods_agree_with_trajectory_enumeration(view):
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 15:
        c, pol, paths = _random_case(rng, view)
        if not paths:
            continue
        path = paths[int(rng.integers(len(paths)))]
        want = trajectory_catch_probability(c, table_dist(pol), path)
        f = catch_probability_exact(pol, path, c, Method.FACTORED)
        j = catch_probability_exact(pol, path, c, Method.JOINT)
        assert f == pytest.approx(want, abs=1e-12)
        assert j == pytest.approx(want, abs=1e-12)
        checked += 1


def test_monte_carlo_matches_exact():
    c = GameConfig(GRID, (8, 4), 0, 4)
    pol = uniform_policy(c)
    for path in [(0, 1, 2), (0, 3, 4, 5, 2), (0, 0, 3, 6)]:
        exact = catch_probability_exact(pol, path, c)
        mean, se = catch_probability_mc(pol, path, c, 100_000, seed=1)
        assert se > 0
        assert abs(mean - exact) <= 3 * se


def test_monte_carlo_degenerate_cases():
    c = GameConfig(GRID, (1,), 0, 4)
    assert catch_probability_mc(stay_policy(c), (0, 1, 2), c, 1000) == (1.0, 0.0)
    assert catch_probability_mc(stay_policy(c), (0, 3, 6), c, 1000) == (0.0, 0.0)
    with pytest.raises(ValueError):
        catch_probability_mc(stay_policy(c), (0, 3, 6), c, 0)


def test_monte_carlo_is_seeded():
    c = GameConfig(GRID, (8,), 0, 4)
    pol = uniform_policy(c)
    a = catch_probability_mc(pol, (0, 1, 2), c, 5000, seed=9)
    assert a == catch_probability_mc(pol, (0, 1, 2), c, 5000, seed=9)
    assert a != catch_probability_mc(pol, (0, 1, 2), c, 5000, seed=10)


def test_joint_policy_monte_carlo():
    c = GameConfig(GRID, (8, 4), 0, 3)
    tab = {}
    for a in range(9):
        for b in range(9):
            ma, mb = c.moves(a), c.moves(b)
            tab[((a, b), None, None)] = {(ma[-1], mb[0]): 0.5, (ma[0], mb[-1]): 0.5}
    pol = PursuerPolicy(PolicyKind.JOINT, [tab])
    pol.check(c)
    for path in [(0, 1, 2), (0, 3, 6)]:
        exact = catch_probability_exact(pol, path, c)
        mean, se = catch_probability_mc(pol, path, c, 100_000, seed=2)
        assert abs(mean - exact) <= 3 * se + 1e-12
    with pytest.raises(PolicyIncompatible):
        worst_case_reward(pol, [(0, 1, 2)], c, Method.FACTORED)


def test_rollouts_agree_with_exact():
    c = GameConfig(GRID, (8,), 0, 4)
    pol = uniform_policy(c)
    path = (0, 1, 2)
    rng = np.random.default_rng(0)
    n = 20_000
    outcomes = np.array([pursuer_payoff(rollout(pol, path, c, rng)) for _ in range(n)])
    exact = catch_probability_exact(pol, path, c)
    assert abs(outcomes.mean() - exact) <= 3 * outcomes.std(ddof=1) / np.sqrt(n)


def test_rollout_reaches_expected_status():
    c = GameConfig(GRID, (1,), 0, 4)
    assert rollout(stay_policy(c), (0, 1, 2), c, np.random.default_rng(0)).status is Status.CAPTURE
    assert rollout(stay_policy(c), (0, 3, 6), c, np.random.default_rng(0)).status is Status.ESCAPE
    assert rollout(stay_policy(c), (0, 3, 4), c, np.random.default_rng(0)).status is Status.TIMEOUT


def test_worst_case_exit_covering_policy():
    g = generate_grid(GridSpec(4, 4)).with_exits([0, 3, 12, 15])
    c = GameConfig(g, (0, 3, 12, 15), 5, 6)
    paths = enumerate_paths(g, 5, 6)
    rep = worst_case_reward(stay_policy(c), paths, c)
    assert rep.value == 1.0
    assert rep.per_path == [1.0] * len(paths)
    assert rep.worst_path == paths[0]


def test_worst_case_exit_ignoring_policy():
    c = GameConfig(GRID, (2,), 4, 3)
    paths = enumerate_paths(GRID, 4, 3)
    rep = worst_case_reward(stay_policy(c), paths, c)
    assert rep.value == 0.0
    assert rep.worst_path[-1] == 6
    assert rep.worst_path == min(p for p in paths if p[-1] == 6)


def test_worst_case_single_path():
    c = GameConfig(GRID, (8,), 0, 3)
    pol = uniform_policy(c)
    rep = worst_case_reward(pol, [(0, 1, 2)], c)
    assert rep.value == catch_probability_exact(pol, (0, 1, 2), c)
    assert rep.worst_path == (0, 1, 2)
    with pytest.raises(EmptyPathSet):
        worst_case_reward(pol, [], c)


def test_worst_case_monotone_and_bounded():
    rng = np.random.default_rng(4)
    for _ in range(10):
        c, pol, paths = _random_case(rng)
        if not paths:
            continue
        prev = 1.0
        for k in range(1, len(paths) + 1):
            rep = worst_case_reward(pol, paths[:k], c)
            assert 0.0 <= rep.value <= prev + 1e-15
            assert all(0.0 <= v <= 1.0 for v in rep.per_path)
            prev = rep.value


def test_extra_pursuer_never_lowers_catch_probability():
    rng = np.random.default_rng(5)
    for _ in range(15):
        c, pol, paths = _random_case(rng)
        if not paths:
            continue
        extra = int(rng.integers(c.graph.vertex_count))
        bigger = GameConfig(c.graph, c.pursuer_starts + (extra,), c.evader_start, c.horizon)
        more = PursuerPolicy(PolicyKind.INDEPENDENT, pol.tables + [random_policy(bigger, rng).tables[0]])
        for p in paths:
            assert catch_probability_exact(more, p, bigger) >= catch_probability_exact(pol, p, c) - 1e-12


def test_parallel_sweep_is_identical():
    c = GameConfig(GRID, (8, 4), 0, 5)
    pol = random_policy(c, np.random.default_rng(1))
    paths = enumerate_paths(GRID, 0, 5, PathMode.WALKS)
    seq = worst_case_reward(pol, paths, c)
    par = worst_case_reward(pol, paths, c, workers=4)
    assert seq.per_path == par.per_path and seq.worst_path == par.worst_path
    mc1 = worst_case_reward(pol, paths[:6], c, Method.MONTE_CARLO, samples=2000, seed=3)
    mc4 = worst_case_reward(pol, paths[:6], c, Method.MONTE_CARLO, samples=2000, seed=3, workers=4)
    assert mc1.per_path == mc4.per_path and mc1.stderr == mc4.stderr


def test_joint_state_bound():
    g = generate_grid(GridSpec(4, 4)).with_exits([15])
    c = GameConfig(g, (0, 5, 10), 3, 4)
    pol = uniform_policy(c)
    with pytest.raises(StateSpaceTooLarge):
        catch_probability_exact(pol, (3, 7, 11, 15), c, Method.JOINT, bound=50)
    assert catch_probability_exact(pol, (3, 7, 11, 15), c, Method.JOINT) == pytest.approx(
        catch_probability_exact(pol, (3, 7, 11, 15), c, Method.FACTORED), abs=1e-12)


def test_policy_checks():
    c = GameConfig(GRID, (8,), 0, 3)
    bad_sum = stationary_policy(c, lambda i, v: {c.moves(v)[0]: 0.7})
    with pytest.raises(PolicyIncompatible):
        bad_sum.check(c)
    illegal = stationary_policy(c, lambda i, v: {(v + 4) % 9: 1.0})
    with pytest.raises(PolicyIncompatible):
        illegal.check(c)
    with pytest.raises(PolicyIncompatible):
        stay_policy(GameConfig(GRID, (8, 7), 0, 3)).check(c)
    seeing = random_policy(c, np.random.default_rng(0), EvaderView.POSITION)
    blind = GameConfig(GRID, (8,), 0, 3, InfoCase.NEITHER_SEES)
    with pytest.raises(PolicyIncompatible):
        seeing.check(blind)
    with pytest.raises(PolicyIncompatible):
        catch_probability_exact(seeing, (0, 1, 2), blind)
    partial = PursuerPolicy(PolicyKind.INDEPENDENT, [{(8, None, None): {8: 1.0}}])
    with pytest.raises(PolicyIncompatible):
        catch_probability_exact(partial, (0, 1, 2), GameConfig(GRID, (7,), 0, 3))


def test_policy_json_round_trip():
    c = GameConfig(GRID, (8, 4), 0, 3)
    pol = random_policy(c, np.random.default_rng(2), EvaderView.POSITION, sparsity=0.4)
    again = PursuerPolicy.from_json(pol.to_json())
    assert again.content_key() == pol.content_key()
    assert again.to_json() == pol.to_json()
    joint = PursuerPolicy(PolicyKind.JOINT, [{((8, 4), (0, 1), 1): {(7, 4): 1.0}}],
                          EvaderView.HISTORY, fallback="stay")
    back = PursuerPolicy.from_json(joint.to_json())
    assert back.content_key() == joint.content_key()
    assert back.tables == joint.tables


def test_eval_report_csv():
    rep = EvalReport(0.25, Method.MONTE_CARLO, 0.001, (0, 1, 2))
    assert EvalReport.CSV_HEADER == "scenario,method,value,stderr,worst_path"
    assert rep.csv_row("s1") == "s1,monte_carlo,0.25,0.001,0;1;2"
    assert EvalReport(1.0, Method.FACTORED).csv_row("x") == "x,exact_factored,1,,"
