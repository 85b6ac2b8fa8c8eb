"""Simultaneous-move game state, transitions and observations."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence

from .errors import GameNotOver, GameOver, IllegalMove, InvalidScenario
from .graph import Graph, move_options, validate_scenario


class InfoCase(str, enum.Enum):
    EVADER_SEES_PURSUERS = "evader_sees_pursuers"
    PURSUER_SEES_EVADER = "pursuer_sees_evader"
    BOTH_SEE = "both_see"
    NEITHER_SEES = "neither_sees"

    @property
    def pursuer_sees_evader(self) -> bool:
        return self in (InfoCase.PURSUER_SEES_EVADER, InfoCase.BOTH_SEE)

    @property
    def evader_sees_pursuers(self) -> bool:
        return self in (InfoCase.EVADER_SEES_PURSUERS, InfoCase.BOTH_SEE)


class Status(str, enum.Enum):
    ONGOING = "ongoing"
    CAPTURE = "pursuer_win_capture"
    TIMEOUT = "pursuer_win_timeout"
    ESCAPE = "evader_win"

    @property
    def terminal(self) -> bool:
        return self is not Status.ONGOING


class Role(str, enum.Enum):
    PURSUER = "pursuer"
    EVADER = "evader"


@dataclass(frozen=True)
class GameConfig:
    graph: Graph
    pursuer_starts: tuple[int, ...]
    evader_start: int
    horizon: int
    info_case: InfoCase = InfoCase.PURSUER_SEES_EVADER
    allow_stay: bool = True
    capture_before_escape: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pursuer_starts", tuple(int(p) for p in self.pursuer_starts))
        object.__setattr__(self, "info_case", InfoCase(self.info_case))

    @property
    def pursuer_count(self) -> int:
        return len(self.pursuer_starts)

    def moves(self, v: int) -> list[int]:
        return move_options(self.graph, v, self.allow_stay)

    def violations(self):
        return validate_scenario(self.graph, self)


@dataclass(frozen=True)
class GameState:
    t: int
    pursuer_locs: tuple[int, ...]
    evader_loc: int
    status: Status = Status.ONGOING


@dataclass(frozen=True)
class Observation:
    role: Role
    own: tuple[int, ...]
    opponent: tuple[int, ...] | None
    t: int
    horizon: int


def classify(t: int, pursuers: Sequence[int], evader: int, config: GameConfig) -> Status:
    """Status of a position reached at time ``t``."""
    caught = evader in pursuers
    escaped = evader in config.graph.exits
    if caught and (config.capture_before_escape or not escaped):
        return Status.CAPTURE
    if escaped:
        return Status.ESCAPE
    if t >= config.horizon:
        return Status.TIMEOUT
    return Status.ONGOING


def initial_state(config: GameConfig) -> GameState:
    bad = config.violations()
    if bad:
        raise InvalidScenario(bad)
    p, e = config.pursuer_starts, config.evader_start
    return GameState(0, p, e, classify(0, p, e, config))


def joint_action_set(state: GameState, role: Role, config: GameConfig) -> list:
    """Legal moves for ``role``: tuples of targets for the pursuer team, vertices for the evader."""
    if state.status.terminal:
        raise GameOver(f"game already ended with {state.status.value}")
    if Role(role) is Role.EVADER:
        return config.moves(state.evader_loc)
    return list(itertools.product(*(config.moves(p) for p in state.pursuer_locs)))


def step(state: GameState, pursuer_move: Sequence[int], evader_move: int,
         config: GameConfig) -> GameState:
    if state.status.terminal:
        raise GameOver(f"game already ended with {state.status.value}")
    pursuer_move = tuple(int(v) for v in pursuer_move)
    if len(pursuer_move) != len(state.pursuer_locs):
        raise IllegalMove(f"expected {len(state.pursuer_locs)} pursuer targets, got {len(pursuer_move)}")
    for i, (src, dst) in enumerate(zip(state.pursuer_locs, pursuer_move)):
        if dst not in config.moves(src):
            raise IllegalMove(f"pursuer {i} cannot move {src} -> {dst}")
    if evader_move not in config.moves(state.evader_loc):
        raise IllegalMove(f"evader cannot move {state.evader_loc} -> {evader_move}")
    t = state.t + 1
    return GameState(t, pursuer_move, int(evader_move), classify(t, pursuer_move, evader_move, config))


def observe(state: GameState, role: Role, config: GameConfig) -> Observation:
    case = config.info_case
    if Role(role) is Role.PURSUER:
        opp = (state.evader_loc,) if case.pursuer_sees_evader else None
        return Observation(Role.PURSUER, state.pursuer_locs, opp, state.t, config.horizon)
    opp = state.pursuer_locs if case.evader_sees_pursuers else None
    return Observation(Role.EVADER, (state.evader_loc,), opp, state.t, config.horizon)


def pursuer_payoff(state: GameState) -> int:
    """1 when the pursuers win (capture or timeout), 0 on escape."""
    if not state.status.terminal:
        raise GameNotOver("payoff requested for an ongoing game")
    return 0 if state.status is Status.ESCAPE else 1


def evader_payoff(state: GameState) -> int:
    return -pursuer_payoff(state)
