"""Pursuit-evasion games on graphs: dynamics, exact evaluation and equilibrium solvers."""

from .dynamics import GameConfig, GameState, InfoCase, Role, Status
from .graph import Graph, GridSpec, from_adjacency, generate_grid
from .paths import PathMode, PathSet, enumerate_paths

__all__ = [
    "GameConfig", "GameState", "InfoCase", "Role", "Status",
    "Graph", "GridSpec", "from_adjacency", "generate_grid",
    "PathMode", "PathSet", "enumerate_paths",
]
