"""Scenario files and the bundled benchmark games.

A scenario is an INI-style text file::

    [scenario]
    id = hard
    exits = 2 6
    pursuer_starts = 8
    evader_start = 0
    horizon = 2
    info_case = pursuer_sees_evader
    allow_stay = true
    capture_before_escape = true

    [grid]                      ; or [adjacency], see below
    rows = 3
    cols = 3
    side_exist_prob = 1.0
    diagonal_exist_prob = 0.0
    seed = 0

    [eval]
    path_mode = simple
    max_len = 2                 ; defaults to the horizon
    path_cap = 5000000

    [solver]
    eps = 0.0001
    max_iters = 100
    cfr_iterations = 10000
    mc_samples = 100000
    seed = 0

An explicit graph replaces ``[grid]`` with ``[adjacency]`` holding
``directed = false`` and one ``<vertex> = <space-separated neighbors>`` line
per vertex. Unknown sections and keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .dynamics import GameConfig, InfoCase
from .errors import InvalidScenario, ValidationError
from .graph import Graph, GridSpec, from_adjacency, generate_grid
from .paths import DEFAULT_PATH_CAP, PathMode, PathSet, enumerate_paths

_KEYS = {
    "scenario": {"id", "exits", "pursuer_starts", "evader_start", "horizon", "info_case",
                 "allow_stay", "capture_before_escape"},
    "grid": {"rows", "cols", "side_exist_prob", "diagonal_exist_prob", "seed"},
    "eval": {"path_mode", "max_len", "path_cap"},
    "solver": {"eps", "max_iters", "cfr_iterations", "mc_samples", "seed"},
}


@dataclass(frozen=True)
class ScenarioFile:
    id: str
    exits: tuple[int, ...]
    pursuer_starts: tuple[int, ...]
    evader_start: int
    horizon: int
    grid: GridSpec | None = None
    adjacency: tuple[tuple[int, ...], ...] | None = None
    directed: bool = False
    info_case: InfoCase = InfoCase.PURSUER_SEES_EVADER
    allow_stay: bool = True
    capture_before_escape: bool = True
    path_mode: PathMode = PathMode.SIMPLE
    max_len: int | None = None
    path_cap: int = DEFAULT_PATH_CAP
    eps: float = 1e-4
    max_iters: int = 100
    cfr_iterations: int = 10_000
    mc_samples: int = 100_000
    seed: int = 0
    solvers: tuple[str, ...] = field(default=("do", "cfr"), compare=False)

    def __post_init__(self):
        if (self.grid is None) == (self.adjacency is None):
            raise ValidationError("a scenario needs exactly one of a grid spec or an adjacency list")
        object.__setattr__(self, "info_case", InfoCase(self.info_case))
        object.__setattr__(self, "path_mode", PathMode(self.path_mode))

    @property
    def path_len(self) -> int:
        return self.horizon if self.max_len is None else self.max_len

    def graph(self) -> Graph:
        if self.grid is not None:
            base = generate_grid(self.grid)
        else:
            base = from_adjacency(self.adjacency, self.directed)
        return base.with_exits(self.exits)

    def config(self) -> GameConfig:
        graph = self.graph()
        cfg = GameConfig(graph, self.pursuer_starts, self.evader_start, self.horizon,
                         self.info_case, self.allow_stay, self.capture_before_escape)
        bad = cfg.violations()
        if bad:
            raise InvalidScenario(bad)
        return cfg

    def paths(self, config: GameConfig | None = None) -> PathSet:
        cfg = config or self.config()
        return enumerate_paths(cfg.graph, cfg.evader_start, self.path_len, self.path_mode,
                               cfg.allow_stay, self.path_cap)

    # text form ----------------------------------------------------------

    def to_text(self) -> str:
        def ints(xs):
            return " ".join(str(x) for x in xs)

        def b(x):
            return "true" if x else "false"

        lines = ["[scenario]", f"id = {self.id}", f"exits = {ints(self.exits)}",
                 f"pursuer_starts = {ints(self.pursuer_starts)}", f"evader_start = {self.evader_start}",
                 f"horizon = {self.horizon}", f"info_case = {self.info_case.value}",
                 f"allow_stay = {b(self.allow_stay)}",
                 f"capture_before_escape = {b(self.capture_before_escape)}", ""]
        if self.grid is not None:
            g = self.grid
            lines += ["[grid]", f"rows = {g.rows}", f"cols = {g.cols}",
                      f"side_exist_prob = {g.side_exist_prob!r}",
                      f"diagonal_exist_prob = {g.diagonal_exist_prob!r}", f"seed = {g.seed}", ""]
        else:
            lines += ["[adjacency]", f"directed = {b(self.directed)}"]
            lines += [f"{v} = {ints(a)}".rstrip() for v, a in enumerate(self.adjacency)]
            lines.append("")
        lines += ["[eval]", f"path_mode = {self.path_mode.value}"]
        if self.max_len is not None:
            lines.append(f"max_len = {self.max_len}")
        lines += [f"path_cap = {self.path_cap}", "",
                  "[solver]", f"eps = {self.eps!r}", f"max_iters = {self.max_iters}",
                  f"cfr_iterations = {self.cfr_iterations}", f"mc_samples = {self.mc_samples}",
                  f"seed = {self.seed}", ""]
        return "\n".join(lines)

    @classmethod
    def parse(cls, text: str) -> "ScenarioFile":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as err:
            raise ValidationError(f"malformed scenario file: {err}") from None
        sections = set(cp.sections())
        allowed = set(_KEYS) | {"adjacency"}
        if sections - allowed:
            raise ValidationError(f"unknown sections: {sorted(sections - allowed)}")
        if "scenario" not in sections:
            raise ValidationError("missing [scenario] section")
        for name, keys in _KEYS.items():
            if name in sections:
                extra = set(cp[name]) - keys
                if extra:
                    raise ValidationError(f"unknown keys in [{name}]: {sorted(extra)}")

        def ints(s):
            return tuple(int(x) for x in s.split())

        def get(section, key, conv, default=None, required=False):
            if section in sections and key in cp[section]:
                raw = cp[section][key]
                try:
                    if conv is bool:
                        return cp[section].getboolean(key)
                    return conv(raw)
                except ValueError as err:
                    raise ValidationError(f"bad value for {section}.{key}: {raw!r} ({err})") from None
            if required:
                raise ValidationError(f"missing {section}.{key}")
            return default

        grid = adjacency = None
        directed = False
        if "grid" in sections and "adjacency" in sections:
            raise ValidationError("give either [grid] or [adjacency], not both")
        if "grid" in sections:
            grid = GridSpec(get("grid", "rows", int, required=True), get("grid", "cols", int, required=True),
                            get("grid", "side_exist_prob", float, 1.0),
                            get("grid", "diagonal_exist_prob", float, 0.0), get("grid", "seed", int, 0))
        elif "adjacency" in sections:
            sec = cp["adjacency"]
            directed = sec.getboolean("directed", fallback=False)
            rows = {}
            for k, v in sec.items():
                if k == "directed":
                    continue
                try:
                    rows[int(k)] = ints(v)
                except ValueError:
                    raise ValidationError(f"bad adjacency line {k} = {v!r}") from None
            if sorted(rows) != list(range(len(rows))):
                raise ValidationError("adjacency must list vertices 0..n-1 exactly once")
            adjacency = tuple(rows[v] for v in range(len(rows)))
        else:
            raise ValidationError("missing [grid] or [adjacency] section")

        try:
            return cls(
                id=get("scenario", "id", str, "scenario"),
                exits=get("scenario", "exits", ints, required=True),
                pursuer_starts=get("scenario", "pursuer_starts", ints, required=True),
                evader_start=get("scenario", "evader_start", int, required=True),
                horizon=get("scenario", "horizon", int, required=True),
                grid=grid, adjacency=adjacency, directed=directed,
                info_case=get("scenario", "info_case", str, InfoCase.PURSUER_SEES_EVADER.value),
                allow_stay=get("scenario", "allow_stay", bool, True),
                capture_before_escape=get("scenario", "capture_before_escape", bool, True),
                path_mode=get("eval", "path_mode", str, PathMode.SIMPLE.value),
                max_len=get("eval", "max_len", int),
                path_cap=get("eval", "path_cap", int, DEFAULT_PATH_CAP),
                eps=get("solver", "eps", float, 1e-4),
                max_iters=get("solver", "max_iters", int, 100),
                cfr_iterations=get("solver", "cfr_iterations", int, 10_000),
                mc_samples=get("solver", "mc_samples", int, 100_000),
                seed=get("solver", "seed", int, 0),
            )
        except ValueError as err:
            if isinstance(err, ValidationError):
                raise
            raise ValidationError(str(err)) from None


def grid_skeleton(spec: GridSpec) -> ScenarioFile:
    """Scenario on a generated grid with placeholder positions to be edited."""
    n = spec.rows * spec.cols
    corners = sorted({0, spec.cols - 1, n - spec.cols, n - 1})
    center = (spec.rows // 2) * spec.cols + spec.cols // 2
    return ScenarioFile(id=f"grid{spec.rows}x{spec.cols}", exits=tuple(corners), pursuer_starts=(corners[0],),
                        evader_start=center, horizon=spec.rows + spec.cols - 2 or 1, grid=spec)


def _full_grid(rows, cols):
    return GridSpec(rows, cols, 1.0, 0.0, 0)


# Constructed analogues of the easy (catch probability 1) and hard (0.5) games.
BENCHMARKS: dict[str, ScenarioFile] = {
    # Four pursuers parked on the four corner exits of a 7x7 grid; waiting in
    # place catches every escape route.
    "easy": ScenarioFile(id="easy", grid=_full_grid(7, 7), exits=(0, 6, 42, 48),
                         pursuer_starts=(0, 6, 42, 48), evader_start=24, horizon=6,
                         solvers=("do",)),
    # Same idea on 3x3 with two exits, small enough for CFR.
    "easy-small": ScenarioFile(id="easy-small", grid=_full_grid(3, 3), exits=(0, 8),
                               pursuer_starts=(0, 8), evader_start=4, horizon=2),
    # Evader in one corner, exits on the two adjacent corners, pursuer in the
    # opposite corner: it can reach either exit in time but must commit on
    # its first move, before the evader's direction is visible.
    "hard": ScenarioFile(id="hard", grid=_full_grid(3, 3), exits=(2, 6), pursuer_starts=(8,),
                         evader_start=0, horizon=2),
    "hard-5x5": ScenarioFile(id="hard-5x5", grid=_full_grid(5, 5), exits=(4, 20), pursuer_starts=(24,),
                             evader_start=0, horizon=4),
}


def load(ref: str) -> ScenarioFile:
    """Read a scenario from a path, or a bundled one as ``builtin:<name>``."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BENCHMARKS:
            raise ValidationError(f"no bundled scenario {name!r}; have {sorted(BENCHMARKS)}")
        return BENCHMARKS[name]
    with open(ref, encoding="utf-8") as fh:
        return ScenarioFile.parse(fh.read())


def with_overrides(sc: ScenarioFile, **kw) -> ScenarioFile:
    return replace(sc, **{k: v for k, v in kw.items() if v is not None})
