"""Restricted matrix games and the double-oracle loop."""

from __future__ import annotations

import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .dynamics import GameConfig
from .errors import DimensionMismatch, EmptyPathSet, InfoCaseUnsupported, NonConvergence, ValidationError
from .evaluation import PursuerPolicy, catch_probability_exact
from .oracles import MixedStrategy, evader_best_response, pursuer_best_response
from .paths import EvaderPath, PathSet

DEFAULT_EPS = 1e-4
DEFAULT_META_ITERS = 2_000_000


@dataclass
class PayoffMatrix:
    """Pursuer catch probabilities; rows are pursuer strategies, columns evader paths."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class MatrixSolution:
    x: np.ndarray
    y: np.ndarray
    value: float
    exploitability: float
    iterations: int

    def __iter__(self):
        return iter((self.x, self.y, self.value))


def exploitability(M: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.max(M @ y) - np.min(x @ M))


@numba.njit(cache=True)
def _rm_plus(M, eps, max_iters, check_every):
    m, n = M.shape
    rx = np.zeros(m)
    ry = np.zeros(n)
    x = np.full(m, 1.0 / m)
    y = np.full(n, 1.0 / n)
    xs = x.copy()
    ys = y.copy()
    gap = np.max(M @ y) - np.min(x @ M)
    it = 0
    while gap > eps and it < max_iters:
        it += 1
        gx = M @ y
        base = x @ gx
        s = 0.0
        for i in range(m):
            rx[i] = max(rx[i] + gx[i] - base, 0.0)
            s += rx[i]
        for i in range(m):
            x[i] = rx[i] / s if s > 0 else 1.0 / m
        gy = -(x @ M)
        base = gy @ y
        s = 0.0
        for j in range(n):
            ry[j] = max(ry[j] + gy[j] - base, 0.0)
            s += ry[j]
        for j in range(n):
            y[j] = ry[j] / s if s > 0 else 1.0 / n
        xs += it * x
        ys += it * y
        if it % check_every == 0 or it == max_iters:
            xa = xs / xs.sum()
            ya = ys / ys.sum()
            gap = np.max(M @ ya) - np.min(xa @ M)
    if it == 0:
        return x, y, gap, it
    return xs / xs.sum(), ys / ys.sum(), gap, it


def solve_matrix_zero_sum(matrix: PayoffMatrix | np.ndarray, eps: float = DEFAULT_EPS,
                          max_iters: int = DEFAULT_META_ITERS) -> MatrixSolution:
    """Approximate maximin strategies by regret-matching-plus self-play.

    Alternating updates, linearly weighted averages; stops once the averaged
    profile is within ``eps`` of equilibrium (sum of both best-response gains).
    """
    M = matrix.values if isinstance(matrix, PayoffMatrix) else np.atleast_2d(np.asarray(matrix, float))
    if M.size == 0:
        raise ValidationError("empty payoff matrix")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    M = np.ascontiguousarray(M, dtype=np.float64)
    x, y, gap, it = _rm_plus(M, float(eps), int(max_iters), 16)
    sol = MatrixSolution(x, y, float(x @ M @ y), float(gap), int(it))
    if gap > eps:
        raise NonConvergence(f"meta solver exploitability {gap:.3g} > {eps:g} after {it} iterations", sol)
    return sol


def extend_matrix(matrix: PayoffMatrix, row: Sequence[float] | None = None,
                  col: Sequence[float] | None = None) -> PayoffMatrix:
    """Return a copy grown by one row or one column."""
    if (row is None) == (col is None):
        raise ValueError("pass exactly one of row or col")
    M = matrix.values
    if row is not None:
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (M.shape[1],):
            raise DimensionMismatch(f"row of length {row.size} for {M.shape[1]} columns")
        return PayoffMatrix(np.vstack([M, row]))
    col = np.asarray(col, dtype=np.float64)
    if col.shape != (M.shape[0],):
        raise DimensionMismatch(f"column of length {col.size} for {M.shape[0]} rows")
    return PayoffMatrix(np.hstack([M, col[:, None]]))


@dataclass
class IterationLog:
    iteration: int
    value: float
    lower: float
    upper: float
    rows: int
    cols: int
    wall_time: float


@dataclass
class DOResult:
    matrix: PayoffMatrix
    pursuer_strategies: list[PursuerPolicy]
    evader_strategies: list[EvaderPath]
    x: np.ndarray
    y: np.ndarray
    value: float
    log: list[IterationLog] = field(default_factory=list)
    converged: bool = False

    @property
    def gap(self) -> float:
        if not self.log:
            return float("inf")
        return self.log[-1].upper - self.log[-1].lower

    LOG_HEADER = "iteration,v,v_e,v_p,rows,cols,wall_time"

    def log_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.LOG_HEADER + "\n")
        for r in self.log:
            buf.write(f"{r.iteration},{r.value:.10g},{r.lower:.10g},{r.upper:.10g},"
                      f"{r.rows},{r.cols},{r.wall_time:.3f}\n")
        return buf.getvalue()


def _column(policies, path, config):
    return [catch_probability_exact(p, path, config) for p in policies]


def _row(policy, paths, config, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: catch_probability_exact(policy, p, config), paths))
    return [catch_probability_exact(policy, p, config) for p in paths]


def double_oracle_solve(config: GameConfig, path_set: PathSet | Sequence[EvaderPath],
                        seed_paths: Sequence[EvaderPath] | None = None, eps: float = DEFAULT_EPS,
                        max_iters: int = 100, meta_eps: float | None = None,
                        workers: int = 1) -> DOResult:
    """Double oracle with exact best responses on both sides.

    Each iteration solves the restricted game to ``meta_eps`` (default
    ``eps / 10``), then asks the pursuer oracle for a best response to the
    evader's meta strategy (an upper bound on the game value) and the evader
    oracle for the best path in ``path_set`` against the pursuer's meta
    strategy (a lower bound). The loop ends when the bounds are within
    ``eps``. Hitting ``max_iters`` returns the current solution with
    ``converged=False``.
    """
    if not config.info_case.pursuer_sees_evader:
        raise InfoCaseUnsupported(
            f"double oracle needs the pursuers to observe the evader; info case is {config.info_case.value}")
    full = sorted(tuple(p) for p in path_set)
    if not full:
        raise EmptyPathSet("double oracle needs a nonempty path set")
    meta_eps = eps / 10 if meta_eps is None else meta_eps
    cols = [tuple(p) for p in (seed_paths if seed_paths else full[:1])]
    cols = list(dict.fromkeys(cols))
    first, _ = pursuer_best_response(MixedStrategy.uniform(cols), config)
    rows = [first]
    seen = {first.content_key()}
    M = PayoffMatrix([_row(first, cols, config, workers)])
    log: list[IterationLog] = []
    t0 = time.perf_counter()

    def meta():
        try:
            return solve_matrix_zero_sum(M, meta_eps)
        except NonConvergence as err:
            return err.result

    sol = meta()
    converged = False
    for it in range(1, max_iters + 1):
        pol, v_p = pursuer_best_response(MixedStrategy(cols, sol.y), config)
        path, v_e = evader_best_response(MixedStrategy(rows, sol.x), full, config, workers)
        log.append(IterationLog(it, sol.value, v_e, v_p, len(rows), len(cols),
                                time.perf_counter() - t0))
        if v_p - v_e <= eps:
            converged = True
            break
        grew = False
        if v_p - sol.value > meta_eps and pol.content_key() not in seen:
            seen.add(pol.content_key())
            rows.append(pol)
            M = extend_matrix(M, row=_row(pol, cols, config, workers))
            grew = True
        if sol.value - v_e > meta_eps and path not in cols:
            cols.append(path)
            M = extend_matrix(M, col=_column(rows, path, config))
            grew = True
        if not grew:
            break
        sol = meta()
    return DOResult(M, rows, cols, sol.x, sol.y, sol.value, log, converged)
