"""Error tables for the operator ladder against closed-form derivatives.

For every ``alpha`` on a grid the level matrices are assembled once per
``N`` and shared by all functions that use that ``N`` (they do not depend on
``L``).  The error of a level set at one ``alpha`` is the max-norm error over
the ``N`` physical nodes; a table entry is its maximum over the grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fourier import forward_transform
from .fracderiv import (
    ASSEMBLY_BUDGET,
    BudgetExceeded,
    apply_operator,
    assemble_matrix,
    extrapolate,
)
from .grid import make_grid, sample_even_extension
from .oracles import get_function

__all__ = [
    "ErrorTable",
    "TableSpec",
    "TABLES",
    "alpha_grid",
    "compute_table",
    "compute_tables",
    "rate_curve",
    "check_budget",
]

LevelSet = tuple[int, ...]


def _ladder(first: int, count: int, length: int) -> list[LevelSet]:
    return [tuple(range(m, m + length)) for m in range(first, first + count)]


@dataclass(frozen=True)
class TableSpec:
    name: str
    functions: tuple[str, ...]
    level_sets: tuple[LevelSet, ...]
    alphas: tuple[float, ...] | None = None  # None: use the alpha grid


_PREFIX = tuple(tuple(range(1, n + 1)) for n in range(1, 7))

TABLES = {
    "testDam": TableSpec("testDam", ("v1", "v2", "v3"), tuple(_ladder(1, 6, 1))),
    "testDamm+1": TableSpec("testDamm+1", ("v1", "v2", "v3"), tuple(_ladder(1, 5, 2))),
    "testDamm+1m+2": TableSpec("testDamm+1m+2", ("v1", "v2", "v3"), tuple(_ladder(1, 4, 3))),
    "testDamhigher": TableSpec(
        "testDamhigher",
        ("v1", "v2", "v3"),
        ((1, 2, 3, 4), (2, 3, 4, 5), (3, 4, 5, 6), (1, 2, 3, 4, 5), (2, 3, 4, 5, 6),
         (1, 2, 3, 4, 5, 6)),
    ),
    "testC4567": TableSpec("testC4567", ("v4", "v5", "v6", "v7"), _PREFIX, (0.0, 1.0)),
    "testv8": TableSpec("testv8", ("v8",), _PREFIX),
}


@dataclass
class ErrorTable:
    """Max-over-alpha errors per (level set, function), plus the curves."""

    name: str
    alphas: np.ndarray
    level_sets: list[LevelSet]
    functions: list[str]
    curves: dict = field(default_factory=dict)  # (levels, fid) -> errors over alpha

    def value(self, levels: Sequence[int], fid: str) -> float:
        return float(np.max(self.curves[(tuple(levels), fid)]))

    def at(self, levels: Sequence[int], fid: str, alpha: float) -> float:
        i = int(np.argmin(np.abs(self.alphas - alpha)))
        return float(self.curves[(tuple(levels), fid)][i])

    def rows(self):
        for levels in self.level_sets:
            yield levels, [self.value(levels, fid) for fid in self.functions]


def alpha_grid(points: int = 101) -> np.ndarray:
    """``points`` equispaced values on ``[0, 1]``, endpoints exact."""
    if points < 2:
        raise ValueError("alpha grid needs at least two points")
    return np.arange(points) / (points - 1)


def check_budget(N: int, max_level: int, n_alpha: int, budget: float = 5e11):
    """Refuse sweeps whose assembly work ``alphas * N^2 * 2^m`` is too large."""
    work = n_alpha * N * N * 2.0**max_level
    if N * 2**max_level > ASSEMBLY_BUDGET or work > budget:
        raise BudgetExceeded(
            f"validation sweep N={N}, m<={max_level}, {n_alpha} alphas "
            f"exceeds the work budget ({work:.2e} > {budget:.2e})"
        )


def _fields(fids: Iterable[str], N_override: int | None = None):
    out = {}
    for fid in fids:
        tf = get_function(fid)
        N = N_override or tf.N
        grid = make_grid(N, tf.recommended_L)
        coeffs = forward_transform(sample_even_extension(tf.v, grid))
        out[fid] = (tf, grid, coeffs)
    return out


def _errors_at(alpha: float, specs: Sequence[TableSpec], fields) -> dict:
    """Errors for every (table, level set, function) at one alpha."""
    by_N: dict[int, set[int]] = {}
    for spec in specs:
        if spec.alphas is not None and alpha not in spec.alphas:
            continue
        for fid in spec.functions:
            levels = by_N.setdefault(fields[fid][1].N, set())
            for ls in spec.level_sets:
                levels.update(ls)
    mats = {
        (N, m): assemble_matrix(alpha, N, m) for N, ms in by_N.items() for m in sorted(ms)
    }
    result = {}
    for spec in specs:
        if spec.alphas is not None and alpha not in spec.alphas:
            continue
        for fid in spec.functions:
            tf, grid, coeffs = fields[fid]
            exact = tf.exact(grid.x_nodes, alpha)
            for ls in spec.level_sets:
                op = mats[(grid.N, ls[0])] if len(ls) == 1 else extrapolate(
                    [mats[(grid.N, m)] for m in ls], alpha
                )
                approx = apply_operator(op, coeffs, grid.L)[: grid.N]
                result[(spec.name, ls, fid)] = float(np.max(np.abs(approx - exact)))
    return result


def compute_tables(names: Sequence[str] | None = None, alphas=None, threads: int = 1,
                   N_override: dict | None = None) -> dict[str, ErrorTable]:
    """Reproduce the named error tables over the alpha grid.

    ``N_override`` maps function ids to a different ``N`` (used by quick
    tests).
    """
    names = list(TABLES) if names is None else list(names)
    specs = [TABLES[n] for n in names]
    alphas = alpha_grid() if alphas is None else np.asarray(alphas, dtype=float)
    fids = {fid for spec in specs for fid in spec.functions}
    N_override = N_override or {}
    fields = {}
    for fid in fids:
        fields.update(_fields([fid], N_override.get(fid)))
    for spec in specs:
        n_alpha = len(alphas) if spec.alphas is None else len(spec.alphas)
        for fid in spec.functions:
            check_budget(fields[fid][1].N, max(max(ls) for ls in spec.level_sets), n_alpha)

    sweep = sorted(set(alphas.tolist()) | {a for s in specs if s.alphas for a in s.alphas})
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_alpha = list(pool.map(lambda a: _errors_at(a, specs, fields), sweep))
    else:
        per_alpha = [_errors_at(a, specs, fields) for a in sweep]
    lookup = dict(zip(sweep, per_alpha))

    tables = {}
    for spec in specs:
        grid_alphas = np.asarray(spec.alphas if spec.alphas is not None else alphas)
        table = ErrorTable(spec.name, grid_alphas, list(spec.level_sets), list(spec.functions))
        for ls in spec.level_sets:
            for fid in spec.functions:
                table.curves[(ls, fid)] = np.array(
                    [lookup[float(a)][(spec.name, ls, fid)] for a in grid_alphas]
                )
        tables[spec.name] = table
    return tables


def compute_table(name: str, alphas=None, threads: int = 1, N_override=None) -> ErrorTable:
    return compute_tables([name], alphas, threads, N_override)[name]


def rate_curve(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    """Empirical order ``log2(E_coarse / E_fine)`` pointwise in alpha."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(np.asarray(coarse) / np.asarray(fine))


def format_value(value: float) -> str:
    return repr(float(value)) if math.isfinite(value) else "nan"
