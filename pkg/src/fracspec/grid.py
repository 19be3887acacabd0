"""Algebraic map between the real line and the periodic interval.

The real line is mapped onto ``s in (0, pi)`` by ``x = L cot(s)``.  Functions
sampled on the first half are extended evenly to ``(0, 2 pi)`` so that they
can be expanded in ``exp(iks)``.  Nodes are half-offset,
``s_j = pi (2j + 1) / (2N)``, so the endpoints of the map are never sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "SpectralGrid",
    "RefinedNodes",
    "make_grid",
    "refined_nodes",
    "sample_even_extension",
    "even_extension",
    "x_to_s",
    "s_to_x",
    "extremal_values",
]


def _shifted_nodes(count: int, denominator: int) -> np.ndarray:
    # computed per node from integers; cumulative sums drift at large N
    return np.pi * (2 * np.arange(count, dtype=float) + 1) / denominator


@dataclass(frozen=True)
class SpectralGrid:
    """Shifted node layout for ``2N`` Fourier modes and map scale ``L``.

    Attributes
    ----------
    N : int
        Half the number of modes (and the number of physical nodes).
    L : float
        Scale of the map ``x = L cot(s)``.
    s_nodes : ndarray, shape (2N,)
        ``s_j = pi (2j+1) / (2N)`` for ``j = 0..2N-1``.
    x_nodes : ndarray, shape (N,)
        Images of the first ``N`` nodes; strictly decreasing.
    """

    N: int
    L: float
    s_nodes: np.ndarray = field(repr=False)
    x_nodes: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> float:
        return np.pi / self.N

    def x_of(self, s):
        return s_to_x(s, self.L)

    def s_of(self, x):
        return x_to_s(x, self.L)


@dataclass(frozen=True)
class RefinedNodes:
    """Quadrature nodes ``s_l^(m) = pi (2l+1) / (2^(m+1) N)`` on ``(0, pi)``."""

    m: int
    N: int
    nodes: np.ndarray = field(repr=False)


def make_grid(N: int, L: float) -> SpectralGrid:
    """Build the shifted grid with ``2N`` nodes and map scale ``L``."""
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N!r}")
    if not np.isfinite(L) or L <= 0:
        raise ValueError(f"L must be positive, got {L!r}")
    N = int(N)
    s = _shifted_nodes(2 * N, 2 * N)
    x = L / np.tan(s[:N])
    s.setflags(write=False)
    x.setflags(write=False)
    return SpectralGrid(N=N, L=float(L), s_nodes=s, x_nodes=x)


def refined_nodes(N: int, m: int) -> RefinedNodes:
    """Quadrature node family of refinement level ``m`` (``2^m N`` nodes)."""
    if int(m) != m or m < 1:
        raise ValueError(f"refinement level must be an integer >= 1, got {m!r}")
    if N < 1:
        raise ValueError(f"N must be positive, got {N!r}")
    count = (2**m) * N
    nodes = _shifted_nodes(count, 2 * count)
    nodes.setflags(write=False)
    return RefinedNodes(m=int(m), N=int(N), nodes=nodes)


def s_to_x(s, L: float):
    return L / np.tan(s)


def x_to_s(x, L: float):
    """Inverse of the map on the first half-period, ``s = arccot(x / L)``."""
    return np.arctan2(L, x)


def even_extension(half: np.ndarray) -> np.ndarray:
    """Reflect ``N`` samples on ``(0, pi)`` to ``2N`` samples on ``(0, 2 pi)``.

    Works along the last axis, so batches of samples are accepted.
    """
    half = np.asarray(half)
    return np.concatenate([half, half[..., ::-1]], axis=-1)


def sample_even_extension(f: Callable, grid: SpectralGrid) -> np.ndarray:
    """Sample ``f`` at the physical nodes and extend evenly to ``2N`` values.

    ``u_{2N-1-j} = u_j``, since ``s_{2N-1-j} = 2 pi - s_j``.
    """
    values = np.asarray(f(grid.x_nodes), dtype=float)
    values = np.broadcast_to(values, grid.x_nodes.shape).astype(float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        j = int(bad[0])
        raise ValueError(
            f"non-finite sample {values[j]!r} at node j={j} (x={grid.x_nodes[j]!r})"
        )
    return even_extension(values)


def extremal_values(samples: np.ndarray, threshold: float | None = None):
    """Report ``|u|`` at the two extremal physical nodes.

    This is the diagnostic behind the rule of thumb for choosing ``L``: the
    function should be below some accuracy threshold at both ends of the
    grid.  ``samples`` are the values at the ``N`` physical nodes.  Returns
    ``(first, last)`` or, when a threshold is given, ``(first, last, ok)``.
    """
    samples = np.asarray(samples)
    first, last = float(abs(samples[0])), float(abs(samples[-1]))
    if threshold is None:
        return first, last
    return first, last, bool(first < threshold and last < threshold)
