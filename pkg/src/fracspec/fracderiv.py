"""Operator matrices for the left-sided Caputo derivative ``d/dx D^alpha``.

For a field ``u(s) = sum_k c(k) exp(iks)`` on the mapped grid, the value of
``d/dx D^alpha v`` at node ``s_j`` is a singular integral over ``(s_j, pi)``
of a kernel ``w(eta) (cot s_j - cot eta)^(1 - alpha)``.  Approximating it with
a midpoint (Chebyshev-Gauss) rule on the refined nodes ``s_l^(m)``, which
never hit the singularity, gives one operator matrix per refinement level.
The error behaves like ``sum_n c_n 2^(-m (n + 1 - alpha))``, so consecutive
levels are combined by a Richardson ladder.

Matrices are always built for ``L = 1`` and scaled by ``L^(-1 - alpha)`` when
applied.  They include the ``1 / Gamma(2 - alpha)`` normalisation.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fourier import FourierField
from .grid import make_grid, refined_nodes

__all__ = [
    "DEFAULT_LEVELS",
    "ASSEMBLY_BUDGET",
    "BudgetExceeded",
    "FracOpMatrix",
    "w_mode_weights",
    "eval_w",
    "quadrature_apply",
    "assemble_matrix",
    "assemble_matrix_naive",
    "extrapolate",
    "ladder_weights",
    "build_operator",
    "apply_operator",
    "assembly_count",
]

DEFAULT_LEVELS = (1, 2, 3, 4, 5, 6)

# upper bound on N * 2^m (number of quadrature nodes) for one assembly
ASSEMBLY_BUDGET = 2**19

# rows per FFT batch, sized to keep the batch under ~64 MB
_BATCH_BYTES = 64 * 2**20

_counter_lock = threading.Lock()
_assemblies = 0


class BudgetExceeded(RuntimeError):
    """Raised when an assembly would exceed the configured size budget."""


def assembly_count() -> int:
    """Number of level matrices assembled in this process."""
    return _assemblies


def _bump():
    global _assemblies
    with _counter_lock:
        _assemblies += 1


@dataclass(frozen=True)
class FracOpMatrix:
    """Dense ``(2N, 2N)`` operator from coefficients to nodal values.

    Column ``k + N`` holds the approximate ``d/dx D^alpha exp(iks)`` at the
    ``2N`` nodes, built with ``L = 1``.
    """

    entries: np.ndarray = field(repr=False)
    alpha: float
    N: int
    levels: tuple[int, ...]

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.shape != (2 * self.N, 2 * self.N):
            raise ValueError(f"entries must be {2 * self.N}x{2 * self.N}, got {a.shape}")
        if a.flags.writeable:
            a = a.copy()
            a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "levels", tuple(int(m) for m in self.levels))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def key(self):
        return (self.alpha, self.N, self.levels)


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")


def w_mode_weights(k) -> dict[int, np.ndarray]:
    """Expansion of ``w_k(s)`` (with ``L = 1``) in ``exp(i(k + d)s)``.

    Returns ``{d: weight}`` for ``d in (4, 2, 0, -2, -4)``.
    """
    k = np.asarray(k, dtype=float)
    k2, k3 = k**2, k**3
    return {
        4: 1j * (k3 + 6 * k2 + 8 * k) / 16,
        2: -1j * (k3 + 3 * k2 + 2 * k) / 4,
        0: 1j * 3 * k3 / 8,
        -2: -1j * (k3 - 3 * k2 + 2 * k) / 4,
        -4: 1j * (k3 - 6 * k2 + 8 * k) / 16,
    }


def eval_w(k, s, L: float = 1.0, alpha: float | None = None):
    """Kernel factor ``w_k(s)`` from the trigonometric form.

    Without ``alpha`` the ``L^(-1 - alpha)`` prefactor is left to the caller.
    """
    k = np.asarray(k, dtype=float)
    s = np.asarray(s, dtype=float)
    bracket = (
        1j * (k**3 + 8 * k) / 8 * np.cos(4 * s)
        - 3 * k**2 / 4 * np.sin(4 * s)
        - 1j * (k**3 + 2 * k) / 2 * np.cos(2 * s)
        + 3 * k**2 / 2 * np.sin(2 * s)
        + 1j * 3 * k**3 / 8
    )
    w = np.exp(1j * k * s) * bracket
    if alpha is not None:
        w = w * L ** (-1.0 - alpha)
    return w if w.ndim else complex(w)


def _kernel_weights(cot_j: np.ndarray, cot_l: np.ndarray, alpha: float,
                    start: np.ndarray) -> np.ndarray:
    """``(cot s_j - cot s_l)^(1 - alpha)`` for ``l >= start_j``, zero before."""
    base = cot_j[:, None] - cot_l[None, :]
    mask = np.arange(cot_l.size)[None, :] >= start[:, None]
    base = np.where(mask, base, 1.0)
    if np.any(base <= 0.0):
        raise ArithmeticError("non-positive kernel base on the summation range")
    if alpha == 0.0:
        weights = base
    elif alpha == 1.0:
        weights = np.ones_like(base)
    else:
        weights = np.exp((1.0 - alpha) * np.log(base))
    return np.where(mask, weights, 0.0)


def _row_starts(N: int, m: int) -> np.ndarray:
    return (2 ** (m - 1)) * (2 * np.arange(N) + 1)


def quadrature_apply(k: int, alpha: float, N: int, m: int, j: int) -> complex:
    """One matrix entry by direct summation over the refined nodes.

    This is the straightforward evaluation used as a reference for the fast
    assembly; it loops over ``l`` explicitly.
    """
    _check_alpha(alpha)
    if not 0 <= j < 2 * N:
        raise IndexError(f"node index {j} outside [0, {2 * N})")
    jj = j % N
    sj = math.pi * (2 * jj + 1) / (2 * N)
    cot_j = 1.0 / math.tan(sj)
    count = (2**m) * N
    total = 0j
    for l in range(2 ** (m - 1) * (2 * jj + 1), count):
        sl = math.pi * (2 * l + 1) / (2 * count)
        base = cot_j - 1.0 / math.tan(sl)
        if base <= 0.0:
            raise ArithmeticError(f"non-positive kernel base at l={l}")
        total += eval_w(k, sl) * base ** (1.0 - alpha)
    total *= math.pi / count / math.gamma(2.0 - alpha)
    if j >= N and k % 2:
        total = -total
    return total


def assemble_matrix_naive(alpha: float, N: int, m: int) -> FracOpMatrix:
    """Reference assembly: every entry summed independently (slow)."""
    _check_alpha(alpha)
    entries = np.zeros((2 * N, 2 * N), dtype=complex)
    nodes = refined_nodes(N, m).nodes
    grid = make_grid(N, 1.0)
    cot_l = 1.0 / np.tan(nodes)
    cot_j = 1.0 / np.tan(grid.s_nodes[:N])
    weights = _kernel_weights(cot_j, cot_l, alpha, _row_starts(N, m))
    scale = math.pi / nodes.size / math.gamma(2.0 - alpha)
    for col, k in enumerate(range(-N, N)):
        wk = eval_w(k, nodes)
        for j in range(N):
            value = 0j
            for l in range(nodes.size):
                if weights[j, l] != 0.0:
                    value += wk[l] * weights[j, l]
            entries[j, col] = value * scale
            entries[j + N, col] = -entries[j, col] if k % 2 else entries[j, col]
    return FracOpMatrix(entries, alpha, N, (m,))


def _check_budget(N: int, m: int, budget: int | None):
    budget = ASSEMBLY_BUDGET if budget is None else budget
    if N * 2**m > budget:
        raise BudgetExceeded(
            f"assembly with N={N}, m={m} needs {N * 2**m} quadrature nodes "
            f"(budget {budget})"
        )


def assemble_matrix(alpha: float, N: int, m: int, budget: int | None = None) -> FracOpMatrix:
    """Level-``m`` operator matrix, one real FFT per row.

    With ``w_k(s) = sum_d b_d(k) exp(i(k + d)s)`` every entry of row ``j`` is
    a combination of the sums ``T_j(q) = sum_l K_jl exp(iq s_l)`` with
    ``K_jl`` the kernel weights.  Since ``s_l`` is equispaced, ``T_j`` for all
    ``q`` comes out of a single length ``2^(m+1) N`` transform.
    """
    _check_alpha(alpha)
    if m < 1:
        raise ValueError(f"refinement level must be >= 1, got {m!r}")
    _check_budget(N, m, budget)
    count = (2**m) * N
    nodes = refined_nodes(N, m).nodes
    cot_l = 1.0 / np.tan(nodes)
    cot_j = 1.0 / np.tan(make_grid(N, 1.0).s_nodes[:N])
    starts = _row_starts(N, m)

    # modes k = 0..N-1 and k = -N; negative columns follow by conjugation
    ks = np.concatenate([np.arange(N), [-N]])
    bweights = w_mode_weights(ks)
    q_max = N + 4
    q = np.arange(q_max + 1)
    shift = np.exp(1j * q * np.pi / (2 * count))

    top = np.empty((N, ks.size), dtype=complex)
    rows_per_batch = max(1, _BATCH_BYTES // (16 * (count + 1)))
    for lo in range(0, N, rows_per_batch):
        hi = min(N, lo + rows_per_batch)
        K = _kernel_weights(cot_j[lo:hi], cot_l, alpha, starts[lo:hi])
        if q_max <= count:
            R = np.fft.rfft(K, n=2 * count, axis=1)[:, : q_max + 1]
        else:  # tiny grids: needed modes run past the half spectrum
            R = np.fft.fft(K, n=2 * count, axis=1)[:, : q_max + 1]
        # T(q) for q >= 0 is shift * conj(R[q]); T(-q) = conj(T(q))
        T_pos = shift[None, :] * np.conj(R)
        acc = np.zeros((hi - lo, ks.size), dtype=complex)
        for d, b in bweights.items():
            target = ks + d
            vals = np.where(
                target[None, :] >= 0,
                T_pos[:, np.abs(target)],
                np.conj(T_pos[:, np.abs(target)]),
            )
            acc += b[None, :] * vals
        top[lo:hi] = acc

    top *= math.pi / count / math.gamma(2.0 - alpha)

    entries = np.empty((2 * N, 2 * N), dtype=complex)
    entries[:N, N:] = top[:, :N]
    entries[:N, 1:N] = np.conj(top[:, 1:N][:, ::-1])
    entries[:N, 0] = top[:, N]
    sign = np.where(np.arange(-N, N) % 2, -1.0, 1.0)
    entries[N:] = entries[:N] * sign[None, :]
    _bump()
    return FracOpMatrix(entries, alpha, N, (m,))


def ladder_weights(levels: Sequence[int], alpha: float) -> np.ndarray:
    """Coefficients ``c`` with ``M^(levels) = sum_i c_i M^(levels[i])``."""
    levels = list(levels)
    n = len(levels) - 1
    coeffs = np.eye(n + 1)
    for r in range(1, n + 1):
        f = 2.0 ** (r + 1 - alpha)
        coeffs = (f * coeffs[1:] - coeffs[:-1]) / (f - 1.0)
    return coeffs[0]


def extrapolate(matrices: Sequence[FracOpMatrix], alpha: float | None = None) -> FracOpMatrix:
    """Richardson ladder over level matrices ``m, m+1, ..., m+n``.

    Stage ``r`` combines neighbours with weight ``2^(r+1-alpha)``:
    ``(2^(r+1-alpha) X_{i+1} - X_i) / (2^(r+1-alpha) - 1)``.
    """
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one matrix")
    first = matrices[0]
    if alpha is None:
        alpha = first.alpha
    levels = []
    for op in matrices:
        if op.N != first.N or op.alpha != first.alpha or op.alpha != alpha:
            raise ValueError("matrices must share alpha and N")
        if len(op.levels) != 1:
            raise ValueError("extrapolate expects single-level matrices")
        levels.append(op.levels[0])
    if levels != list(range(levels[0], levels[0] + len(levels))):
        raise ValueError(f"levels must be consecutive, got {levels}")

    stage = [op.entries for op in matrices]
    for r in range(1, len(stage)):
        f = 2.0 ** (r + 1 - alpha)
        stage = [(f * stage[i + 1] - stage[i]) / (f - 1.0) for i in range(len(stage) - 1)]
    return FracOpMatrix(stage[0], alpha, first.N, tuple(levels))


def build_operator(alpha: float, N: int, levels: Sequence[int] = DEFAULT_LEVELS,
                   budget: int | None = None) -> FracOpMatrix:
    """Assemble every level in ``levels`` and extrapolate them."""
    levels = tuple(levels)
    for m in levels:
        _check_budget(N, m, budget)
    mats = [assemble_matrix(alpha, N, m, budget) for m in levels]
    if len(mats) == 1:
        return mats[0]
    return extrapolate(mats, alpha)


def apply_operator(op: FracOpMatrix, field: FourierField, L: float) -> np.ndarray:
    """Nodal values ``L^(-1-alpha) M c``; real when the field is real."""
    if op.N != field.N:
        raise ValueError(f"operator is for N={op.N}, field has N={field.N}")
    values = (op.entries @ field.coeffs) * L ** (-1.0 - op.alpha)
    if field.is_real:
        return values.real.copy()
    return values
