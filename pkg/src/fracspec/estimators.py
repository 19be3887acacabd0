"""scikit-learn style wrappers.

:class:`FractionalDerivative` maps nodal samples of functions on the real
line to nodal values of ``d/dx D^alpha``.  :class:`FrontEvolution` runs the
KdV-Burgers evolution and interpolates the final profile.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cache import OperatorCache
from .evolve import evolve, front_datum, initial_field, wave_diagnostics
from .fourier import evaluate_at, forward_transform
from .fracderiv import DEFAULT_LEVELS, FracOpMatrix, apply_operator, build_operator
from .grid import even_extension, make_grid, x_to_s

__all__ = ["FractionalDerivative", "FrontEvolution", "check_alpha", "check_levels",
           "check_positive", "check_grid_size"]


def check_alpha(alpha) -> float:
    if not isinstance(alpha, numbers.Real) or not 0.0 <= float(alpha) <= 1.0:
        raise ValueError(f"alpha must be a real number in [0, 1], got {alpha!r}")
    return float(alpha)


def check_positive(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_grid_size(N) -> int:
    if not isinstance(N, numbers.Integral) or N < 2:
        raise ValueError(f"n_half must be an integer >= 2, got {N!r}")
    return int(N)


def check_levels(levels) -> tuple[int, ...]:
    try:
        levels = tuple(int(m) for m in levels)
    except TypeError:
        raise ValueError(f"levels must be a sequence of integers, got {levels!r}") from None
    if not levels or levels[0] < 1 or levels != tuple(range(levels[0], levels[0] + len(levels))):
        raise ValueError(f"levels must be consecutive integers >= 1, got {levels!r}")
    return levels


def _operator(alpha, N, levels, cache_dir) -> FracOpMatrix:
    if cache_dir is None:
        return build_operator(alpha, N, levels)
    return OperatorCache(cache_dir).get_or_build(alpha, N, levels)


class FractionalDerivative(TransformerMixin, BaseEstimator):
    """Spectral ``d/dx D^alpha`` as a transformer.

    Each row of ``X`` holds a function sampled at the ``n_half`` physical
    nodes ``x_j = scale * cot(s_j)`` (see :attr:`nodes_`, decreasing in
    ``x``).  ``transform`` returns the derivative at the same nodes.

    Parameters
    ----------
    alpha : float
        Order in ``[0, 1]``.
    n_half : int
        Number of physical nodes ``N``.
    scale : float
        Map parameter ``L``.
    levels : tuple of int
        Consecutive refinement levels combined by extrapolation.
    cache_dir : path-like, optional
        Operator cache directory.
    """

    def __init__(self, alpha=0.5, n_half=64, scale=1.0, levels=DEFAULT_LEVELS, cache_dir=None):
        self.alpha = alpha
        self.n_half = n_half
        self.scale = scale
        self.levels = levels
        self.cache_dir = cache_dir

    def fit(self, X=None, y=None):
        alpha = check_alpha(self.alpha)
        N = check_grid_size(self.n_half)
        L = check_positive(self.scale, "scale")
        levels = check_levels(self.levels)
        if X is not None:
            check_array(X, ensure_min_features=N)
            X = np.asarray(X)
            if X.shape[1] != N:
                raise ValueError(f"X has {X.shape[1]} columns, expected n_half={N}")
        self.operator_ = _operator(alpha, N, levels, self.cache_dir)
        self.grid_ = make_grid(N, L)
        self.nodes_ = self.grid_.x_nodes
        self.n_features_in_ = N
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        out = np.empty_like(X)
        for i, row in enumerate(X):
            field = forward_transform(even_extension(row))
            out[i] = apply_operator(self.operator_, field, self.grid_.L)[: self.n_features_in_]
        return out

    def sample(self, f) -> np.ndarray:
        """Samples of the callable ``f`` on the nodes, as one row of ``X``."""
        check_is_fitted(self, "grid_")
        return np.asarray(f(self.nodes_), dtype=float)[None, :]


class FrontEvolution(RegressorMixin, BaseEstimator):
    """Evolve a front-like datum and interpolate the final profile.

    ``fit`` runs the evolution from ``datum`` (default ``(1 - tanh x)/2``) to
    ``t_end``; ``predict`` evaluates the spectral interpolant at arbitrary
    ``x``.  ``X`` passed to ``fit`` is ignored.
    """

    def __init__(self, alpha=1 / 3, tau=1.0, n_half=128, scale=20.0, dt=0.01, t_end=20.0,
                 levels=DEFAULT_LEVELS, dealias=False, datum=None, cache_dir=None):
        self.alpha = alpha
        self.tau = tau
        self.n_half = n_half
        self.scale = scale
        self.dt = dt
        self.t_end = t_end
        self.levels = levels
        self.dealias = dealias
        self.datum = datum
        self.cache_dir = cache_dir

    def fit(self, X=None, y=None):
        alpha = check_alpha(self.alpha)
        tau = check_positive(self.tau, "tau")
        N = check_grid_size(self.n_half)
        L = check_positive(self.scale, "scale")
        dt = check_positive(self.dt, "dt")
        if not isinstance(self.t_end, numbers.Real) or self.t_end < 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end!r}")
        levels = check_levels(self.levels)
        op = _operator(alpha, N, levels, self.cache_dir)
        v0 = initial_field(N, L, self.datum or front_datum)
        self.state_ = evolve(v0, op, L, dt, tau, float(self.t_end), dealias=bool(self.dealias))
        self.field_ = self.state_.current
        self.diagnostics_ = wave_diagnostics(self.state_)
        return self

    def predict(self, X):
        check_is_fitted(self, "field_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1), ensure_all_finite=True)
        s = x_to_s(x[:, 0], float(self.scale))
        return evaluate_at(self.field_, s).real
