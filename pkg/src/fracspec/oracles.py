"""Reference functions with known derivatives, and independent oracles.

Each :class:`TestFunction` carries closed forms of ``v``, ``v'`` and ``v''``
and, when one exists, the closed form of ``d/dx D^alpha v``.  At
``alpha = 0`` and ``alpha = 1`` the operator reduces to ``v'`` and ``v''``,
and every ``exact`` evaluation dispatches to those.

:func:`brute_force_frac` evaluates the operator by adaptive quadrature
straight from its integral definition and does not share any code with the
spectral path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

__all__ = [
    "TestFunction",
    "hyp1f1",
    "exact_frac_v1",
    "exact_frac_v2",
    "exact_frac_v3",
    "exact_frac_v8",
    "brute_force_frac",
    "regularity_suite",
    "get_function",
    "FUNCTIONS",
    "ToleranceNotReached",
]


class ToleranceNotReached(ArithmeticError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """Named reference function bundle."""

    __test__ = False  # keep pytest from collecting this class

    id: str
    v: Callable
    dv: Callable
    d2v: Callable
    exact_frac: Optional[Callable]
    recommended_L: float
    regularity: float
    N: int = 64

    def exact(self, x, alpha):
        """``d/dx D^alpha v`` at ``x``; endpoints use ``v'`` and ``v''``."""
        if alpha == 0:
            return self.dv(np.asarray(x, dtype=float))
        if alpha == 1:
            return self.d2v(np.asarray(x, dtype=float))
        if self.exact_frac is None:
            raise ValueError(f"no closed form for {self.id} at alpha={alpha}")
        return self.exact_frac(np.asarray(x, dtype=float), alpha)

    def has_exact(self, alpha) -> bool:
        return alpha in (0, 1) or self.exact_frac is not None


def _endpoint(alpha, dv, d2v, x):
    if alpha == 0:
        return dv(x)
    if alpha == 1:
        return d2v(x)
    return None


# --- v1 = 1 / (1 + x^2) ---------------------------------------------------

def _v1(x):
    return 1.0 / (1.0 + x * x)


def _dv1(x):
    return -2.0 * x / (1.0 + x * x) ** 2


def _d2v1(x):
    return (6.0 * x * x - 2.0) / (1.0 + x * x) ** 3


def exact_frac_v1(x, alpha):
    x = np.asarray(x, dtype=float)
    end = _endpoint(alpha, _dv1, _d2v1, x)
    if end is not None:
        return end
    a = alpha
    pref = -math.pi * a * (1 + a) / math.sin(a * math.pi) / math.gamma(1 - a)
    theta = a * math.pi / 2 + (1 + a) * np.arctan(x)
    return pref * (1 + x * x) ** (-(3 + a) / 2) * (np.sin(theta) + x * np.cos(theta))


# --- v2 = 1 / (1 + x^2)^2 -------------------------------------------------

def _v2(x):
    return 1.0 / (1.0 + x * x) ** 2


def _dv2(x):
    return -4.0 * x / (1.0 + x * x) ** 3


def _d2v2(x):
    return (20.0 * x * x - 4.0) / (1.0 + x * x) ** 4


def exact_frac_v2(x, alpha):
    x = np.asarray(x, dtype=float)
    end = _endpoint(alpha, _dv2, _d2v2, x)
    if end is not None:
        return end
    a = alpha
    pref = math.pi * a * (1 + a) / (4 * math.gamma(1 - a))
    at = np.arctan(x)
    x2 = x * x
    first = (
        ((3 * a + 8) * x - a * x**3) * np.sin(a * at)
        + (-3 - a + (6 + 3 * a) * x2 + x2 * x2) * np.cos(a * at)
    ) / math.cos(a * math.pi / 2)
    second = (
        np.sqrt(1 + x2)
        * (
            (-3 - a + (1 + a) * x2) * np.sin((1 + a) * at)
            - (5 * x + 2 * a * x + x**3) * np.cos((1 + a) * at)
        )
        / math.sin(a * math.pi / 2)
    )
    return pref * (1 + x2) ** (-3 - a / 2) * (first + second)


# --- v3 = exp(-x^2) -------------------------------------------------------

def _v3(x):
    return np.exp(-x * x)


def _dv3(x):
    return -2.0 * x * np.exp(-x * x)


def _d2v3(x):
    return (4.0 * x * x - 2.0) * np.exp(-x * x)


_KUMMER_CUTOFF = 50.0
_MAX_TERMS = 100_000


def hyp1f1(a: float, b: float, z):
    """Confluent hypergeometric ``1F1(a; b; z)`` for real ``z <= 0``.

    Moderate ``|z|`` uses the power series after Kummer's transformation
    ``1F1(a; b; z) = e^z 1F1(b - a; b; -z)``, which turns the alternating
    series into one whose terms share a sign after the first.  Large ``|z|``
    uses the algebraic asymptotic series; the exponentially small part is
    below double precision there.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise ValueError("hyp1f1 is implemented for z <= 0 only")
    t = -z
    out = np.empty_like(t)
    # b - a a non-positive integer: the transformed series terminates
    terminating = b - a <= 0 and float(b - a).is_integer()
    small = (t <= _KUMMER_CUTOFF) | terminating
    if small.any():
        out[small] = _kummer_series(a, b, t[small])
    if (~small).any():
        out[~small] = _asymptotic(a, b, t[~small])
    return out if out.ndim else float(out)


def _kummer_series(a, b, t):
    ap = b - a
    term = np.ones_like(t)
    total = np.ones_like(t)
    for n in range(_MAX_TERMS):
        term = term * (ap + n) / (b + n) * t / (n + 1)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)) and (n > 2 or not term.any()):
            return np.exp(-t) * total
    raise ToleranceNotReached("1F1 power series did not converge")


def _asymptotic(a, b, t):
    term = np.ones_like(t)
    total = np.ones_like(t)
    prev = np.full_like(t, np.inf)
    for s in range(200):
        term = term * (a + s) * (a - b + 1 + s) / ((s + 1) * t)
        if np.all((np.abs(term) <= 1e-17 * np.abs(total)) | (np.abs(term) > prev)):
            break
        prev = np.abs(term)
        total = total + term
    return math.gamma(b) / math.gamma(b - a) * t ** (-a) * total


def exact_frac_v3(x, alpha):
    x = np.asarray(x, dtype=float)
    end = _endpoint(alpha, _dv3, _d2v3, x)
    if end is not None:
        return end
    a = alpha
    z = -x * x
    g = math.gamma((1 - a) / 2)
    val = (
        -6 * (1 + a) * math.gamma(1 - a / 2) * x * hyp1f1((3 + a) / 2, 1.5, z)
        - 3 * a * g * hyp1f1(1 + a / 2, 1.5, z)
        + (4 * a + 2 * a * a) * g * x * x * hyp1f1(2 + a / 2, 2.5, z)
    )
    return val / (3 * math.gamma(1 - a))


# --- v8 = log(1 + x^2) ----------------------------------------------------

def _v8(x):
    return np.log1p(x * x)


def _dv8(x):
    return 2.0 * x / (1.0 + x * x)


def _d2v8(x):
    return (2.0 - 2.0 * x * x) / (1.0 + x * x) ** 2


def exact_frac_v8(x, alpha):
    x = np.asarray(x, dtype=float)
    end = _endpoint(alpha, _dv8, _d2v8, x)
    if end is not None:
        return end
    a = alpha
    pref = 2 * math.pi * a / math.sin(a * math.pi) / math.gamma(1 - a)
    theta = a * math.pi / 2 + a * np.arctan(x)
    return pref * (1 + x * x) ** (-1 - a / 2) * (np.sin(theta) + x * np.cos(theta))


# --- finite-regularity family ---------------------------------------------

def _v4(x):
    return x * np.abs(x) / (1 + x**4)


def _dv4(x):
    ax = np.abs(x)
    return -(2 * ax**5 - 2 * ax) / (1 + x**4) ** 2


def _d2v4(x):
    return (6 * x**8 - 24 * x**4 + 2) / (1 + x**4) ** 3 * np.sign(x)


def _v5(x):
    ax = np.abs(x)
    return ax**3 / (1 + ax**5)


def _dv5(x):
    ax = np.abs(x)
    return -(2 * x**7 - 3 * x * ax) / (1 + ax**5) ** 2


def _d2v5(x):
    ax = np.abs(x)
    return (6 * ax**11 - 38 * x**6 + 6 * ax) / (1 + ax**5) ** 3


def _v6(x):
    return x**3 * np.abs(x) / (1 + x**6)


def _dv6(x):
    ax = np.abs(x)
    return -(2 * ax**9 - 4 * ax**3) / (1 + x**6) ** 2


def _d2v6(x):
    return (6 * x**13 - 54 * x**7 + 12 * x) / (1 + x**6) ** 3 * np.abs(x)


def _v7(x):
    ax = np.abs(x)
    return ax**5 / (1 + ax**7)


def _dv7(x):
    ax = np.abs(x)
    return -(2 * x**11 - 5 * x**3 * ax) / (1 + ax**7) ** 2


def _d2v7(x):
    ax = np.abs(x)
    return (6 * ax**17 - 72 * x**10 + 20 * ax**3) / (1 + ax**7) ** 3


# --- sech and the front datum ---------------------------------------------

def _sech(x):
    return 1.0 / np.cosh(x)


def _dsech(x):
    return -np.tanh(x) / np.cosh(x)


def _d2sech(x):
    return (2 * np.tanh(x) ** 2 - 1) / np.cosh(x)


def _front(x):
    return (1 - np.tanh(x)) / 2


def _dfront(x):
    return -0.5 / np.cosh(x) ** 2


def _d2front(x):
    return np.tanh(x) / np.cosh(x) ** 2


FUNCTIONS = {
    f.id: f
    for f in [
        TestFunction("v1", _v1, _dv1, _d2v1, exact_frac_v1, 1.6, math.inf, 64),
        TestFunction("v2", _v2, _dv2, _d2v2, exact_frac_v2, 1.1, math.inf, 64),
        TestFunction("v3", _v3, _dv3, _d2v3, exact_frac_v3, 4.0, math.inf, 64),
        TestFunction("v4", _v4, _dv4, _d2v4, None, 0.1, 1, 256),
        TestFunction("v5", _v5, _dv5, _d2v5, None, 0.14, 2, 256),
        TestFunction("v6", _v6, _dv6, _d2v6, None, 0.2, 3, 256),
        TestFunction("v7", _v7, _dv7, _d2v7, None, 0.28, 4, 256),
        TestFunction("v8", _v8, _dv8, _d2v8, exact_frac_v8, 30.4, math.inf, 256),
        TestFunction("sech", _sech, _dsech, _d2sech, None, 3.9, math.inf, 128),
        TestFunction("tanh-step", _front, _dfront, _d2front, None, 20.0, math.inf, 128),
    ]
}


def get_function(name: str) -> TestFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown function id {name!r}; known: {sorted(FUNCTIONS)}") from None


def regularity_suite() -> list[TestFunction]:
    """``v4`` to ``v7``: quadratic decay, regularity C^1 through C^4."""
    return [FUNCTIONS[name] for name in ("v4", "v5", "v6", "v7")]


def brute_force_frac(d2v: Callable, x: float, alpha: float, tol: float = 1e-10,
                     near: float = 10.0, limit: int = 500) -> float:
    """``1/Gamma(1-alpha) int_{-inf}^x v''(y) (x-y)^(-alpha) dy`` by quadrature.

    On ``[x - near, x]`` the substitution ``y = x - r^(1/(1-alpha))`` removes
    the endpoint singularity, leaving ``int v''(x - r^p) dr / (1 - alpha)``.
    The remaining tail runs to ``-inf`` and is handled by QUADPACK's
    infinite-interval mapping, so there is no truncation error to bound.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha!r}")
    x = float(x)
    p = 1.0 / (1.0 - alpha)
    r_max = near ** (1.0 - alpha)

    def near_integrand(r):
        return float(d2v(x - r**p))

    def far_integrand(y):
        return float(d2v(y)) * (x - y) ** (-alpha)

    opts = dict(epsabs=tol / 10, epsrel=1e-13, limit=limit, full_output=1)
    breaks = np.linspace(0.0, r_max, 9)
    near_val, near_err = 0.0, 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        val, err, *info = integrate.quad(near_integrand, lo, hi, **opts)
        near_val += val
        near_err += err
    far_val, far_err, *info = integrate.quad(far_integrand, -np.inf, x - near, **opts)

    total_err = (near_err / (1.0 - alpha) + far_err) / math.gamma(1.0 - alpha)
    if not total_err < tol:
        raise ToleranceNotReached(
            f"quadrature error estimate {total_err:.3e} exceeds tol {tol:.1e} "
            f"(x={x}, alpha={alpha})"
        )
    return (near_val / (1.0 - alpha) + far_val) / math.gamma(1.0 - alpha)
