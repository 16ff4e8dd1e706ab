"""Bump kernel, smoothed step and the smooth surrogates built on top of it.

Everything here is vectorised over numpy arrays; scalars go in and come
back out as numpy floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

THETA_KNOTS = 4096
GAUSS_ORDER = 64


def rho(x):
    """Unnormalised bump ``exp(-1/(1-x^2))`` supported on ``(-1, 1)``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        r = np.exp(-1.0 / (1.0 - x * x))
    return np.where(np.abs(x) < 1.0, r, 0.0)[()]


@lru_cache(maxsize=1)
def rho_integral() -> float:
    val, _ = integrate.quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13)
    return val


@dataclass(frozen=True)
class ThetaTable:
    """Cubic Hermite table of the normalised cumulative bump on ``[-1, 1]``.

    Slopes come from a monotone (PCHIP) fit, so the interpolant is
    nondecreasing. Values are symmetrised so that ``theta(-u) = 1 - theta(u)``.
    """

    knots: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    h: float


@lru_cache(maxsize=1)
def theta_table(n_knots: int = THETA_KNOTS) -> ThetaTable:
    knots = np.linspace(-1.0, 1.0, n_knots)
    f = lambda u: math.exp(-1.0 / (1.0 - u * u)) if abs(u) < 1.0 else 0.0
    half = n_knots // 2
    pieces = np.zeros(half)
    for i in range(1, half):
        pieces[i], _ = integrate.quad(f, knots[i - 1], knots[i], epsabs=1e-15, epsrel=1e-12)
    left = np.cumsum(pieces) / rho_integral()
    # mirror the left half so monotonicity survives rounding
    values = np.empty(n_knots)
    values[:half] = left
    values[n_knots - half:] = (1.0 - left)[::-1]
    if n_knots % 2:
        values[half] = 0.5
    slopes = PchipInterpolator(knots, values).derivative()(knots)
    slopes = np.maximum(0.5 * (slopes + slopes[::-1]), 0.0)
    return ThetaTable(knots=knots, values=values, slopes=slopes, h=float(knots[1] - knots[0]))


def _hermite(tab: ThetaTable, u: np.ndarray) -> np.ndarray:
    s = (u + 1.0) / tab.h
    i = np.clip(np.nan_to_num(np.floor(s)), 0, len(tab.knots) - 2).astype(np.int64)
    t = s - i
    omt = 1.0 - t
    return (
        (1.0 + 2.0 * t) * omt * omt * tab.values[i]
        + t * omt * omt * tab.h * tab.slopes[i]
        + t * t * (3.0 - 2.0 * t) * tab.values[i + 1]
        + t * t * (t - 1.0) * tab.h * tab.slopes[i + 1]
    )


def theta(u):
    """Smoothed Heaviside step: 0 below -1, 1 above 1, 1/2 at the origin."""
    tab = theta_table()
    u = np.asarray(u, dtype=float)
    a = np.clip(-np.abs(u), -1.0, 0.0)
    v = _hermite(tab, a)
    # right half is evaluated as 1 - theta(-u): keeps rounding monotone near 1
    v = np.where(u > 0.0, 1.0 - v, v)
    return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, 1.0, v))[()]


def abs_eps(x, eps: float):
    """Smooth |x|: exact for |x| >= eps, identically zero for |x| <= eps/2."""
    x = np.asarray(x, dtype=float)
    k = 4.0 / eps
    return np.abs(x) * (theta(-k * x - 3.0) + theta(k * x - 3.0))


def max_eps(x, y, eps: float):
    """Smooth max(x, y); off by at most eps/3."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * (abs_eps(x - y, eps) + x + y)


def max3_eps(a, b, c, eps: float):
    # two nested calls at eps/2 keep the total gap below eps/3
    half = 0.5 * eps
    return max_eps(a, max_eps(b, c, half), half)


@dataclass(frozen=True)
class MollifierFamily:
    """The scaled bumps ``rho_n(x) = n rho(n x) / int rho``."""

    order: int
    normalization: float = field(default_factory=rho_integral)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("mollifier order must be >= 1")

    @property
    def support(self) -> float:
        return 1.0 / self.order

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.order * rho(self.order * x) / self.normalization

    def mass(self) -> float:
        val, _ = integrate.quad(self, -self.support, self.support, epsabs=1e-13, epsrel=1e-12)
        return val


class MollifiedCost:
    """``f_n = f * rho_n`` evaluated by Gauss-Legendre quadrature on the kernel window.

    When the cost exposes a ``kink`` location the window is split there, so
    each panel integrates a smooth piece. The discrete weights are
    renormalised so affine pieces of ``f`` are reproduced to rounding.
    """

    def __init__(self, cost, n: int, order: int = GAUSS_ORDER):
        if n < 1:
            raise ValueError("mollification order n must be >= 1")
        self.cost = cost
        self.n = int(n)
        self.kink = getattr(cost, "kink", None)
        nodes, w = np.polynomial.legendre.leggauss(order)
        kw = w * rho(nodes)
        self._shift = nodes / self.n
        self._w = kw / kw.sum()
        self._half_nodes, self._half_w = np.polynomial.legendre.leggauss(max(2, order // 2))

    def _split(self, x: np.ndarray):
        # kernel variable s in [-1, 1] enters as f(x - s / n); the kink sits at s = c
        c = np.clip(self.n * (x - self.kink), -1.0, 1.0)[..., None]
        t, w = self._half_nodes, self._half_w
        s_lo = 0.5 * (c - 1.0) + 0.5 * (c + 1.0) * t
        s_hi = 0.5 * (c + 1.0) + 0.5 * (1.0 - c) * t
        w_lo = 0.5 * (c + 1.0) * w * rho(s_lo)
        w_hi = 0.5 * (1.0 - c) * w * rho(s_hi)
        s = np.concatenate([s_lo, s_hi], axis=-1)
        wt = np.concatenate([w_lo, w_hi], axis=-1)
        return s, wt / wt.sum(axis=-1, keepdims=True)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kink is None:
            return self.cost(x[..., None] - self._shift) @ self._w
        s, wt = self._split(x)
        return np.sum(self.cost(x[..., None] - s / self.n) * wt, axis=-1)


def mollify_cost(cost, n: int) -> MollifiedCost:
    return MollifiedCost(cost, n)


def exp_level(n: float) -> float:
    """``e^n`` with overflow mapped to infinity."""
    return math.exp(n) if n < 709.0 else math.inf


def mu_n(x, n: float):
    """Competition term truncated smoothly beyond ``e^n``."""
    x = np.asarray(x, dtype=float)
    b = exp_level(n) + 1.0
    with np.errstate(invalid="ignore"):
        return x * (theta(x + b) - theta(x - b))
