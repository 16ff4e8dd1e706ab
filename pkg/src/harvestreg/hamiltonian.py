"""Exact and smoothed Hamiltonians of the regulator's HJB equation in log-abundance.

Writing ``pi = e^y p(e^y)`` and ``kappa = 1 + gamma sigma^2``, the supremum over
the contract sensitivity ``z`` splits into three branches:

* ``k1`` -- effort clamped at ``-m_lower`` (renewal at full rate),
* ``k2`` -- effort clamped at ``m_upper`` (harvest at full rate),
* ``q``  -- interior quadratic, itself clamped through the switching variable
  ``s = pi - delta1 / kappa``.

The smoothed Hamiltonian replaces the nonsmooth pieces by Theta-blends and the
three-way max by :func:`~harvestreg.smoothing.max3_eps`; its distance to the
exact one is at most ``epsilon`` everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .smoothing import max3_eps, theta

# grid used to certify the Q_eps window width
_WINDOW_CHECK_SHAPE = (200, 400)


@dataclass(frozen=True)
class HamiltonianContext:
    gamma: float
    sigma: float
    lam: float
    m_lower: float
    m_upper: float
    P: float
    epsilon: float
    revenue_log: Callable
    mu: Callable
    window: float = 0.0

    @property
    def kappa(self) -> float:
        return 1.0 + self.gamma * self.sigma ** 2

    @property
    def Gamma(self) -> float:
        return max(self.m_upper * self.kappa, (self.P + self.m_lower) * self.kappa)

    @property
    def penalty(self) -> float:
        """Coefficient of ``z^2`` lost to the agent's risk aversion, ``gamma sigma^2 / 2``."""
        return 0.5 * self.gamma * self.sigma ** 2

    def base_drift(self, y):
        """``lambda - sigma^2/2 - mu(e^y)``."""
        y = np.asarray(y, dtype=float)
        return self.lam - 0.5 * self.sigma ** 2 - self.mu(np.exp(y))

    @classmethod
    def from_params(cls, params) -> "HamiltonianContext":
        ctx = cls(
            gamma=params.gamma, sigma=params.sigma, lam=params.lam,
            m_lower=params.m_lower, m_upper=params.m_upper, P=params.price.P,
            epsilon=params.epsilon, revenue_log=params.price.revenue_log, mu=params.mu,
        )
        return ctx.calibrated()

    def calibrated(self) -> "HamiltonianContext":
        """Pick the Q_eps window: start small, halve until the sampled gap is <= eps/3."""
        h = self.epsilon / (6.0 * self.kappa * (self.m_upper + self.m_lower + 1.0))
        h = min(h, 0.25 * (self.m_upper + self.m_lower))
        pi, d1 = q_compact_grid(self, *_WINDOW_CHECK_SHAPE)
        for _ in range(60):
            ctx = _replace_window(self, h)
            if np.max(np.abs(q_eps(pi, d1, ctx) - q_exact(pi, d1, ctx))) <= self.epsilon / 3.0:
                return ctx
            h *= 0.5
        raise RuntimeError("could not certify the Q_eps window")


def _replace_window(ctx: HamiltonianContext, h: float) -> HamiltonianContext:
    return replace(ctx, window=h)


@dataclass(frozen=True)
class HamiltonianInput:
    y: np.ndarray | float
    delta1: np.ndarray | float
    delta2: np.ndarray | float = 0.0


def q_compact_grid(ctx: HamiltonianContext, n_pi: int, n_d1: int):
    """Tensor grid of ``[0, P] x [-Gamma-1, Gamma+1]``, flattened."""
    g = ctx.Gamma
    pi, d1 = np.meshgrid(np.linspace(0.0, ctx.P, n_pi), np.linspace(-g - 1.0, g + 1.0, n_d1))
    return pi.ravel(), d1.ravel()


# -- branches written in terms of the revenue pi -----------------------------

def k1_pi(pi, delta1, ctx: HamiltonianContext):
    ml = ctx.m_lower
    return (delta1 - pi - 0.5 * ml) * ml - ctx.penalty * (ml + pi) ** 2


def k2_pi(pi, delta1, ctx: HamiltonianContext):
    mu = ctx.m_upper
    return (-delta1 + pi - 0.5 * mu) * mu - ctx.penalty * np.maximum(mu - pi, 0.0) ** 2


def _q_pieces(pi, delta1, ctx: HamiltonianContext):
    kap = ctx.kappa
    pi = np.asarray(pi, dtype=float)
    delta1 = np.asarray(delta1, dtype=float)
    lin = pi * kap - delta1
    common = ctx.penalty * pi * pi
    interior = lin * lin / (2.0 * kap) - common
    upper = -0.5 * kap * ctx.m_upper ** 2 + lin * ctx.m_upper - common
    lower = -0.5 * kap * ctx.m_lower ** 2 - lin * ctx.m_lower - common
    return lin / kap, interior, upper, lower


def q_exact(pi, delta1, ctx: HamiltonianContext):
    """Interior branch ``K3 = Q(pi, delta1)`` with its two clamped pieces."""
    s, interior, upper, lower = _q_pieces(pi, delta1, ctx)
    return np.where(s > ctx.m_upper, upper, np.where(s < -ctx.m_lower, lower, interior))[()]


def q_eps(pi, delta1, ctx: HamiltonianContext):
    """Smooth Q: the clamped pieces are blended in over a window of half-width ``ctx.window``.

    Across a switch the two pieces touch to second order
    (``interior - upper = kappa (s - m_upper)^2 / 2``), so the gap is at most
    ``kappa * window^2 / 2``.
    """
    h = ctx.window
    s, interior, upper, lower = _q_pieces(pi, delta1, ctx)
    wu = theta((s - ctx.m_upper) / h)
    wl = theta((-ctx.m_lower - s) / h)
    return ((1.0 - wu - wl) * interior + wu * upper + wl * lower)[()]


def k3_eps_pi(pi, delta1, ctx: HamiltonianContext):
    g = ctx.Gamma
    delta1 = np.asarray(delta1, dtype=float)
    _, _, upper, lower = _q_pieces(pi, delta1, ctx)
    lo_w = theta(2.0 * (delta1 - g) - 1.0)
    up_w = theta(-2.0 * (g + delta1) - 1.0)
    return (q_eps(pi, delta1, ctx) * (1.0 - lo_w - up_w) + lower * lo_w + upper * up_w)[()]


def core_exact(pi, delta1, ctx: HamiltonianContext):
    """``sup_z`` part of the Hamiltonian without the drift and diffusion terms."""
    return np.maximum(np.maximum(k1_pi(pi, delta1, ctx), k2_pi(pi, delta1, ctx)),
                      q_exact(pi, delta1, ctx))[()]


def core_eps(pi, delta1, ctx: HamiltonianContext):
    return max3_eps(k1_pi(pi, delta1, ctx), k2_pi(pi, delta1, ctx),
                    k3_eps_pi(pi, delta1, ctx), ctx.epsilon)[()]


# -- public y-based API --------------------------------------------------------

def k1(y, delta1, ctx: HamiltonianContext):
    return k1_pi(ctx.revenue_log(y), delta1, ctx)


def k2(y, delta1, ctx: HamiltonianContext):
    return k2_pi(ctx.revenue_log(y), delta1, ctx)


def k3_eps(y, delta1, ctx: HamiltonianContext):
    return k3_eps_pi(ctx.revenue_log(y), delta1, ctx)


def _linear_terms(inp: HamiltonianInput, ctx: HamiltonianContext):
    return ctx.base_drift(inp.y) * inp.delta1 + 0.5 * ctx.sigma ** 2 * np.asarray(inp.delta2, dtype=float)


def hamiltonian_exact(inp: HamiltonianInput, ctx: HamiltonianContext):
    pi = ctx.revenue_log(inp.y)
    return (core_exact(pi, inp.delta1, ctx) + _linear_terms(inp, ctx))[()]


def hamiltonian_eps(inp: HamiltonianInput, ctx: HamiltonianContext):
    pi = ctx.revenue_log(inp.y)
    return (core_eps(pi, inp.delta1, ctx) + _linear_terms(inp, ctx))[()]


def oracle_z_grid(ctx: HamiltonianContext, step: float = 1e-2) -> np.ndarray:
    # Once |z| > P + max(m_lower, m_upper) the effort is clamped, so only the
    # -gamma sigma^2 z^2 / 2 term still moves and the objective decreases;
    # half-width Gamma + m_upper + m_lower + P + 1 is comfortably past that.
    half = ctx.Gamma + ctx.m_upper + ctx.m_lower + ctx.P + 1.0
    return np.arange(-half, half + 0.5 * step, step)


def brute_force_core(pi, delta1, ctx: HamiltonianContext, z_grid: np.ndarray, chunk: int = 256):
    """Direct maximisation of the inner objective over ``z_grid``.

    The clamp kinks ``z = -m_lower - pi``, ``z = m_upper - pi`` and ``z = 0`` are
    appended per input, so between grid points the objective is a concave
    quadratic of curvature at most ``kappa`` and the grid maximum is within
    ``kappa * step^2 / 8`` of the supremum.
    """
    pi = np.atleast_1d(np.asarray(pi, dtype=float))
    delta1 = np.atleast_1d(np.asarray(delta1, dtype=float))
    pi, delta1 = np.broadcast_arrays(pi, delta1)
    out = np.empty(pi.shape)
    for lo in range(0, pi.size, chunk):
        p = pi.ravel()[lo:lo + chunk, None]
        d = delta1.ravel()[lo:lo + chunk, None]
        extra = np.hstack([-ctx.m_lower - p, ctx.m_upper - p, np.zeros_like(p)])
        z = np.hstack([np.broadcast_to(z_grid, (p.shape[0], z_grid.size)), extra])
        a = np.clip(p + z, -ctx.m_lower, ctx.m_upper)
        obj = p * a - 0.5 * a * a - ctx.penalty * z * z - a * d
        out.ravel()[lo:lo + chunk] = obj.max(axis=1)
    return out[()] if out.size > 1 else out[0]


def brute_force_hamiltonian(inp: HamiltonianInput, ctx: HamiltonianContext, z_grid: np.ndarray):
    pi = ctx.revenue_log(inp.y)
    return brute_force_core(pi, inp.delta1, ctx, z_grid) + _linear_terms(inp, ctx)


def brute_force_argmax(pi: float, delta1: float, ctx: HamiltonianContext, z_grid: np.ndarray) -> float:
    a = np.clip(pi + z_grid, -ctx.m_lower, ctx.m_upper)
    obj = pi * a - 0.5 * a * a - ctx.penalty * z_grid ** 2 - a * delta1
    return float(z_grid[np.argmax(obj)])
