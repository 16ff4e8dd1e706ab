"""The resource manager's best response to a tax and the Monte Carlo utility check."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EffortBounds:
    m_lower: float
    m_upper: float

    def __post_init__(self):
        if self.m_lower < 0 or self.m_upper < 0:
            raise ValueError("effort bounds must be nonnegative")
        if self.m_lower == 0 and self.m_upper == 0:
            raise ValueError("degenerate effort set: m_lower = m_upper = 0")

    @classmethod
    def from_params(cls, params) -> "EffortBounds":
        return cls(params.m_lower, params.m_upper)

    def clamp(self, a):
        return np.clip(a, -self.m_lower, self.m_upper)


def a_star(pi, z, bounds: EffortBounds):
    """Optimal effort ``clamp(pi + z, -m_lower, m_upper)`` given revenue ``pi = p(x) x``."""
    return np.clip(np.asarray(pi, dtype=float) + z, -bounds.m_lower, bounds.m_upper)[()]


def g_running(pi, z, bounds: EffortBounds):
    """Running term ``a^2/2 - pi a - a z`` at ``a = a_star(pi, z)``."""
    a = a_star(pi, z, bounds)
    return (0.5 * a * a - pi * a - a * z)[()]


def agent_value_from_y0(y0, gamma: float):
    return -np.exp(gamma * np.asarray(y0, dtype=float))[()]


def a_star_grid_oracle(pi, z, bounds: EffortBounds, step: float = 1e-4):
    """Argmax of ``a -> pi a - a^2/2 + a z`` over an effort grid (test oracle).

    The objective is concave, so its forward differences on the grid are
    decreasing; bisection on their sign finds the exact grid argmax.
    """
    grid = np.arange(-bounds.m_lower, bounds.m_upper + 0.5 * step, step)
    pi, z = np.broadcast_arrays(np.asarray(pi, dtype=float), np.asarray(z, dtype=float))
    b = pi + z

    def rises(i):
        # f(grid[i + 1]) - f(grid[i]) > 0, with i + 1 clipped inside the grid
        a0, a1 = grid[i], grid[np.minimum(i + 1, grid.size - 1)]
        return (b * a1 - 0.5 * a1 * a1) - (b * a0 - 0.5 * a0 * a0) > 0.0

    lo = np.zeros(b.shape, dtype=np.int64)
    hi = np.full(b.shape, grid.size - 1, dtype=np.int64)
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        up = rises(mid)
        lo = np.where(up, mid + 1, lo)
        hi = np.where(up, hi, mid)
    return grid[lo]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    n: int

    def __iter__(self):
        yield self.mean
        yield self.se

    def within(self, target: float, k: float = 3.0, extra: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.se + extra

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "MCEstimate":
        x = np.asarray(x, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(float(x.mean()), se, int(x.size))


def agent_utility_mc(params, grid, tax_policy, effort_policy=None, n_paths: int = 1000,
                     seed: int = 0, batch: int = 500, return_samples: bool = False):
    """Agent expected utility under a given effort, with the tax rebuilt from each path.

    ``effort_policy`` maps ``(t, x)`` to an effort (clamped to the admissible
    interval); ``None`` means the best response ``a*`` to ``tax_policy``.
    """
    from .contract import agent_exponent, reconstruct_batch
    from .dynamics import brownian_increments, simulate_batch

    samples = []
    for lo in range(0, n_paths, batch):
        ids = np.arange(lo, min(n_paths, lo + batch))
        dw = brownian_increments(seed, ids, grid)
        paths = simulate_batch(params, grid, tax_policy, dw, effort=effort_policy)
        out = reconstruct_batch(paths, params, tax_policy)
        samples.append(-np.exp(-params.gamma * agent_exponent(paths, params, out.xi)))
    u = np.concatenate(samples)
    est = MCEstimate.from_samples(u)
    return (est, u) if return_samples else est
