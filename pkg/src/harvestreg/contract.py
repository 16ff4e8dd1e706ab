"""Realized tax along simulated paths, the regulator's Monte Carlo value and the
stopped contract used with truncated competition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import EffortBounds, MCEstimate, a_star
from .dynamics import SimPath, TimeGrid, brownian_increments, simulate_batch
from .model import reservation_tilde
from .smoothing import exp_level


@dataclass
class ContractOutcome:
    xi: np.ndarray | float
    y_path: np.ndarray
    principal_payoff: np.ndarray | float
    agent_exponent: np.ndarray | float
    y_alt: np.ndarray
    gap: np.ndarray | float
    agrees: np.ndarray | bool

    def row(self, i: int):
        return (float(np.atleast_1d(self.xi)[i]), float(np.atleast_1d(self.principal_payoff)[i]),
                float(np.atleast_1d(self.agent_exponent)[i]))


def agreement_tolerance(grid_dt: float, scale: float = 25.0) -> float:
    return scale * grid_dt


def agent_exponent(paths: SimPath, params, xi):
    """``sum (p(X) X alpha - alpha^2 / 2) dt - xi`` with left-point sums."""
    dt = np.diff(paths.times)
    a = paths.alpha[..., :-1]
    pi = params.price.revenue(paths.x[..., :-1])
    return np.sum((pi * a - 0.5 * a * a) * dt, axis=-1) - xi


def reconstruct_batch(paths: SimPath, params, policy=None, tol: float | None = None) -> ContractOutcome:
    """Promised value and tax by two left-point discretizations.

    The primary form integrates against the abundance increments
    ``(X_{k+1} - X_k) / X_k``; the second uses the Brownian motion of the
    best-response measure, ``dW* = dW + (a* - alpha) dt / sigma``. Both start
    from the saturated value ``R~``. ``policy`` is only consulted when the
    paths carry no recorded ``z``.
    """
    bounds = EffortBounds.from_params(params)
    x = np.atleast_2d(paths.x)
    z = np.atleast_2d(paths.z)
    if policy is not None and not np.all(np.isfinite(z)):
        z = np.stack([policy.z(paths.times, xi) for xi in x])
    alpha = np.atleast_2d(paths.alpha)
    dw = np.atleast_2d(paths.dw)[:, 1:]
    dt = np.diff(paths.times)
    sig, gam = params.sigma, params.gamma
    xk, zk = x[:, :-1], z[:, :-1]
    pi = params.price.revenue(xk)
    a = a_star(pi, zk, bounds)
    g = 0.5 * a * a - pi * a - a * zk
    half_var = 0.5 * sig * sig * gam * zk * zk
    r0 = reservation_tilde(params)

    inc1 = -(g + half_var + zk * (params.lam - params.mu(xk))) * dt + zk * (x[:, 1:] - xk) / xk
    dw_star = dw + (a - alpha[:, :-1]) * dt / sig
    inc2 = -(0.5 * a * a - pi * a + half_var) * dt + sig * zk * dw_star
    zero = np.zeros((x.shape[0], 1))
    y1 = r0 + np.concatenate([zero, np.cumsum(inc1, axis=1)], axis=1)
    y2 = r0 + np.concatenate([zero, np.cumsum(inc2, axis=1)], axis=1)
    gap = np.max(np.abs(y1 - y2), axis=1)
    tol = agreement_tolerance(float(dt.max()) if dt.size else 0.0) if tol is None else tol
    xi = y1[:, -1]
    paths_2d = paths if paths.x.ndim > 1 else SimPath(paths.times, x, alpha, z, y1, np.atleast_2d(paths.dw))
    out = ContractOutcome(
        xi=xi, y_path=y1,
        principal_payoff=xi - params.cost(x[:, -1]),
        agent_exponent=agent_exponent(paths_2d, params, xi),
        y_alt=y2, gap=gap, agrees=gap <= tol,
    )
    if paths.x.ndim == 1:
        out = ContractOutcome(float(out.xi[0]), out.y_path[0], float(out.principal_payoff[0]),
                              float(out.agent_exponent[0]), out.y_alt[0], float(gap[0]), bool(out.agrees[0]))
    return out


def reconstruct_tax(path: SimPath, params, policy=None, tol: float | None = None) -> ContractOutcome:
    out = reconstruct_batch(path, params, policy, tol)
    path.y = out.y_path
    return out


def _outcomes(params, grid: TimeGrid, policy, n_paths: int, seed: int, batch: int, effort=None):
    for lo in range(0, n_paths, batch):
        ids = np.arange(lo, min(n_paths, lo + batch))
        paths = simulate_batch(params, grid, policy, brownian_increments(seed, ids, grid),
                               effort=effort, seeds=ids)
        paths.check(params.m_lower, params.m_upper)
        yield ids, paths, reconstruct_batch(paths, params, policy)


def principal_value_mc(params, grid: TimeGrid, policy, n_paths: int, seed: int,
                       batch: int = 1000, return_samples: bool = False):
    """Mean of ``xi - f(X_T)`` over tilted-measure paths."""
    vals = np.concatenate([out.principal_payoff for _, _, out in
                           _outcomes(params, grid, policy, n_paths, seed, batch)])
    est = MCEstimate.from_samples(vals)
    return (est, vals) if return_samples else est


def outcome_table(params, grid: TimeGrid, policy, n_paths: int, seed: int, batch: int = 1000):
    """Columns ``seed, xi, x_T, principal_payoff, agent_exponent``."""
    rows = []
    for ids, paths, out in _outcomes(params, grid, policy, n_paths, seed, batch):
        rows.append(np.column_stack([ids, out.xi, paths.x[:, -1], out.principal_payoff, out.agent_exponent]))
    return np.concatenate(rows)


def write_outcomes_csv(path, table: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed,xi,x_T,principal_payoff,agent_exponent\n")
        for r in table:
            fh.write(f"{int(r[0])}," + ",".join(repr(float(v)) for v in r[1:]) + "\n")


class _StoppedStep:
    def __init__(self, base_step, level: float, revenue, bounds: EffortBounds, n_paths: int):
        self.base_step = base_step
        self.level = level
        self.revenue = revenue
        self.bounds = bounds
        self.stopped = np.zeros(n_paths, dtype=bool)

    def __call__(self, t, x):
        self.stopped |= np.asarray(x) >= self.level
        z, a = self.base_step(t, x)
        if not self.stopped.any():
            return z, a
        z = np.where(self.stopped, 0.0, z)
        return z, a_star(self.revenue(x), z, self.bounds)


class StoppedPolicy:
    """Base policy until the running maximum of the path reaches ``e^n``, ``z = 0`` afterwards."""

    def __init__(self, policy, n: float):
        self.policy = policy
        self.n = n
        self.params = policy.params
        self.level = exp_level(n)

    def stepper(self, n_paths: int):
        return _StoppedStep(self.policy.stepper(n_paths), self.level, self.params.price.revenue,
                            EffortBounds.from_params(self.params), n_paths)

    def z(self, t, x):
        raise TypeError("a stopped policy is path dependent; use stepper()")


def stopped_policy(policy, n: float) -> StoppedPolicy:
    return StoppedPolicy(policy, n)
