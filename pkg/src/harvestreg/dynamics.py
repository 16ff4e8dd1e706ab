"""Abundance simulation: exact logistic paths, log-Euler under a controlled drift,
truncation comparisons, the e^n hitting time and Girsanov weights.

Path arrays share one time index: ``x[k]``, ``alpha[k]`` and ``z[k]`` live at
``t_k`` and ``dw[k]`` is the increment that led to ``t_k`` (``dw[0] = 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .smoothing import exp_level, mu_n


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    horizon: float = 1.0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass
class SimPath:
    """One path (1-d arrays) or a batch (``(n_paths, n_steps + 1)`` arrays)."""

    times: np.ndarray
    x: np.ndarray
    alpha: np.ndarray
    z: np.ndarray
    y: np.ndarray
    dw: np.ndarray
    seed: np.ndarray | int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return 1 if self.x.ndim == 1 else self.x.shape[0]

    def __len__(self) -> int:
        return self.times.size

    def path(self, i: int) -> "SimPath":
        if self.x.ndim == 1:
            return self
        seed = self.seed[i] if np.ndim(self.seed) else self.seed
        return SimPath(self.times, self.x[i], self.alpha[i], self.z[i], self.y[i], self.dw[i], int(seed), self.meta)

    def check(self, m_lower: float, m_upper: float) -> None:
        if not np.all(self.x > 0):
            raise SimulationError("non-positive abundance")
        if np.any(self.alpha < -m_lower - 1e-12) or np.any(self.alpha > m_upper + 1e-12):
            raise SimulationError("effort outside the admissible interval")

    def to_csv(self, path) -> None:
        p = self.path(0) if self.x.ndim > 1 else self
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,x,alpha,z,y,dw\n")
            for row in zip(p.times, p.x, p.alpha, p.z, p.y, p.dw):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    """Independent stream for path ``path_id`` under root ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(path_id),))))


def brownian_increments(seed: int, path_ids, grid: TimeGrid) -> np.ndarray:
    """``(len(path_ids), n_steps)`` increments; a path's draws depend only on ``(seed, id)``."""
    ids = np.atleast_1d(np.asarray(path_ids, dtype=np.int64))
    out = np.empty((ids.size, grid.n_steps))
    sd = math.sqrt(grid.dt)
    for i, k in enumerate(ids):
        out[i] = path_rng(seed, int(k)).standard_normal(grid.n_steps) * sd
    return out


def coarsen(dw: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive groups of ``factor`` increments (same Brownian path, coarser grid)."""
    n = dw.shape[-1]
    if n % factor:
        raise ValueError("factor must divide the number of steps")
    return dw.reshape(*dw.shape[:-1], n // factor, factor).sum(axis=-1)


def _pad(dw: np.ndarray) -> np.ndarray:
    return np.concatenate([np.zeros(dw.shape[:-1] + (1,)), dw], axis=-1)


def exact_logistic(params, grid: TimeGrid, noise: np.ndarray) -> SimPath:
    """Closed-form uncontrolled logistic path, time integral by the trapezoid rule."""
    if params.competition.variant != "logistic":
        raise ValueError("exact_logistic needs the logistic competition term mu(x) = x")
    dw = np.atleast_2d(noise)
    t = grid.times
    w = np.cumsum(_pad(dw), axis=-1)
    e = np.exp((params.lam - 0.5 * params.sigma ** 2) * t + params.sigma * w)
    integral = np.concatenate(
        [np.zeros((dw.shape[0], 1)), np.cumsum(0.5 * grid.dt * (e[:, 1:] + e[:, :-1]), axis=-1)], axis=-1)
    x = params.x0 * e / (1.0 + params.x0 * integral)
    zeros = np.zeros_like(x)
    nan = np.full_like(x, np.nan)
    out = SimPath(t, x, zeros, zeros.copy(), nan, _pad(dw))
    return out.path(0) if np.ndim(noise) == 1 else out


class _Effort:
    """Effort rule that sees the best response ``a*`` as well as ``(t, x)``."""

    relative = True

    def __call__(self, t, x, a_opt):
        raise NotImplementedError


@dataclass(frozen=True)
class ShiftedEffort(_Effort):
    delta: float

    def __call__(self, t, x, a_opt):
        return a_opt + self.delta


@dataclass(frozen=True)
class ConstantEffort(_Effort):
    value: float

    def __call__(self, t, x, a_opt):
        return np.full(np.shape(x), float(self.value))


def simulate_batch(params, grid: TimeGrid, policy, dw: np.ndarray, effort=None,
                   scheme: str = "log", seeds=None, mu=None) -> SimPath:
    """Simulate under the effort-tilted measure for a batch of increments.

    ``policy(t, x) -> (z, a*)`` supplies the tax sensitivity and best response
    (``None`` means no contract: ``z = 0`` and ``alpha = 0``). ``effort``
    overrides the applied effort; it is clamped to ``[-m_lower, m_upper]``.
    ``scheme="euler"`` runs plain Euler on ``x`` (kept for convergence studies;
    it can leave the positive half-line).
    """
    dw = np.atleast_2d(np.asarray(dw, dtype=float))
    n_paths, n = dw.shape
    if n != grid.n_steps:
        raise ValueError("increments do not match the time grid")
    if scheme not in ("log", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    mu = mu or params.mu
    dt, sig = grid.dt, params.sigma
    lo, hi = -params.m_lower, params.m_upper
    t = grid.times
    x = np.empty((n_paths, n + 1))
    alpha = np.empty_like(x)
    z = np.empty_like(x)
    x[:, 0] = params.x0
    step = policy.stepper(n_paths) if policy is not None else None
    base = params.lam - 0.5 * sig ** 2
    for k in range(n + 1):
        xk = x[:, k]
        if step is None:
            zk = np.zeros(n_paths)
            ak = np.zeros(n_paths)
        else:
            zk, ak = step(t[k], xk)
        if effort is not None:
            ak = effort(t[k], xk, ak) if getattr(effort, "relative", False) else effort(t[k], xk)
            ak = np.clip(np.broadcast_to(np.asarray(ak, dtype=float), xk.shape), lo, hi)
        z[:, k] = zk
        alpha[:, k] = ak
        if k == n:
            break
        if scheme == "log":
            x[:, k + 1] = xk * np.exp((base - mu(xk) - ak) * dt + sig * dw[:, k])
        else:
            x[:, k + 1] = xk * (1.0 + (params.lam - mu(xk) - ak) * dt + sig * dw[:, k])
        if not np.all(np.isfinite(x[:, k + 1])):
            raise SimulationError(f"non-finite abundance at step {k + 1}")
    seeds = np.arange(n_paths) if seeds is None else np.asarray(seeds)
    return SimPath(t, x, alpha, z, np.full_like(x, np.nan), _pad(dw), seeds, {"scheme": scheme})


def simulate_controlled(params, grid: TimeGrid, policy, seed: int, n_paths: int = 1,
                        effort=None, batch: int = 1000, first_id: int = 0) -> SimPath:
    """Simulate ``n_paths`` paths with per-path streams ``(seed, k)``."""
    parts = []
    for lo in range(first_id, first_id + n_paths, batch):
        ids = np.arange(lo, min(first_id + n_paths, lo + batch))
        parts.append(simulate_batch(params, grid, policy, brownian_increments(seed, ids, grid),
                                    effort=effort, seeds=ids))
    if len(parts) == 1:
        out = parts[0]
    else:
        out = SimPath(parts[0].times, *(np.concatenate([getattr(p, f) for p in parts])
                                       for f in ("x", "alpha", "z", "y", "dw", "seed")), parts[0].meta)
    out.check(params.m_lower, params.m_upper)
    return out.path(0) if n_paths == 1 else out


def girsanov_weight(path: SimPath, params):
    """``exp(-sum alpha_k dW_k / sigma - sum (alpha_k / sigma)^2 dt / 2)`` along base-measure paths."""
    a = path.alpha[..., :-1] / params.sigma
    dt = np.diff(path.times)
    return np.exp(-np.sum(a * path.dw[..., 1:], axis=-1) - 0.5 * np.sum(a * a * dt, axis=-1))[()]


def first_hit_tau_n(path: SimPath, n: float):
    """First grid time with ``x >= e^n``; ``None`` means never."""
    hit = np.asarray(path.x) >= exp_level(n)
    if hit.ndim == 1:
        idx = np.flatnonzero(hit)
        return float(path.times[idx[0]]) if idx.size else None
    first = np.where(hit.any(axis=-1), hit.argmax(axis=-1), -1)
    return np.where(first >= 0, path.times[np.maximum(first, 0)], np.inf)


@dataclass
class OrderingReport:
    n_list: tuple
    violations: dict
    max_gap: dict
    mean_sq_gap: dict
    n_paths: int

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))


def compare_truncations(params, grid: TimeGrid, n_list, seed: int, n_paths: int = 100,
                        tol: float = 1e-12) -> OrderingReport:
    """Check ``X <= X^{mu_n} <= X^{mu_0}`` under shared noise, uncontrolled, log-Euler.

    Violations are counted per step across ``X``, each ``X^{mu_n}`` in
    increasing ``n`` and ``X^{mu_0}``.
    """
    base = params.with_(competition=type(params.competition)("logistic"))
    dw = brownian_increments(seed, np.arange(n_paths), grid)
    levels = sorted(set(int(v) for v in n_list) | {0})
    runs = {"logistic": simulate_batch(base, grid, None, dw, mu=lambda x: x).x}
    for n in levels:
        runs[n] = simulate_batch(base, grid, None, dw, mu=lambda x, n=n: mu_n(x, n)).x
    chain = ["logistic"] + sorted(levels, reverse=True)
    violations, max_gap, msq = {}, {}, {}
    for lower, upper in zip(chain[:-1], chain[1:]):
        violations[(lower, upper)] = int(np.sum(runs[lower] > runs[upper] + tol))
    for n in levels:
        gap = runs[n] - runs["logistic"]
        max_gap[n] = float(np.max(np.abs(gap)))
        msq[n] = float(np.max(np.mean(gap * gap, axis=0)))
    return OrderingReport(tuple(levels), violations, max_gap, msq, n_paths)
