"""Self-checks run by ``harvestreg verify``: each suite compares a component
against an independent brute-force or closed-form oracle."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .agent import EffortBounds, a_star, a_star_grid_oracle
from .dynamics import TimeGrid, brownian_increments, coarsen, compare_truncations, exact_logistic, \
    first_hit_tau_n, simulate_batch
from .hamiltonian import (HamiltonianContext, HamiltonianInput, brute_force_hamiltonian,
                          hamiltonian_eps, hamiltonian_exact, oracle_z_grid)
from .hjb import PdeGrid, solve


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _timed(name, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return SuiteResult(name, bool(ok), detail, round(time.perf_counter() - t0, 3))


def clamp_oracle(params, n: int = 10_000, seed: int = 0):
    rng = np.random.default_rng(seed)
    pi = rng.uniform(0.0, 1.0, n)
    z = rng.uniform(-30.0, 30.0, n)
    b = EffortBounds.from_params(params)
    gap = float(np.max(np.abs(a_star(pi, z, b) - a_star_grid_oracle(pi, z, b))))
    return gap <= 1e-4, f"max gap {gap:.2e}"


def sample_inputs(ctx: HamiltonianContext, grid: PdeGrid, n: int, seed: int) -> HamiltonianInput:
    """Random ``(y, delta1, delta2)`` over the solver domain and ``|delta1| <= 2 Gamma``."""
    rng = np.random.default_rng(seed)
    g = ctx.Gamma
    return HamiltonianInput(rng.uniform(grid.y_min, grid.y_max, n), rng.uniform(-2.0 * g, 2.0 * g, n),
                            rng.uniform(-50.0, 50.0, n))


def hamiltonian_oracle(params, grid: PdeGrid, n: int = 10_000, seed: int = 1, step: float = 1e-2):
    ctx = HamiltonianContext.from_params(params)
    inp = sample_inputs(ctx, grid, n, seed)
    gap = brute_force_hamiltonian(inp, ctx, oracle_z_grid(ctx, step)) - hamiltonian_exact(inp, ctx)
    bound = ctx.kappa * step ** 2 / 8.0 + 1e-12
    worst = float(np.max(np.abs(gap)))
    return worst <= bound and float(gap.max()) <= 1e-12, f"max |gap| {worst:.3e} (bound {bound:.3e})"


def epsilon_bound(params, grid: PdeGrid, n: int = 100_000, seed: int = 2):
    ctx = HamiltonianContext.from_params(params)
    inp = sample_inputs(ctx, grid, n, seed)
    worst = float(np.max(np.abs(hamiltonian_eps(inp, ctx) - hamiltonian_exact(inp, ctx))))
    return worst <= ctx.epsilon, f"sup |H - H_eps| {worst:.3e} (eps {ctx.epsilon})"


def euler_slope(params, n_paths: int = 256, seed: int = 3, levels=(250, 500, 1000, 2000),
                ref_steps: int = 16_000, scheme: str = "euler"):
    """Log-log slope of mean terminal error against the closed-form logistic path."""
    from .model import MuSpec
    q = params.with_(competition=MuSpec("logistic"))
    ref = TimeGrid(ref_steps, q.horizon)
    dw = brownian_increments(seed, np.arange(n_paths), ref)
    exact = exact_logistic(q, ref, dw).x[:, -1]
    errs = []
    for n in levels:
        g = TimeGrid(n, q.horizon)
        x = simulate_batch(q, g, None, coarsen(dw, ref_steps // n), scheme=scheme).x[:, -1]
        errs.append(float(np.mean(np.abs(x - exact))))
    slope = float(np.polyfit(np.log([q.horizon / n for n in levels]), np.log(errs), 1)[0])
    return slope, errs


def euler_suite(params):
    slope, errs = euler_slope(params)
    return 0.4 <= slope <= 0.9, f"slope {slope:.3f}, errors {[f'{e:.2e}' for e in errs]}"


def ordering_suite(params, seed: int = 4):
    rep = compare_truncations(params, TimeGrid(5000, params.horizon), [2], seed, n_paths=100)
    return rep.total_violations == 0, f"violations {rep.total_violations}, max gap {rep.max_gap}"


def tau_suite(params, n_paths: int = 2000, seed: int = 5, n: float = 2.0):
    tg = TimeGrid(5000, params.horizon)
    hits = 0
    for lo in range(0, n_paths, 1000):
        ids = np.arange(lo, min(n_paths, lo + 1000))
        paths = simulate_batch(params, tg, None, brownian_increments(seed, ids, tg))
        hits += int(np.isfinite(first_hit_tau_n(paths, n)).sum())
    return hits == 0, f"{hits} hits of e^{n:g} over {n_paths} paths"


def backend_suite(params, grid: PdeGrid):
    from ._backend import BACKENDS
    if "cython" not in BACKENDS:
        return True, "compiled backend unavailable; python only"
    small = PdeGrid(grid.y_min, grid.y_max, 400, 1000, grid.horizon)
    a = solve(params, small, backend="cython").w
    b = solve(params, small, backend="python").w
    gap = float(np.max(np.abs(a - b)))
    return gap <= 1e-12, f"max backend gap {gap:.2e}"


def zero_solution_suite(params, grid: PdeGrid):
    """Zero terminal data with a vanishing effort set keeps ``w = 0``."""
    from .model import CostSpec
    q = params.with_(cost=CostSpec(0.0, params.cost.beta), m_lower=0.0, m_upper=1e-9)
    small = PdeGrid(grid.y_min, grid.y_max, 200, 400, grid.horizon)
    s = solve(q, small, mode="exact")
    # sup over z of the inner objective is p a - a^2/2 at a ~ 0, i.e. ~1e-9 per unit time
    worst = float(np.max(np.abs(s.w)))
    return worst <= 1e-8, f"sup |w| {worst:.2e}"


def run_suites(params, grid: PdeGrid, seed: int = 0) -> list:
    return [
        _timed("clamp_oracle", lambda: clamp_oracle(params, seed=seed)),
        _timed("hamiltonian_oracle", lambda: hamiltonian_oracle(params, grid, seed=seed + 1)),
        _timed("epsilon_bound", lambda: epsilon_bound(params, grid, seed=seed + 2)),
        _timed("euler_vs_exact", lambda: euler_suite(params)),
        _timed("truncation_ordering", lambda: ordering_suite(params, seed=seed + 4)),
        _timed("tau_n_tail", lambda: tau_suite(params, seed=seed + 5)),
        _timed("backend_agreement", lambda: backend_suite(params, grid)),
        _timed("zero_solution", lambda: zero_solution_suite(params, grid)),
    ]
