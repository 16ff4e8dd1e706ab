"""Figure tables, parameter sweeps and the command runner behind the CLI.

Every artifact is data: CSV tables, a gnuplot companion script and a JSON
summary carrying the configuration fingerprint.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .contract import outcome_table, reconstruct_batch, write_outcomes_csv
from .dynamics import TimeGrid, brownian_increments, simulate_batch
from .hjb import PdeGrid, ValueSurface, solve, z_feedback
from .model import reservation_tilde

logger = logging.getLogger(__name__)

REPORT_POINTS = 101
MONO_TOL = 1e-8


@dataclass
class Table:
    columns: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class SweepReport:
    variable: str
    values: tuple
    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    terminal: list
    n_paths: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(t["n"] != self.n_paths for t in self.terminal):
            raise ValueError("unequal path counts across sweep values")

    def terminal_mean(self, i: int) -> float:
        return self.terminal[i]["mean"]

    def terminal_se(self, i: int) -> float:
        return self.terminal[i]["se"]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{self.variable},t,mean_x,se_x\n")
            for i, v in enumerate(self.values):
                for t, m, s in zip(self.times, self.mean[i], self.se[i]):
                    fh.write(f"{float(v)!r},{float(t)!r},{float(m)!r},{float(s)!r}\n")

    def summary(self) -> dict:
        return {"variable": self.variable, "values": [float(v) for v in self.values],
                "n_paths": self.n_paths, "terminal": self.terminal, "meta": self.meta}


# -- building blocks ------------------------------------------------------------

def mc_grid(params, grid: PdeGrid, n_steps: int | None = None) -> TimeGrid:
    return TimeGrid(n_steps or grid.n_time, params.horizon)


def solve_surface(params, grid: PdeGrid, mode: str = "eps") -> ValueSurface:
    return solve(params, grid, mode=mode)


def monotonicity_flags(surface: ValueSurface, tol: float = MONO_TOL) -> dict:
    """Worst neighbouring-pair violations of ``w`` nondecreasing in ``y`` and nonincreasing in ``t``."""
    w = surface.w
    dy = np.diff(w, axis=1)
    dt = w[:-1] - w[1:]
    bad_t = dt < -tol
    flags = {
        "y_nondecreasing": bool(dy.min() >= -tol),
        "t_nonincreasing": bool(not bad_t.any()),
        "worst_y_pair": float(dy.min()),
        "worst_t_pair": float(dt.min()),
        "t_violations": int(bad_t.sum()),
    }
    if bad_t.any():
        k, j = np.nonzero(bad_t)
        flags["t_violation_t_min"] = float(surface.grid.t[k.min()])
        flags["t_violation_x_range"] = [float(np.exp(surface.grid.y[j.min()])),
                                        float(np.exp(surface.grid.y[j.max() + 1]))]
    return flags


def fig_harvest_heatmap(params, grid: PdeGrid, surface: ValueSurface | None = None,
                        n_t: int = REPORT_POINTS, x_range=(0.1, 2.0), n_x: int = 191) -> Table:
    """Best-response effort ``alpha*`` on a ``(t, x)`` mesh."""
    surface = surface or solve_surface(params, grid)
    pol = z_feedback(surface)
    t = np.linspace(0.0, params.horizon, n_t)
    x = np.linspace(*x_range, n_x)
    rows = []
    for tt in t:
        _, a = pol(tt, x)
        rows.append(np.column_stack([np.full_like(x, tt), x, a]))
    return Table(("t", "x", "alpha"), np.concatenate(rows), {"fingerprint": surface.fingerprint})


def fig_value_surface(params, grid: PdeGrid, surface: ValueSurface | None = None,
                      stride_t: int | None = None, stride_y: int | None = None) -> Table:
    """The solved surface at subsampled nodes, in abundance coordinates."""
    surface = surface or solve_surface(params, grid)
    g = surface.grid
    st = stride_t or max(1, g.n_time // (REPORT_POINTS - 1))
    sy = stride_y or max(1, g.n_space // 200)
    ks = np.arange(0, g.n_time + 1, st)
    if ks[-1] != g.n_time:
        ks = np.append(ks, g.n_time)
    js = np.arange(0, g.n_space, sy)
    tt, jj = np.meshgrid(g.t[ks], js, indexing="ij")
    data = np.column_stack([tt.ravel(), np.exp(g.y[jj.ravel()]), surface.w[np.ix_(ks, js)].ravel()])
    return Table(("t", "x", "w"), data, {"fingerprint": surface.fingerprint, **monotonicity_flags(surface)})


def fig_sample_path(params, grid: PdeGrid, seed: int, surface: ValueSurface | None = None,
                    n_steps: int | None = None, path_id: int = 0) -> Table:
    """One optimally controlled trajectory with its effort and promised value."""
    surface = surface or solve_surface(params, grid)
    pol = z_feedback(surface)
    tg = mc_grid(params, grid, n_steps)
    paths = simulate_batch(params, tg, pol, brownian_increments(seed, [path_id], tg), seeds=[path_id])
    out = reconstruct_batch(paths, params, pol)
    data = np.column_stack([tg.times, paths.x[0], paths.alpha[0], out.y_path[0]])
    return Table(("t", "x", "alpha", "y"), data, {"fingerprint": surface.fingerprint, "seed": seed})


def _sweep_member(params, grid: PdeGrid, tg: TimeGrid, n_paths: int, seed: int, batch: int = 500) -> dict:
    surface = solve_surface(params, grid)
    pol = z_feedback(surface)
    every = max(1, tg.n_steps // (REPORT_POINTS - 1))
    idx = np.arange(0, tg.n_steps + 1, every)
    s1 = np.zeros(idx.size)
    s2 = np.zeros(idx.size)
    terminal, alpha_min = [], np.inf
    for lo in range(0, n_paths, batch):
        ids = np.arange(lo, min(n_paths, lo + batch))
        paths = simulate_batch(params, tg, pol, brownian_increments(seed, ids, tg), seeds=ids)
        xs = paths.x[:, idx]
        s1 += xs.sum(axis=0)
        s2 += (xs * xs).sum(axis=0)
        terminal.append(paths.x[:, -1])
        alpha_min = min(alpha_min, float(paths.alpha.min()))
    mean = s1 / n_paths
    var = np.maximum(s2 / n_paths - mean ** 2, 0.0) * n_paths / max(n_paths - 1, 1)
    xt = np.concatenate(terminal)
    std = float(xt.std(ddof=1)) if n_paths > 1 else 0.0
    stats = {"n": int(n_paths), "mean": float(xt.mean()), "se": std / np.sqrt(n_paths), "std": std,
             "q10": float(np.quantile(xt, 0.1)), "q50": float(np.quantile(xt, 0.5)),
             "q90": float(np.quantile(xt, 0.9)), "alpha_min": alpha_min,
             "w0": surface.value_at(0.0, params.x0)}
    return {"times": tg.times[idx], "mean": mean, "se": np.sqrt(var / n_paths), "terminal": stats}


def _run_sweep(variable: str, values, members, grid: PdeGrid, n_paths: int, seed: int,
               jobs: int = 1, n_steps: int | None = None, meta: dict | None = None) -> SweepReport:
    tgs = [mc_grid(p, grid, n_steps) for p in members]
    args = [(p, grid, tg, n_paths, seed) for p, tg in zip(members, tgs)]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
            results = list(pool.map(_sweep_member, *zip(*args)))
    else:
        results = [_sweep_member(*a) for a in args]
    return SweepReport(
        variable=variable, values=tuple(values), times=results[0]["times"],
        mean=np.vstack([r["mean"] for r in results]), se=np.vstack([r["se"] for r in results]),
        terminal=[r["terminal"] for r in results], n_paths=n_paths,
        meta={"seed": seed, "grid": [grid.n_space, grid.n_time], "n_steps": tgs[0].n_steps, **(meta or {})},
    )


def sweep_beta(params, grid: PdeGrid, beta_list, n_paths: int, seed: int, jobs: int = 1,
               n_steps: int | None = None, meta: dict | None = None) -> SweepReport:
    members = [params.with_(cost=params.cost.__class__(params.cost.c, float(b))) for b in beta_list]
    return _run_sweep("beta", beta_list, members, grid, n_paths, seed, jobs, n_steps, meta)


def sweep_cost(params, grid: PdeGrid, c_list, n_paths: int, seed: int, jobs: int = 1,
               n_steps: int | None = None, meta: dict | None = None) -> SweepReport:
    members = [params.with_(cost=params.cost.__class__(float(c), params.cost.beta)) for c in c_list]
    return _run_sweep("c", c_list, members, grid, n_paths, seed, jobs, n_steps, meta)


def compare_renewal(params, grid: PdeGrid, n_paths: int, seed: int, jobs: int = 1,
                    n_steps: int | None = None, meta: dict | None = None,
                    m_lower_values=(10.0, 0.0)) -> SweepReport:
    """Same seed for both runs, so path ``k`` sees the same Brownian draws."""
    members = [params.with_(m_lower=float(m)) for m in m_lower_values]
    # the domain depends on m_lower; share the widest one
    return _run_sweep("m_lower", m_lower_values, members, grid, n_paths, seed, jobs, n_steps, meta)


# -- gnuplot companions ------------------------------------------------------------

def gnuplot_script(figure: int, csv_name: str) -> str:
    head = f"# companion script for {csv_name}\nset datafile separator ','\n"
    if figure == 1:
        body = ("set view map\nset xlabel 't'\nset ylabel 'x'\nset title 'optimal effort'\n"
                f"splot '{csv_name}' every ::1 using 1:2:3 with points pointtype 5 pointsize 0.4 palette notitle\n")
    elif figure == 2:
        body = ("set xlabel 't'\nset ylabel 'x'\nset zlabel 'w'\n"
                f"splot '{csv_name}' every ::1 using 1:2:3 with points pointtype 7 pointsize 0.2 palette notitle\n")
    elif figure == 3:
        body = ("set xlabel 't'\nset multiplot layout 2,1\n"
                f"plot '{csv_name}' every ::1 using 1:2 with lines title 'x'\n"
                f"plot '{csv_name}' every ::1 using 1:3 with lines title 'alpha'\nunset multiplot\n")
    elif figure == 4:
        body = ("set xlabel 't'\nset ytics nomirror\nset y2tics\n"
                f"plot '{csv_name}' every ::1 using 1:2 with lines title 'x', "
                f"'' every ::1 using 1:4 axes x1y2 with lines title 'y'\n")
    else:
        body = ("set xlabel 't'\nset ylabel 'mean abundance'\n"
                f"plot '{csv_name}' every ::1 using 2:3:1 with lines lc variable title 'mean x'\n")
    return head + body


# -- command runner -----------------------------------------------------------------

def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


@dataclass
class RunContext:
    cfg: RunConfig
    out_dir: Path
    seed: int
    n_paths: int
    grid_scale: float
    mode: str
    jobs: int

    @property
    def params(self):
        return self.cfg.params()

    def pde_grid(self, params=None) -> PdeGrid:
        g = self.cfg.grid
        s = self.grid_scale
        return PdeGrid.from_params(params or self.params, max(3, int(round(g.n_space * s))),
                                   max(1, int(round(g.n_time * s))), g.y_pad)

    @property
    def n_steps(self) -> int | None:
        n = self.cfg.mc.n_steps
        return None if n is None else max(1, int(round(n * self.grid_scale)))

    def base_meta(self) -> dict:
        return {"fingerprint": self.cfg.fingerprint(), "config": self.cfg.as_dict(), "seed": self.seed,
                "n_paths": self.n_paths, "grid_scale": self.grid_scale, "mode": self.mode}


DEFAULT_SWEEPS = {"beta": (0.7, 0.9, 1.1), "cost": (1.0, 3.0, 5.0), "renewal": (10.0, 0.0)}


def run(config_path, command: str, args: list | None = None, out_dir=".", seed: int | None = None,
        n_paths: int | None = None, grid_scale: float = 1.0, mode: str = "eps", jobs: int = 1,
        values=None) -> int:
    """Execute one CLI command; returns the exit status."""
    cfg = load_config(config_path)
    ctx = RunContext(cfg, Path(out_dir), cfg.mc.seed if seed is None else seed,
                     cfg.mc.n_paths if n_paths is None else n_paths, grid_scale, mode, max(1, jobs))
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    args = list(args or [])
    if command == "solve":
        return _cmd_solve(ctx)
    if command == "simulate":
        return _cmd_simulate(ctx)
    if command == "figure":
        if len(args) != 1 or args[0] not in {str(i) for i in range(1, 8)}:
            raise ValueError("figure expects one number in 1..7")
        return _cmd_figure(ctx, int(args[0]))
    if command == "sweep":
        if len(args) != 1 or args[0] not in DEFAULT_SWEEPS:
            raise ValueError("sweep expects one of: beta, cost, renewal")
        return _cmd_sweep(ctx, args[0], values)
    if command == "verify":
        from .verify import run_suites
        results = run_suites(ctx.params, ctx.pde_grid(), seed=ctx.seed)
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
        _write_json(ctx.out_dir / "verify.json",
                    {**ctx.base_meta(), "suites": [r.as_dict() for r in results]})
        return 0 if all(r.passed for r in results) else 1
    raise ValueError(f"unknown command {command!r}")


def _cmd_solve(ctx: RunContext) -> int:
    params = ctx.params
    surf = solve(params, ctx.pde_grid(), mode=ctx.mode)
    table = fig_value_surface(params, surf.grid, surf)
    surf.to_csv(ctx.out_dir / "surface.csv", every_t=max(1, surf.grid.n_time // 100),
                every_y=max(1, surf.grid.n_space // 200))
    surf.to_binary(ctx.out_dir / "surface.bin")
    _write_json(ctx.out_dir / "solve.json", {
        **ctx.base_meta(), "w0": surf.value_at(0.0, params.x0),
        "principal_value": reservation_tilde(params) + surf.value_at(0.0, params.x0),
        "shape": list(surf.w.shape), "y_range": [surf.grid.y_min, surf.grid.y_max],
        "monotonicity": {k: v for k, v in table.meta.items() if k != "fingerprint"},
    })
    return 0


def _cmd_simulate(ctx: RunContext) -> int:
    params = ctx.params
    grid = ctx.pde_grid()
    surf = solve(params, grid, mode=ctx.mode)
    pol = z_feedback(surf)
    tg = mc_grid(params, grid, ctx.n_steps)
    table = outcome_table(params, tg, pol, ctx.n_paths, ctx.seed)
    write_outcomes_csv(ctx.out_dir / "outcomes.csv", table)
    first = simulate_batch(params, tg, pol, brownian_increments(ctx.seed, [0], tg), seeds=[0])
    first.y = reconstruct_batch(first, params, pol).y_path
    first.to_csv(ctx.out_dir / "path_0.csv")
    pay = table[:, 3]
    _write_json(ctx.out_dir / "simulate.json", {
        **ctx.base_meta(), "n_steps": tg.n_steps,
        "principal_value_mc": float(pay.mean()), "principal_value_se": float(pay.std(ddof=1) / np.sqrt(pay.size))
        if pay.size > 1 else 0.0,
        "principal_value_pde": reservation_tilde(params) + surf.value_at(0.0, params.x0),
        "mean_x_T": float(table[:, 2].mean()),
    })
    return 0


def _cmd_figure(ctx: RunContext, number: int) -> int:
    if number >= 5:
        return _cmd_sweep(ctx, {5: "beta", 6: "cost", 7: "renewal"}[number], None, stem=f"fig{number}")
    params = ctx.params
    surf = solve(params, ctx.pde_grid(), mode=ctx.mode)
    if number == 1:
        table = fig_harvest_heatmap(params, surf.grid, surf)
    elif number == 2:
        table = fig_value_surface(params, surf.grid, surf)
    else:
        table = fig_sample_path(params, surf.grid, ctx.seed, surf, ctx.n_steps)
        if number == 4:
            table.meta["corr_dy_dx_last_tenth"] = _window_corr(table)
    stem = f"fig{number}"
    table.to_csv(ctx.out_dir / f"{stem}.csv")
    (ctx.out_dir / f"{stem}.gp").write_text(gnuplot_script(number, f"{stem}.csv"), encoding="utf-8")
    _write_json(ctx.out_dir / f"{stem}.json", {**ctx.base_meta(), "figure": number,
                                               "columns": list(table.columns), **table.meta})
    return 0


def _window_corr(table: Table, frac: float = 0.1) -> float:
    n = table.data.shape[0]
    lo = int(n * (1.0 - frac))
    dx = np.diff(table["x"][lo:])
    dy = np.diff(table["y"][lo:])
    return float(np.corrcoef(dx, dy)[0, 1])


def _cmd_sweep(ctx: RunContext, kind: str, values, stem: str | None = None) -> int:
    params = ctx.params
    values = tuple(float(v) for v in (values or DEFAULT_SWEEPS[kind]))
    meta = ctx.base_meta()
    if kind == "beta":
        rep = sweep_beta(params, ctx.pde_grid(), values, ctx.n_paths, ctx.seed, ctx.jobs, ctx.n_steps, meta)
    elif kind == "cost":
        rep = sweep_cost(params, ctx.pde_grid(), values, ctx.n_paths, ctx.seed, ctx.jobs, ctx.n_steps, meta)
    else:
        widest = params.with_(m_lower=max(values))
        rep = compare_renewal(params, ctx.pde_grid(widest), ctx.n_paths, ctx.seed, ctx.jobs, ctx.n_steps,
                              meta, values)
    stem = stem or f"sweep_{kind}"
    rep.to_csv(ctx.out_dir / f"{stem}.csv")
    (ctx.out_dir / f"{stem}.gp").write_text(gnuplot_script(5, f"{stem}.csv"), encoding="utf-8")
    _write_json(ctx.out_dir / f"{stem}.json", rep.summary())
    return 0


def default_jobs() -> int:
    return max(1, (os.cpu_count() or 1))
