"""Backward finite-difference solver for the regulator's (smoothed) HJB equation.

The equation lives in log-abundance ``y = log x`` on a truncated interval.
Time stepping is explicit Euler with an upwinded drift term; an IMEX variant
treats diffusion implicitly.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

from ._backend import get_backend
from .agent import EffortBounds, a_star
from .hamiltonian import HamiltonianContext
from .smoothing import mollify_cost

logger = logging.getLogger(__name__)


class CFLError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class PdeGrid:
    y_min: float
    y_max: float
    n_space: int
    n_time: int
    horizon: float

    def __post_init__(self):
        if self.n_space < 3:
            raise ValueError("n_space must be >= 3")
        if self.n_time < 1:
            raise ValueError("n_time must be >= 1")
        if not self.y_min < self.y_max:
            raise ValueError("need y_min < y_max")

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.n_space - 1)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_time

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.n_space)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_time + 1)

    @classmethod
    def from_params(cls, params, n_space: int = 2000, n_time: int = 5000, y_pad: float = 1.0) -> "PdeGrid":
        # 6-sigma diffusion slack plus the largest drift excursion over the horizon
        T = params.horizon
        spread = 6.0 * params.sigma * math.sqrt(T) + abs(params.lam) * T
        y0 = math.log(params.x0)
        return cls(y0 - spread - params.m_lower * T - y_pad, y0 + spread + y_pad, n_space, n_time, T)

    def scaled(self, factor: float) -> "PdeGrid":
        return PdeGrid(self.y_min, self.y_max, max(3, int(round(self.n_space * factor))),
                       max(1, int(round(self.n_time * factor))), self.horizon)


def cfl_number(params, grid: PdeGrid, diffusion: bool = True) -> float:
    """``sigma^2 dt / dy^2 + dt sup|drift| / dy`` for the explicit scheme."""
    ctx = HamiltonianContext.from_params(params) if not isinstance(params, HamiltonianContext) else params
    drift = np.max(np.abs(ctx.base_drift(grid.y))) + max(ctx.m_lower, ctx.m_upper)
    c = grid.dt * drift / grid.dy
    if diffusion:
        c += ctx.sigma ** 2 * grid.dt / grid.dy ** 2
    return float(c)


def params_fingerprint(params) -> str:
    blob = json.dumps(asdict(params), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ValueSurface:
    """Solved ``w(t_k, y_j)``, row ``k`` at time ``k dt``."""

    def __init__(self, w: np.ndarray, grid: PdeGrid, params, mode: str, fingerprint: str):
        self.w = w
        self.grid = grid
        self.params = params
        self.mode = mode
        self.fingerprint = fingerprint

    @cached_property
    def d1(self) -> np.ndarray:
        """Central first differences in ``y`` (one-sided at the ends)."""
        return np.gradient(self.w, self.grid.dy, axis=1, edge_order=1)

    @cached_property
    def d2(self) -> np.ndarray:
        d2 = np.zeros_like(self.w)
        d2[:, 1:-1] = (self.w[:, 2:] - 2.0 * self.w[:, 1:-1] + self.w[:, :-2]) / self.grid.dy ** 2
        return d2

    def value_at(self, t: float, x: float) -> float:
        """Bilinear interpolation of ``w`` at ``(t, log x)``."""
        return float(_bilinear(self.w, self.grid, np.atleast_1d(t), np.log(np.atleast_1d(x)))[0])

    def to_csv(self, path, every_t: int = 1, every_y: int = 1) -> None:
        g = self.grid
        t, y = g.t[::every_t], g.y[::every_y]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,y,w,d1,d2\n")
            for k in range(0, g.n_time + 1, every_t):
                w, d1, d2 = self.w[k, ::every_y], self.d1[k, ::every_y], self.d2[k, ::every_y]
                for j in range(y.size):
                    fh.write(",".join(repr(float(v)) for v in (t[k // every_t], y[j], w[j], d1[j], d2[j])) + "\n")

    def to_binary(self, path) -> None:
        """Little-endian float64 row-major ``w`` preceded by two int64 dimensions."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", *self.w.shape))
            fh.write(np.ascontiguousarray(self.w, dtype="<f8").tobytes())

    @staticmethod
    def read_binary(path) -> np.ndarray:
        with open(path, "rb") as fh:
            rows, cols = struct.unpack("<qq", fh.read(16))
            return np.frombuffer(fh.read(), dtype="<f8").reshape(rows, cols)


def _bilinear(table: np.ndarray, grid: PdeGrid, t: np.ndarray, y: np.ndarray) -> np.ndarray:
    # outside [y_min, y_max] the boundary column is held constant
    s = np.clip((t / grid.dt), 0.0, grid.n_time)
    k = np.minimum(s.astype(np.int64), grid.n_time - 1)
    ft = s - k
    u = np.clip((y - grid.y_min) / grid.dy, 0.0, grid.n_space - 1)
    j = np.minimum(u.astype(np.int64), grid.n_space - 2)
    fy = u - j
    top = table[k, j] * (1.0 - fy) + table[k, j + 1] * fy
    bot = table[k + 1, j] * (1.0 - fy) + table[k + 1, j + 1] * fy
    return top * (1.0 - ft) + bot * ft


def terminal_values(params, grid: PdeGrid, cost_mode: str = "raw", mollify_order: int | None = None):
    x = np.exp(grid.y)
    if cost_mode == "raw":
        return -np.asarray(params.cost(x), dtype=float)
    if cost_mode == "mollified":
        return -mollify_cost(params.cost, mollify_order or params.trunc_level)(x)
    raise ValueError(f"unknown cost_mode {cost_mode!r}")


def solve(params, grid: PdeGrid, mode: str = "eps", cost_mode: str = "raw",
          mollify_order: int | None = None, scheme: str = "explicit",
          backend: str | None = None, ctx: HamiltonianContext | None = None) -> ValueSurface:
    """Fill ``w`` backwards from ``w(T, y) = -f(e^y)``.

    ``mode`` selects the smoothed (``"eps"``) or exact Hamiltonian, ``scheme``
    explicit Euler or IMEX (implicit diffusion).
    """
    if mode not in ("eps", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if scheme not in ("explicit", "imex"):
        raise ValueError(f"unknown scheme {scheme!r}")
    ctx = ctx or HamiltonianContext.from_params(params)
    kern = get_backend(backend)
    cfl = cfl_number(ctx, grid, diffusion=(scheme == "explicit"))
    if cfl > 1.0:
        raise CFLError(f"CFL certificate fails: {cfl:.3f} > 1 (refine dt or use scheme='imex')")

    y = grid.y
    pi = np.ascontiguousarray(np.broadcast_to(ctx.revenue_log(y), y.shape), dtype=float)
    drift0 = np.ascontiguousarray(ctx.base_drift(y), dtype=float)
    dt, dy = grid.dt, grid.dy
    smooth = mode == "eps"

    w = np.empty((grid.n_time + 1, grid.n_space))
    w[-1] = terminal_values(params, grid, cost_mode, mollify_order)
    banded = _imex_matrix(ctx, grid) if scheme == "imex" else None
    for k in range(grid.n_time - 1, -1, -1):
        rhs = kern.hjb_rhs(w[k + 1], pi, drift0, ctx, dy, smooth, banded is None)
        row = w[k + 1] + dt * rhs
        if banded is not None:
            row = solve_banded((1, 1), banded, row)
        if not np.all(np.isfinite(row)):
            j = int(np.flatnonzero(~np.isfinite(row))[0])
            lo, hi = max(0, j - 2), min(grid.n_space, j + 3)
            raise SolverError(
                f"non-finite value at (k={k}, j={j}); previous row around j: {w[k + 1, lo:hi].tolist()}")
        w[k] = row
    logger.debug("solved %dx%d surface (cfl %.3f, backend %s)", grid.n_time, grid.n_space, cfl, kern.NAME)
    return ValueSurface(w, grid, params, mode, params_fingerprint(params))


def _imex_matrix(ctx: HamiltonianContext, grid: PdeGrid) -> np.ndarray:
    # (I - dt sigma^2/2 D2) with identity rows at the ends (zero second difference)
    n = grid.n_space
    r = 0.5 * ctx.sigma ** 2 * grid.dt / grid.dy ** 2
    ab = np.zeros((3, n))
    ab[0, 2:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-2] = -r
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    return ab


class FeedbackPolicy:
    """``(t, x) -> (z, alpha)`` with ``z = -D1 w / kappa`` and ``alpha = a*(p(x) x, z)``."""

    def __init__(self, surface: ValueSurface | None, params, z_fn=None):
        self.surface = surface
        self.params = params
        self.bounds = EffortBounds.from_params(params)
        self.kappa = params.kappa
        self._z_fn = z_fn

    def z(self, t, x):
        t = np.broadcast_to(np.asarray(t, dtype=float), np.shape(x))
        if self._z_fn is not None:
            return np.broadcast_to(np.asarray(self._z_fn(t, x), dtype=float), np.shape(x)).astype(float)
        d1 = _bilinear(self.surface.d1, self.surface.grid, t, np.log(np.asarray(x, dtype=float)))
        return -d1 / self.kappa

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        z = self.z(t, x)
        return z, a_star(self.params.price.revenue(x), z, self.bounds)

    def stepper(self, n_paths: int):
        """Per-batch callable; stateless policies just return themselves."""
        return self

    @classmethod
    def constant(cls, params, z: float = 0.0) -> "FeedbackPolicy":
        return cls(None, params, z_fn=lambda t, x: np.full(np.shape(x), float(z)))


def z_feedback(surface: ValueSurface, params=None) -> FeedbackPolicy:
    return FeedbackPolicy(surface, params or surface.params)


def pde_residual(surface: ValueSurface, mode: str | None = None, stride: int = 4,
                 backend: str | None = None) -> float:
    """Sup of ``|-(w_k - w_{k+1})/dt - H(...)(w_{k+1})|`` on a coarser interior subsample."""
    mode = mode or surface.mode
    params, grid = surface.params, surface.grid
    ctx = HamiltonianContext.from_params(params)
    kern = get_backend(backend)
    y = grid.y
    pi = np.ascontiguousarray(np.broadcast_to(ctx.revenue_log(y), y.shape), dtype=float)
    drift0 = np.ascontiguousarray(ctx.base_drift(y), dtype=float)
    worst = 0.0
    for k in range(0, grid.n_time, stride):
        h = kern.hjb_rhs(surface.w[k + 1], pi, drift0, ctx, grid.dy, mode == "eps", True)
        res = (surface.w[k] - surface.w[k + 1]) / grid.dt - h
        worst = max(worst, float(np.max(np.abs(res[1:-1:stride]))))
    return worst
