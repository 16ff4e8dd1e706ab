"""Model constants, price / cost / competition specifications and validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .smoothing import mu_n


class ModelValidationError(ValueError):
    """Raised when a parameter set breaks a model invariant."""


class RequiresSimulation(RuntimeError):
    """The requested quantity has no closed form for this price specification."""


@dataclass(frozen=True)
class PriceSpec:
    """Market price ``p(x)``.

    ``inverse``: ``p(x) = P / x`` so that ``p(x) x = P``.
    ``exp_impact``: ``p(x) = P exp(-beta1 x**beta2)``.
    """

    variant: str = "inverse"
    P: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0

    def price(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == "inverse":
            return self.P / x
        return self.P * np.exp(-self.beta1 * x ** self.beta2)

    def revenue(self, x):
        """``p(x) x``, the revenue rate per unit of effort."""
        x = np.asarray(x, dtype=float)
        if self.variant == "inverse":
            return np.full_like(x, self.P)[()]
        return (self.P * x * np.exp(-self.beta1 * x ** self.beta2))[()]

    def revenue_log(self, y):
        """``e^y p(e^y)``."""
        return self.revenue(np.exp(np.asarray(y, dtype=float)))

    @property
    def is_constant(self) -> bool:
        return self.variant == "inverse"


@dataclass(frozen=True)
class CostSpec:
    """Reintroduction cost ``f(x) = (c - c x / beta) 1{x < beta}``."""

    c: float = 3.0
    beta: float = 0.9

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.beta, self.c - (self.c / self.beta) * x, 0.0)[()]

    @property
    def lipschitz(self) -> float:
        return self.c / self.beta

    @property
    def kink(self) -> float:
        return self.beta


@dataclass(frozen=True)
class MuSpec:
    """Competition coefficient ``mu``.

    ``logistic`` is ``mu(x) = x``, ``truncated`` the smooth cut-off at ``e^n``
    and ``custom`` a tabulated map (linear interpolation, constant
    extrapolation).
    """

    variant: str = "logistic"
    n: float = 100
    table_x: tuple[float, ...] = ()
    table_mu: tuple[float, ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == "logistic":
            return x[()]
        if self.variant == "truncated":
            return mu_n(x, self.n)
        if self.variant == "custom":
            return np.interp(x, self.table_x, self.table_mu)[()]
        raise ModelValidationError(f"unknown mu variant {self.variant!r}")


@dataclass(frozen=True)
class ModelParams:
    lam: float = 1.2
    sigma: float = 0.1
    x0: float = 1.2
    horizon: float = 1.0
    gamma: float = 0.1
    m_lower: float = 10.0
    m_upper: float = 10.0
    price: PriceSpec = field(default_factory=PriceSpec)
    cost: CostSpec = field(default_factory=CostSpec)
    competition: MuSpec = field(default_factory=MuSpec)
    reservation: float = -math.exp(-0.05)
    epsilon: float = 0.01
    trunc_level: int = 100

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def kappa(self) -> float:
        return 1.0 + self.gamma * self.sigma ** 2

    def mu(self, x):
        return self.competition(x)


def reference_params(**overrides) -> ModelParams:
    """Parameter set of the reference numerical experiment (logistic competition
    truncated at ``n = 100``, reservation from the unregulated problem)."""
    base = ModelParams(competition=MuSpec("truncated", 100))
    base = base.with_(**overrides)
    if "reservation" not in overrides:
        base = base.with_(reservation=unregulated_value(base))
    return base


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every model invariant holds."""
    p = params
    checks = [
        (p.sigma > 0, "sigma must be positive"),
        (p.gamma > 0, "gamma must be positive"),
        (p.horizon > 0, "horizon must be positive"),
        (p.x0 > 0, "x0 must be positive"),
        (p.reservation < 0, "reservation must be negative"),
        (p.epsilon > 0, "epsilon must be positive"),
        (p.m_lower >= 0, "m_lower must be nonnegative"),
        (p.m_upper >= 0, "m_upper must be nonnegative"),
        (p.m_lower > 0 or p.m_upper > 0, "degenerate effort set: m_lower = m_upper = 0"),
        (p.trunc_level >= 1, "trunc_level must be >= 1"),
        (p.cost.c >= 0, "cost.c must be nonnegative"),
        (p.cost.beta > 0, "cost.beta must be positive"),
        (p.price.P >= 0, "price.P must be nonnegative"),
        (p.price.variant in ("inverse", "exp_impact"), f"unknown price variant {p.price.variant!r}"),
        (p.competition.variant in ("logistic", "truncated", "custom"),
         f"unknown mu variant {p.competition.variant!r}"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ModelValidationError(msg)
    if p.price.variant == "exp_impact":
        if p.price.beta1 <= 0 or p.price.beta2 <= 0:
            raise ModelValidationError("price.beta1 and price.beta2 must be positive")
        xs = np.logspace(-6, 6, 10_000)
        worst = float(np.max(p.price.revenue(xs)))
        if worst > p.price.P * (1 + 1e-12):
            raise ModelValidationError(
                f"price violates p(x) x <= P: sampled sup {worst:.6g} > P = {p.price.P:.6g}")
    if p.competition.variant == "custom":
        tx, tm = p.competition.table_x, p.competition.table_mu
        if len(tx) < 2 or len(tx) != len(tm) or np.any(np.diff(tx) <= 0):
            raise ModelValidationError("custom mu table needs >= 2 increasing abscissae")
        if np.any(np.asarray(tm) < 0):
            raise ModelValidationError("custom mu table must be nonnegative")
    return params


def reservation_tilde(params: ModelParams) -> float:
    """Certainty equivalent ``log(-R) / gamma`` of the reservation utility."""
    if params.reservation >= 0:
        raise ModelValidationError("reservation must be negative")
    return math.log(-params.reservation) / params.gamma


def best_unregulated_effort(params: ModelParams) -> float:
    return min(max(params.price.P, -params.m_lower), params.m_upper)


def unregulated_value(params: ModelParams) -> float:
    """Agent's value without any tax.

    Only closed-form for a constant revenue ``p(x) x = P``; other price
    specifications need Monte Carlo.
    """
    if not params.price.is_constant:
        raise RequiresSimulation("unregulated value needs simulation for non-constant p(x) x")
    a = best_unregulated_effort(params)
    gain = params.price.P * a - 0.5 * a * a
    return -math.exp(-params.gamma * params.horizon * gain)


def unregulated_value_grid(params: ModelParams, step: float = 1e-4) -> float:
    """Brute-force version of :func:`unregulated_value` over an effort grid."""
    a = np.arange(-params.m_lower, params.m_upper + 0.5 * step, step)
    a = np.concatenate([a, [params.m_upper]])
    gain = np.max(params.price.P * a - 0.5 * a * a)
    return -math.exp(-params.gamma * params.horizon * gain)


def full_revenue_reservation(params: ModelParams) -> float:
    """``-exp(-gamma P^2 T)``: the unregulated utility with the quadratic effort cost dropped."""
    return -math.exp(-params.gamma * params.price.P ** 2 * params.horizon)


MODEL_KEYS = (
    "lambda", "sigma", "x0", "horizon", "gamma", "m_lower", "m_upper",
    "price.variant", "price.P", "price.beta1", "price.beta2",
    "cost.c", "cost.beta", "mu.variant", "mu.n",
    "reservation_mode", "reservation", "epsilon",
)


def params_from_mapping(flat: Mapping[str, Any]) -> ModelParams:
    """Build validated parameters from the flat ``key -> value`` config layout."""
    unknown = sorted(set(flat) - set(MODEL_KEYS))
    if unknown:
        raise ModelValidationError(f"unknown config keys: {', '.join(unknown)}")
    d = ModelParams()
    price = PriceSpec(
        variant=str(flat.get("price.variant", d.price.variant)),
        P=float(flat.get("price.P", d.price.P)),
        beta1=float(flat.get("price.beta1", d.price.beta1)),
        beta2=float(flat.get("price.beta2", d.price.beta2)),
    )
    cost = CostSpec(c=float(flat.get("cost.c", d.cost.c)), beta=float(flat.get("cost.beta", d.cost.beta)))
    n = int(flat.get("mu.n", d.trunc_level))
    mu = MuSpec(variant=str(flat.get("mu.variant", "truncated")), n=n)
    params = ModelParams(
        lam=float(flat.get("lambda", d.lam)),
        sigma=float(flat.get("sigma", d.sigma)),
        x0=float(flat.get("x0", d.x0)),
        horizon=float(flat.get("horizon", d.horizon)),
        gamma=float(flat.get("gamma", d.gamma)),
        m_lower=float(flat.get("m_lower", d.m_lower)),
        m_upper=float(flat.get("m_upper", d.m_upper)),
        price=price, cost=cost, competition=mu,
        epsilon=float(flat.get("epsilon", d.epsilon)),
        trunc_level=n,
    )
    mode = str(flat.get("reservation_mode", "computed"))
    if mode == "computed":
        reservation = unregulated_value(params)
    elif mode == "full_revenue":
        reservation = full_revenue_reservation(params)
    elif mode == "explicit":
        if "reservation" not in flat:
            raise ModelValidationError("reservation_mode = explicit needs a reservation value")
        reservation = float(flat["reservation"])
    else:
        raise ModelValidationError(f"unknown reservation_mode {mode!r}")
    return validate(params.with_(reservation=reservation))
