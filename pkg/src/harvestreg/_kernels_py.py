"""Pure numpy reference for the HJB row kernel (used when the extension is absent)."""
from __future__ import annotations

import numpy as np

from .hamiltonian import core_eps, core_exact

NAME = "python"


def upwind_stencils(w: np.ndarray, pi: np.ndarray, drift0: np.ndarray, kappa: float,
                    m_lower: float, m_upper: float, dy: float):
    """Upwinded first difference and central second difference of one row.

    The upwind side follows the sign of the effective drift at the candidate
    maximiser ``a* = clamp(pi - D1c / kappa)``; end nodes use one-sided first
    differences and a zero second difference.
    """
    n = w.size
    d1 = np.empty(n)
    d2 = np.zeros(n)
    fwd = (w[2:] - w[1:-1]) / dy
    bwd = (w[1:-1] - w[:-2]) / dy
    central = (w[2:] - w[:-2]) / (2.0 * dy)
    a = np.minimum(np.maximum(pi[1:-1] - central / kappa, -m_lower), m_upper)
    d1[1:-1] = np.where(drift0[1:-1] - a > 0.0, fwd, bwd)
    d1[0] = (w[1] - w[0]) / dy
    d1[-1] = (w[-1] - w[-2]) / dy
    d2[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (dy * dy)
    return d1, d2


def hjb_rhs(w, pi, drift0, ctx, dy: float, smooth: bool, diffusion: bool = True) -> np.ndarray:
    d1, d2 = upwind_stencils(w, pi, drift0, ctx.kappa, ctx.m_lower, ctx.m_upper, dy)
    core = core_eps(pi, d1, ctx) if smooth else core_exact(pi, d1, ctx)
    out = core + drift0 * d1
    if diffusion:
        out = out + (0.5 * ctx.sigma ** 2) * d2
    return out
