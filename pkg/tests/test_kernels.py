from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from harvestreg._backend import BACKENDS, default_backend_name, get_backend
from harvestreg.hamiltonian import HamiltonianContext
from harvestreg.hjb import solve

needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")


def _row_inputs(params, grid, rng):
    ctx = HamiltonianContext.from_params(params)
    y = grid.y
    pi = np.ascontiguousarray(np.broadcast_to(ctx.revenue_log(y), y.shape), dtype=float)
    drift0 = np.ascontiguousarray(ctx.base_drift(y), dtype=float)
    w = np.cumsum(rng.uniform(-0.01, 0.05, y.size))
    return ctx, w, pi, drift0


@needs_cython
@pytest.mark.parametrize("smooth", [True, False])
@pytest.mark.parametrize("diffusion", [True, False])
def test_row_kernels_agree(params, coarse_grid, rng, smooth, diffusion):
    ctx, w, pi, drift0 = _row_inputs(params, coarse_grid, rng)
    a = get_backend("cython").hjb_rhs(w, pi, drift0, ctx, coarse_grid.dy, smooth, diffusion)
    b = get_backend("python").hjb_rhs(w, pi, drift0, ctx, coarse_grid.dy, smooth, diffusion)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_cython
def test_row_kernel_accepts_read_only_views(params, coarse_grid, rng):
    ctx, w, pi, drift0 = _row_inputs(params, coarse_grid, rng)
    w.setflags(write=False)
    pi.setflags(write=False)
    get_backend("cython").hjb_rhs(w, pi, drift0, ctx, coarse_grid.dy, True)


@needs_cython
def test_full_solve_agrees(params, coarse_grid):
    a = solve(params, coarse_grid, backend="cython").w
    b = solve(params, coarse_grid, backend="python").w
    assert np.max(np.abs(a - b)) <= 1e-12


def test_unknown_backend():
    with pytest.raises(ValueError, match="not available"):
        get_backend("fortran")


def test_env_var_forces_python():
    code = "from harvestreg._backend import default_backend_name; print(default_backend_name())"
    env = {**os.environ, "HARVESTREG_PURE": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert default_backend_name() in BACKENDS
