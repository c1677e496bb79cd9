"""Manufactured-solution convergence studies for the discrete operators.

Each study exercises the production solvers with a known smooth solution
and a compensating source term, reports errors over a refinement ladder,
and fits the observed order by least squares on log-log data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .grid import Grid, ScalarField, VelocityField, advect_upwind
from .flow import scalar_helmholtz_solver, velocity_step, project
from .model import ModelParams
from .transport import chemotaxis_div

X, Y, T = sp.symbols("x y t")


@dataclass
class ConvergenceReport:
    """Errors across a refinement ladder plus the fitted order."""

    label: str
    levels: list      # grid spacings or time steps, finest last
    errors: list
    order: float

    def table(self):
        lines = [f"{self.label}: fitted order {self.order:.3f}"]
        for h, e in zip(self.levels, self.errors):
            lines.append(f"  h={h:.6g}  err={e:.6e}")
        return "\n".join(lines)


def fit_order(levels, errors) -> float:
    """Least-squares slope of log(error) against log(level)."""
    lv = np.log(np.asarray(levels, dtype=float))
    le = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    return float(np.polyfit(lv, le, 1)[0])


def _lambdify_cells(expr, grid: Grid, t):
    f = sp.lambdify((X, Y, T), expr, "numpy")
    xs, ys = grid.center_mesh()
    return np.asarray(f(xs, ys, t), dtype=np.float64) + np.zeros(grid.cells)


def _stream_velocity(grid: Grid, psi_expr) -> VelocityField:
    """Exactly divergence-free MAC velocity from a corner streamfunction.

    u_x = d(psi)/dy and u_y = -d(psi)/dx are built as exact finite
    differences of psi sampled at cell corners, so the discrete divergence
    vanishes to roundoff and walls stay no-penetration when psi is constant
    on the boundary.
    """
    psi = sp.lambdify((X, Y), psi_expr, "numpy")
    nx, ny = grid.cells
    hx, hy = grid.spacing
    xn = np.linspace(0.0, grid.lengths[0], nx + 1)
    yn = np.linspace(0.0, grid.lengths[1], ny + 1)
    vals = np.asarray(psi(xn[:, None], yn[None, :]), dtype=np.float64)
    vals = vals + np.zeros((nx + 1, ny + 1))
    ux = (vals[:, 1:] - vals[:, :-1]) / hy
    uy = -(vals[1:, :] - vals[:-1, :]) / hx
    return VelocityField(grid, [ux, uy])


def diffusion_study(cells_list=(16, 32, 64), t_end=0.25) -> ConvergenceReport:
    """Heat equation with a manufactured solution; dt tied to h^2.

    Implicit stepping through the production Helmholtz solver; the spatial
    stencil is second order, so the fitted order should approach 2.
    """
    exact = 1.0 + sp.cos(sp.pi * X) * sp.cos(2 * sp.pi * Y) * sp.exp(-T)
    source = sp.simplify(sp.diff(exact, T) - sp.diff(exact, X, 2)
                         - sp.diff(exact, Y, 2))
    hs, errs = [], []
    for n in cells_list:
        grid = Grid((1.0, 1.0), (n, n))
        h = min(grid.spacing)
        dt = 0.25 * h * h
        steps = int(round(t_end / dt))
        dt = t_end / steps
        solver = scalar_helmholtz_solver(grid)
        f = ScalarField(grid, _lambdify_cells(exact, grid, 0.0))
        for k in range(steps):
            t1 = (k + 1) * dt
            rhs = ScalarField(grid, f.values + dt * _lambdify_cells(source, grid, t1))
            f = solver.solve(rhs, dt)
        err = float(np.abs(f.values - _lambdify_cells(exact, grid, t_end)).max())
        hs.append(h)
        errs.append(err)
    return ConvergenceReport("diffusion", hs, errs, fit_order(hs, errs))


def advection_diffusion_study(cells_list=(16, 32, 64), t_end=0.2) -> ConvergenceReport:
    """Advection-diffusion with a prescribed solenoidal velocity; dt ~ h.

    Donor-cell advection limits the expected order to about 1.
    """
    psi_expr = 0.1 * sp.sin(sp.pi * X) ** 2 * sp.sin(sp.pi * Y) ** 2
    u_expr = (sp.diff(psi_expr, Y), -sp.diff(psi_expr, X))
    exact = 1.5 + 0.5 * sp.cos(sp.pi * X) * sp.cos(sp.pi * Y) * sp.exp(-T)
    source = sp.simplify(
        sp.diff(exact, T)
        + sp.diff(u_expr[0] * exact, X) + sp.diff(u_expr[1] * exact, Y)
        - sp.diff(exact, X, 2) - sp.diff(exact, Y, 2))
    hs, errs = [], []
    for n in cells_list:
        grid = Grid((1.0, 1.0), (n, n))
        h = min(grid.spacing)
        u = _stream_velocity(grid, psi_expr)
        dt = 0.5 * h
        steps = int(round(t_end / dt))
        dt = t_end / steps
        solver = scalar_helmholtz_solver(grid)
        f = ScalarField(grid, _lambdify_cells(exact, grid, 0.0))
        for k in range(steps):
            tk = k * dt
            adv = advect_upwind(f, u)
            rhs = ScalarField(grid, f.values - dt * adv.values
                              + dt * _lambdify_cells(source, grid, tk))
            f = solver.solve(rhs, dt)
        err = float(np.abs(f.values - _lambdify_cells(exact, grid, t_end)).max())
        hs.append(h)
        errs.append(err)
    return ConvergenceReport("advection-diffusion", hs, errs, fit_order(hs, errs))


def chemotaxis_study(cells_list=(16, 32, 64), t_end=0.2, chi=0.5) -> ConvergenceReport:
    """Drift-diffusion against a frozen signal; dt ~ h, expected order ~1."""
    c_expr = 1.0 + 0.2 * sp.cos(sp.pi * X) * sp.cos(sp.pi * Y)
    exact = 1.5 + 0.5 * sp.cos(sp.pi * X) * sp.cos(2 * sp.pi * Y) * sp.exp(-T)
    flux_x = chi * exact * sp.diff(c_expr, X)
    flux_y = chi * exact * sp.diff(c_expr, Y)
    source = sp.simplify(
        sp.diff(exact, T) + sp.diff(flux_x, X) + sp.diff(flux_y, Y)
        - sp.diff(exact, X, 2) - sp.diff(exact, Y, 2))
    hs, errs = [], []
    for n in cells_list:
        grid = Grid((1.0, 1.0), (n, n))
        h = min(grid.spacing)
        c_fun = sp.lambdify((X, Y), c_expr, "numpy")
        xs, ys = grid.center_mesh()
        c = ScalarField(grid, np.asarray(c_fun(xs, ys)) + np.zeros(grid.cells))
        dt = 0.5 * h
        steps = int(round(t_end / dt))
        dt = t_end / steps
        solver = scalar_helmholtz_solver(grid)
        f = ScalarField(grid, _lambdify_cells(exact, grid, 0.0))
        for k in range(steps):
            tk = k * dt
            drift = chemotaxis_div(f, c, chi, 0.0)
            rhs = ScalarField(grid, f.values - dt * drift.values
                              + dt * _lambdify_cells(source, grid, tk))
            f = solver.solve(rhs, dt)
        err = float(np.abs(f.values - _lambdify_cells(exact, grid, t_end)).max())
        hs.append(h)
        errs.append(err)
    return ConvergenceReport("chemotaxis", hs, errs, fit_order(hs, errs))


def stokes_temporal_study(cells=32, t_end=0.1, n_levels=4) -> ConvergenceReport:
    """Time-refinement of the full velocity step on a fixed grid.

    Errors are measured against a much finer self-reference, isolating the
    first-order temporal splitting from the fixed spatial discretization.
    """
    grid = Grid((1.0, 1.0), (cells, cells))
    params = ModelParams(kappa=1, eps=0.0)
    psi_expr = 0.05 * sp.sin(sp.pi * X) ** 2 * sp.sin(sp.pi * Y) ** 2
    u0 = _stream_velocity(grid, psi_expr)
    u0, _ = project(u0)
    fx = sp.lambdify((X, Y), 0.2 * sp.cos(sp.pi * X) * sp.sin(sp.pi * Y), "numpy")
    fy = sp.lambdify((X, Y), -0.1 * sp.sin(sp.pi * X) * sp.cos(sp.pi * Y), "numpy")
    comps = []
    for a, fun in enumerate((fx, fy)):
        mesh = grid.face_mesh(a)
        comps.append(np.asarray(fun(*mesh), dtype=np.float64))
    forcing = VelocityField(grid, comps)

    def integrate_u(dt):
        steps = int(round(t_end / dt))
        u = VelocityField(grid, [c.copy() for c in u0.components])
        for _ in range(steps):
            u, _ = velocity_step(u, forcing, params, t_end / steps)
        return u

    dts = [t_end / (8 * 2 ** k) for k in range(n_levels)]
    ref = integrate_u(dts[-1] / 16.0)
    errs = []
    for dt in dts:
        u = integrate_u(dt)
        errs.append(max(float(np.abs(a - b).max())
                        for a, b in zip(u.components, ref.components)))
    return ConvergenceReport("stokes-temporal", dts, errs, fit_order(dts, errs))


def splitting_temporal_study(cells=8, t_end=2.0, n_levels=4) -> ConvergenceReport:
    """Temporal order of the full split scheme on spatially uniform data.

    With no gradients the exact dynamics reduce to the kinetics ODE, solved
    here to near machine accuracy by fine RK4 as the reference.
    """
    from .run import ode_oracle
    from .transport import State, scalar_step
    from .grid import FaceField

    grid = Grid((1.0, 1.0), (cells, cells))
    params = ModelParams(a1=0.4, a2=0.6, chi1=0.3, chi2=0.2,
                         mu1=1.0, mu2=1.2, alpha=1.0, beta=0.8,
                         kappa=1, eps=0.0)
    y0 = (0.7, 0.9, 1.0)
    _, fine = ode_oracle(params, y0, t_end, t_end / 200000)
    ref = fine[-1]
    zero_force = FaceField(grid, [np.zeros(grid.face_shape(a))
                                  for a in range(grid.dim)])

    def integrate(dt):
        steps = int(round(t_end / dt))
        st = State.initial(grid,
                           ScalarField.full(grid, y0[0]),
                           ScalarField.full(grid, y0[1]),
                           ScalarField.full(grid, y0[2]),
                           VelocityField.zeros(grid))
        for _ in range(steps):
            n1, n2, c, _ = scalar_step(st, params, t_end / steps)
            u, p = velocity_step(st.u, zero_force, params, t_end / steps)
            st = State(st.t + t_end / steps, n1, n2, c, u, p)
        return np.array([st.n1.values.flat[0], st.n2.values.flat[0],
                         st.c.values.flat[0]])

    dts = [t_end / (50 * 2 ** k) for k in range(n_levels)]
    errs = [float(np.abs(integrate(dt) - ref).max()) for dt in dts]
    return ConvergenceReport("splitting-temporal", dts, errs, fit_order(dts, errs))


SUITES = {
    "diffusion": diffusion_study,
    "advection": advection_diffusion_study,
    "chemotaxis": chemotaxis_study,
    "stokes": stokes_temporal_study,
    "splitting": splitting_temporal_study,
}


def run_suite(name: str) -> ConvergenceReport:
    if name not in SUITES:
        raise ValueError(f"unknown study {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
