"""Physical parameters, competitive kinetics, regularized nonlinearities,
steady states, and initial-data validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import (FaceField, ScalarField, VelocityField,
                   interpolate_to_faces, _sl)


@dataclass(frozen=True)
class ModelParams:
    """Constants of the coupled system plus the regularization parameter.

    eps = 0 selects the unregularized equations (explicit branch, never a
    0/0 limit); kappa = 0 drops velocity self-advection (Stokes variant).
    """

    chi1: float = 0.0
    chi2: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    mu1: float = 1.0
    mu2: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    kappa: int = 1
    eps: float = 0.0

    def __post_init__(self):
        for name in ("chi1", "chi2", "a1", "a2", "eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("mu1", "mu2", "alpha", "beta", "gamma", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.kappa not in (0, 1):
            raise ValueError("kappa must be 0 or 1")

    def with_eps(self, eps):
        return replace(self, eps=float(eps))


@dataclass(frozen=True)
class SteadyState:
    """Large-time limit of the species densities, tagged by regime."""

    n1_limit: float
    n2_limit: float
    regime: str  # "coexistence" | "exclusion" | "out_of_scope"


def steady_states(params: ModelParams) -> SteadyState:
    """Classify (a1, a2) and return the corresponding limit densities.

    Weak competition (both coefficients below 1) gives the interior
    coexistence point; a1 >= 1 > a2 gives competitive exclusion (0, 1).
    Anything else is simulable but carries no asserted limit.
    """
    a1, a2 = params.a1, params.a2
    if a1 < 1.0 and a2 < 1.0:
        n1 = (1.0 - a1) / (1.0 - a1 * a2)
        n2 = (1.0 - a2) / (1.0 - a1 * a2)
        return SteadyState(n1, n2, "coexistence")
    if a1 >= 1.0 > a2:
        return SteadyState(0.0, 1.0, "exclusion")
    return SteadyState(math.nan, math.nan, "out_of_scope")


def lv_reaction(n1, n2, params: ModelParams):
    """Competitive logistic rates (dn1/dt, dn2/dt); accepts scalars or arrays."""
    r1 = params.mu1 * n1 * (1.0 - n1 - params.a1 * n2)
    r2 = params.mu2 * n2 * (1.0 - params.a2 * n1 - n2)
    return r1, r2


def chemo_mobility(n, eps):
    """Saturating chemotactic mobility n / (1 + eps n); identity at eps = 0."""
    if eps == 0.0:
        return n
    return n / (1.0 + eps * n)


def consumption_rate(n1, n2, params: ModelParams):
    """Signal consumption rate; the eps > 0 form is the log-regularized one.

    Always nonnegative and bounded by the unregularized rate
    alpha n1 + beta n2.
    """
    s = params.alpha * n1 + params.beta * n2
    if params.eps == 0.0:
        return s
    return np.log1p(params.eps * s) / params.eps


def buoyancy_force(n1: ScalarField, n2: ScalarField, grad_phi: FaceField,
                   params: ModelParams) -> FaceField:
    """Face-interpolated (gamma n1 + delta n2) times grad(Phi); zero on walls."""
    if n1.grid is not n2.grid and n1.grid != n2.grid:
        raise ValueError("n1 and n2 live on different grids")
    if grad_phi.grid != n1.grid:
        raise ValueError("grad_phi grid does not match scalar grid")
    w = ScalarField(n1.grid, params.gamma * n1.values + params.delta * n2.values)
    wf = interpolate_to_faces(w)
    out = FaceField(n1.grid, [wc * gc for wc, gc in
                              zip(wf.components, grad_phi.components)])
    return out.zero_boundary()


class InitialDataError(ValueError):
    pass


def validate_initial_data(n1_0: ScalarField, n2_0: ScalarField, c_0: ScalarField,
                          u_0) -> tuple:
    """Enforce strict positivity of the scalars and solenoidality of u_0.

    The velocity is projected onto the discretely divergence-free no-slip
    subspace, the discrete counterpart of the admissible class of initial
    velocities.  Returns (n1_0, n2_0, c_0, projected u).
    """
    from .flow import project

    for name, f in (("n1_0", n1_0), ("n2_0", n2_0), ("c_0", c_0)):
        f.check_finite(name)
        m = f.min()
        if m <= 0.0:
            raise InitialDataError(
                f"initial field {name} must be strictly positive "
                f"(minimum value {m:g})")
    u_0.check_finite("u_0")
    if not u_0.boundary_is_zero():
        raise InitialDataError("u_0 must vanish on boundary faces (no-slip)")
    u_proj, _ = project(VelocityField(u_0.grid, [c.copy() for c in u_0.components]))
    return n1_0, n2_0, c_0, u_proj
