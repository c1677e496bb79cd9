"""Runtime diagnostics: energy functionals, dissipation integrals, a-priori
bound accumulators, the blow-up monitor, weak-form residuals, and distances
to the large-time limits.

These are pure readers of State.  The functional weights (chi, kbar, B) are
user inputs with default 1.0: suitable values are known to exist but are not
exhibited by the analysis, so the functionals act as parametric monitors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .grid import (FaceField, ScalarField, divergence_faces, face_average_to_cells,
                   gradient_faces, integrate, interpolate_to_faces, _sl)
from .flow import velocity_grad_norm_sq, kinetic_energy
from .model import ModelParams, SteadyState, lv_reaction

C_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class EnergyConfig:
    """Positive weights of the monitored functionals (defaults 1.0)."""

    chi: float = 1.0
    kbar: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if self.chi <= 0 or self.kbar <= 0 or self.B <= 0:
            raise ValueError("energy weights chi, kbar, B must be > 0")


def grad_sq_cells(f: ScalarField) -> np.ndarray:
    """|grad f|^2 averaged from faces to cell centers."""
    return face_average_to_cells(gradient_faces(f))


def energy_F(state, cfg: EnergyConfig) -> float:
    """Entropy-type energy: int n1 log n1 + n2 log n2
    + (chi/2) |grad c|^2 / c + kbar chi |u|^2.

    Cells where c underflows below 1e-300 contribute 0 to the signal term.
    """
    n1, n2, c = state.n1, state.n2, state.c
    if n1.min() <= 0.0 or n2.min() <= 0.0:
        raise ValueError("energy_F requires strictly positive species densities")
    vol = state.grid.cell_volume
    val = float((n1.values * np.log(n1.values)).sum()) * vol
    val += float((n2.values * np.log(n2.values)).sum()) * vol
    gsq = grad_sq_cells(c)
    safe = c.values > C_UNDERFLOW
    term = np.where(safe, gsq / np.where(safe, c.values, 1.0), 0.0)
    val += 0.5 * cfg.chi * float(term.sum()) * vol
    val += cfg.kbar * cfg.chi * kinetic_energy(state.u)
    return val


def _log_c_hessian_sq(c: ScalarField) -> np.ndarray:
    """|D^2 log c|^2 at cells via centered differences with Neumann ghosts.

    Cells where c underflows contribute 0 (the functional is a diagnostic).
    """
    g = c.grid
    nd = g.dim
    safe = c.values > C_UNDERFLOW
    logc = np.log(np.where(safe, c.values, 1.0))
    pad = np.pad(logc, 1, mode="edge")
    core = tuple(slice(1, -1) for _ in range(nd))
    out = np.zeros(g.cells)
    for a in range(nd):
        h2 = g.spacing[a] ** 2
        up = list(core); up[a] = slice(2, None)
        dn = list(core); dn[a] = slice(None, -2)
        d2 = (pad[tuple(up)] - 2.0 * logc + pad[tuple(dn)]) / h2
        out += d2 ** 2
    for a in range(nd):
        for b in range(a + 1, nd):
            ha, hb = g.spacing[a], g.spacing[b]
            pp = list(core); pp[a] = slice(2, None); pp[b] = slice(2, None)
            pm = list(core); pm[a] = slice(2, None); pm[b] = slice(None, -2)
            mp = list(core); mp[a] = slice(None, -2); mp[b] = slice(2, None)
            mm = list(core); mm[a] = slice(None, -2); mm[b] = slice(None, -2)
            dab = (pad[tuple(pp)] - pad[tuple(pm)] - pad[tuple(mp)]
                   + pad[tuple(mm)]) / (4.0 * ha * hb)
            out += 2.0 * dab ** 2
    return np.where(safe, out, 0.0)


@dataclass(frozen=True)
class DissipationTerms:
    """The five nonnegative dissipation integrals of the energy estimate."""

    d_n1: float
    d_n2: float
    d_c4: float
    d_hess: float
    d_u: float


def dissipation_terms(state) -> DissipationTerms:
    n1, n2, c = state.n1, state.n2, state.c
    if n1.min() <= 0.0 or n2.min() <= 0.0:
        raise ValueError("dissipation terms require strictly positive densities")
    vol = state.grid.cell_volume
    d_n1 = float((grad_sq_cells(n1) / n1.values).sum()) * vol
    d_n2 = float((grad_sq_cells(n2) / n2.values).sum()) * vol
    gsq = grad_sq_cells(c)
    safe = c.values > C_UNDERFLOW
    c_safe = np.where(safe, c.values, 1.0)
    d_c4 = float(np.where(safe, gsq ** 2 / c_safe ** 3, 0.0).sum()) * vol
    d_hess = float((np.where(safe, c.values, 0.0) * _log_c_hessian_sq(c)).sum()) * vol
    d_u = velocity_grad_norm_sq(state.u)
    return DissipationTerms(d_n1, d_n2, d_c4, d_hess, d_u)


def energy_G(state, cfg: EnergyConfig, target: SteadyState) -> float:
    """Lyapunov-type functional toward the large-time limit.

    Coexistence: int(n1 - N1 log(n1/N1)) + int(n2 - N2 log(n2/N2))
    + (B/2) int c^2.  Exclusion: int n1 + int(n2 - log n2) + (B/2) int c^2.
    """
    if target.regime == "out_of_scope":
        raise ValueError("energy_G is undefined for the out-of-scope regime")
    n1, n2, c = state.n1, state.n2, state.c
    if n1.min() <= 0.0 or n2.min() <= 0.0:
        raise ValueError("energy_G requires strictly positive densities")
    vol = state.grid.cell_volume
    if target.regime == "coexistence":
        N1, N2 = target.n1_limit, target.n2_limit
        val = float((n1.values - N1 * np.log(n1.values / N1)).sum()) * vol
        val += float((n2.values - N2 * np.log(n2.values / N2)).sum()) * vol
    else:
        val = float(n1.values.sum()) * vol
        val += float((n2.values - np.log(n2.values)).sum()) * vol
    val += 0.5 * cfg.B * float((c.values ** 2).sum()) * vol
    return val


def w1q_norm(c: ScalarField, q: float) -> float:
    """Discrete Sobolev norm (int |c|^q + int |grad c|^q)^(1/q)."""
    vol = c.grid.cell_volume
    gmag = np.sqrt(face_average_to_cells(gradient_faces(c)))
    total = float((np.abs(c.values) ** q).sum()) * vol
    total += float((gmag ** q).sum()) * vol
    return total ** (1.0 / q)


def blow_up_indicator(state, q: float = 4.0) -> float:
    """Norm combination monitored for finite-time blow-up.

    The H^1 seminorm of u substitutes for the fractional Stokes norm of
    the continuous criterion (no discrete fractional power is built).
    """
    val = state.n1.max() + state.n2.max()
    val += w1q_norm(state.c, q)
    val += math.sqrt(velocity_grad_norm_sq(state.u))
    return val


def distance_to_limit(state, target: SteadyState):
    """(max|n1 - n1_inf|, max|n2 - n2_inf|, max|c|, max|u|)."""
    if target.regime == "out_of_scope":
        raise ValueError("no asserted limit in the out-of-scope regime")
    d1 = float(np.abs(state.n1.values - target.n1_limit).max())
    d2 = float(np.abs(state.n2.values - target.n2_limit).max())
    dc = float(np.abs(state.c.values).max())
    du = state.u.max_abs()
    return (d1, d2, dc, du)


@dataclass
class Accumulators:
    """Running dt-weighted space-time integrals (nondecreasing in t)."""

    a1: float = 0.0
    a2: float = 0.0
    a_u: float = 0.0
    a_c: float = 0.0

    def update(self, state, dt: float, target: SteadyState):
        vol = state.grid.cell_volume
        if target.regime != "out_of_scope":
            self.a1 += dt * float(((state.n1.values - target.n1_limit) ** 2).sum()) * vol
            self.a2 += dt * float(((state.n2.values - target.n2_limit) ** 2).sum()) * vol
        self.a_u += dt * velocity_grad_norm_sq(state.u)
        gsq = grad_sq_cells(state.c)
        safe = state.c.values > C_UNDERFLOW
        c_safe = np.where(safe, state.c.values, 1.0)
        self.a_c += dt * float(np.where(safe, gsq ** 2 / c_safe ** 3, 0.0).sum()) * vol
        return self


CSV_COLUMNS = [
    "t", "dt", "mass_n1", "mass_n2", "mass_c",
    "max_n1", "max_n2", "max_c", "max_u",
    "F_value", "G_value",
    "D_n1", "D_n2", "D_c4", "D_hess", "D_u",
    "nlogn1", "nlogn2",
    "A1", "A2", "A_u", "A_c",
    "dist_n1", "dist_n2", "dist_c", "dist_u", "sup_distance",
    "blowup_indicator",
]


@dataclass
class DiagnosticsRecord:
    """One output-time row; column order is CSV_COLUMNS."""

    t: float = 0.0
    dt: float = 0.0
    mass_n1: float = 0.0
    mass_n2: float = 0.0
    mass_c: float = 0.0
    max_n1: float = 0.0
    max_n2: float = 0.0
    max_c: float = 0.0
    max_u: float = 0.0
    F_value: float = 0.0
    G_value: float = 0.0
    D_n1: float = 0.0
    D_n2: float = 0.0
    D_c4: float = 0.0
    D_hess: float = 0.0
    D_u: float = 0.0
    nlogn1: float = 0.0
    nlogn2: float = 0.0
    A1: float = 0.0
    A2: float = 0.0
    A_u: float = 0.0
    A_c: float = 0.0
    dist_n1: float = 0.0
    dist_n2: float = 0.0
    dist_c: float = 0.0
    dist_u: float = 0.0
    sup_distance: float = 0.0
    blowup_indicator: float = 0.0

    def row(self):
        return [getattr(self, name) for name in CSV_COLUMNS]

    def is_finite(self):
        return all(math.isfinite(getattr(self, f.name)) for f in fields(self))


def build_record(state, dt, cfg: EnergyConfig, params: ModelParams,
                 target: SteadyState, acc: Accumulators,
                 q: float = 4.0) -> DiagnosticsRecord:
    vol = state.grid.cell_volume
    diss = dissipation_terms(state)
    if target.regime != "out_of_scope":
        dists = distance_to_limit(state, target)
        g_val = energy_G(state, cfg, target)
    else:
        dists = (0.0, 0.0, float(np.abs(state.c.values).max()), state.u.max_abs())
        g_val = 0.0
    return DiagnosticsRecord(
        t=state.t, dt=dt,
        mass_n1=integrate(state.n1), mass_n2=integrate(state.n2),
        mass_c=integrate(state.c),
        max_n1=state.n1.max(), max_n2=state.n2.max(), max_c=state.c.max(),
        max_u=state.u.max_abs(),
        F_value=energy_F(state, cfg), G_value=g_val,
        D_n1=diss.d_n1, D_n2=diss.d_n2, D_c4=diss.d_c4,
        D_hess=diss.d_hess, D_u=diss.d_u,
        nlogn1=float((state.n1.values * np.log(state.n1.values)).sum()) * vol,
        nlogn2=float((state.n2.values * np.log(state.n2.values)).sum()) * vol,
        A1=acc.a1, A2=acc.a2, A_u=acc.a_u, A_c=acc.a_c,
        dist_n1=dists[0], dist_n2=dists[1], dist_c=dists[2], dist_u=dists[3],
        sup_distance=max(dists),
        blowup_indicator=blow_up_indicator(state, q),
    )


# ---------------------------------------------------------------------------
# Weak-form residuals against the integrated-by-parts identities
# ---------------------------------------------------------------------------

class ScalarTestFunction:
    """Tensor-cosine spatial profile times a smooth time bump.

    T(s) = (1-s)^3 (1+3s) vanishes with its derivative at the window end,
    so the test function is compactly supported in the stored window.
    """

    def __init__(self, grid, modes, t_end):
        self.grid = grid
        self.modes = tuple(int(k) for k in modes)
        self.t_end = float(t_end)

    def _bump(self, t):
        s = t / self.t_end
        if s >= 1.0:
            return 0.0, 0.0
        T = (1.0 - s) ** 3 * (1.0 + 3.0 * s)
        dT = -12.0 * s * (1.0 - s) ** 2 / self.t_end
        return T, dT

    def _space(self, coords):
        out = 1.0
        for a, (k, L) in enumerate(zip(self.modes, self.grid.lengths)):
            out = out * np.cos(k * np.pi * coords[a] / L)
        return out

    def _space_grad(self, coords, axis):
        out = 1.0
        for a, (k, L) in enumerate(zip(self.modes, self.grid.lengths)):
            w = k * np.pi / L
            if a == axis:
                out = out * (-w * np.sin(w * coords[a]))
            else:
                out = out * np.cos(w * coords[a])
        return out

    def at_cells(self, t):
        T, _ = self._bump(t)
        return self._space(self.grid.center_mesh()) * T

    def dt_at_cells(self, t):
        _, dT = self._bump(t)
        return self._space(self.grid.center_mesh()) * dT

    def grad_at_faces(self, t):
        T, _ = self._bump(t)
        comps = []
        for a in range(self.grid.dim):
            vals = self._space_grad(self.grid.face_mesh(a), a) * T
            comps.append(np.asarray(vals))
        return comps


class SolenoidalTestFunction:
    """Curl of a polynomial bump times the same smooth time bump.

    psi = (d_y s, -d_x s[, 0]) with s = amp * prod_a (x_a (L_a - x_a) / L_a^2)^2
    (times the z bump in 3D), so psi vanishes on the boundary and is
    divergence-free identically.
    """

    def __init__(self, grid, amp, t_end):
        self.grid = grid
        self.amp = float(amp)
        self.t_end = float(t_end)

    def _bump_t(self, t):
        s = t / self.t_end
        if s >= 1.0:
            return 0.0, 0.0
        return ((1.0 - s) ** 3 * (1.0 + 3.0 * s),
                -12.0 * s * (1.0 - s) ** 2 / self.t_end)

    @staticmethod
    def _b(x, L):
        return (x * (L - x) / L ** 2) ** 2

    @staticmethod
    def _db(x, L):
        return 2.0 * (x * (L - x) / L ** 2) * (L - 2.0 * x) / L ** 2

    @staticmethod
    def _d2b(x, L):
        return 2.0 * (((L - 2.0 * x) / L ** 2) ** 2
                      - 2.0 * x * (L - x) / L ** 4)

    def _s_derivs(self, coords, orders):
        """Partial derivative of s with per-axis orders in {0,1,2}."""
        Ls = self.grid.lengths
        out = self.amp
        for a, o in enumerate(orders):
            x, L = coords[a], Ls[a]
            f = (self._b, self._db, self._d2b)[o]
            out = out * f(x, L)
        return out

    def _component(self, coords, a, extra=None):
        """psi_a, optionally differentiated once along axis `extra`."""
        nd = self.grid.dim
        orders = [0] * nd
        if a == 0:
            orders[1] += 1
            sign = 1.0
        elif a == 1:
            orders[0] += 1
            sign = -1.0
        else:
            return np.zeros(np.broadcast(*coords).shape)
        if extra is not None:
            orders[extra] += 1
        if max(orders) > 2:
            raise ValueError("bump derivatives beyond second order not supported")
        return sign * self._s_derivs(coords, orders)

    def at_faces(self, t):
        T, _ = self._bump_t(t)
        return [np.asarray(self._component(self.grid.face_mesh(a), a)) * T
                for a in range(self.grid.dim)]

    def at_cells(self, t):
        T, _ = self._bump_t(t)
        mesh = self.grid.center_mesh()
        return [np.asarray(self._component(mesh, a)) * T
                for a in range(self.grid.dim)]

    def dt_at_faces(self, t):
        _, dT = self._bump_t(t)
        return [np.asarray(self._component(self.grid.face_mesh(a), a)) * dT
                for a in range(self.grid.dim)]

    def grad_at_cells(self, t):
        """d_b psi_a at cell centers, indexed [a][b]."""
        T, _ = self._bump_t(t)
        mesh = self.grid.center_mesh()
        nd = self.grid.dim
        return [[np.asarray(self._component(mesh, a, extra=b)) * T
                 for b in range(nd)] for a in range(nd)]


def make_test_functions(grid, t_end, seed=0):
    """Deterministic draw from the documented test-function family."""
    rng = np.random.default_rng(seed)
    modes = rng.integers(1, 4, size=grid.dim)
    phi = ScalarTestFunction(grid, modes, t_end)
    psi = SolenoidalTestFunction(grid, amp=float(rng.uniform(0.5, 2.0)), t_end=t_end)
    return phi, psi


def _cell_centered_velocity(u):
    nd = u.grid.dim
    out = []
    for a, c in enumerate(u.components):
        lo = c[_sl(nd, a, slice(None, -1))]
        hi = c[_sl(nd, a, slice(1, None))]
        out.append(0.5 * (lo + hi))
    return out


def weak_residuals(frames, params: ModelParams, grad_phi_cells, phi: ScalarTestFunction,
                   psi: SolenoidalTestFunction):
    """Discrete residuals of the four weak-solution identities.

    `frames` is a list of States at (nearly) uniform output cadence whose
    final time reaches the test functions' support end.  `grad_phi_cells`
    holds the potential gradient sampled at cell centers (list per axis).
    Returns |LHS - RHS| for the n1, n2, c, and u identities.
    """
    grid = frames[0].grid
    vol = grid.cell_volume
    nd = grid.dim
    if frames[-1].t < phi.t_end * (1.0 - 1e-9):
        raise ValueError("test functions are not compactly supported in the "
                         "stored trajectory window")

    def scalar_identity(get_n, chi, mu, a_self, get_other):
        lhs = 0.0
        rhs = 0.0
        for k in range(len(frames) - 1):
            st = frames[k]
            tk, tk1 = st.t, frames[k + 1].t
            dtk = tk1 - tk
            n = get_n(st)
            phik = phi.at_cells(tk)
            # time-derivative term by exact telescoping of phi increments
            lhs -= float((n.values * (phi.at_cells(tk1) - phik)).sum()) * vol
            gphi = phi.grad_at_faces(tk)
            nf = interpolate_to_faces(n)
            uterm = 0.0
            gn = gradient_faces(n)
            gc = gradient_faces(st.c)
            diff_term = 0.0
            chem_term = 0.0
            for a in range(nd):
                uterm += float((nf.components[a] * st.u.components[a]
                                * gphi[a]).sum()) * vol
                diff_term += float((gn.components[a] * gphi[a]).sum()) * vol
                chem_term += float((nf.components[a] * gc.components[a]
                                    * gphi[a]).sum()) * vol
            lhs -= dtk * uterm
            other = get_other(st)
            react = mu * n.values * (1.0 - n.values - a_self * other.values)
            rhs += dtk * (-diff_term + chi * chem_term
                          + float((react * phik).sum()) * vol)
        n0 = get_n(frames[0])
        lhs -= float((n0.values * phi.at_cells(frames[0].t)).sum()) * vol
        return abs(lhs - rhs)

    r_n1 = scalar_identity(lambda s: s.n1, params.chi1, params.mu1, params.a1,
                           lambda s: s.n2)
    r_n2 = scalar_identity(lambda s: s.n2, params.chi2, params.mu2, params.a2,
                           lambda s: s.n1)

    # signal identity
    lhs = 0.0
    rhs = 0.0
    for k in range(len(frames) - 1):
        st = frames[k]
        tk, tk1 = st.t, frames[k + 1].t
        dtk = tk1 - tk
        phik = phi.at_cells(tk)
        lhs -= float((st.c.values * (phi.at_cells(tk1) - phik)).sum()) * vol
        gphi = phi.grad_at_faces(tk)
        cf = interpolate_to_faces(st.c)
        gc = gradient_faces(st.c)
        uterm = 0.0
        diff_term = 0.0
        for a in range(nd):
            uterm += float((cf.components[a] * st.u.components[a] * gphi[a]).sum()) * vol
            diff_term += float((gc.components[a] * gphi[a]).sum()) * vol
        lhs -= dtk * uterm
        cons = (params.alpha * st.n1.values + params.beta * st.n2.values) * st.c.values
        rhs += dtk * (-diff_term - float((cons * phik).sum()) * vol)
    lhs -= float((frames[0].c.values * phi.at_cells(frames[0].t)).sum()) * vol
    r_c = abs(lhs - rhs)

    # velocity identity
    lhs = 0.0
    rhs = 0.0
    for k in range(len(frames) - 1):
        st = frames[k]
        tk, tk1 = st.t, frames[k + 1].t
        dtk = tk1 - tk
        psik = psi.at_faces(tk)
        psik1 = psi.at_faces(tk1)
        for a in range(nd):
            lhs -= float((st.u.components[a] * (psik1[a] - psik[a])).sum()) * vol
        uc = _cell_centered_velocity(st.u)
        gpsi = psi.grad_at_cells(tk)
        adv = 0.0
        visc = 0.0
        for a in range(nd):
            dua = np.gradient(uc[a], *grid.spacing, edge_order=1)
            if nd == 2 and not isinstance(dua, list):
                dua = list(dua)
            for b in range(nd):
                adv += float((uc[a] * uc[b] * gpsi[a][b]).sum()) * vol
                visc += float((dua[b] * gpsi[a][b]).sum()) * vol
        lhs -= dtk * adv
        psic = psi.at_cells(tk)
        w = params.gamma * st.n1.values + params.delta * st.n2.values
        force = 0.0
        for a in range(nd):
            force += float((w * grad_phi_cells[a] * psic[a]).sum()) * vol
        rhs += dtk * (-visc + force)
    psi0 = psi.at_faces(frames[0].t)
    for a in range(nd):
        lhs -= float((frames[0].u.components[a] * psi0[a]).sum()) * vol
    r_u = abs(lhs - rhs)

    return (r_n1, r_n2, r_c, r_u)
