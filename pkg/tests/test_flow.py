import numpy as np
import pytest

from chemns.grid import (Grid, ScalarField, VelocityField, divergence_faces,
                         gradient_faces, dot_faces, integrate)
from chemns.flow import (CFLError, advective_dt_limit, kinetic_energy,
                         kinetic_energy_ledger, pressure_solver, project,
                         scalar_helmholtz_solver, skew_advect, stokes_handle,
                         velocity_grad_norm_sq, velocity_step, yosida_apply)
from chemns.model import ModelParams


def random_velocity(grid, rng, amp=1.0):
    return VelocityField(grid, [rng.uniform(-amp, amp, grid.face_shape(a))
                                for a in range(grid.dim)])


@pytest.fixture(params=[((1.0, 1.0), (16, 16)), ((1.0, 0.5, 1.5), (8, 6, 10))])
def grid(request):
    return Grid(*request.param)


def test_poisson_inverts_laplacian(grid):
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(grid.cells)
    rhs -= rhs.mean()
    p = pressure_solver(grid).solve(ScalarField(grid, rhs))
    from chemns.grid import laplacian_neumann
    res = laplacian_neumann(p).values - rhs
    assert np.abs(res).max() <= 1e-10 * max(1.0, np.abs(rhs).max())
    assert abs(p.values.mean()) <= 1e-13


def test_helmholtz_solver(grid):
    rng = np.random.default_rng(1)
    f = ScalarField(grid, rng.uniform(0.5, 1.5, grid.cells))
    dt = 0.01
    sol = scalar_helmholtz_solver(grid).solve(f, dt)
    from chemns.grid import laplacian_neumann
    res = sol.values - dt * laplacian_neumann(sol).values - f.values
    assert np.abs(res).max() <= 1e-11


def test_helmholtz_preserves_cell_sum(grid):
    rng = np.random.default_rng(2)
    f = ScalarField(grid, rng.uniform(0.5, 1.5, grid.cells))
    sol = scalar_helmholtz_solver(grid).solve(f, 0.05)
    assert integrate(sol) == pytest.approx(integrate(f), rel=1e-13)


def test_projection_divergence_and_idempotence(grid):
    rng = np.random.default_rng(3)
    u_star = random_velocity(grid, rng)
    u, p = project(u_star)
    div = np.abs(divergence_faces(u).values).max()
    assert div <= 1e-10
    u2, _ = project(u)
    drift = max(np.abs(a - b).max() for a, b in zip(u.components, u2.components))
    assert drift <= 1e-11


def test_projection_annihilates_gradients(grid):
    rng = np.random.default_rng(4)
    q = ScalarField(grid, rng.standard_normal(grid.cells))
    gq = gradient_faces(q)
    u, _ = project(VelocityField(grid, [c.copy() for c in gq.components]))
    assert max(np.abs(c).max() for c in u.components) <= 1e-11


def test_yosida_identity_at_zero(grid):
    rng = np.random.default_rng(5)
    u = random_velocity(grid, rng)
    v = yosida_apply(u, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(u.components, v.components))


def test_yosida_eigenmode_damping():
    # assemble one velocity-component operator on a small 3D grid and check
    # the resolvent damps each eigenvector by exactly 1/(1 + eps * lambda)
    grid = Grid((1.0, 1.0, 1.0), (8, 8, 8))
    handle = stokes_handle(grid)
    A = handle.assemble_component_matrix(0)
    lam, V = np.linalg.eigh(A)
    assert lam.min() > 0.0
    eps = 1e-2
    shape = list(grid.face_shape(0))
    shape[0] -= 2
    worst = 0.0
    for idx in (0, len(lam) // 2, len(lam) - 1):
        comps = [np.zeros(grid.face_shape(a)) for a in range(3)]
        comps[0][1:-1, :, :] = V[:, idx].reshape(shape)
        damped = handle.solve_resolvent(VelocityField(grid, comps), eps)
        expect = V[:, idx].reshape(shape) / (1.0 + eps * lam[idx])
        worst = max(worst, np.abs(damped.components[0][1:-1, :, :] - expect).max())
    assert worst <= 1e-12


def test_yosida_converges_to_identity(grid):
    rng = np.random.default_rng(6)
    u = random_velocity(grid, rng)
    errs = []
    for eps in (1e-1, 1e-2, 1e-3):
        v = yosida_apply(u, eps)
        errs.append(max(np.abs(a - b).max()
                        for a, b in zip(u.components, v.components)))
    assert errs[0] > errs[1] > errs[2]


def test_skew_advection_does_no_work(grid):
    rng = np.random.default_rng(7)
    w, _ = project(random_velocity(grid, rng))
    v = random_velocity(grid, rng)
    adv = skew_advect(w, v)
    work = abs(dot_faces(adv, v))
    norm = kinetic_energy(v)
    assert work <= 1e-10 * norm


def test_velocity_grad_matches_laplacian(grid):
    # <u, lap u> = -|grad u|^2 with the wall-weighted seminorm
    from chemns.flow import apply_component_laplacian
    rng = np.random.default_rng(8)
    u = random_velocity(grid, rng)
    vol = grid.cell_volume
    inner = sum(float((u.components[a]
                       * apply_component_laplacian(u.components[a], a, grid)).sum())
                for a in range(grid.dim)) * vol
    assert abs(inner + velocity_grad_norm_sq(u)) <= 1e-10 * max(1.0, abs(inner))


def test_velocity_step_respects_cfl():
    grid = Grid((1.0, 1.0), (16, 16))
    rng = np.random.default_rng(9)
    u, _ = project(random_velocity(grid, rng))
    forcing = VelocityField.zeros(grid)
    params = ModelParams()
    dt_bad = 10.0 * advective_dt_limit(u, grid)
    with pytest.raises(CFLError):
        velocity_step(u, forcing, params, dt_bad)


def test_velocity_step_decays_unforced():
    grid = Grid((1.0, 1.0), (16, 16))
    rng = np.random.default_rng(10)
    u, _ = project(random_velocity(grid, rng, amp=0.1))
    forcing = VelocityField.zeros(grid)
    params = ModelParams()
    e0 = kinetic_energy(u)
    for _ in range(10):
        u, _ = velocity_step(u, forcing, params, 1e-3)
    assert kinetic_energy(u) < e0
    assert np.abs(divergence_faces(u).values).max() <= 1e-10


def test_kinetic_energy_ledger_consistency():
    grid = Grid((1.0, 1.0), (16, 16))
    rng = np.random.default_rng(11)
    u, _ = project(random_velocity(grid, rng, amp=0.1))
    forcing = VelocityField(grid, [0.01 * np.ones(grid.face_shape(a))
                                   for a in range(2)])
    forcing.zero_boundary()
    params = ModelParams(eps=1e-3)
    dt = 1e-3
    u_new, _ = velocity_step(u, forcing, params, dt)
    led = kinetic_energy_ledger(u, u_new, forcing, dt, params.eps)
    assert abs(led.advection_work) <= 1e-10 * max(1.0, led.energy_before)
    assert led.viscous_dissipation >= 0.0
