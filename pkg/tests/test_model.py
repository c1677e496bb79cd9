import numpy as np
import pytest

from chemns.expressions import CoordExpression, ExpressionError, sample_on_cells
from chemns.grid import Grid, ScalarField, VelocityField, divergence_faces
from chemns.model import (InitialDataError, ModelParams, buoyancy_force,
                          chemo_mobility, consumption_rate, lv_reaction,
                          steady_states, validate_initial_data)


def test_steady_state_symmetric_weak_competition():
    p = ModelParams(a1=0.5, a2=0.5)
    s = steady_states(p)
    assert s.regime == "coexistence"
    assert s.n1_limit == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert s.n2_limit == pytest.approx(2.0 / 3.0, rel=1e-15)


def test_steady_state_asymmetric_weak_competition():
    # hand-computed: (1-0.3)/(1-0.18), (1-0.6)/(1-0.18)
    p = ModelParams(a1=0.3, a2=0.6)
    s = steady_states(p)
    assert s.regime == "coexistence"
    assert s.n1_limit == pytest.approx(0.8536585365853658, rel=1e-15)
    assert s.n2_limit == pytest.approx(0.4878048780487805, rel=1e-15)


def test_steady_state_exclusion():
    p = ModelParams(a1=1.5, a2=0.5)
    s = steady_states(p)
    assert s.regime == "exclusion"
    assert s.n1_limit == 0.0
    assert s.n2_limit == 1.0


def test_steady_state_no_competition():
    s = steady_states(ModelParams(a1=0.0, a2=0.0))
    assert s.regime == "coexistence"
    assert s.n1_limit == 1.0 and s.n2_limit == 1.0


def test_steady_state_out_of_scope():
    assert steady_states(ModelParams(a1=1.5, a2=1.2)).regime == "out_of_scope"
    assert steady_states(ModelParams(a1=1.0, a2=1.0)).regime == "out_of_scope"


def test_lv_reaction_vanishes_at_limits():
    p = ModelParams(a1=0.4, a2=0.7, mu1=1.3, mu2=0.8)
    s = steady_states(p)
    r1, r2 = lv_reaction(s.n1_limit, s.n2_limit, p)
    assert abs(r1) < 1e-15 and abs(r2) < 1e-15
    r1, r2 = lv_reaction(0.0, 1.0, ModelParams(a1=2.0, a2=0.3))
    assert r1 == 0.0 and r2 == 0.0


def test_mobility_limits():
    n = np.array([0.0, 1.0, 10.0])
    assert np.all(chemo_mobility(n, 0.0) == n)
    m = chemo_mobility(n, 0.5)
    assert np.allclose(m, n / (1.0 + 0.5 * n))
    assert np.all(m <= n)


def test_consumption_rate_bounds():
    p = ModelParams(alpha=1.0, beta=2.0)
    n1 = np.array([0.5, 3.0])
    n2 = np.array([0.25, 1.0])
    g0 = consumption_rate(n1, n2, p)
    assert np.allclose(g0, n1 + 2.0 * n2)
    pe = ModelParams(alpha=1.0, beta=2.0, eps=0.1)
    ge = consumption_rate(n1, n2, pe)
    assert np.all(ge >= 0.0)
    assert np.all(ge <= g0 + 1e-14)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(mu1=-1.0)
    with pytest.raises(ValueError):
        ModelParams(kappa=2)
    with pytest.raises(ValueError):
        ModelParams(eps=-1e-3)


def test_buoyancy_force_zero_boundary():
    g = Grid((1.0, 1.0), (8, 8))
    rng = np.random.default_rng(0)
    n1 = ScalarField(g, rng.uniform(0.5, 1.5, g.cells))
    n2 = ScalarField(g, rng.uniform(0.5, 1.5, g.cells))
    grad_phi = VelocityField(g, [np.ones(g.face_shape(a)) for a in range(2)])
    f = buoyancy_force(n1, n2, grad_phi, ModelParams(gamma=2.0, delta=3.0))
    for a, c in enumerate(f.components):
        sl = [slice(None)] * 2
        sl[a] = 0
        assert np.all(c[tuple(sl)] == 0.0)
        sl[a] = -1
        assert np.all(c[tuple(sl)] == 0.0)


def test_validate_initial_data_rejects_nonpositive():
    g = Grid((1.0, 1.0), (8, 8))
    pos = ScalarField.full(g, 1.0)
    bad = ScalarField.full(g, 1.0)
    bad.values[3, 3] = 0.0
    u = VelocityField.zeros(g)
    with pytest.raises(InitialDataError):
        validate_initial_data(bad, pos, pos, u)
    with pytest.raises(InitialDataError):
        validate_initial_data(pos, pos, bad, u)


def test_validate_initial_data_projects_velocity():
    g = Grid((1.0, 1.0), (16, 16))
    rng = np.random.default_rng(1)
    pos = ScalarField.full(g, 1.0)
    u0 = VelocityField(g, [rng.uniform(-1, 1, g.face_shape(a)) for a in range(2)])
    _, _, _, u = validate_initial_data(pos, pos, pos, u0)
    assert float(np.abs(divergence_faces(u).values).max()) <= 1e-10


def test_expression_whitelist():
    e = CoordExpression("sin(pi*x)*cos(y)", 2)
    assert e(0.5, 0.0) == pytest.approx(1.0)
    with pytest.raises(ExpressionError):
        CoordExpression("__import__('os')", 2)
    with pytest.raises(ExpressionError):
        CoordExpression("z + 1", 2)  # z not available in 2D
    with pytest.raises(ExpressionError):
        CoordExpression("q * 2", 2)


def test_expression_derivative():
    e = CoordExpression("x**2 * y", 2)
    dx = e.derivative(0)
    assert dx(3.0, 2.0) == pytest.approx(12.0)


def test_sample_on_cells_shape():
    g = Grid((1.0, 2.0), (8, 10))
    vals = sample_on_cells(CoordExpression("x + y", 2), g)
    assert vals.shape == g.cells
    xs, ys = g.center_mesh()
    assert np.allclose(vals, xs + ys)
