"""Scenario execution: the time loop with adaptive stepping, per-step
structural checks, diagnostics output, the ODE reduction oracle, the
eps-consistency sweep, and the stabilization experiments."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarField, VelocityField, divergence_faces, integrate
from .expressions import CoordExpression, sample_gradient_on_faces, sample_on_cells
from .model import (ModelParams, buoyancy_force, steady_states,
                    validate_initial_data)
from .flow import CFLError, SolverError, advective_dt_limit, velocity_step
from .transport import (PositivityError, State, chemotactic_dt_limit,
                        positivity_dt_limit, reaction_dt_limit, scalar_step)
from .diagnostics import (Accumulators, CSV_COLUMNS, DiagnosticsRecord,
                          build_record, distance_to_limit)
from .config import ScenarioConfig
from .snapshots import write_snapshot

MASS_BOUND_SLACK = 1e-8
LEDGER_TOL = 1e-10


@dataclass
class RunSummary:
    """Reproducible run-level facts; wall clock is kept out of the JSON."""

    final_time: float
    steps: int
    regime: str
    final_distances: tuple
    accumulators: tuple  # (A1, A2, A_u, A_c)
    min_n1: float
    min_n2: float
    min_c: float
    max_c_monotone: bool
    blow_up: bool
    verdict: str
    f_initial: float
    f_excess_max: float
    g_initial: float
    g_final: float
    a1_last_unit_increment: float
    a2_last_unit_increment: float
    config_hash: str
    wall_clock_s: float = 0.0

    def json_dict(self):
        d = {
            "final_time": self.final_time,
            "steps": self.steps,
            "regime": self.regime,
            "final_distances": list(self.final_distances),
            "accumulators": list(self.accumulators),
            "min_n1": self.min_n1,
            "min_n2": self.min_n2,
            "min_c": self.min_c,
            "max_c_monotone": self.max_c_monotone,
            "blow_up": self.blow_up,
            "verdict": self.verdict,
            "f_initial": self.f_initial,
            "f_excess_max": self.f_excess_max,
            "g_initial": self.g_initial,
            "g_final": self.g_final,
            "a1_last_unit_increment": self.a1_last_unit_increment,
            "a2_last_unit_increment": self.a2_last_unit_increment,
            "config_hash": self.config_hash,
        }
        return d


@dataclass
class RunResult:
    summary: RunSummary
    records: list
    frames: list = field(default_factory=list)


def build_initial_state(config: ScenarioConfig):
    grid = config.grid
    dim = grid.dim
    scalars = []
    for key in ("init.n1", "init.n2", "init.c"):
        expr = CoordExpression(config[key], dim)
        scalars.append(ScalarField(grid, sample_on_cells(expr, grid)))
    comps = []
    for a, key in enumerate(("init.u_x", "init.u_y", "init.u_z")[:dim]):
        expr = CoordExpression(config[key], dim)
        comps.append(np.asarray(expr(*grid.face_mesh(a)), dtype=np.float64))
    u0 = VelocityField(grid, comps)
    n1, n2, c, u = validate_initial_data(*scalars, u0)
    return State.initial(grid, n1, n2, c, u)


def phi_gradients(config: ScenarioConfig):
    grid = config.grid
    expr = CoordExpression(config["phi.expr"], grid.dim)
    faces = sample_gradient_on_faces(expr, grid)
    cells = [np.asarray(expr.derivative(a)(*grid.center_mesh()), dtype=np.float64)
             for a in range(grid.dim)]
    return faces, cells


def _csv_row(values):
    return ",".join(repr(float(v)) for v in values)


def write_outputs(out_dir, result: RunResult, config: ScenarioConfig,
                  snapshots=False):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "diagnostics.csv"), "w", encoding="ascii",
              newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in result.records:
            fh.write(_csv_row(rec.row()) + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="ascii",
              newline="\n") as fh:
        json.dump(result.summary.json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if snapshots:
        grid = config.grid
        for k, st in enumerate(result.frames):
            for name, fld in (("n1", st.n1), ("n2", st.n2), ("c", st.c)):
                path = os.path.join(out_dir, f"snap_{name}_{k:05d}.bin")
                write_snapshot(path, name, st.t, grid, fld.values)


def run_scenario(config: ScenarioConfig, out_dir=None, snapshots=None,
                 store_trajectory=False) -> RunResult:
    """Execute one scenario deterministically.

    Steps land exactly on the output cadence so repeated runs (and runs
    compared across eps) share their output times.  Raises PositivityError
    on scheme bugs and SolverError on step-size underflow; a blow-up of the
    monitored norms ends the run with a clean verdict instead.
    """
    t_start = time.perf_counter()
    grid = config.grid
    params = config.params
    energy = config.energy
    target = steady_states(params)
    grad_phi_faces, _ = phi_gradients(config)
    state = build_initial_state(config)

    dt_max = config["transport.dt_max"]
    dt_min = config["transport.dt_min"]
    t_end = config["run.t_end"]
    cadence = config["output.cadence"]
    ceiling = config["run.blowup_ceiling"]
    q = config["diagnostics.q"]
    flow_safety = config["flow.cfl_safety"]
    transport_safety = config["transport.cfl_safety"]
    if snapshots is None:
        snapshots = config["output.snapshots"]

    acc = Accumulators()
    records = [build_record(state, 0.0, energy, params, target, acc, q)]
    frames = [state] if (store_trajectory or snapshots) else []
    f0 = records[0].F_value
    g0 = records[0].G_value
    f_excess = 0.0
    min_n1 = state.n1.min()
    min_n2 = state.n2.min()
    min_c = state.c.min()
    mass_cap1 = max(integrate(state.n1), grid.volume)
    mass_cap2 = max(integrate(state.n2), grid.volume)
    prev_c_max = state.c.max()
    max_c_monotone = True
    blow_up = False
    steps = 0
    next_out_idx = 1

    while state.t < t_end - 1e-12:
        next_out = min(next_out_idx * cadence, t_end)
        dt = min(
            dt_max,
            advective_dt_limit(state.u, grid, flow_safety),
            chemotactic_dt_limit(state.c, params, transport_safety),
            reaction_dt_limit(state.n1, state.n2, params, transport_safety),
            positivity_dt_limit(state, params),
            next_out - state.t,
        )
        if dt < dt_min:
            raise SolverError(f"step size {dt:g} fell below transport.dt_min "
                              f"at t={state.t:g}")
        n1, n2, c, ledger = scalar_step(state, params, dt)
        e1, e2 = ledger.relative_error()
        if e1 > LEDGER_TOL or e2 > LEDGER_TOL:
            raise PositivityError(
                f"mass-reaction ledger error ({e1:g}, {e2:g}) exceeds "
                f"{LEDGER_TOL:g} at t={state.t:g}")
        forcing = buoyancy_force(n1, n2, grad_phi_faces, params)
        u, p = velocity_step(state.u, forcing, params, dt, flow_safety)
        hit_output = abs(state.t + dt - next_out) < 1e-12
        t_new = next_out if hit_output else state.t + dt
        state = State(t_new, n1, n2, c, u, p)
        steps += 1

        state.check_invariants(prev_c_max)
        if state.c.max() > prev_c_max + 1e-12:
            max_c_monotone = False
        prev_c_max = state.c.max()
        min_n1 = min(min_n1, state.n1.min())
        min_n2 = min(min_n2, state.n2.min())
        min_c = min(min_c, state.c.min())
        for cap, fld, name in ((mass_cap1, state.n1, "n1"),
                               (mass_cap2, state.n2, "n2")):
            if integrate(fld) > cap + MASS_BOUND_SLACK:
                raise PositivityError(
                    f"logistic mass bound violated for {name} at t={state.t:g}")
        acc.update(state, dt, target)

        if state.n1.max() + state.n2.max() + state.c.max() > ceiling:
            blow_up = True
        if hit_output or blow_up or state.t >= t_end - 1e-12:
            rec = build_record(state, dt, energy, params, target, acc, q)
            if rec.blowup_indicator > ceiling:
                blow_up = True
            records.append(rec)
            f_excess = max(f_excess, rec.F_value - f0)
            if store_trajectory or snapshots:
                frames.append(state)
            if hit_output:
                next_out_idx += 1
        if blow_up:
            break

    if target.regime != "out_of_scope":
        dists = distance_to_limit(state, target)
    else:
        dists = (records[-1].dist_n1, records[-1].dist_n2,
                 records[-1].dist_c, records[-1].dist_u)

    def _acc_at(attr, t_cut):
        prior = [getattr(r, attr) for r in records if r.t <= t_cut + 1e-9]
        return prior[-1] if prior else 0.0

    summary = RunSummary(
        final_time=state.t,
        steps=steps,
        regime=target.regime,
        final_distances=dists,
        accumulators=(acc.a1, acc.a2, acc.a_u, acc.a_c),
        min_n1=min_n1, min_n2=min_n2, min_c=min_c,
        max_c_monotone=max_c_monotone,
        blow_up=blow_up,
        verdict="blow-up" if blow_up else "completed",
        f_initial=f0,
        f_excess_max=f_excess,
        g_initial=g0,
        g_final=records[-1].G_value,
        a1_last_unit_increment=acc.a1 - _acc_at("A1", state.t - 1.0),
        a2_last_unit_increment=acc.a2 - _acc_at("A2", state.t - 1.0),
        config_hash=config.config_hash(),
        wall_clock_s=time.perf_counter() - t_start,
    )
    result = RunResult(summary, records, frames)
    if out_dir is not None:
        write_outputs(out_dir, result, config, snapshots)
    return result


# ---------------------------------------------------------------------------
# ODE reduction oracle and the uniform-data equivalence test
# ---------------------------------------------------------------------------

def ode_oracle(params: ModelParams, y0, T, dt_ode):
    """Classical RK4 integration of the spatially homogeneous reduction.

    Returns (times, values) with values[k] = (n1, n2, c) at times[k].
    """
    from .model import consumption_rate, lv_reaction

    def rhs(y):
        r1, r2 = lv_reaction(y[0], y[1], params)
        return np.array([r1, r2, -consumption_rate(y[0], y[1], params) * y[2]])

    n_steps = int(round(T / dt_ode))
    times = np.arange(n_steps + 1) * dt_ode
    out = np.empty((n_steps + 1, 3))
    y = np.array(y0, dtype=float)
    if np.any(y <= 0):
        raise ValueError("ODE oracle requires positive initial data")
    out[0] = y
    for k in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt_ode * k1)
        k3 = rhs(y + 0.5 * dt_ode * k2)
        k4 = rhs(y + dt_ode * k3)
        y = y + dt_ode / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = y
    return times, out


def uniform_equivalence_test(config: ScenarioConfig):
    """Run the full PDE solver on uniform data against the RK4 oracle.

    Both integrators use transport.dt_max as their fixed step and are
    compared every step.  Deviations are relative to the oracle's running
    sup per field.  Returns a dict with per-field deviations and max |u|.
    """
    grid = config.grid
    params = config.params
    state = build_initial_state(config)
    grad_phi_faces, grad_phi_cells = phi_gradients(config)
    for comp in grad_phi_faces.components:
        if np.any(comp != 0.0):
            raise ValueError("uniform equivalence requires grad(Phi) = 0")
    for fld in (state.n1, state.n2, state.c):
        if np.ptp(fld.values) != 0.0:
            raise ValueError("uniform equivalence requires uniform initial data")
    dt = config["transport.dt_max"]
    t_end = config["run.t_end"]
    n_steps = int(round(t_end / dt))
    y = np.array([state.n1.values.flat[0], state.n2.values.flat[0],
                  state.c.values.flat[0]])
    _, oracle = ode_oracle(params, y, t_end, dt)
    max_dev = np.zeros(3)
    sup_oracle = np.abs(y).copy()
    max_u = state.u.max_abs()
    for k in range(n_steps):
        n1, n2, c, _ = scalar_step(state, params, dt)
        forcing = buoyancy_force(n1, n2, grad_phi_faces, params)
        u, p = velocity_step(state.u, forcing, params, dt)
        state = State(state.t + dt, n1, n2, c, u, p)
        ref = oracle[k + 1]
        sup_oracle = np.maximum(sup_oracle, np.abs(ref))
        for i, fld in enumerate((n1, n2, c)):
            max_dev[i] = max(max_dev[i], float(np.abs(fld.values - ref[i]).max()))
        max_u = max(max_u, u.max_abs())
    rel = max_dev / sup_oracle
    return {"n1": rel[0], "n2": rel[1], "c": rel[2], "max_u": max_u}


# ---------------------------------------------------------------------------
# eps-consistency sweep and stabilization experiments
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    rows: list            # (eps_hi, eps_lo, d_n1, d_n2, d_c, d_u)
    completed_eps: list
    error: str = ""


def _trajectory_l2_distance(frames_a, frames_b):
    if len(frames_a) != len(frames_b):
        raise ValueError("trajectories have different output counts")
    vol = frames_a[0].grid.cell_volume
    acc = np.zeros(4)
    for k in range(len(frames_a) - 1):
        dt = frames_a[k + 1].t - frames_a[k].t
        a, b = frames_a[k], frames_b[k]
        acc[0] += dt * float(((a.n1.values - b.n1.values) ** 2).sum()) * vol
        acc[1] += dt * float(((a.n2.values - b.n2.values) ** 2).sum()) * vol
        acc[2] += dt * float(((a.c.values - b.c.values) ** 2).sum()) * vol
        acc[3] += dt * sum(
            float(((ca - cb) ** 2).sum())
            for ca, cb in zip(a.u.components, b.u.components)) * vol
    return tuple(np.sqrt(acc))


def eps_consistency_sweep(config: ScenarioConfig, eps_list) -> SweepResult:
    """Identical scenarios across eps; pairwise L2(space-time) distances."""
    rows = []
    done = []
    trajectories = {}
    for eps in eps_list:
        cfg = config.with_overrides({"params.eps": float(eps)})
        try:
            res = run_scenario(cfg, store_trajectory=True)
        except (PositivityError, SolverError, CFLError) as exc:
            return SweepResult(rows, done, error=f"eps={eps:g}: {exc}")
        trajectories[eps] = res.frames
        done.append(eps)
    for hi, lo in zip(eps_list[:-1], eps_list[1:]):
        d = _trajectory_l2_distance(trajectories[hi], trajectories[lo])
        rows.append((hi, lo) + d)
    return SweepResult(rows, done)


STABILIZATION_TOL = 1e-2
TAIL_FRACTION = 0.2
TAIL_SLACK = 1e-6


def stabilization_experiment(case: str, overrides=None, out_dir=None):
    """Run a canonical stabilization scenario and check the predicted limit.

    Returns (RunResult, verdict dict).  The verdict requires final
    distances below tolerance and a nonincreasing distance tail.
    """
    from .config import canonical_config

    if case not in ("coexistence", "exclusion"):
        raise ValueError("case must be 'coexistence' or 'exclusion'")
    config = canonical_config(f"{case}_64")
    if overrides:
        config = config.with_overrides(overrides)
    result = run_scenario(config, out_dir=out_dir)
    dists = result.summary.final_distances
    tail_start = (1.0 - TAIL_FRACTION) * result.summary.final_time
    tail = [r for r in result.records if r.t >= tail_start - 1e-9]
    monotone = True
    for prev, cur in zip(tail[:-1], tail[1:]):
        for attr in ("dist_n1", "dist_n2", "dist_c", "dist_u"):
            if getattr(cur, attr) > getattr(prev, attr) + TAIL_SLACK:
                monotone = False
    passed = (not result.summary.blow_up
              and all(d <= STABILIZATION_TOL for d in dists)
              and monotone)
    verdict = {
        "case": case,
        "passed": passed,
        "final_distances": list(dists),
        "tolerance": STABILIZATION_TOL,
        "tail_monotone": monotone,
    }
    return result, verdict
