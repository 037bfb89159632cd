import logging
import math

import numpy as np
import pytest
from conftest import random_slip_field
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nsac import diagnostics, error
from nsac.const import SIGMA
from nsac.constitutive import Constitutive
from nsac.diagnostics import (
    DiagWriter,
    WeakEntropyBalance,
    energy_drift,
    entropy_budget_check,
    entropy_production_terms,
    entropy_step_slack,
    epsilon_tau,
    initial_average_condition,
    phi_bound_check,
    read_records,
    record,
    relative_interface_energy,
    theta_floor_check,
    tilt_excess,
    weak_entropy_residual,
)
from nsac.grid import GridSpec, VectorField
from nsac.model import DiagRecord, EntropyProduction, LatentHeatSpec, ModelParams, StepConfig
from nsac.timestepper import SimState, Stepper


def _record(t, S=0.0, E_tot=1.0, **values):
    fields = dict.fromkeys(DiagRecord.columns(), 0.0)
    fields.update(t=t, S=S, E_tot=E_tot, **values)
    return DiagRecord(**fields)


def _plane(eps, n=256):
    g = GridSpec(n, 8, 1.0, 8.0 / n)
    x, _ = g.cell_centers()
    return g.scalar(np.tanh((x - 0.5) / (math.sqrt(2) * eps)))


def _circle(g, r0, eps):
    x, y = g.cell_centers()
    r = np.hypot(x - 0.5, y - 0.5)
    return np.tanh((r0 - r) / (math.sqrt(2) * eps))


def _unit_x(g):
    xi = g.zero_vector()
    xi.u[1:-1] = 1.0
    return xi


@pytest.fixture
def series(square, arctan_params):
    x, y = square.cell_centers()
    theta = 1.0 + 0.5 * np.exp(-((x - 0.3) ** 2 + (y - 0.5) ** 2) / 0.02)
    state = SimState.initial(square, _circle(square, 0.3, arctan_params.eps), theta, arctan_params)
    stepper = Stepper(arctan_params, StepConfig())
    states = [state]
    for _ in range(3):
        state, _ = stepper.step(state)
        states.append(state)
    return states


def test_record_of_a_uniform_state(grid, arctan_params):
    state = SimState.initial(grid, -1.0, 1.0, arctan_params)
    rec = record(state, arctan_params)
    c = Constitutive(arctan_params)
    assert rec.E_kin == 0.0
    assert rec.E_int == 0.0
    assert rec.H_heat == pytest.approx(c.heat_Q_delta(1.0) * grid.area)
    assert rec.E_tot == pytest.approx(rec.H_heat)
    assert rec.S == pytest.approx((c.Lambda(1.0) - 1.0) * grid.area)
    assert rec.phi_min == rec.phi_max == -1.0
    assert rec.theta_min == pytest.approx(1.0)
    assert rec.equip_disc == 0.0
    assert rec.perimeter_est == 0.0
    assert rec.max_div == 0.0
    assert rec.is_finite()


def test_record_of_a_plane_interface():
    eps = 0.02
    phi = _plane(eps)
    g = phi.grid
    params = ModelParams(eps=eps)
    rec = record(SimState.initial(g, phi, 1.0, params), params)
    assert rec.perimeter_est == pytest.approx(g.ly, rel=1e-6)
    assert rec.E_int == pytest.approx(SIGMA * g.ly, rel=0.01)
    assert rec.equip_disc <= 0.05 * rec.E_int


def test_writer_round_trip(tmp_path):
    path = tmp_path / "out" / "diagnostics.csv"
    rows = [_record(0.0, S=1.5, phi_min=-1.0), _record(0.1, S=1 / 3, theta_max=2.25)]
    with DiagWriter(path) as writer:
        for row in rows:
            writer.write(row)
    assert path.read_text().splitlines()[0] == ",".join(DiagRecord.columns())
    assert read_records(path) == rows


def test_entropy_productions_are_nonnegative(series, arctan_params):
    for prev, nxt in zip(series[:-1], series[1:]):
        prod = entropy_production_terms(prev, nxt, nxt.t - prev.t, arctan_params)
        assert prod.viscous >= 0
        assert prod.conduction >= 0
        assert prod.kinetic > 0
        assert prod.total == pytest.approx(prod.viscous + prod.conduction + prod.kinetic)
    with pytest.raises(error.PreconditionError):
        entropy_production_terms(series[0], series[1], 0.0, arctan_params)


def test_entropy_budget():
    records = [_record(0.0, S=0.0), _record(1.0, S=1.0), _record(2.0, S=3.0)]
    productions = [EntropyProduction(0.5, 0.0, 0.0, 1.0), EntropyProduction(0.25, 0.5, 0.25, 1.0)]
    assert entropy_budget_check(records, productions) == pytest.approx(0.5)
    assert entropy_budget_check(records[:1], []) == 0.0
    assert entropy_step_slack(records) == pytest.approx(1.0)
    assert entropy_step_slack(records[:1]) == 0.0


def test_entropy_budget_rejects_misaligned_series():
    records = [_record(0.0), _record(1.0), _record(2.0)]
    with pytest.raises(error.MisalignedSeries):
        entropy_budget_check(records, [EntropyProduction(0.0, 0.0, 0.0, 1.0)])
    with pytest.raises(error.MisalignedSeries):
        entropy_budget_check(
            records, [EntropyProduction(0.0, 0.0, 0.0, 1.0), EntropyProduction(0.0, 0.0, 0.0, 0.5)]
        )


def test_energy_drift():
    records = [_record(0.0, E_tot=2.0), _record(1.0, E_tot=2.2), _record(2.0, E_tot=1.9)]
    drift = energy_drift(records)
    assert_allclose(drift, [0.0, 0.1, -0.05])


def test_weak_residual_with_constant_test_function_is_the_budget(series, arctan_params):
    g = series[0].grid
    records = [record(state, arctan_params) for state in series]
    productions = [
        entropy_production_terms(prev, nxt, nxt.t - prev.t, arctan_params)
        for prev, nxt in zip(series[:-1], series[1:])
    ]
    residual = weak_entropy_residual(series, g.scalar(1.0), arctan_params)
    assert residual == pytest.approx(entropy_budget_check(records, productions), abs=1e-12)


def test_weak_residual_keeps_the_smallest_slack(series, arctan_params):
    g = series[0].grid
    records = [record(state, arctan_params) for state in series]
    balance = WeakEntropyBalance(g.scalar(1.0), arctan_params)
    productions = []
    previous = math.inf
    for k, (prev, nxt) in enumerate(zip(series[:-1], series[1:]), start=1):
        balance.add(prev, nxt)
        productions.append(entropy_production_terms(prev, nxt, nxt.t - prev.t, arctan_params))
        budget = entropy_budget_check(records[: k + 1], productions)
        assert balance.residual == pytest.approx(budget, abs=1e-12)
        assert balance.residual <= previous
        previous = balance.residual


def test_entropy_budget_of_a_resting_run_closes(square, arctan_params):
    x, y = square.cell_centers()
    theta = 1.0 + 0.5 * np.exp(-((x - 0.3) ** 2 + (y - 0.5) ** 2) / 0.02)
    state = SimState.initial(square, _circle(square, 0.3, arctan_params.eps), theta, arctan_params)
    stepper = Stepper(arctan_params, StepConfig(freeze_velocity=True))
    records = [record(state, arctan_params)]
    productions = []
    for _ in range(5):
        nxt, _ = stepper.step(state)
        productions.append(entropy_production_terms(state, nxt, nxt.t - state.t, arctan_params))
        records.append(record(nxt, arctan_params))
        state = nxt
    produced = sum(prod.total * prod.dt for prod in productions)
    assert produced > 0
    assert abs(records[-1].S - records[0].S - produced) <= 1e-4 * produced
    assert entropy_budget_check(records, productions) >= -1e-6 * abs(records[0].S)


def test_weak_balance_accumulates_incrementally(series, arctan_params):
    g = series[0].grid
    x, _ = g.cell_centers()
    zeta = g.scalar(1.0 + np.cos(math.pi * x))
    balance = WeakEntropyBalance(zeta, arctan_params)
    assert balance.residual == 0.0
    for prev, nxt in zip(series[:-1], series[1:]):
        balance.add(prev, nxt)
    assert balance.residual == pytest.approx(weak_entropy_residual(series, zeta, arctan_params))
    with pytest.raises(error.MisalignedSeries):
        balance.add(series[1], series[0])


def test_weak_balance_validates_the_test_function(square, arctan_params):
    x, _ = square.cell_centers()
    with pytest.raises(error.PreconditionError):
        WeakEntropyBalance(square.scalar(x - 0.5), arctan_params)
    with pytest.raises(error.PreconditionError, match="Neumann"):
        WeakEntropyBalance(square.scalar(x), arctan_params)


def test_relative_energy_splits_into_tilt_and_equipartition():
    g = GridSpec(64, 64)
    params = ModelParams(eps=0.02)
    phi = g.scalar(_circle(g, 0.3, params.eps))
    zeta = g.scalar(1.0)
    xi = _unit_x(g)
    relative = relative_interface_energy(phi, zeta, xi, params)
    excess = tilt_excess(phi, zeta, xi, params)
    assert relative >= 0
    assert relative == pytest.approx(excess.equip_excess + excess.grad_excess, rel=1e-9, abs=1e-10)
    assert excess.grad_excess > 0


def test_relative_energy_of_a_plane_interface():
    eps = 0.02
    phi = _plane(eps)
    g = phi.grid
    params = ModelParams(eps=eps)
    zeta = g.scalar(1.0)
    energy = diagnostics.interface_energy(phi, eps)
    aligned = relative_interface_energy(phi, zeta, _unit_x(g), params)
    assert 0 <= aligned <= 0.01 * energy
    reverse = _unit_x(g)
    reverse.u[1:-1] = -1.0
    assert relative_interface_energy(phi, zeta, reverse, params) == pytest.approx(
        2 * energy, rel=0.02
    )
    excess = tilt_excess(phi, zeta, _unit_x(g), params)
    assert excess.normal_excess <= 4 * aligned + 1e-12


def test_relative_energy_preconditions(square):
    params = ModelParams(eps=0.05)
    phi = square.scalar(_circle(square, 0.3, 0.05))
    zeta = square.scalar(1.0)
    xi = _unit_x(square)
    with pytest.raises(error.PreconditionError):
        relative_interface_energy(phi, square.scalar(-1.0), xi, params)
    xi.u[1:-1] = 1.5
    with pytest.raises(error.PreconditionError):
        relative_interface_energy(phi, zeta, xi, params)
    leaking = VectorField(square, np.full((33, 32), 0.5), np.zeros((32, 33)))
    with pytest.raises(error.PreconditionError):
        tilt_excess(phi, zeta, leaking, params)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), weight=st.floats(0.0, 1.0))
def test_tilt_excess_is_controlled_by_the_relative_energy(seed, weight):
    rng = np.random.default_rng(seed)
    g = GridSpec(24, 16, 1.0, 2.0 / 3.0)
    x, y = g.cell_centers()
    phi = g.scalar(rng.uniform(-1.2, 1.2, size=g.shape))
    zeta = g.scalar(1.0 + weight * np.cos(math.pi * x) * np.cos(1.5 * math.pi * y))
    xi = random_slip_field(g, rng)
    scale = 0.99 / np.max(np.hypot(*xi.centered()))
    xi = VectorField(g, scale * xi.u, scale * xi.v)
    params = ModelParams(eps=rng.uniform(0.02, 0.2))

    relative = relative_interface_energy(phi, zeta, xi, params)
    excess = tilt_excess(phi, zeta, xi, params)
    assert excess.grad_excess >= 0
    assert excess.equip_excess >= 0
    assert excess.grad_excess + excess.equip_excess <= relative + 1e-8
    assert excess.normal_excess <= 4 * relative + 1e-8


def test_relative_energy_of_uniform_phase_is_the_well_energy(square):
    params = ModelParams(eps=0.05)
    phi = square.scalar(0.0)
    value = relative_interface_energy(phi, square.scalar(1.0), square.zero_vector(), params)
    assert value == pytest.approx(0.25 / 0.05)


def test_epsilon_tau(arctan_params, linear_params):
    assert epsilon_tau(arctan_params, 0.1) == pytest.approx(0.231 / (math.pi / 2))
    assert epsilon_tau(linear_params, 0.1) == 0.0


def test_phi_bound_check(arctan_params):
    inside = _record(0.0, phi_min=-1.0, phi_max=1.05)
    outside = _record(0.0, phi_min=-1.0, phi_max=1.2)
    assert phi_bound_check(inside, arctan_params, 0.1) is True
    assert phi_bound_check(outside, arctan_params, 0.1) is False
    assert phi_bound_check(inside, arctan_params.replace(eps=0.5), 0.1) is None


def test_theta_floor_check():
    records = [_record(0.0, theta_min=1.0), _record(1.0, theta_min=0.6, clamp_mass=1e-9)]
    assert theta_floor_check(records, c0=1.0) is True
    assert theta_floor_check(records, c0=1.0, clamp_threshold=1e-10) is False
    assert theta_floor_check(records, c0=1.0, clamp_threshold=1e-8) is True
    cooled = records + [_record(2.0, theta_min=0.4)]
    assert theta_floor_check(cooled, c0=1.0) is False


@pytest.mark.parametrize(
    "c0, alpha",
    [(1.5, 0.75), (0.0, 0.75), (1.0, 1.0)],
    ids=["initial-below-c0", "zero-c0", "alpha-one"],
)
def test_theta_floor_check_reports_inapplicable_cases(c0, alpha, caplog):
    records = [_record(0.0, theta_min=1.0), _record(1.0, theta_min=0.1)]
    with caplog.at_level(logging.WARNING, logger="nsac.diagnostics"):
        assert theta_floor_check(records, c0, params=ModelParams(alpha=alpha)) is None
    assert "inapplicable" in caplog.text
    assert theta_floor_check(records, 1.0, params=ModelParams(alpha=0.75)) is False


def test_initial_average_condition(grid, arctan_params):
    cold = SimState.initial(grid, -1.0, 1.0, arctan_params)
    margin, ok = initial_average_condition(cold, arctan_params)
    assert not ok
    assert margin == pytest.approx(Constitutive(arctan_params).Lambda(1.0) - 2.0, rel=1e-9)
    hot = SimState.initial(grid, -1.0, 5.0, arctan_params)
    assert initial_average_condition(hot, arctan_params)[1]


def test_linear_latent_heat_record(grid):
    params = ModelParams(alpha=1.0, latent=LatentHeatSpec.linear(2.0))
    rec = record(SimState.initial(grid, 1.0, 4.0, params), params)
    assert rec.S == pytest.approx((4.0 / 2.0 + 1.0) * grid.area, rel=1e-6)
