import math
from dataclasses import replace

import numpy as np
import pytest

from nsac import benchmarks, error
from nsac.benchmarks import (
    SOLVABILITY_RATIO,
    CoupledBench,
    FrontBench,
    MCFBench,
    SweepBench,
    calibrate_c_ell,
    fit_radius,
    front_position,
    init_tanh_circle,
    init_tanh_plane,
    mcf_circle_oracle,
    measure_interface,
    run_coupled_release,
    run_energy_convergence_sweep,
    run_front_benchmark,
    run_mcf_benchmark,
    write_report,
)
from nsac.const import SIGMA
from nsac.grid import GridSpec
from nsac.model import BenchReport, LatentHeatSpec, ModelParams, StepConfig
from nsac.timestepper import SimState, stable_dt


@pytest.fixture
def fine():
    return GridSpec(128, 128)


def test_solvability_ratio():
    assert SOLVABILITY_RATIO == pytest.approx(3 / math.sqrt(2))
    assert SOLVABILITY_RATIO * SIGMA == pytest.approx(2.0)


def test_tanh_circle(fine):
    phi = init_tanh_circle(fine, 0.3, 0.02)
    assert phi.values[64, 64] == pytest.approx(1.0, abs=1e-6)
    assert phi.values[0, 0] == pytest.approx(-1.0, abs=1e-9)
    flipped = init_tanh_circle(fine, 0.3, 0.02, inside=-1.0)
    np.testing.assert_array_equal(flipped.values, -phi.values)


@pytest.mark.parametrize("r0", [0.05, 0.45])
def test_tanh_circle_rejects_radius_near_the_walls(fine, r0):
    with pytest.raises(error.PreconditionError):
        init_tanh_circle(fine, r0, 0.02)


def test_tanh_plane_orientation(fine):
    right = init_tanh_plane(fine, 0.4, 0.02)
    left = init_tanh_plane(fine, 0.4, 0.02, orientation=-1.0)
    assert right.values[-1, 0] == pytest.approx(1.0)
    np.testing.assert_array_equal(left.values, -right.values)


@pytest.mark.parametrize("inside", [1.0, -1.0])
def test_fit_radius(fine, inside):
    phi = init_tanh_circle(fine, 0.3, 0.02, inside=inside)
    assert fit_radius(phi) == pytest.approx(0.3, abs=fine.dx)


def test_fit_radius_is_translation_invariant(fine):
    centered = fit_radius(init_tanh_circle(fine, 0.25, 0.02))
    shifted = fit_radius(init_tanh_circle(fine, 0.25, 0.02, center=(0.55, 0.47)))
    assert shifted == pytest.approx(centered, abs=1e-3)


def test_fit_radius_needs_one_closed_interface(fine):
    with pytest.raises(error.MeasurementError):
        fit_radius(fine.scalar(1.0))
    with pytest.raises(error.MeasurementError):
        fit_radius(init_tanh_plane(fine, 0.5, 0.02))
    x, y = fine.cell_centers()
    two = np.maximum(
        np.tanh((0.1 - np.hypot(x - 0.25, y - 0.5)) / 0.03),
        np.tanh((0.1 - np.hypot(x - 0.75, y - 0.5)) / 0.03),
    )
    with pytest.raises(error.MeasurementError):
        fit_radius(fine.scalar(two))


def test_front_position():
    g = GridSpec(128, 8, 1.0, 1.0 / 16)
    assert front_position(init_tanh_plane(g, 0.4, 0.02)) == pytest.approx(0.4, abs=1e-3)
    assert front_position(init_tanh_plane(g, 0.63, 0.02, -1.0)) == pytest.approx(0.63, abs=1e-3)
    with pytest.raises(error.MeasurementError):
        front_position(g.scalar(-1.0))


def test_measure_interface(fine):
    geometry = measure_interface(init_tanh_circle(fine, 0.3, 0.02, center=(0.45, 0.5)))
    assert geometry.inner_positive
    assert geometry.radius_area == pytest.approx(0.3, abs=fine.dx)
    assert geometry.radius_contour == pytest.approx(0.3, abs=2 * fine.dx)
    assert geometry.centroid == pytest.approx((0.45, 0.5), abs=1e-3)

    plane = measure_interface(init_tanh_plane(fine, 0.4, 0.02))
    assert math.isnan(plane.radius_area)
    assert plane.front_position == pytest.approx(0.4, abs=1e-3)


def test_oracle_closed_form():
    assert mcf_circle_oracle(0.3, 0.0, 1.0, 0.0) == 0.3
    assert mcf_circle_oracle(0.3, 0.0, 1.0, 0.02) == pytest.approx(math.sqrt(0.05), abs=1e-15)
    integrated = mcf_circle_oracle(0.3, 0.0, 1.0, 0.02, closed_form=False)
    assert integrated == pytest.approx(math.sqrt(0.05), abs=1e-10)


def test_oracle_extinction():
    with pytest.raises(error.ExtinctionError) as exc:
        mcf_circle_oracle(0.3, 0.0, 1.0, 0.05)
    assert exc.value.t_extinct == pytest.approx(0.045)


def test_oracle_forcing_direction():
    grows = mcf_circle_oracle(0.3, 10.0, 1.0, 0.01)
    shrinks = mcf_circle_oracle(0.3, 10.0, -1.0, 0.01)
    assert grows > 0.3 > mcf_circle_oracle(0.3, 0.0, 1.0, 0.01) > shrinks


def test_calibrate_c_ell():
    report = BenchReport("front", {"ell_bar": 0.05, "orientation": 1.0})
    report.extra["speed"] = -0.106
    c_ell, growth = calibrate_c_ell(report)
    assert c_ell == pytest.approx(2.12)
    assert growth == 1.0
    report.params_used["orientation"] = -1.0
    report.extra["speed"] = 0.106
    assert calibrate_c_ell(report)[1] == 1.0
    report.params_used["ell_bar"] = 0.0
    with pytest.raises(error.PreconditionError):
        calibrate_c_ell(report)


def test_sweep_rejects_ascending_list():
    with pytest.raises(error.PreconditionError):
        run_energy_convergence_sweep(SweepBench(eps_list=(0.02, 0.04)))


def test_workers_from_environment(monkeypatch):
    monkeypatch.delenv("NSAC_THREADS", raising=False)
    assert benchmarks._workers(None) == 1
    assert benchmarks._workers(3) == 3
    monkeypatch.setenv("NSAC_THREADS", "4")
    assert benchmarks._workers(None) == 4
    monkeypatch.setenv("NSAC_THREADS", "many")
    assert benchmarks._workers(None) == 1


def test_write_report(tmp_path):
    report = BenchReport("mcf", series=[(0.0, 0.3, 0.3), (0.01, 0.26, 0.265)], max_rel_error=0.02)
    report.passed = True
    path = write_report(report, tmp_path)
    write_report(report, tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,measured,oracle"
    assert lines[2] == "0.01,0.26,0.265"
    verdicts = (tmp_path / "verdict.txt").read_text().splitlines()
    assert verdicts == ["mcf PASS max_rel_err=2.000000e-02"] * 2


def test_small_mcf_benchmark():
    report = run_mcf_benchmark(MCFBench(eps=0.025, nx=128, dt=7.5e-5, tol=0.1))
    assert report.passed, report.verdict()
    assert report.extra["monotone"]
    _, _, oracle = report.series[-1]
    assert oracle == pytest.approx(0.15, rel=0.01)
    assert report.params_used["splitting"] == "explicit"


def test_stationary_front():
    cfg = FrontBench(eps=0.05, ell_bar=0.0, t_end=0.05, dt=2e-4, sample_every=10)
    report = run_front_benchmark(cfg)
    assert report.passed, report.verdict()
    assert "ratio" not in report.extra


def test_forced_front_speed():
    cfg = FrontBench(eps=0.05, ell_bar=0.05, t_end=0.2, dt=5e-5, sample_every=100)
    report = run_front_benchmark(cfg)
    assert report.passed, report.verdict()
    assert report.extra["speed"] < 0
    assert report.extra["ratio_rel_error"] <= 0.05
    c_ell, growth = calibrate_c_ell(report)
    assert growth == 1.0
    assert c_ell == pytest.approx(SOLVABILITY_RATIO, rel=0.05)


def test_front_reaching_the_wall_is_reported():
    cfg = FrontBench(eps=0.05, ell_bar=0.5, x0=0.3, t_end=0.3, dt=2e-4, sample_every=25)
    with pytest.raises(error.FrontReachedBoundary):
        run_front_benchmark(cfg)


def test_short_coupled_release():
    cfg = CoupledBench(nx=64, max_steps=10, sample_every=5)
    report = run_coupled_release(cfg)
    assert report.extra["steps"] == 10
    assert len(report.extra["kinetic_production"]) == 10
    assert all(value >= 0 for _, value in report.extra["kinetic_production"])
    assert report.extra["average_condition_margin"] < 0
    violations = report.extra["first_violation"]
    assert "production" not in violations
    assert "entropy-budget" not in violations
    assert report.extra["entropy_budget"] >= -cfg.entropy_slack * abs(report.extra["S0"])
    assert report.extra["theta_min"] >= 0.5 * cfg.theta0
    assert len(report.series) == 3


def test_coupled_release_records_the_forced_oracle():
    report = run_coupled_release(CoupledBench(nx=64, max_steps=10, sample_every=5))
    assert report.extra["c_ell"] == SOLVABILITY_RATIO
    assert report.extra["c_ell_source"] == "2/sigma"
    assert report.series[0] == (0.0, pytest.approx(0.25, rel=0.01), 0.25)
    mcf = report.extra["mcf_series"]
    assert len(mcf) == len(report.series)
    for (t, _, forced), (t_mcf, unforced) in zip(report.series[1:], mcf[1:]):
        assert t == t_mcf
        # a positive latent heat grows the enclosed +1 phase
        assert unforced < forced < 0.25
    calibrated = run_coupled_release(CoupledBench(nx=64, max_steps=5, sample_every=5, c_ell=2.0))
    assert calibrated.extra["c_ell"] == 2.0
    assert calibrated.extra["c_ell_source"] == "calibrated"


def test_coupled_release_rejects_an_unstable_fixed_step():
    cfg = CoupledBench(nx=32, max_steps=5, adaptive=False)
    params = ModelParams(eps=cfg.eps, latent=LatentHeatSpec.arctan(), delta=cfg.delta)
    grid = GridSpec(cfg.nx, cfg.nx)
    state = SimState.initial(grid, init_tanh_circle(grid, cfg.r0, cfg.eps), cfg.theta0, params)
    bound = stable_dt(state, StepConfig(dt=1.0, phi_splitting=cfg.splitting), params)
    with pytest.raises(error.StepFailure, match="stability bound"):
        run_coupled_release(replace(cfg, dt=2 * bound))


@pytest.mark.slow
def test_mcf_acceptance():
    report = run_mcf_benchmark()
    assert report.passed, report.verdict()


@pytest.mark.slow
def test_front_acceptance():
    report = run_front_benchmark()
    assert report.passed, report.verdict()


@pytest.mark.slow
def test_energy_convergence_acceptance():
    report = run_energy_convergence_sweep()
    assert report.passed, report.extra["table"]


@pytest.mark.slow
def test_coupled_release_keeps_positivity():
    cfg = CoupledBench()
    report = run_coupled_release(cfg)
    assert report.passed, report.verdict()
    assert report.extra["first_violation"] == {}
    assert report.max_rel_error <= cfg.drift_tol
    s0 = abs(report.extra["S0"])
    assert report.extra["entropy_step_slack"] >= -cfg.entropy_slack * s0
    assert report.extra["entropy_budget"] >= -cfg.entropy_slack * s0
    assert report.extra["weak_entropy_residual"] >= -cfg.weak_tol * s0
    assert report.extra["phi_min"] >= -1.0 - 1e-6
    assert report.extra["phi_max"] <= 1.0 + cfg.tau + 1e-6
    assert report.extra["theta_min"] >= 0.5 * cfg.theta0
    assert report.extra["clamp_mass"] <= cfg.clamp_tol


@pytest.mark.slow
def test_coupled_energy_drift_is_first_order_in_dt():
    coarse = run_coupled_release(CoupledBench(nx=64, dt=2e-4, max_steps=100))
    fine = run_coupled_release(CoupledBench(nx=64, dt=1e-4, max_steps=200, sample_every=10))
    assert fine.max_rel_error <= 0.55 * coarse.max_rel_error


@pytest.mark.slow
def test_hotter_release_departs_further_from_curvature_flow():
    cold = run_coupled_release(CoupledBench(nx=64, theta0=1.0, max_steps=100))
    hot = run_coupled_release(CoupledBench(nx=64, theta0=5.0, max_steps=100))
    assert hot.extra["mcf_deviation"] > cold.extra["mcf_deviation"] > 0
    assert hot.series[-1][2] > cold.series[-1][2]
    assert hot.series[-1][1] > cold.series[-1][1]


@pytest.mark.slow
def test_mcf_radii_are_converged_in_dt():
    coarse = run_mcf_benchmark(MCFBench())
    fine = run_mcf_benchmark(MCFBench(dt=2.5e-5, sample_every=20))
    t, radius, _ = np.array(coarse.series).T
    assert len(t) > 2
    for t_fine, r_fine, _ in fine.series:
        if t_fine <= t[-1]:
            r_coarse = np.interp(t_fine, t, radius)
            assert abs(r_fine - r_coarse) <= 2e-3 * r_coarse


@pytest.mark.slow
def test_mcf_error_decreases_with_eps():
    coarse = run_mcf_benchmark(MCFBench(eps=0.02, nx=256))
    fine = run_mcf_benchmark(MCFBench(eps=0.01, nx=512, dt=1.25e-5, sample_every=40))
    assert fine.max_rel_error < coarse.max_rel_error
