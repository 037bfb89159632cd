import math

import numpy as np
import pytest
from conftest import random_slip_field, streamfunction_field
from numpy.testing import assert_allclose, assert_array_equal

from nsac import error, grid
from nsac.grid import (
    GridSpec,
    ScalarField,
    VectorField,
    advect_scalar,
    center_gradient,
    chemical_potential,
    div_from_faces,
    grad_to_faces,
    inner,
    integrate,
    korteweg_force,
    laplacian_neumann,
    strain_norm2,
)
from nsac.model import AdvectionScheme
from nsac.utils import solvers


def test_grid_spacings(grid):
    assert grid.dx == pytest.approx(1.0 / 32)
    assert grid.dy == pytest.approx(0.75 / 24)
    assert grid.shape == (32, 24)
    x, y = grid.cell_centers()
    assert x[0, 0] == pytest.approx(0.5 / 32)
    assert y[0, -1] == pytest.approx(0.75 - 0.5 * 0.75 / 24)


def test_grid_rejects_coarse_counts():
    with pytest.raises(error.InvalidParameter) as exc:
        GridSpec(4, 16)
    assert exc.value.key == "grid.nx"


def test_grid_digest_depends_on_geometry():
    assert GridSpec(16, 16).digest() == GridSpec(16, 16).digest()
    assert GridSpec(16, 16).digest() != GridSpec(16, 16, ly=2.0).digest()


def test_field_validation(grid):
    with pytest.raises(error.InvalidField):
        ScalarField(grid, np.zeros((3, 3)))
    values = np.zeros(grid.shape)
    values[3, 4] = np.nan
    with pytest.raises(error.InvalidField):
        ScalarField(grid, values).validate()
    with pytest.raises(error.InvalidField):
        VectorField(grid, np.zeros(grid.shape), np.zeros(grid.shape))


def test_enforce_slip(grid, rng):
    U = VectorField(grid, rng.normal(size=(33, 24)), rng.normal(size=(32, 25)))
    assert not U.slip_ok
    assert U.enforce_slip().slip_ok


def test_laplacian_of_constant_is_zero(grid):
    assert_array_equal(laplacian_neumann(grid.scalar(3.0)).values, 0.0)
    assert_array_equal(grad_to_faces(grid.scalar(3.0)).u, 0.0)


def test_laplacian_integrates_to_zero(grid, rng):
    f = grid.scalar(rng.normal(size=grid.shape))
    total = integrate(laplacian_neumann(f))
    assert abs(total) <= 1e-12 * np.linalg.norm(f.values)


def _cosine_error(n):
    g = GridSpec(n, n)
    x, _ = g.cell_centers()
    f = g.scalar(np.cos(math.pi * x))
    return np.max(np.abs(laplacian_neumann(f).values + math.pi**2 * f.values))


def test_laplacian_converges_at_second_order():
    ratio = _cosine_error(64) / _cosine_error(128)
    assert 3.5 <= ratio <= 4.5


def test_div_grad_is_the_laplacian(grid, rng):
    f = grid.scalar(rng.normal(size=grid.shape))
    assert_array_equal(div_from_faces(grad_to_faces(f)).values, laplacian_neumann(f).values)


def test_summation_by_parts(grid, rng):
    f = grid.scalar(rng.normal(size=grid.shape))
    U = random_slip_field(grid, rng)
    lhs = inner(grad_to_faces(f), U)
    rhs = -integrate(f.with_values(f.values * div_from_faces(U).values))
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(lhs)))


def test_divergence_of_slip_field_integrates_to_zero(grid, rng):
    U = random_slip_field(grid, rng)
    assert abs(integrate(div_from_faces(U))) <= 1e-12


def test_sparse_laplacian_matches_array_operator(grid, rng):
    f = rng.normal(size=grid.shape)
    matrix = solvers.neumann_laplacian(grid.nx, grid.ny, grid.dx, grid.dy)
    assert_allclose(
        (matrix @ f.ravel()).reshape(grid.shape),
        laplacian_neumann(grid.scalar(f)).values,
        atol=1e-9,
    )


@pytest.mark.parametrize("scheme", list(AdvectionScheme))
def test_advection_of_constants_vanishes(grid, rng, scheme):
    U = random_slip_field(grid, rng)
    assert_array_equal(advect_scalar(grid.scalar(2.5), U, scheme).values, 0.0)
    f = grid.scalar(rng.normal(size=grid.shape))
    assert_array_equal(advect_scalar(f, grid.zero_vector(), scheme).values, 0.0)


def test_advection_accepts_scheme_names(grid, rng):
    U = random_slip_field(grid, rng)
    f = grid.scalar(rng.normal(size=grid.shape))
    assert_array_equal(
        advect_scalar(f, U, "centered").values,
        advect_scalar(f, U, AdvectionScheme.CENTERED).values,
    )
    with pytest.raises(error.UnknownScheme):
        advect_scalar(f, U, "weno5")


@pytest.mark.parametrize("scheme", list(AdvectionScheme))
def test_advection_of_divergence_free_flow_is_conservative(square, rng, scheme):
    corners = np.zeros((square.nx + 1, square.ny + 1))
    corners[1:-1, 1:-1] = rng.normal(size=(square.nx - 1, square.ny - 1))
    U = streamfunction_field(square, corners)
    assert U.slip_ok
    assert np.max(np.abs(div_from_faces(U).values)) <= 1e-9
    f = square.scalar(rng.normal(size=square.shape))
    assert abs(integrate(advect_scalar(f, U, scheme))) <= 1e-10


def _rotation(g, omega, radius):
    x = np.arange(g.nx + 1) * g.dx
    y = np.arange(g.ny + 1) * g.dy
    X, Y = np.meshgrid(x, y, indexing="ij")
    r2 = (X - 0.5) ** 2 + (Y - 0.5) ** 2
    return streamfunction_field(g, -0.5 * omega * np.minimum(r2, radius**2))


@pytest.mark.slow
def test_solid_rotation_keeps_mass_and_peak():
    g = GridSpec(128, 128)
    omega = 2 * math.pi
    U = _rotation(g, omega, 0.45)
    x, y = g.cell_centers()
    f = np.exp(-((x - 0.65) ** 2 + (y - 0.5) ** 2) / (2 * 0.05**2))
    mass0, peak0 = f.sum(), f.max()
    dt = 0.4 * g.dx / U.max_speed()
    steps = math.ceil(1.0 / dt)
    dt = 1.0 / steps

    def rate(values):
        return -advect_scalar(g.scalar(values), U).values

    for _ in range(steps):
        # SSP-RK3
        f1 = f + dt * rate(f)
        f2 = 0.75 * f + 0.25 * (f1 + dt * rate(f1))
        f = f / 3.0 + 2.0 / 3.0 * (f2 + dt * rate(f2))
    assert f.sum() == pytest.approx(mass0, rel=1e-10)
    assert f.max() == pytest.approx(peak0, rel=0.15)


def test_strain_of_rigid_motion_vanishes(grid):
    U = grid.zero_vector()
    U.u[1:-1] = 0.7
    nu = grid.scalar(0.1)
    assert_allclose(strain_norm2(U, nu).values[1:-1, 1:-1], 0.0, atol=1e-14)
    assert_array_equal(strain_norm2(grid.zero_vector(), nu).values, 0.0)


def test_strain_of_pure_shear(square):
    U = square.zero_vector()
    rate = 0.8
    y = (np.arange(square.ny) + 0.5) * square.dy
    U.u[1:-1] = rate * y[None, :]
    value = strain_norm2(U, square.scalar(0.1)).values
    assert_allclose(value[2:-2, 2:-2], 2 * 0.1 * rate**2, rtol=1e-12)
    assert np.all(value >= 0)


def test_center_gradient_of_linear_field(square):
    x, y = square.cell_centers()
    gx, gy = center_gradient(square.scalar(2 * x - y))
    assert_allclose(gx.values[1:-1, 1:-1], 2.0)
    assert_allclose(gy.values[1:-1, 1:-1], -1.0)


def test_korteweg_force_of_pure_phases(grid):
    force = korteweg_force(grid.scalar(1.0), 0.05)
    assert_array_equal(force.u, 0.0)
    assert_array_equal(force.v, 0.0)


def test_korteweg_force_has_no_net_self_force():
    g = GridSpec(256, 8, 1.0, 1.0 / 32)
    eps = 0.02
    x, _ = g.cell_centers()
    phi = g.scalar(np.tanh((x - 0.5) / (math.sqrt(2) * eps)))
    force = korteweg_force(phi, eps)
    net = np.sum(force.u) * g.cell_area
    scale = np.sum(np.abs(force.u)) * g.cell_area + 1e-30
    assert abs(net) <= 1e-6 or abs(net) / scale <= 1e-3


def _divergence_form(phi, eps):
    """``-div(ε∇φ⊗∇φ) + ∇(ε|∇φ|²/2 + W/ε)`` by centered differences at cell centers."""
    g = phi.grid
    p = np.pad(phi.values, 1, mode="reflect")
    px = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * g.dx)
    py = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * g.dy)
    energy = 0.5 * eps * (px**2 + py**2) + 0.25 * (phi.values**2 - 1) ** 2 / eps

    def ddx(a):
        return np.gradient(a, g.dx, axis=0)

    def ddy(a):
        return np.gradient(a, g.dy, axis=1)

    fx = -eps * (ddx(px * px) + ddy(px * py)) + ddx(energy)
    fy = -eps * (ddx(px * py) + ddy(py * py)) + ddy(energy)
    return fx, fy


def test_korteweg_force_matches_divergence_form():
    errors = []
    for n in (64, 128):
        g = GridSpec(n, n)
        x, y = g.cell_centers()
        phi = g.scalar(0.5 * np.sin(2 * math.pi * x) * np.cos(2 * math.pi * y))
        eps = 0.2
        fx, fy = _divergence_form(phi, eps)
        fu, fv = korteweg_force(phi, eps).centered()
        core = (slice(n // 4, 3 * n // 4),) * 2
        errors.append(np.max(np.abs(fu[core] - fx[core])) + np.max(np.abs(fv[core] - fy[core])))
    assert errors[1] < 0.35 * errors[0]


def test_chemical_potential_of_equilibrium_profile():
    g = GridSpec(400, 8, 1.0, 0.02)
    eps = 0.02
    x, _ = g.cell_centers()
    phi = g.scalar(np.tanh((x - 0.5) / (math.sqrt(2) * eps)))
    mu = chemical_potential(phi, eps).values
    assert np.max(np.abs(mu[20:-20])) <= 0.1


def test_integrals():
    g = GridSpec(16, 16)
    x, _ = g.cell_centers()
    assert integrate(g.scalar(2.0)) == pytest.approx(2.0, abs=1e-14)
    assert integrate(g.scalar(x)) == pytest.approx(0.5, abs=1e-12)
    assert grid.min(g.scalar(x)) == pytest.approx(0.5 / 16)
    assert grid.max(g.scalar(x)) == pytest.approx(1 - 0.5 / 16)
