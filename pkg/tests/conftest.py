import hypothesis
import numpy as np
import pytest

from nsac.grid import GridSpec, VectorField
from nsac.model import LatentHeatSpec, ModelParams

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)


@pytest.fixture
def grid():
    return GridSpec(32, 24, 1.0, 0.75)


@pytest.fixture
def square():
    return GridSpec(32, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def arctan_params():
    return ModelParams(eps=0.05, latent=LatentHeatSpec.arctan(), delta=1e-3)


@pytest.fixture
def linear_params():
    return ModelParams(eps=0.05, alpha=1.0, latent=LatentHeatSpec.linear(1.0), delta=1e-3)


def random_slip_field(g: GridSpec, rng) -> VectorField:
    """Random face velocities with zero normal component on the boundary."""
    U = VectorField(g, rng.normal(size=(g.nx + 1, g.ny)), rng.normal(size=(g.nx, g.ny + 1)))
    return U.enforce_slip()


def streamfunction_field(g: GridSpec, psi_corners: np.ndarray) -> VectorField:
    """
    Face velocities ``u = ∂ψ/∂y``, ``v = -∂ψ/∂x`` of a corner streamfunction; divergence free and
    slip compatible when ``ψ`` is constant on the boundary.
    """
    u = np.diff(psi_corners, axis=1) / g.dy
    v = -np.diff(psi_corners, axis=0) / g.dx
    return VectorField(g, u, v)
