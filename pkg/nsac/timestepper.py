"""
One coupled time step of the non-isothermal Navier-Stokes/Allen-Cahn system.

The step updates the order parameter first, then the internal heat with the sources of the new
order parameter, then the velocity and pressure.
"""
import functools
import logging
import math
import typing
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import error
from .const import REACTION_SAFETY
from .constitutive import Constitutive, ddw, dw, dw_secant
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    advect_scalar,
    chemical_potential,
    corner_average,
    div_from_faces,
    grad_to_faces,
    korteweg_force,
    laplacian_neumann,
    strain_norm2,
)
from .model import ModelParams, PhiSplitting, StepConfig, StepReport, ViscosityProfile
from .utils import solvers

log = logging.getLogger(__name__)


@dataclass
class SimState:
    """
    Full state of a run.

    :ivar t: Time.
    :ivar phi: Order parameter.
    :ivar q: Internal heat ``Q_δ(θ)``, kept above ``Q_δ(0)``.
    :ivar vel: Face velocities with zero normal component on the boundary.
    :ivar p: Pressure with zero mean.
    :ivar step: Number of steps taken.
    """

    t: float
    phi: ScalarField
    q: ScalarField
    vel: VectorField
    p: ScalarField
    step: int = 0

    @property
    def grid(self) -> GridSpec:
        return self.phi.grid

    @classmethod
    def initial(
        cls, grid: GridSpec, phi, theta, params: ModelParams, vel: VectorField = None, t=0.0
    ):
        """
        Build a state from order parameter and temperature data.

        :param grid: The grid.
        :param phi: :class:`.grid.ScalarField`, array or constant.
        :param theta: Temperature as array or constant, ``θ ≥ 0``.
        :param params: Model parameters; ``q = Q_δ(θ)``.
        :param vel: Initial velocity, zero when omitted.
        :param t: Initial time.
        """
        phi = phi if isinstance(phi, ScalarField) else grid.scalar(phi)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), grid.shape)
        if np.any(theta < 0):
            raise error.PreconditionError("Initial temperature must be nonnegative")
        q = grid.scalar(Constitutive(params).heat_Q_delta(theta))
        vel = grid.zero_vector() if vel is None else vel.enforce_slip()
        return cls(t=t, phi=phi.copy(), q=q, vel=vel, p=grid.scalar(0.0))

    def theta(self, constitutive: Constitutive) -> ScalarField:
        return self.q.with_values(constitutive.theta(self.q.values))

    def copy(self) -> "SimState":
        return SimState(
            self.t, self.phi.copy(), self.q.copy(), self.vel.copy(), self.p.copy(), self.step
        )

    def is_finite(self) -> bool:
        arrays = (self.phi.values, self.q.values, self.vel.u, self.vel.v, self.p.values)
        return all(np.all(np.isfinite(a)) for a in arrays)


class PhiUpdate(typing.NamedTuple):
    phi: np.ndarray
    mu: np.ndarray
    advection: np.ndarray
    ell: np.ndarray
    iterations: int
    newton: int


class HeatUpdate(typing.NamedTuple):
    q: np.ndarray
    iterations: int
    viscous: float
    kinetic: float
    latent: float
    clamp_mass: float


class FlowUpdate(typing.NamedTuple):
    vel: VectorField
    p: ScalarField
    poisson_iterations: int
    viscous_iterations: int
    max_divergence: float


@functools.lru_cache(maxsize=8)
def _operators(grid: GridSpec):
    neg_laplacian = -solvers.neumann_laplacian(grid.nx, grid.ny, grid.dx, grid.dy)
    viscous = solvers.ViscousOperator(grid.nx, grid.ny, grid.dx, grid.dy)
    return neg_laplacian.tocsr(), viscous


def _lap(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return laplacian_neumann(ScalarField(grid, values)).values


def momentum_advection(U: VectorField) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Centered ``(v·∇)v`` on the interior faces, shapes ``(nx-1, ny)`` and ``(nx, ny-1)``.
    """
    g = U.grid
    u, v = U.u, U.v
    up = np.pad(u, ((0, 0), (1, 1)), mode="edge")
    dudx = (u[2:] - u[:-2]) / (2 * g.dx)
    dudy = (up[1:-1, 2:] - up[1:-1, :-2]) / (2 * g.dy)
    v_at_u = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    adv_u = u[1:-1] * dudx + v_at_u * dudy

    vp = np.pad(v, ((1, 1), (0, 0)), mode="edge")
    dvdx = (vp[2:, 1:-1] - vp[:-2, 1:-1]) / (2 * g.dx)
    dvdy = (v[:, 2:] - v[:, :-2]) / (2 * g.dy)
    u_at_v = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])
    adv_v = u_at_v * dvdx + v[:, 1:-1] * dvdy
    return adv_u, adv_v


def viscous_remainder(U: VectorField, nu_c: np.ndarray, nu_k: np.ndarray):
    """
    ``div(ν∇vᵀ)`` on the interior faces; the ``div(ν∇v)`` part is treated implicitly.
    """
    g = U.grid
    u, v = U.u, U.v
    flux = nu_c * np.diff(u, axis=0) / g.dx
    dvdx = np.zeros((g.nx + 1, g.ny + 1))
    dvdx[1:-1, :] = np.diff(v, axis=0) / g.dx
    rem_u = np.diff(flux, axis=0) / g.dx + np.diff(nu_k * dvdx, axis=1)[1:-1] / g.dy

    flux = nu_c * np.diff(v, axis=1) / g.dy
    dudy = np.zeros((g.nx + 1, g.ny + 1))
    dudy[:, 1:-1] = np.diff(u, axis=1) / g.dy
    rem_v = np.diff(flux, axis=1) / g.dy + np.diff(nu_k * dudy, axis=0)[:, 1:-1] / g.dx
    return rem_u, rem_v


class Stepper:
    """
    Advances :class:`SimState` objects for one parameter set and step configuration.

    Sparse operators are cached per grid and the constitutive tables are built once.

    :ivar params: Model parameters, with ``delta`` replaced by ``cfg.delta`` when that is set.
    :ivar cfg: The :class:`.model.StepConfig`.
    :ivar constitutive: The bound :class:`.constitutive.Constitutive`.
    """

    def __init__(self, params: ModelParams, cfg: StepConfig = None):
        cfg = cfg or StepConfig()
        if cfg.delta is not None:
            params = params.replace(delta=cfg.delta)
        self.params = params
        self.cfg = cfg
        self.constitutive = Constitutive(params)

    def latent(self, theta: np.ndarray) -> np.ndarray:
        """Latent heat driving the order parameter; the configured constant when overridden."""
        if self.cfg.latent_override is not None:
            return np.full_like(theta, self.cfg.latent_override)
        return self.constitutive.ell(theta)

    def stable_dt(self, state: SimState) -> float:
        cfg, g = self.cfg, state.grid
        candidates = [cfg.dt]
        speed = state.vel.max_speed()
        if speed > 0:
            candidates.append(cfg.cfl_target * min(g.dx, g.dy) / speed)
        if cfg.phi_splitting is not PhiSplitting.CONVEX_SPLIT:
            stiffness = float(np.max(np.abs(ddw(state.phi.values))))
            candidates.append(REACTION_SAFETY * self.params.eps**2 / max(stiffness, 1e-300))
        p = self.params
        if p.nu_profile is ViscosityProfile.DECAYING and p.nu2 > p.nu1 and not cfg.freeze_velocity:
            candidates.append(min(g.dx, g.dy) ** 2 / (4.0 * p.nu2))
        return min(candidates)

    def allen_cahn(self, state: SimState, dt: float) -> PhiUpdate:
        cfg, g = self.cfg, state.grid
        eps = self.params.eps
        e2 = eps * eps
        phi_n = state.phi.values
        theta = self.constitutive.theta(state.q.values)
        ell = self.latent(theta)
        advection = advect_scalar(state.phi, state.vel, cfg.phi_advection).values
        split = cfg.phi_splitting
        neg_laplacian, _ = _operators(g)

        def residual(phi):
            if split is PhiSplitting.MIDPOINT:
                diffusion = -0.5 * _lap(phi + phi_n, g)
                reaction = dw_secant(phi_n, phi) / e2
            else:
                diffusion = -_lap(phi, g)
                reaction = (dw(phi_n) if split is PhiSplitting.EXPLICIT else phi**3 - phi_n) / e2
            return (phi - phi_n) / dt + advection + diffusion + reaction - ell / eps

        def jacobian(phi):
            if split is PhiSplitting.EXPLICIT:
                return sp.identity(phi.size, format="csr") / dt + neg_laplacian
            if split is PhiSplitting.CONVEX_SPLIT:
                return sp.diags((1.0 / dt + 3.0 * phi * phi / e2).ravel()) + neg_laplacian
            slope = (phi_n**2 + 2.0 * phi_n * phi + 3.0 * phi * phi) / 4.0 - 0.5
            return sp.diags((1.0 / dt + slope / e2).ravel()) + 0.5 * neg_laplacian

        phi = phi_n.copy()
        iterations = 0
        newton = 0
        while True:
            r = residual(phi)
            if not np.any(r):
                break
            if newton == cfg.newton_max_iters:
                raise error.SolverNotConverged("newton", newton, float(np.max(np.abs(r))))
            newton += 1
            update, its = solvers.pcg(
                jacobian(phi),
                -r.ravel(),
                rtol=cfg.poisson_tol,
                maxiter=cfg.max_iters,
                name="allen-cahn",
            )
            iterations += its
            update = update.reshape(g.shape)
            phi = phi + update
            if split is PhiSplitting.EXPLICIT or np.max(np.abs(update)) <= cfg.newton_tol:
                break

        if split is PhiSplitting.MIDPOINT:
            mu = -0.5 * eps * _lap(phi + phi_n, g) + dw_secant(phi_n, phi) / eps
        elif split is PhiSplitting.CONVEX_SPLIT:
            mu = -eps * _lap(phi, g) + (phi**3 - phi_n) / eps
        else:
            mu = -eps * _lap(phi, g) + dw(phi_n) / eps
        log.debug(f"Allen-Cahn: {newton} Newton and {iterations} CG iterations")
        return PhiUpdate(phi, mu, advection, ell, iterations, newton)

    def heat(
        self, state: SimState, phi_new: np.ndarray, dt: float, advection=None, ell=None
    ) -> HeatUpdate:
        """
        Internal heat update with lagged Kirchhoff diffusion.

        Writing ``κ̂(θ) ≈ κ̂(θⁿ) + D (q - qⁿ)`` with ``D = κ(θⁿ)/Q_δ'(θⁿ)`` gives the symmetric
        system ``(D⁻¹ - dt Δ) z = dt(-v·∇q + s + Δκ̂(θⁿ))`` for ``z = D (q - qⁿ)``. It conserves
        ``∫q`` up to the sources.

        When ``ℓ`` follows the temperature, the latent exchange is corrected once with the secant
        :meth:`.Constitutive.entropy_weight` of the predicted heat, so that the exchanged heat
        carries exactly the entropy the order parameter gives up.
        """
        c, cfg, g = self.constitutive, self.cfg, state.grid
        q_n = state.q.values
        theta = c.theta(q_n)
        if advection is None:
            advection = advect_scalar(state.phi, state.vel, cfg.phi_advection).values
        if ell is None:
            ell = self.latent(theta)

        viscous = strain_norm2(state.vel, c.nu(theta)).values
        rate = (phi_new - state.phi.values) / dt + advection
        kinetic = self.params.eps * rate * rate
        transport = advect_scalar(state.q, state.vel, cfg.q_advection).values
        kirchhoff = _lap(c.kappa_hat(theta), g)
        source = -transport + viscous + kinetic + kirchhoff
        d = c.kirchhoff_slope(theta)
        neg_laplacian, _ = _operators(g)
        a = sp.diags(1.0 / d.ravel()) + dt * neg_laplacian

        def solve(latent):
            b = dt * (source + latent)
            if not np.any(b):
                return q_n.copy(), 0
            z, its = solvers.pcg(
                a, b.ravel(), rtol=cfg.poisson_tol, maxiter=cfg.max_iters, name="heat"
            )
            return q_n + z.reshape(g.shape) / d, its

        latent = -ell * rate
        q, iterations = solve(latent)
        if cfg.latent_override is None and np.any(rate):
            predicted = np.maximum(q, c.q_floor)
            latent = -rate / c.entropy_weight(q_n, predicted)
            q, its = solve(latent)
            iterations += its

        q_floor = c.q_floor
        deficit = np.maximum(q_floor - q, 0.0)
        clamp_mass = float(np.sum(deficit) * g.cell_area)
        if clamp_mass > 0:
            log.warning(f"Internal heat clamped at Q_delta(0) in {np.count_nonzero(deficit)} cells")
            q = np.maximum(q, q_floor)
        area = g.cell_area
        return HeatUpdate(
            q,
            iterations,
            float(np.sum(viscous) * area),
            float(np.sum(kinetic) * area),
            float(np.sum(latent) * area),
            clamp_mass,
        )

    def navier_stokes(
        self,
        state: SimState,
        phi: np.ndarray,
        theta: np.ndarray,
        dt: float,
        mu: np.ndarray = None,
    ) -> FlowUpdate:
        """
        Viscous predictor followed by a Chorin projection.

        The predictor treats advection, the capillary force and ``div(ν∇vᵀ)`` explicitly and
        ``div(ν∇v)`` by backward Euler with ``ν(θ)`` lagged. The pressure solve stops once the
        residual guarantees ``max|div v| ≤ poisson_tol``.
        """
        cfg, g = self.cfg, state.grid
        U = state.vel
        eps = self.params.eps
        phi_field = ScalarField(g, phi)
        mu_field = None if mu is None else ScalarField(g, mu)
        nu_c = self.constitutive.nu(theta)
        nu_k = corner_average(nu_c)

        force = korteweg_force(phi_field, eps, mu_field)
        adv_u, adv_v = momentum_advection(U)
        rem_u, rem_v = viscous_remainder(U, nu_c, nu_k)
        rhs_u = U.u[1:-1] + dt * (-adv_u + force.u[1:-1] + rem_u)
        rhs_v = U.v[:, 1:-1] + dt * (-adv_v + force.v[:, 1:-1] + rem_v)

        neg_laplacian, viscous = _operators(g)
        a_u, a_v = viscous.matrices(nu_c, nu_k, dt)
        u = np.zeros_like(U.u)
        v = np.zeros_like(U.v)
        viscous_iterations = 0
        if np.any(rhs_u):
            sol, its = solvers.pcg(
                a_u,
                rhs_u.ravel(),
                x0=U.u[1:-1].ravel(),
                rtol=cfg.poisson_tol,
                maxiter=cfg.max_iters,
                name="viscous-u",
            )
            u[1:-1] = sol.reshape(rhs_u.shape)
            viscous_iterations += its
        if np.any(rhs_v):
            sol, its = solvers.pcg(
                a_v,
                rhs_v.ravel(),
                x0=U.v[:, 1:-1].ravel(),
                rtol=cfg.poisson_tol,
                maxiter=cfg.max_iters,
                name="viscous-v",
            )
            v[:, 1:-1] = sol.reshape(rhs_v.shape)
            viscous_iterations += its
        predicted = VectorField(g, u, v)

        divergence = div_from_faces(predicted).values
        b = -divergence.ravel() / dt
        b -= np.mean(b)
        poisson_iterations = 0
        p = state.p.values
        if np.any(b):
            sol, poisson_iterations = solvers.pcg(
                neg_laplacian,
                b,
                x0=state.p.values.ravel(),
                rtol=0.0,
                atol=cfg.poisson_tol / dt,
                maxiter=cfg.max_iters,
                name="poisson",
            )
            p = sol.reshape(g.shape)
            p = p - np.mean(p)
            grad = grad_to_faces(ScalarField(g, p))
            predicted = VectorField(g, u - dt * grad.u, v - dt * grad.v)
        max_div = float(np.max(np.abs(div_from_faces(predicted).values)))
        return FlowUpdate(
            predicted, ScalarField(g, p), poisson_iterations, viscous_iterations, max_div
        )

    def step(self, state: SimState) -> typing.Tuple[SimState, StepReport]:
        """
        One coupled step in the order φ, q, v.

        :return: The new state and its :class:`.model.StepReport`.
        :raises: :class:`.error.StepFailure` with the partial report; ``state`` is left untouched.
        """
        cfg = self.cfg
        report = StepReport()
        dt = self.stable_dt(state)
        if dt < cfg.dt:
            if not cfg.adaptive:
                report.failed = True
                report.message = f"dt={cfg.dt:.6g} exceeds the stability bound {dt:.6g}"
                log.error(report.message)
                raise error.StepFailure(report.message, report)
            report.message = f"dt reduced to {dt:.6g}"
            log.debug(report.message)
        report.dt_used = dt

        c = self.constitutive
        try:
            ac = self.allen_cahn(state, dt)
            report.helmholtz_iters += ac.iterations
            report.newton_iters = ac.newton
            theta_n = c.theta(state.q.values)

            q = state.q.values
            if not cfg.freeze_temperature:
                heat = self.heat(state, ac.phi, dt, ac.advection, ac.ell)
                q = heat.q
                report.helmholtz_iters += heat.iterations
                report.viscous = heat.viscous
                report.kinetic = heat.kinetic
                report.latent = heat.latent
                report.clamp_mass = heat.clamp_mass

            vel, p = state.vel, state.p
            if not cfg.freeze_velocity:
                flow = self.navier_stokes(state, state.phi.values, theta_n, dt, ac.mu)
                vel, p = flow.vel, flow.p
                report.poisson_iters = flow.poisson_iterations
                report.helmholtz_iters += flow.viscous_iterations
                report.max_divergence = flow.max_divergence
        except error.SolverNotConverged as ex:
            report.failed = True
            report.message = str(ex)
            raise error.StepFailure(f"Step {state.step + 1} failed: {ex}", report) from ex

        g = state.grid
        phi, q = ScalarField(g, ac.phi), ScalarField(g, q)
        new = SimState(state.t + dt, phi, q, vel, p, state.step + 1)
        if not new.is_finite():
            report.failed = True
            report.message = f"Non-finite values after step {new.step}"
            log.error(report.message)
            raise error.StepFailure(report.message, report)
        if report.max_divergence > 10 * cfg.poisson_tol:
            report.failed = True
            report.message = f"Divergence {report.max_divergence:.3e} above 10 * poisson_tol"
            raise error.StepFailure(report.message, report)
        return new, report


@functools.lru_cache(maxsize=8)
def get_stepper(params: ModelParams, cfg: StepConfig) -> Stepper:
    return Stepper(params, cfg)


def compute_mu(
    phi: ScalarField, theta: ScalarField, params: ModelParams, latent_override: float = None
):
    """
    Chemical potential ``μ = -εΔφ + W'(φ)/ε - ℓ(θ)``.
    """
    if latent_override is None:
        ell = Constitutive(params).ell(theta.values)
    else:
        ell = latent_override
    return ScalarField(phi.grid, chemical_potential(phi, params.eps).values - ell)


def step_allen_cahn(
    state: SimState, dt: float, params: ModelParams, cfg: StepConfig = None
) -> ScalarField:
    update = get_stepper(params, cfg or StepConfig()).allen_cahn(state, dt)
    return ScalarField(state.grid, update.phi)


def step_heat(
    state: SimState,
    phi_new: ScalarField,
    dt: float,
    params: ModelParams,
    cfg: StepConfig = None,
) -> ScalarField:
    update = get_stepper(params, cfg or StepConfig()).heat(state, phi_new.values, dt)
    return ScalarField(state.grid, update.q)


def step_navier_stokes(
    state: SimState,
    phi: ScalarField,
    theta: ScalarField,
    dt: float,
    params: ModelParams,
    cfg: StepConfig = None,
) -> typing.Tuple[VectorField, ScalarField]:
    if not state.vel.slip_ok:
        raise error.PreconditionError("Velocity violates the slip boundary condition")
    stepper = get_stepper(params, cfg or StepConfig())
    update = stepper.navier_stokes(state, phi.values, theta.values, dt)
    return update.vel, update.p


def coupled_step(
    state: SimState, cfg: StepConfig, params: ModelParams
) -> typing.Tuple[SimState, StepReport]:
    return get_stepper(params, cfg).step(state)


def stable_dt(state: SimState, cfg: StepConfig, params: ModelParams) -> float:
    """
    Largest admissible step: advective CFL, explicit reaction and explicit viscous bounds, never
    above ``cfg.dt``.
    """
    dt = get_stepper(params, cfg).stable_dt(state)
    if not (dt > 0 and math.isfinite(dt)):
        raise error.PreconditionError(f"No admissible time step ({dt})")
    return dt
