"""
Monitored functionals of a run: energies, entropy and its production, bounds, equipartition and
relative interface energies.
"""
import csv
import logging
import math
import pathlib
import typing

import numpy as np

from . import error
from .const import SIGMA
from .constitutive import Constitutive, dpsi, dw, psi, w
from .grid import (
    ScalarField,
    VectorField,
    advect_scalar,
    center_gradient,
    div_from_faces,
    grad_to_faces,
    inner,
    integrate,
    laplacian_neumann,
    strain_norm2,
)
from .model import AdvectionScheme, DiagRecord, EntropyProduction, ModelParams
from .timestepper import SimState

log = logging.getLogger(__name__)

DEFAULT_TIEBREAK = (1.0, 0.0)


def interface_energy(phi: ScalarField, eps: float) -> float:
    """``∫ ε|∇φ|²/2 + W(φ)/ε`` with face gradients."""
    grad = grad_to_faces(phi)
    return 0.5 * eps * inner(grad, grad) + integrate(phi.with_values(w(phi.values) / eps))


def record(state: SimState, params: ModelParams, clamp_mass: float = 0.0) -> DiagRecord:
    """
    Evaluate every monitored functional on a state.

    :param state: The state.
    :param params: Model parameters, ``θ = Q_δ⁻¹(q)``.
    :param clamp_mass: Cumulative heat added by the ``q`` floor so far.
    """
    c = Constitutive(params)
    eps = params.eps
    phi = state.phi
    theta = c.theta(state.q.values)
    e_int = interface_energy(phi, eps)
    e_kin = 0.5 * inner(state.vel, state.vel)
    h_heat = integrate(state.q)
    entropy = integrate(phi.with_values(c.Lambda(theta) + phi.values))

    gx, gy = center_gradient(phi)
    grad2 = gx.values**2 + gy.values**2
    equip = np.abs(0.5 * eps * grad2 - w(phi.values) / eps)
    px, py = center_gradient(phi.with_values(psi(phi.values)))
    perimeter = integrate(phi.with_values(np.hypot(px.values, py.values))) / SIGMA

    return DiagRecord(
        t=state.t,
        E_tot=e_kin + e_int + h_heat,
        E_kin=e_kin,
        E_int=e_int,
        H_heat=h_heat,
        S=entropy,
        phi_min=float(np.min(phi.values)),
        phi_max=float(np.max(phi.values)),
        theta_min=float(np.min(theta)),
        theta_max=float(np.max(theta)),
        equip_disc=integrate(phi.with_values(equip)),
        perimeter_est=perimeter,
        max_div=float(np.max(np.abs(div_from_faces(state.vel).values))),
        clamp_mass=clamp_mass,
    )


class DiagWriter:
    """
    CSV writer of :class:`.model.DiagRecord` rows, flushed after every row.

    Use as a context manager or call :meth:`close`.
    """

    def __init__(self, path):
        self.path = pathlib.Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = self.path.open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._file)
        self._writer.writerow(DiagRecord.columns())
        self._file.flush()

    def write(self, rec: DiagRecord):
        self._writer.writerow([repr(float(value)) for value in rec.as_row()])
        self._file.flush()

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_records(path) -> typing.List[DiagRecord]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        return [DiagRecord(**{key: float(value) for key, value in row.items()}) for row in reader]


def _face_pairing(potential: np.ndarray, weight: np.ndarray, g) -> np.ndarray:
    # -Δpotential·Δweight on every interior face, half to each neighbouring cell
    out = np.zeros(g.shape)
    fx = np.maximum(-np.diff(potential, axis=0) * np.diff(weight, axis=0), 0.0) / g.dx**2
    fy = np.maximum(-np.diff(potential, axis=1) * np.diff(weight, axis=1), 0.0) / g.dy**2
    out[:-1] += 0.5 * fx
    out[1:] += 0.5 * fx
    out[:, :-1] += 0.5 * fy
    out[:, 1:] += 0.5 * fy
    return out


def _production_densities(c: Constitutive, prev: SimState, nxt: SimState, dt: float, advection):
    """
    Cell densities of the three productions as the heat update deposits them, each weighted with
    the secant :meth:`.Constitutive.entropy_weight` of the step, the step average of
    ``Λ'/Q_δ' ≈ 1/ℓ``.

    Conduction pairs the implicit Kirchhoff potential of the heat update with the weight across
    every face, so ``∑ weight · Δκ̂`` is recovered by summation by parts.
    """
    g = prev.grid
    q0, q1 = prev.q.values, nxt.q.values
    weight = c.entropy_weight(q0, q1)
    theta0 = c.theta(q0)
    viscous = strain_norm2(prev.vel, c.nu(theta0)).values * weight

    kirchhoff = c.kappa_hat(theta0) + c.kirchhoff_slope(theta0) * (q1 - q0)
    conduction = _face_pairing(kirchhoff, weight, g)

    rate = (nxt.phi.values - prev.phi.values) / dt
    rate = rate + advect_scalar(prev.phi, prev.vel, advection).values
    kinetic = c.params.eps * rate * rate * weight
    return viscous, conduction, kinetic


def entropy_production_terms(
    state_prev: SimState,
    state_next: SimState,
    dt: float,
    params: ModelParams,
    advection: AdvectionScheme = AdvectionScheme.UPWIND2,
) -> EntropyProduction:
    """
    Space integrals of ``ν/ℓ |∇v + ∇vᵀ|²``, ``ℓ'/ℓ² κ|∇θ|²`` and ``ε/ℓ |Dφ/Dt|²`` over one step.

    ``1/ℓ`` is averaged over the step and the heat sources are taken as the time stepper
    deposits them, so for states produced by :class:`.timestepper.Stepper` the caloric entropy
    gain of the heat update matches these terms up to transport and round-off.
    """
    if not dt > 0:
        raise error.PreconditionError("dt must be positive")
    c = Constitutive(params)
    viscous, conduction, kinetic = _production_densities(c, state_prev, state_next, dt, advection)
    area = state_prev.grid.cell_area
    return EntropyProduction(
        viscous=float(np.sum(viscous) * area),
        conduction=float(np.sum(conduction) * area),
        kinetic=float(np.sum(kinetic) * area),
        dt=dt,
    )


def _check_alignment(records, productions):
    if len(productions) != len(records) - 1:
        raise error.MisalignedSeries(
            f"{len(records)} records need {len(records) - 1} production intervals, "
            f"got {len(productions)}"
        )
    for k, prod in enumerate(productions):
        span = records[k + 1].t - records[k].t
        if not math.isclose(span, prod.dt, rel_tol=1e-9, abs_tol=1e-15):
            raise error.MisalignedSeries(
                f"Interval {k} spans {span!r} but production dt is {prod.dt!r}"
            )


def entropy_budget_check(
    records: typing.Sequence[DiagRecord], productions: typing.Sequence[EntropyProduction]
) -> float:
    """
    Smallest slack ``S(t_k) - S(t_0) - ∑ production dt`` over the series.

    :raises: :class:`.error.MisalignedSeries`
    """
    _check_alignment(records, productions)
    if len(records) < 2:
        return 0.0
    produced = np.cumsum([prod.total * prod.dt for prod in productions])
    gained = np.array([rec.S - records[0].S for rec in records[1:]])
    return float(np.min(gained - produced))


def entropy_step_slack(records: typing.Sequence[DiagRecord]) -> float:
    """Smallest per-step entropy change; nonnegative for a nondecreasing entropy."""
    if len(records) < 2:
        return 0.0
    return float(np.min(np.diff([rec.S for rec in records])))


def energy_drift(records: typing.Sequence[DiagRecord]) -> np.ndarray:
    """Signed relative drift ``(E_tot(t) - E_tot(0)) / E_tot(0)``."""
    e = np.array([rec.E_tot for rec in records])
    return (e - e[0]) / abs(e[0])


def _validate_zeta(zeta: ScalarField):
    values = zeta.values
    if np.any(values < 0):
        raise error.PreconditionError("Test function zeta must be nonnegative")
    g = zeta.grid
    interior = np.abs(laplacian_neumann(zeta).values[1:-1, 1:-1])
    bound = 4.0 * max(g.dx, g.dy) ** 2 * float(np.max(interior)) + 1e-12
    edges = np.concatenate(
        [
            np.abs(values[1] - values[0]),
            np.abs(values[-1] - values[-2]),
            np.abs(values[:, 1] - values[:, 0]),
            np.abs(values[:, -1] - values[:, -2]),
        ]
    )
    if np.max(edges) > bound:
        raise error.PreconditionError("Test function zeta violates the Neumann condition")


class WeakEntropyBalance:
    """
    Accumulates the weak entropy balance tested with a time independent ``ζ``:

    ``∫ζ s(T) - ∫ζ s(0) - ∑ dt [∫ s v·∇ζ + ∫ h(θ)Δζ + ∫ζ (production integrands)]``

    with ``s = Λ(θ) + φ`` and every interval evaluated at its midpoint. Feed consecutive state
    pairs to :meth:`add`; runs need not keep their whole history. The residual is the smallest
    slack over all end times ``T``.

    :raises: :class:`.error.PreconditionError` for a negative or non-Neumann ``ζ``.
    """

    def __init__(
        self,
        zeta: ScalarField,
        params: ModelParams,
        advection: AdvectionScheme = AdvectionScheme.UPWIND2,
    ):
        _validate_zeta(zeta)
        self.zeta = zeta
        self.params = params
        self.advection = advection
        self._c = Constitutive(params)
        self._lap_zeta = laplacian_neumann(zeta).values
        self._grad_zeta = grad_to_faces(zeta)
        self._floor = params.delta or 1e-8
        self._first = None
        self._flux = 0.0
        self._slack = None

    def _density(self, state: SimState) -> np.ndarray:
        return self._c.Lambda(self._c.theta(state.q.values)) + state.phi.values

    def add(self, prev: SimState, nxt: SimState):
        c = self._c
        dt = nxt.t - prev.t
        if not dt > 0:
            raise error.MisalignedSeries("State times must increase")
        if self._first is None:
            self._first = self._density(prev)
        s_next = self._density(nxt)
        s_mid = 0.5 * (self._density(prev) + s_next)
        sp = np.pad(s_mid, 1, mode="edge")
        u = 0.5 * (prev.vel.u + nxt.vel.u)
        v = 0.5 * (prev.vel.v + nxt.vel.v)
        grad = self._grad_zeta
        transport = np.sum(0.5 * (sp[:-1, 1:-1] + sp[1:, 1:-1]) * u * grad.u)
        transport += np.sum(0.5 * (sp[1:-1, :-1] + sp[1:-1, 1:]) * v * grad.v)
        h_prev = c.h_entropy_flux(np.maximum(c.theta(prev.q.values), self._floor))
        h_next = c.h_entropy_flux(np.maximum(c.theta(nxt.q.values), self._floor))
        diffusion = np.sum(0.5 * (h_prev + h_next) * self._lap_zeta)

        viscous, conduction, kinetic = _production_densities(c, prev, nxt, dt, self.advection)
        production = np.sum(self.zeta.values * (viscous + conduction + kinetic))
        area = prev.grid.cell_area
        self._flux += dt * area * (transport + diffusion + production)
        gained = np.sum(self.zeta.values * (s_next - self._first)) * area
        slack = float(gained - self._flux)
        self._slack = slack if self._slack is None else min(self._slack, slack)

    @property
    def residual(self) -> float:
        """Smallest slack over every end time fed so far; ``0`` before the first interval."""
        return 0.0 if self._slack is None else self._slack


def weak_entropy_residual(
    states: typing.Sequence[SimState],
    zeta: ScalarField,
    params: ModelParams,
    advection: AdvectionScheme = AdvectionScheme.UPWIND2,
) -> float:
    """
    Signed slack of the weak entropy balance over a state series, see :class:`WeakEntropyBalance`.
    For ``ζ ≡ 1`` it equals :func:`entropy_budget_check` of the records of the same states.
    """
    balance = WeakEntropyBalance(zeta, params, advection)
    for prev, nxt in zip(states[:-1], states[1:]):
        balance.add(prev, nxt)
    return balance.residual


def _centered_xi(xi: VectorField) -> typing.Tuple[np.ndarray, np.ndarray]:
    if not xi.slip_ok:
        raise error.PreconditionError("xi must be tangential on the boundary")
    xu, xv = xi.centered()
    if np.max(np.hypot(xu, xv)) > 1.0 + 1e-12:
        raise error.PreconditionError("xi must satisfy |xi| <= 1")
    return xu, xv


def _interface_parts(
    phi: ScalarField, zeta: ScalarField, xi: VectorField, params: ModelParams, tiebreak
):
    if np.any(zeta.values < 0):
        raise error.PreconditionError("zeta must be nonnegative")
    xu, xv = _centered_xi(xi)
    eps = params.eps
    gx, gy = center_gradient(phi)
    gx, gy = gx.values, gy.values
    norm = np.hypot(gx, gy)
    flat = norm <= 1e-14
    safe = np.where(flat, 1.0, norm)
    nx = np.where(flat, tiebreak[0], gx / safe)
    ny = np.where(flat, tiebreak[1], gy / safe)
    root = dpsi(phi.values)
    return eps, xu, xv, norm, nx, ny, root


def relative_interface_energy(
    phi: ScalarField,
    zeta: ScalarField,
    xi: VectorField,
    params: ModelParams,
    tiebreak=DEFAULT_TIEBREAK,
) -> float:
    """
    ``∫ζ (ε|∇φ|²/2 + W(φ)/ε) - ∫ζ ξ·∇ψ(φ)`` with cell-centered gradients and
    ``∇ψ(φ) = √(2W(φ)) ∇φ``.

    :raises: :class:`.error.PreconditionError` if ``|ξ| > 1``, ``ξ·n ≠ 0`` or ``ζ < 0``.
    """
    eps, xu, xv, norm, nx, ny, root = _interface_parts(phi, zeta, xi, params, tiebreak)
    z = zeta.values
    density = 0.5 * eps * norm**2 + w(phi.values) / eps
    gx, gy = norm * nx, norm * ny
    cross = root * (xu * gx + xv * gy)
    return float(np.sum(z * (density - cross)) * phi.grid.cell_area)


class TiltExcess(typing.NamedTuple):
    """
    :ivar grad_excess: ``∫ζ ½|ν - ξ|² |∇ψ(φ)|``.
    :ivar equip_excess: ``∫ζ ½(√ε|∇φ| - √(2W/ε))²``.
    :ivar normal_excess: ``∫ζ ½|ν - ξ|² ε|∇φ|²``; at most four times the relative energy.
    """

    grad_excess: float
    equip_excess: float
    normal_excess: float


def tilt_excess(
    phi: ScalarField,
    zeta: ScalarField,
    xi: VectorField,
    params: ModelParams,
    tiebreak=DEFAULT_TIEBREAK,
) -> TiltExcess:
    """
    Tilt-excess penalizations of the diffuse normal ``ν = ∇φ/|∇φ|`` against ``ξ``; where
    ``∇φ = 0`` the normal is the fixed ``tiebreak`` vector.
    """
    eps, xu, xv, norm, nx, ny, root = _interface_parts(phi, zeta, xi, params, tiebreak)
    z = zeta.values
    tilt = 0.5 * ((nx - xu) ** 2 + (ny - xv) ** 2)
    equip = 0.5 * (math.sqrt(eps) * norm - np.sqrt(2.0 * w(phi.values) / eps)) ** 2
    area = phi.grid.cell_area
    return TiltExcess(
        grad_excess=float(np.sum(z * tilt * root * norm) * area),
        equip_excess=float(np.sum(z * equip) * area),
        normal_excess=float(np.sum(z * tilt * eps * norm**2) * area),
    )


def epsilon_tau(params: ModelParams, tau: float) -> float:
    """``W'(1 + τ) / L``; zero for an unbounded latent heat."""
    return float(dw(1.0 + tau)) / params.latent.sup


def phi_bound_check(rec: DiagRecord, params: ModelParams, tau: float) -> typing.Optional[bool]:
    """
    Whether ``-1 - 1e-6 ≤ φ ≤ 1 + τ + 1e-6`` holds on a record.

    :return: ``None`` when ``ε ≥ W'(1+τ)/L`` and the bound does not apply.
    """
    limit = epsilon_tau(params, tau)
    if not params.eps < limit:
        log.warning(f"phi bound check inapplicable: eps={params.eps} >= eps_tau={limit:.6g}")
        return None
    return rec.phi_min >= -1.0 - 1e-6 and rec.phi_max <= 1.0 + tau + 1e-6


def theta_floor_check(
    records: typing.Sequence[DiagRecord],
    c0: float,
    clamp_threshold: float = None,
    params: ModelParams = None,
) -> typing.Optional[bool]:
    """
    Whether the temperature stays above ``c0 / 2`` and the cumulative clamp mass below
    ``clamp_threshold`` (unchecked when ``None``).

    :param records: The run from its initial record on.
    :param c0: Lower bound of the initial temperature.
    :param clamp_threshold: Largest admissible clamp mass.
    :param params: When given, ``α`` must lie in ``(1/2, 1)``.
    :return: ``None`` when the floor does not apply: ``c0 ≤ 0``, an initial temperature below
        ``c0`` or ``α`` outside ``(1/2, 1)``.
    """
    if not c0 > 0:
        log.warning(f"theta floor check inapplicable: c0={c0} is not positive")
        return None
    initial = records[0].theta_min
    if initial < c0 * (1.0 - 1e-9):
        log.warning(f"theta floor check inapplicable: initial theta_min={initial:.6g} < c0={c0}")
        return None
    if params is not None and not 0.5 < params.alpha < 1.0:
        log.warning(f"theta floor check inapplicable: alpha={params.alpha} not in (0.5, 1)")
        return None
    lowest = min(rec.theta_min for rec in records)
    ok = lowest >= 0.5 * c0
    if clamp_threshold is not None:
        ok = ok and max(rec.clamp_mass for rec in records) <= clamp_threshold
    return ok


def initial_average_condition(state: SimState, params: ModelParams, tau0: float = 0.0):
    """
    Margin of the initial-temperature average condition ``mean Λ(θ₀) ≥ 2 + τ₀``.

    :return: ``(margin, satisfied)``.
    """
    c = Constitutive(params)
    margin = c.initial_average_margin(c.theta(state.q.values), tau0)
    if margin < 0:
        log.warning(f"Initial temperature average condition violated by {-margin:.6g}")
    return margin, margin >= 0
