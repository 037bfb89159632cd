import dataclasses
import hashlib
import math
import typing
from dataclasses import dataclass, field
from enum import IntEnum

from . import error
from .const import (
    ARCTAN_C_ELL,
    ARCTAN_DELTA0,
    ARCTAN_GAMMA,
    ARCTAN_LAMBDA,
    ARCTAN_SUPREMUM,
)


class Selector(IntEnum):
    """
    Base of the enums selectable from a run configuration.

    Members are spelled in lower case with dashes, e.g. ``PhiSplitting.CONVEX_SPLIT`` is
    ``convex-split``.
    """

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def from_name(cls, name: str):
        """
        Get a member from its configuration spelling.

        :param name: Spelling as found in a config file or on the command line.
        :return: Member of this enum.
        :raises: :class:`.error.UnknownScheme`
        """
        wanted = str(name).strip().lower().replace("_", "-")
        for member in cls:
            if member.label == wanted:
                return member
        raise error.UnknownScheme(cls.__name__, name)


class LatentHeatKind(Selector):
    LINEAR = 1
    ARCTAN = 2


class ViscosityProfile(Selector):
    DECAYING = 1
    CONSTANT = 2


class PhiSplitting(Selector):
    """
    Time discretization of the Allen-Cahn reaction term.

    ``EXPLICIT`` lags ``W'`` entirely, ``CONVEX_SPLIT`` is implicit in the convex part ``φ³`` and
    ``MIDPOINT`` uses the Crank-Nicolson Laplacian with the discrete gradient of ``W``.
    """

    EXPLICIT = 1
    CONVEX_SPLIT = 2
    MIDPOINT = 3


class AdvectionScheme(Selector):
    CENTERED = 1
    UPWIND2 = 2


class HeatLagging(Selector):
    LAG_KAPPA = 1


class InitKind(Selector):
    UNIFORM = 1
    TANH_CIRCLE = 2
    TANH_PLANE = 3
    CHECKPOINT = 4


def _digest(obj) -> str:
    return hashlib.sha256(repr(obj).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LatentHeatSpec:
    """
    Latent heat class and the constants of its structural assumptions.

    :ivar kind: :class:`LatentHeatKind` of ``ℓ``.
    :ivar lam: Slope ``λ``: ``ℓ(s) = λ s`` for the linear class, upper bound ``ℓ(s) ≤ λ s``
        otherwise.
    :ivar sup: Supremum ``L`` of ``ℓ`` (``inf`` for the linear class).
    :ivar c_ell: Constant ``C_ℓ`` of the decay condition on ``ℓ'``.
    :ivar gamma: Exponent ``γ`` of the decay condition on ``ℓ'``.
    """

    kind: LatentHeatKind = LatentHeatKind.ARCTAN
    lam: float = ARCTAN_LAMBDA
    sup: float = ARCTAN_SUPREMUM
    c_ell: float = ARCTAN_C_ELL
    gamma: float = ARCTAN_GAMMA

    @classmethod
    def linear(cls, lam: float):
        return cls(LatentHeatKind.LINEAR, lam=lam, sup=math.inf, c_ell=math.inf, gamma=0.0)

    @classmethod
    def arctan(cls):
        return cls()

    @property
    def bounded(self) -> bool:
        return self.kind is not LatentHeatKind.LINEAR

    @property
    def slope_at_zero(self) -> float:
        """``ℓ'(0)``."""
        return self.lam if self.kind is LatentHeatKind.LINEAR else 1.0


@dataclass(frozen=True)
class ModelParams:
    """
    Physical and constitutive parameters of the model.

    :ivar eps: Interface width ``ε``.
    :ivar alpha: Heat capacity exponent, ``c_V(s) = s^α``.
    :ivar beta: Conductivity exponent, ``κ(s) = κ₁ + κ₂ s^β``.
    :ivar kappa1: Conductivity coefficient ``κ₁``.
    :ivar kappa2: Conductivity coefficient ``κ₂``.
    :ivar nu1: Lower viscosity bound.
    :ivar nu2: Upper viscosity bound.
    :ivar nu_profile: :class:`ViscosityProfile` of ``ν(θ)``.
    :ivar latent: :class:`LatentHeatSpec`.
    :ivar delta: Regularization level ``δ`` of the positive surrogates.
    :ivar delta0: Fraction bounding the admissible ``δ < δ₀ ℓ'(0)``.
    """

    eps: float = 0.04
    alpha: float = 0.75
    beta: float = 2.0
    kappa1: float = 0.1
    kappa2: float = 0.1
    nu1: float = 0.1
    nu2: float = 0.1
    nu_profile: ViscosityProfile = ViscosityProfile.DECAYING
    latent: LatentHeatSpec = field(default_factory=LatentHeatSpec)
    delta: float = 1e-3
    delta0: float = ARCTAN_DELTA0

    def __post_init__(self):
        self.validate()

    @property
    def lambda_lin(self) -> float:
        return self.latent.lam

    def validate(self):
        """
        Check every invariant of the parameter set.

        :raises: :class:`.error.InvalidParameter` naming the offending key.
        """
        if not self.eps > 0:
            raise error.InvalidParameter("model.eps", "eps must be positive")
        if not 0.5 < self.alpha <= 1.0:
            raise error.InvalidParameter("model.alpha", "alpha must lie in (0.5, 1]")
        if not self.beta >= 2.0:
            raise error.InvalidParameter("model.beta", "beta must be >= 2")
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise error.InvalidParameter("model.kappa1", "kappa1 and kappa2 must be positive")
        if not 0 < self.nu1 <= self.nu2:
            raise error.InvalidParameter("model.nu1", "nu1, nu2 must satisfy 0 < nu1 <= nu2")
        if not self.latent.lam > 0:
            raise error.InvalidParameter("model.lambda_lin", "lambda_lin must be positive")
        if not 0 < self.delta0 < 1:
            raise error.InvalidParameter("model.delta0", "delta0 must lie in (0, 1)")
        if not self.delta >= 0:
            raise error.InvalidParameter("model.delta", "delta must be >= 0")
        if self.latent.bounded and not self.delta < self.delta0 * self.latent.slope_at_zero:
            raise error.InvalidParameter("model.delta", "delta must be below delta0 * ell'(0)")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        return _digest(dataclasses.astuple(self))


@dataclass(frozen=True)
class StepConfig:
    """
    Settings of one coupled time step.

    :ivar dt: Requested time step.
    :ivar cfl_target: Advective CFL number used by :func:`.timestepper.stable_dt`.
    :ivar poisson_tol: Relative residual of the pressure and Helmholtz solves.
    :ivar max_iters: Iteration cap of every conjugate gradient solve.
    :ivar phi_splitting: :class:`PhiSplitting` of the reaction term.
    :ivar heat_lagging: :class:`HeatLagging` of the heat diffusion.
    :ivar delta: Overrides ``ModelParams.delta`` when set.
    :ivar phi_advection: :class:`AdvectionScheme` for ``φ``.
    :ivar q_advection: :class:`AdvectionScheme` for ``q``.
    :ivar adaptive: Shrink ``dt`` to the stability bound. When ``False`` an unstable ``dt`` fails
        the step.
    :ivar newton_tol: Update tolerance of the Newton iterations of implicit splittings.
    :ivar newton_max_iters: Newton iteration cap.
    :ivar freeze_velocity: Skip the momentum update.
    :ivar freeze_temperature: Skip the heat update.
    :ivar latent_override: Constant latent heat replacing ``ℓ(θ)`` in the Allen-Cahn equation.
    """

    dt: float = 2e-4
    cfl_target: float = 0.4
    poisson_tol: float = 1e-10
    max_iters: int = 5000
    phi_splitting: PhiSplitting = PhiSplitting.EXPLICIT
    heat_lagging: HeatLagging = HeatLagging.LAG_KAPPA
    delta: typing.Optional[float] = None
    phi_advection: AdvectionScheme = AdvectionScheme.UPWIND2
    q_advection: AdvectionScheme = AdvectionScheme.UPWIND2
    adaptive: bool = True
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    freeze_velocity: bool = False
    freeze_temperature: bool = False
    latent_override: typing.Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise error.InvalidParameter("step.dt", "dt must be positive")
        if not 0 < self.cfl_target <= 0.5:
            raise error.InvalidParameter("step.cfl_target", "cfl_target must lie in (0, 0.5]")
        if not 0 < self.poisson_tol <= 1e-4:
            raise error.InvalidParameter("step.poisson_tol", "poisson_tol must lie in (0, 1e-4]")
        if self.max_iters < 1:
            raise error.InvalidParameter("step.max_iters", "max_iters must be >= 1")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class StepReport:
    """
    What happened during one coupled step.

    :ivar dt_used: Time step actually taken.
    :ivar poisson_iters: Conjugate gradient iterations of the pressure solve.
    :ivar helmholtz_iters: Conjugate gradient iterations of the Allen-Cahn, heat and viscous solves.
    :ivar newton_iters: Newton iterations of an implicit splitting.
    :ivar max_divergence: ``max |div v|`` after projection.
    :ivar viscous: ``∫ ν|∇v + ∇vᵀ|²`` heat source.
    :ivar kinetic: ``∫ ε|Dφ/Dt|²`` heat source.
    :ivar latent: ``-∫ ℓ(θ) Dφ/Dt`` heat source.
    :ivar clamp_mass: Heat added by flooring ``q`` at ``Q_δ(0)``.
    :ivar failed: Set when the step was abandoned.
    :ivar message: Reason for a failure or a dt reduction.
    """

    dt_used: float = 0.0
    poisson_iters: int = 0
    helmholtz_iters: int = 0
    newton_iters: int = 0
    max_divergence: float = 0.0
    viscous: float = 0.0
    kinetic: float = 0.0
    latent: float = 0.0
    clamp_mass: float = 0.0
    failed: bool = False
    message: str = ""

    @property
    def source_term_integrals(self) -> typing.Tuple[float, float, float]:
        return self.viscous, self.kinetic, self.latent


@dataclass(frozen=True)
class DiagRecord:
    """
    One time-stamped row of monitored functionals. Field order is the CSV column order.
    """

    t: float
    E_tot: float
    E_kin: float
    E_int: float
    H_heat: float
    S: float
    phi_min: float
    phi_max: float
    theta_min: float
    theta_max: float
    equip_disc: float
    perimeter_est: float
    max_div: float
    clamp_mass: float

    @classmethod
    def columns(cls) -> typing.List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def as_row(self) -> typing.List[float]:
        return [getattr(self, name) for name in self.columns()]

    def is_finite(self) -> bool:
        return all(math.isfinite(value) for value in self.as_row())


@dataclass(frozen=True)
class EntropyProduction:
    """
    Space-integrated entropy production rates over one interval of length ``dt``.
    """

    viscous: float
    conduction: float
    kinetic: float
    dt: float

    @property
    def total(self) -> float:
        return self.viscous + self.conduction + self.kinetic


@dataclass
class InterfaceGeometry:
    """
    Measured geometry of the zero level set of ``φ``.

    :ivar radius_area: ``√(|{φ > 0}| / π)``.
    :ivar radius_contour: Mean distance of the zero crossings to the centroid of ``{φ > 0}``.
    :ivar centroid: Centroid of ``{φ > 0}``.
    :ivar front_position: Zero crossing of the ``y``-averaged profile (pseudo-1D runs).
    :ivar inner_positive: ``True`` when ``φ > 0`` inside the measured region.
    """

    radius_area: float = math.nan
    radius_contour: float = math.nan
    centroid: typing.Tuple[float, float] = (math.nan, math.nan)
    front_position: float = math.nan
    inner_positive: bool = True


@dataclass
class BenchReport:
    """
    Outcome of a benchmark run compared against its oracle.

    :ivar name: Benchmark name, used in the verdict line.
    :ivar params_used: Flat mapping of the settings of the run.
    :ivar series: ``(t, measured, oracle)`` triples.
    :ivar max_rel_error: Largest relative deviation over the window.
    :ivar passed: Verdict against the configured tolerance.
    :ivar extra: Additional named results (calibrated constants, monitor margins, tables).
    """

    name: str
    params_used: typing.Dict[str, typing.Any] = field(default_factory=dict)
    series: typing.List[typing.Tuple[float, float, float]] = field(default_factory=list)
    max_rel_error: float = 0.0
    passed: bool = False
    extra: typing.Dict[str, typing.Any] = field(default_factory=dict)

    def verdict(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {status} max_rel_err={self.max_rel_error:.6e}"


@dataclass(frozen=True)
class InitialCondition:
    """
    Initial data of a run. Which fields matter depends on ``kind``.
    """

    kind: InitKind = InitKind.TANH_CIRCLE
    phi: float = -1.0
    theta: float = 1.0
    r0: float = 0.25
    center: typing.Optional[typing.Tuple[float, float]] = None
    inside: float = 1.0
    x0: typing.Optional[float] = None
    orientation: float = 1.0
    path: typing.Optional[str] = None


@dataclass(frozen=True)
class CheckpointHeader:
    format_version: int
    t: float
    step: int
    params_digest: str
    grid_digest: str
