"""
Constitutive functions of the non-isothermal phase-field model and their δ-regularized variants.

Every function accepts scalars or numpy arrays and returns a float for scalar input.
"""
import functools
import logging
import math
import typing

import numpy as np
from scipy import integrate

from . import error
from .const import SIGMA, SQRT2
from .model import LatentHeatKind, LatentHeatSpec, ModelParams, ViscosityProfile
from .utils.quadrature import PrimitiveTable, gauss_legendre

log = logging.getLogger(__name__)

_S_MIN = 1e-8
_THETA_FLOOR = 1e-8
_SECANT_REL = 1e-7


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _require(name: str, s, ok, expected: str):
    ok = np.asarray(ok)
    if not np.all(ok):
        bad = np.asarray(s, dtype=float)[~ok] if ok.ndim else s
        raise error.DomainError(name, float(np.ravel(bad)[0]), expected)


def w(s):
    """Double-well potential ``¼(s² - 1)²``."""
    s_ = np.asarray(s, dtype=float)
    return _out(0.25 * (s_ * s_ - 1.0) ** 2, s)


def dw(s):
    s_ = np.asarray(s, dtype=float)
    return _out(s_**3 - s_, s)


def ddw(s):
    s_ = np.asarray(s, dtype=float)
    return _out(3.0 * s_ * s_ - 1.0, s)


def dw_secant(a, b):
    """
    Discrete gradient of ``W``: ``(W(b) - W(a)) / (b - a)``, written without the division.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.25 * (a**3 + a * a * b + a * b * b + b**3) - 0.5 * (a + b)


def psi(s):
    """
    Phase indicator ``ψ(s) = ∫_{-1}^{s} √(2W)``.

    Outside ``[-1, 1]`` the integrand ``|1 - s²|/√2`` is kept, so ``ψ`` is nondecreasing on the
    line.
    """
    s_ = np.asarray(s, dtype=float)
    p = s_ - s_**3 / 3.0
    value = np.where(s_ < -1.0, -p - 2.0 / 3.0, np.where(s_ > 1.0, 2.0 - p, p + 2.0 / 3.0))
    return _out(value / SQRT2, s)


def dpsi(s):
    s_ = np.asarray(s, dtype=float)
    return _out(np.abs(1.0 - s_ * s_) / SQRT2, s)


def sigma() -> float:
    """Surface tension ``ψ(1) - ψ(-1) = 2√2/3``."""
    return SIGMA


@functools.lru_cache(maxsize=16)
def _arctan_tables(alpha: float, kappa1: float, kappa2: float, beta: float):
    log.debug(f"Building arctan entropy tables for alpha={alpha}, beta={beta}")

    def lambda_integrand(y):
        return y**alpha / np.arctan(y)

    def h_integrand(y):
        return (kappa1 + kappa2 * y**beta) / np.arctan(y)

    return PrimitiveTable(lambda_integrand, s_min=_S_MIN), PrimitiveTable(h_integrand, s_min=_S_MIN)


class Constitutive:
    """
    All constitutive relations bound to one :class:`.model.ModelParams`.

    Tables for ``Λ`` and ``h`` of the arctan class are built on construction and shared between
    instances with equal exponents and coefficients.

    :ivar params: The parameter set.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self._linear = params.latent.kind is LatentHeatKind.LINEAR
        if not self._linear:
            self._lambda_table, self._h_table = _arctan_tables(
                params.alpha, params.kappa1, params.kappa2, params.beta
            )
            self._lambda_offset = self._lambda_series(_S_MIN)
            self._h_at_one = float(self._h_table(1.0))

    @property
    def latent(self) -> LatentHeatSpec:
        return self.params.latent

    @property
    def delta(self) -> float:
        return self.params.delta

    # heat

    def heat_Q(self, s):
        s_ = np.asarray(s, dtype=float)
        _require("heat_Q", s, s_ >= 0, "s >= 0")
        a = self.params.alpha
        return _out(s_ ** (1.0 + a) / (1.0 + a), s)

    def heat_Q_inv(self, q):
        q_ = np.asarray(q, dtype=float)
        _require("heat_Q_inv", q, q_ >= 0, "q >= 0")
        a = self.params.alpha
        return _out(((1.0 + a) * q_) ** (1.0 / (1.0 + a)), q)

    def c_V(self, s):
        s_ = np.asarray(s, dtype=float)
        _require("c_V", s, s_ >= 0, "s >= 0")
        return _out(s_**self.params.alpha, s)

    # transport coefficients

    def kappa(self, s):
        s_ = np.asarray(s, dtype=float)
        _require("kappa", s, s_ >= 0, "s >= 0")
        p = self.params
        return _out(p.kappa1 + p.kappa2 * s_**p.beta, s)

    def kappa_hat(self, s):
        s_ = np.asarray(s, dtype=float)
        _require("kappa_hat", s, s_ >= 0, "s >= 0")
        p = self.params
        return _out(p.kappa1 * s_ + p.kappa2 * s_ ** (p.beta + 1.0) / (p.beta + 1.0), s)

    def nu(self, s):
        s_ = np.maximum(np.asarray(s, dtype=float), 0.0)
        p = self.params
        if p.nu_profile is ViscosityProfile.CONSTANT:
            value = np.full_like(s_, p.nu1)
        else:
            value = p.nu1 + (p.nu2 - p.nu1) / (1.0 + s_)
        return _out(value, s)

    # latent heat, extended by ℓ'(0) s below zero

    def ell(self, s):
        s_ = np.asarray(s, dtype=float)
        if self._linear:
            value = self.latent.lam * s_
        else:
            value = np.where(s_ >= 0, np.arctan(s_), s_)
        return _out(value, s)

    def dell(self, s):
        s_ = np.asarray(s, dtype=float)
        if self._linear:
            value = np.full_like(s_, self.latent.lam)
        else:
            value = np.where(s_ >= 0, 1.0 / (1.0 + s_ * s_), 1.0)
        return _out(value, s)

    # entropy

    def _lambda_series(self, s):
        a = self.params.alpha
        return s**a / a + s ** (a + 2.0) / (3.0 * (a + 2.0))

    def Lambda(self, s):
        """
        Caloric entropy ``Λ(s) = ∫₀ˢ y^α / ℓ(y) dy``.
        """
        s_ = np.asarray(s, dtype=float)
        _require("Lambda", s, s_ >= 0, "s >= 0")
        a = self.params.alpha
        if self._linear:
            return _out(s_**a / (a * self.latent.lam), s)
        flat = np.atleast_1d(s_).ravel()
        value = np.empty_like(flat)
        small = flat < _S_MIN
        value[small] = self._lambda_series(flat[small])
        value[~small] = self._lambda_offset + self._lambda_table(flat[~small])
        return _out(value.reshape(s_.shape), s)

    def dLambda(self, s):
        s_ = np.asarray(s, dtype=float)
        _require("dLambda", s, s_ > 0, "s > 0")
        return _out(s_**self.params.alpha / self.ell(s_), s)

    def h_entropy_flux(self, s):
        """
        Entropy flux potential ``h(s) = ∫₁ˢ κ(y) / ℓ(y) dy``.
        """
        s_ = np.asarray(s, dtype=float)
        _require("h_entropy_flux", s, s_ > 0, "s > 0")
        p = self.params
        if self._linear:
            lam = self.latent.lam
            value = p.kappa1 / lam * np.log(s_) + p.kappa2 * (s_**p.beta - 1.0) / (p.beta * lam)
            return _out(value, s)
        flat = np.atleast_1d(s_).ravel()
        value = np.empty_like(flat)
        small = flat < _S_MIN
        value[~small] = self._h_table(flat[~small]) - self._h_at_one
        if np.any(small):
            # below the table, integrate in log(y) where κ(y) y / arctan(y) is smooth
            def integrand(t):
                y = np.exp(t)
                return (p.kappa1 + p.kappa2 * y**p.beta) * y / np.arctan(y)

            tail = gauss_legendre(integrand, np.log(flat[small]), math.log(_S_MIN), order=16)
            value[small] = -tail - self._h_at_one
        return _out(value.reshape(s_.shape), s)

    def dh_entropy_flux(self, s):
        s_ = np.asarray(s, dtype=float)
        _require("dh_entropy_flux", s, s_ > 0, "s > 0")
        return _out(self.kappa(s_) / self.ell(s_), s)

    # δ-regularized family

    def _positive_delta(self, name: str) -> float:
        if not self.delta > 0:
            raise error.PreconditionError(f"{name} requires delta > 0")
        return self.delta

    def log_delta(self, s):
        d = self._positive_delta("log_delta")
        s_ = np.asarray(s, dtype=float)
        value = np.where(s_ >= d, np.log(np.maximum(s_, d)), s_ / d + math.log(d) - 1.0)
        return _out(value, s)

    def dlog_delta(self, s):
        d = self._positive_delta("dlog_delta")
        s_ = np.asarray(s, dtype=float)
        return _out(np.where(s_ >= d, 1.0 / np.maximum(s_, d), 1.0 / d), s)

    def ell_delta(self, s):
        """
        Strictly positive latent heat ``l̃_δ(ℓ(s))``; equals ``ℓ`` when ``δ = 0``.
        """
        ell = np.asarray(self.ell(s), dtype=float)
        d = self.delta
        if d == 0:
            return _out(ell, s)
        value = np.where(ell >= d, ell, d / (2.0 - np.minimum(ell, d) / d))
        return _out(value, s)

    def dell_delta(self, s):
        ell = np.asarray(self.ell(s), dtype=float)
        dell = np.asarray(self.dell(s), dtype=float)
        d = self.delta
        if d == 0:
            return _out(dell, s)
        tilde = np.where(ell >= d, 1.0, 1.0 / (2.0 - np.minimum(ell, d) / d) ** 2)
        return _out(tilde * dell, s)

    def ell_reg(self, s):
        """``ℓ_δ`` when ``δ > 0``, else ``ℓ``. Used wherever the model divides by ``ℓ``."""
        return self.ell_delta(s)

    def heat_Q_delta(self, s):
        s_ = np.asarray(s, dtype=float)
        a, d = self.params.alpha, self.delta
        pos = (np.maximum(s_, 0.0) ** 2 + d * d) ** ((1.0 + a) / 2.0) / (1.0 + a)
        neg = 2.0 * d ** (1.0 + a) / ((1.0 + a) * (2.0 - np.minimum(s_, 0.0)))
        return _out(np.where(s_ >= 0, pos, neg), s)

    def dheat_Q_delta(self, s):
        s_ = np.asarray(s, dtype=float)
        a, d = self.params.alpha, self.delta
        sp = np.maximum(s_, 0.0)
        base = sp * sp + d * d
        pos = sp * np.where(base > 0, base, 1.0) ** ((a - 1.0) / 2.0)
        neg = 2.0 * d ** (1.0 + a) / ((1.0 + a) * (2.0 - np.minimum(s_, 0.0)) ** 2)
        return _out(np.where(s_ >= 0, pos, neg), s)

    @property
    def q_floor(self) -> float:
        """``Q_δ(0)``, the smallest internal heat kept by the scheme."""
        return float(self.heat_Q_delta(0.0))

    def heat_Q_delta_inv(self, q):
        q_ = np.asarray(q, dtype=float)
        a, d = self.params.alpha, self.delta
        floor = self.q_floor
        if d == 0:
            _require("heat_Q_delta_inv", q, q_ >= 0, "q >= 0 when delta = 0")
        upper = np.sqrt(
            np.maximum(((1.0 + a) * np.maximum(q_, floor)) ** (2.0 / (1.0 + a)) - d * d, 0.0)
        )
        if d == 0:
            return _out(upper, q)
        lower = 2.0 - 2.0 * d ** (1.0 + a) / ((1.0 + a) * np.where(q_ > 0, q_, np.inf))
        _require("heat_Q_delta_inv", q, q_ > 0, "q > 0")
        return _out(np.where(q_ >= floor, upper, lower), q)

    def theta(self, q):
        """Temperature of an internal heat field, ``Q_δ⁻¹(q)``."""
        return self.heat_Q_delta_inv(q)

    def kappa_delta(self, s):
        s_ = np.asarray(s, dtype=float)
        p, d = self.params, self.delta
        above = p.kappa1 + p.kappa2 * np.maximum(s_, 0.0) ** p.beta
        below = p.kappa1 + p.kappa2 * d * d * np.abs(s_) ** (p.beta - 2.0)
        return _out(np.where(s_ > d, above, below), s)

    def F_delta(self, s):
        """
        Kirchhoff-type transform ``∫ √(κ_δ(Q_δ⁻¹(τ)) (Q_δ⁻¹)'(τ)) dτ`` in the internal heat
        variable.

        .. note::
            The integral is anchored at ``τ₀ = Q_δ(0)``, the heat of zero temperature: towards
            ``τ = 0`` the integrand grows like ``1/τ`` and the integral diverges. Values below
            ``τ₀`` are negative.
        """
        self._positive_delta("F_delta")
        tau0 = self.q_floor

        # substituting τ = Q_δ(θ) removes the endpoint singularity at τ₀
        def integrand(theta):
            return math.sqrt(self.kappa_delta(theta) * self.dheat_Q_delta(theta))

        def one(value):
            if value <= 0:
                raise error.DomainError("F_delta", value, "s > 0")
            if value == tau0:
                return 0.0
            return integrate.quad(integrand, 0.0, self.heat_Q_delta_inv(value), limit=200)[0]

        s_ = np.asarray(s, dtype=float)
        value = np.array([one(v) for v in np.atleast_1d(s_).ravel()]).reshape(s_.shape)
        return _out(value, s)

    def Lambda_delta(self, s):
        """``∫₀ˢ Q_δ' / ℓ_δ``; exposed for checking entropy bounds, not used by the solver."""
        self._positive_delta("Lambda_delta")

        def one(value):
            if value < 0:
                raise error.DomainError("Lambda_delta", value, "s >= 0")
            f = lambda y: self.dheat_Q_delta(y) / self.ell_delta(y)  # noqa: E731
            return integrate.quad(f, 0.0, value, limit=200)[0]

        s_ = np.asarray(s, dtype=float)
        value = np.array([one(v) for v in np.atleast_1d(s_).ravel()]).reshape(s_.shape)
        return _out(value, s)

    def h_delta(self, s):
        """``∫₁ˢ κ_δ / ℓ_δ``; finite on the whole line since ``ℓ_δ > 0``."""
        self._positive_delta("h_delta")

        def one(value):
            f = lambda y: self.kappa_delta(y) / self.ell_delta(y)  # noqa: E731
            return integrate.quad(f, 1.0, value, limit=200)[0]

        s_ = np.asarray(s, dtype=float)
        value = np.array([one(v) for v in np.atleast_1d(s_).ravel()]).reshape(s_.shape)
        return _out(value, s)

    # discrete heat and entropy exchange

    @property
    def theta_floor(self) -> float:
        """Smallest temperature used in coefficients that degenerate at ``θ = 0``."""
        return self.delta or _THETA_FLOOR

    def kirchhoff_slope(self, theta):
        """``κ(θ) / Q_δ'(θ)``, the rate of ``κ̂`` per unit internal heat."""
        theta = np.asarray(theta, dtype=float)
        return self.kappa(theta) / self.dheat_Q_delta(np.maximum(theta, self.theta_floor))

    def entropy_weight(self, q_prev, q_next):
        """
        Secant ``(G(q₁) - G(q₀)) / (q₁ - q₀)`` of ``G = Λ ∘ Q_δ⁻¹``.

        Multiplying an internal heat increment by it gives the caloric entropy increment exactly.
        Where the increment is at round-off level ``G'`` at the mean heat is used instead. Both
        arguments must be at least :attr:`q_floor`.
        """
        q0 = np.asarray(q_prev, dtype=float)
        q1 = np.asarray(q_next, dtype=float)
        dq = q1 - q0
        tiny = np.abs(dq) <= _SECANT_REL * np.maximum(np.abs(q0), 1.0)
        mid = np.maximum(self.theta(0.5 * (q0 + q1)), self.theta_floor)
        slope = self.dLambda(mid) / self.dheat_Q_delta(mid)
        gained = self.Lambda(self.theta(q1)) - self.Lambda(self.theta(q0))
        return np.where(tiny, slope, gained / np.where(tiny, 1.0, dq))

    def initial_average_margin(self, theta0, tau0: float = 0.0) -> float:
        """
        ``mean Λ(θ₀) - (2 + τ₀)``: the initial-temperature average condition holds when nonnegative.
        """
        return float(np.mean(self.Lambda(np.asarray(theta0, dtype=float)))) - (2.0 + tau0)


class PropertyCheck(typing.NamedTuple):
    name: str
    passed: bool
    detail: str


def _fd_check(f, df, points, rel_tol=1e-6) -> typing.Tuple[bool, float]:
    points = np.asarray(points, dtype=float)
    h = 1e-5 * np.maximum(np.abs(points), 1e-3)
    fd = (np.asarray(f(points + h)) - np.asarray(f(points - h))) / (2 * h)
    exact = np.asarray(df(points))
    err = np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1e-12))
    return bool(err <= rel_tol), float(err)


def logdelta_constant(c: Constitutive, s_max: float = 100.0, n: int = 10_000) -> float:
    """
    Smallest ratio ``(ℓ'_δ/ℓ_δ²) / log'_δ(s)²`` over a sweep of ``[0, s_max]``.
    """
    s = np.linspace(0.0, s_max, n)
    ratio = (c.dell_delta(s) / c.ell_delta(s) ** 2) / c.dlog_delta(s) ** 2
    return float(np.min(ratio))


def check_constitutive_properties(params: ModelParams = None) -> typing.List[PropertyCheck]:
    """
    Run the property sweeps of the constitutive relations.

    :param params: Parameters of the relations under test; arctan latent heat with ``δ = 0.01``
        when omitted.
    :return: One :class:`PropertyCheck` per property.
    """
    if params is None:
        params = ModelParams(delta=0.01)
    c = Constitutive(params)
    checks = []

    def add(name, passed, detail):
        checks.append(PropertyCheck(name, bool(passed), detail))
        log.debug(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")

    by_well = integrate.quad(lambda r: math.sqrt(2.0 * w(r)), -1.0, 1.0, epsabs=1e-14)[0]
    by_profile = integrate.quad(
        lambda x: (1.0 / SQRT2 / math.cosh(x / SQRT2) ** 2) ** 2, -np.inf, np.inf, epsabs=1e-14
    )[0]
    err = max(abs(by_well - SIGMA), abs(by_profile - SIGMA), abs(psi(1.0) - psi(-1.0) - SIGMA))
    add("sigma", err <= 1e-8, f"max deviation {err:.2e}")

    add("dw(1.1)", abs(dw(1.1) - 0.231) <= 1e-12, f"{dw(1.1)!r}")

    linear = Constitutive(ModelParams(alpha=1.0, latent=LatentHeatSpec.linear(1.0)))
    closed = linear.Lambda(2.0)
    add("Lambda linear closed form", abs(closed - 2.0) <= 1e-12, f"{closed!r}")
    add("h(1) = 0", abs(c.h_entropy_flux(1.0)) <= 1e-12, f"{c.h_entropy_flux(1.0)!r}")

    pts = np.geomspace(1e-2, 1e2, 100)
    signed = np.linspace(-0.99, 1.09, 100)
    pairs = [
        ("W/W'", w, dw, signed),
        ("psi/sqrt(2W)", psi, dpsi, signed),
        ("Q/c_V", c.heat_Q, c.c_V, pts),
        ("kappa_hat/kappa", c.kappa_hat, c.kappa, pts),
        ("Lambda/(Q'/ell)", c.Lambda, c.dLambda, pts),
        ("h/(kappa/ell)", c.h_entropy_flux, c.dh_entropy_flux, pts),
    ]
    for name, f, df, where in pairs:
        ok, err = _fd_check(f, df, where)
        add(f"derivative {name}", ok, f"max rel err {err:.2e}")

    spec = params.latent
    s = np.linspace(0.0, 1e3, 10_000)
    if spec.bounded:
        ell, dell = c.ell(s), c.dell(s)
        add("ell bounded", np.all((ell >= 0) & (ell <= spec.sup)), f"max {ell.max():.6f}")
        add("ell' nonincreasing", np.all(np.diff(dell) <= 1e-15), "sweep [0, 1e3]")
        add("ell(s) <= lambda s", np.all(ell <= spec.lam * s + 1e-15), f"lambda={spec.lam}")
        unit = np.linspace(1e-6, 1.0, 10_000, endpoint=False)
        delta0_e = float(np.min(c.ell(unit) / (spec.slope_at_zero * unit)))
        add("ell(s) >= delta0 ell'(0) s on [0,1)", delta0_e > 0, f"empirical delta0={delta0_e:.6f}")
        tail = np.geomspace(1.0, 1e4, 10_000)
        decay = float(np.min(spec.c_ell * c.dell(tail) * (1.0 + tail**spec.gamma)))
        add("ell' decay", decay >= 1.0 - 1e-12, f"min C_ell ell'(s)(1+s^gamma)={decay:.6f}")

        unit_alpha = ModelParams(alpha=1.0, delta=params.delta, latent=spec)
        c1 = Constitutive(unit_alpha)
        rule = integrate.fixed_quad(lambda u: u / np.arctan(u), 0.0, 1.0, n=40)[0]
        err = abs(c1.Lambda(1.0) - rule)
        add("Lambda dual quadrature", err <= 1e-8, f"deviation {err:.2e}")

    if params.delta > 0:
        d = params.delta
        line = np.linspace(-50.0, 50.0, 10_000)
        add("ell_delta > 0", np.all(c.ell_delta(line) > 0), f"min {c.ell_delta(line).min():.3e}")
        c0 = logdelta_constant(c)
        add("logdelta2 inequality", c0 > 0, f"C0={c0:.6f}")
        q = c.heat_Q_delta(line)
        back = c.heat_Q_delta_inv(q)
        add("Q_delta monotone", np.all(np.diff(q) > 0), "sweep [-50, 50]")
        add(
            "Q_delta round trip",
            np.max(np.abs(back - line) / np.maximum(1.0, np.abs(line))) <= 1e-10,
            "sweep [-50, 50]",
        )
        branch = max(
            abs(c.ell_delta(0.0) - d / 2.0),
            abs(c.heat_Q_delta(0.0) - d ** (1 + params.alpha) / (1 + params.alpha)),
            abs(c.log_delta(d / 2.0) - (0.5 + math.log(d) - 1.0)),
            abs(c.log_delta(1.0)),
        )
        add("delta branch values", branch <= 1e-12, f"max deviation {branch:.2e}")
        inner = c.Lambda_delta(np.linspace(0.0, 1.0, 11))
        add("Lambda_delta bounded on [0,1]", np.all(np.isfinite(inner)), f"max {inner.max():.6f}")
        outer = np.array([2.0, 5.0, 10.0])
        bound = inner[-1] + (c.heat_Q_delta(outer) - c.heat_Q_delta(1.0)) / c.ell_delta(1.0)
        grows = np.all(c.Lambda_delta(outer) <= bound + 1e-10)
        add("Lambda_delta growth bound", grows, "s in {2,5,10}")
    return checks
