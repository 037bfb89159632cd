"""
Independent one dimensional reference for latent-heat forced Allen-Cahn fronts.

Method of lines on a fine cell-centered grid, integrated by :func:`scipy.integrate.solve_ivp`.
It shares no code with the two dimensional stepper.
"""
import logging
import math

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

log = logging.getLogger(__name__)


def _crossing(x: np.ndarray, profile: np.ndarray) -> float:
    signs = np.signbit(profile)
    k = np.flatnonzero(signs[:-1] != signs[1:])
    if len(k) == 0:
        return math.nan
    k = k[0]
    a, b = profile[k], profile[k + 1]
    return float(x[k] + (x[k + 1] - x[k]) * a / (a - b))


def reference_front_speed(
    eps: float,
    ell_bar: float,
    length: float = 1.0,
    n: int = None,
    x0: float = None,
    orientation: float = 1.0,
    t_end: float = 0.5,
    samples: int = 41,
) -> float:
    """
    Speed of the front of ``φ_t = φ_xx - W'(φ)/ε² + ℓ̄/ε`` on ``[0, length]`` with Neumann ends.

    :param eps: Interface width.
    :param ell_bar: Constant latent heat.
    :param length: Domain length.
    :param n: Number of cells, ``16 length / eps`` when omitted.
    :param x0: Initial front position, ``0.7 length`` when omitted.
    :param orientation: ``+1`` puts the ``+1`` phase on the right.
    :param t_end: Integration time.
    :param samples: Number of output times.
    :return: Slope of a least squares fit of the front position over the second half of the run.
    """
    n = n or int(round(16 * length / eps))
    x0 = 0.7 * length if x0 is None else x0
    h = length / n
    x = (np.arange(n) + 0.5) * h
    phi0 = orientation * np.tanh((x - x0) / (math.sqrt(2.0) * eps))

    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    lap = sp.diags([np.ones(n - 1), main, np.ones(n - 1)], [-1, 0, 1], format="csr") / (h * h)
    forcing = ell_bar / eps

    def rhs(_, phi):
        return lap @ phi - (phi**3 - phi) / eps**2 + forcing

    def jac(_, phi):
        return lap + sp.diags(-(3.0 * phi * phi - 1.0) / eps**2)

    t_eval = np.linspace(0.0, t_end, samples)
    sol = solve_ivp(
        rhs, (0.0, t_end), phi0, method="BDF", t_eval=t_eval, jac=jac, rtol=1e-8, atol=1e-10
    )
    if not sol.success:
        raise RuntimeError(f"Reference integration failed: {sol.message}")
    positions = np.array([_crossing(x, sol.y[:, k]) for k in range(len(sol.t))])
    half = sol.t >= 0.5 * t_end
    speed, _ = np.polyfit(sol.t[half], positions[half], 1)
    log.debug(f"Reference front speed {speed:.6g} for eps={eps}, ell_bar={ell_bar}")
    return float(speed)
