"""
Fields on a rectangular MAC grid and the finite-difference operators acting on them.

Scalars live at cell centers with shape ``(nx, ny)``, velocity components on the faces normal to
them: ``u`` has shape ``(nx + 1, ny)`` and ``v`` has shape ``(nx, ny + 1)``. Boundary conditions are
complete slip for velocities and homogeneous Neumann for scalars.
"""
import hashlib
import logging
import typing
from dataclasses import dataclass

import numpy as np

from . import error
from .model import AdvectionScheme

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform rectangular grid on ``[0, lx] x [0, ly]``.

    :ivar nx: Number of cells in x.
    :ivar ny: Number of cells in y.
    :ivar lx: Domain length in x.
    :ivar ly: Domain length in y.
    """

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise error.InvalidParameter("grid.nx", "grid.nx and grid.ny must be >= 8")
        if not (self.lx > 0 and self.ly > 0):
            raise error.InvalidParameter("grid.lx", "grid.lx and grid.ly must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.nx, self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def digest(self) -> str:
        text = f"grid nx={self.nx} ny={self.ny} lx={self.lx!r} ly={self.ly!r}"
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def cell_centers(self) -> typing.Tuple[np.ndarray, np.ndarray]:
        """
        Coordinates of the cell centers.

        :return: ``(X, Y)``, each of shape ``(nx, ny)``.
        """
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def scalar(self, values=0.0) -> "ScalarField":
        values = np.asarray(values, dtype=float)
        return ScalarField(self, np.broadcast_to(values, self.shape).copy())

    def zero_vector(self) -> "VectorField":
        return VectorField(self, np.zeros((self.nx + 1, self.ny)), np.zeros((self.nx, self.ny + 1)))


@dataclass
class ScalarField:
    """
    Cell-centered values on a grid.

    :ivar grid: The :class:`GridSpec`.
    :ivar values: ``(nx, ny)`` float64 array.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise error.InvalidField(
                f"Scalar field of shape {self.values.shape} on a {self.grid.shape} grid"
            )

    def validate(self) -> "ScalarField":
        """
        :raises: :class:`.error.InvalidField` if a value is NaN or infinite.
        """
        if not np.all(np.isfinite(self.values)):
            raise error.InvalidField("Scalar field holds non-finite values")
        return self

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass
class VectorField:
    """
    Face-normal velocity components of a MAC grid.

    :ivar grid: The :class:`GridSpec`.
    :ivar u: ``(nx + 1, ny)`` x-components on vertical faces.
    :ivar v: ``(nx, ny + 1)`` y-components on horizontal faces.
    """

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        nx, ny = self.grid.shape
        if self.u.shape != (nx + 1, ny) or self.v.shape != (nx, ny + 1):
            raise error.InvalidField(
                f"Face arrays of shapes {self.u.shape}, {self.v.shape} on a {self.grid.shape} grid"
            )

    def validate(self) -> "VectorField":
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise error.InvalidField("Vector field holds non-finite values")
        return self

    @property
    def slip_ok(self) -> bool:
        """Whether the normal components vanish on the domain boundary."""
        return bool(
            np.all(self.u[0] == 0)
            and np.all(self.u[-1] == 0)
            and np.all(self.v[:, 0] == 0)
            and np.all(self.v[:, -1] == 0)
        )

    def enforce_slip(self) -> "VectorField":
        """Copy with the normal components on the boundary set to zero."""
        u = self.u.copy()
        v = self.v.copy()
        u[0] = u[-1] = 0.0
        v[:, 0] = v[:, -1] = 0.0
        return VectorField(self.grid, u, v)

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.u.copy(), self.v.copy())

    def max_speed(self) -> float:
        return float(np.maximum(np.max(np.abs(self.u)), np.max(np.abs(self.v))))

    def centered(self) -> typing.Tuple[np.ndarray, np.ndarray]:
        """Components averaged to cell centers."""
        return 0.5 * (self.u[1:] + self.u[:-1]), 0.5 * (self.v[:, 1:] + self.v[:, :-1])


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def grad_to_faces(f: ScalarField) -> VectorField:
    """
    Face-normal differences of a cell field; zero on boundary faces (homogeneous Neumann).
    """
    g = f.grid
    gu = np.zeros((g.nx + 1, g.ny))
    gv = np.zeros((g.nx, g.ny + 1))
    gu[1:-1] = np.diff(f.values, axis=0) / g.dx
    gv[:, 1:-1] = np.diff(f.values, axis=1) / g.dy
    return VectorField(g, gu, gv)


def div_from_faces(U: VectorField) -> ScalarField:
    g = U.grid
    return ScalarField(g, np.diff(U.u, axis=0) / g.dx + np.diff(U.v, axis=1) / g.dy)


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """
    Five-point Laplacian with mirrored ghost cells, computed as ``div(grad f)``.
    """
    return div_from_faces(grad_to_faces(f))


def inner(U: VectorField, V: VectorField) -> float:
    """Face inner product ``∑ (u u' + v v') dx dy``."""
    return float((np.sum(U.u * V.u) + np.sum(U.v * V.v)) * U.grid.cell_area)


def center_gradient(f: ScalarField) -> typing.Tuple[ScalarField, ScalarField]:
    """
    Gradient at cell centers: face differences averaged onto the cell.
    """
    gu, gv = grad_to_faces(f).centered()
    return ScalarField(f.grid, gu), ScalarField(f.grid, gv)


def _face_values(f: np.ndarray, U: VectorField, scheme: AdvectionScheme):
    """
    Values of a cell field on the faces, upwinded against the face velocity for ``UPWIND2``.
    """
    if scheme is AdvectionScheme.CENTERED:
        fp = np.pad(f, 1, mode="edge")
        fu = 0.5 * (fp[:-1, 1:-1] + fp[1:, 1:-1])
        fv = 0.5 * (fp[1:-1, :-1] + fp[1:-1, 1:])
        return fu, fv
    if scheme is AdvectionScheme.UPWIND2:
        fp = np.pad(f, 2, mode="edge")
        core_y = slice(2, -2)
        # face i sits between padded cells i + 1 and i + 2
        up = fp[1:-2, core_y]
        upup = fp[:-3, core_y]
        down = fp[2:-1, core_y]
        downdown = fp[3:, core_y]
        fu = np.where(U.u >= 0, up + 0.5 * (up - upup), down + 0.5 * (down - downdown))
        core_x = slice(2, -2)
        up = fp[core_x, 1:-2]
        upup = fp[core_x, :-3]
        down = fp[core_x, 2:-1]
        downdown = fp[core_x, 3:]
        fv = np.where(U.v >= 0, up + 0.5 * (up - upup), down + 0.5 * (down - downdown))
        return fu, fv
    raise error.UnknownScheme("AdvectionScheme", str(scheme))


def advect_scalar(f: ScalarField, U: VectorField, scheme=AdvectionScheme.UPWIND2) -> ScalarField:
    """
    Transport term ``v·∇f`` in flux-difference form.

    For a discretely divergence-free ``U`` with slip boundaries the result integrates to zero.

    :param f: Transported field.
    :param U: Face velocities.
    :param scheme: :class:`.model.AdvectionScheme` member or its configuration name.
    :raises: :class:`.error.UnknownScheme`
    """
    if not isinstance(scheme, AdvectionScheme):
        scheme = AdvectionScheme.from_name(scheme)
    g = f.grid
    c = f.values
    fu, fv = _face_values(c, U, scheme)
    term = (U.u[1:] * (fu[1:] - c) + U.u[:-1] * (c - fu[:-1])) / g.dx
    term += (U.v[:, 1:] * (fv[:, 1:] - c) + U.v[:, :-1] * (c - fv[:, :-1])) / g.dy
    return ScalarField(g, term)


def corner_average(f: np.ndarray) -> np.ndarray:
    """Average of the (edge padded) four cells around every grid corner, shape ``(nx+1, ny+1)``."""
    p = np.pad(f, 1, mode="edge")
    return 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])


def corner_shear(U: VectorField) -> np.ndarray:
    """
    Shear rate ``∂u/∂y + ∂v/∂x`` at grid corners; zero on boundary corners (free slip).
    """
    g = U.grid
    s = np.zeros((g.nx + 1, g.ny + 1))
    s[1:-1, 1:-1] = np.diff(U.u[1:-1], axis=1) / g.dy + np.diff(U.v[:, 1:-1], axis=0) / g.dx
    return s


def strain_norm2(U: VectorField, nu: ScalarField) -> ScalarField:
    """
    Cell-centered ``ν|∇v + ∇vᵀ|²``.

    Normal strains are taken in the cell, shear at the corners where it lives and averaged back.
    """
    g = U.grid
    nu_c = _values(nu)
    dudx = np.diff(U.u, axis=0) / g.dx
    dvdy = np.diff(U.v, axis=1) / g.dy
    shear = 2.0 * corner_average(nu_c) * corner_shear(U) ** 2
    shear_c = 0.25 * (shear[:-1, :-1] + shear[1:, :-1] + shear[:-1, 1:] + shear[1:, 1:])
    return ScalarField(g, 4.0 * nu_c * (dudx**2 + dvdy**2) + shear_c)


def chemical_potential(phi: ScalarField, eps: float) -> ScalarField:
    """``μ̃ = -εΔφ + W'(φ)/ε``."""
    p = phi.values
    return ScalarField(phi.grid, -eps * laplacian_neumann(phi).values + (p**3 - p) / eps)


def korteweg_force(phi: ScalarField, eps: float, mu: ScalarField = None) -> VectorField:
    """
    Capillary force ``μ̃∇φ`` on the faces; the remaining gradient part of ``-div(ε∇φ⊗∇φ)`` is
    carried by the pressure.

    :param phi: Order parameter.
    :param eps: Interface width.
    :param mu: Chemical potential to use instead of ``-εΔφ + W'(φ)/ε``.
    """
    mu = chemical_potential(phi, eps) if mu is None else mu
    m = np.pad(mu.values, 1, mode="edge")
    grad = grad_to_faces(phi)
    fu = 0.5 * (m[:-1, 1:-1] + m[1:, 1:-1]) * grad.u
    fv = 0.5 * (m[1:-1, :-1] + m[1:-1, 1:]) * grad.v
    return VectorField(phi.grid, fu, fv)


def integrate(f: ScalarField) -> float:
    """Midpoint rule ``∑ f dx dy``."""
    return float(np.sum(f.values) * f.grid.cell_area)


def min(f: ScalarField) -> float:  # noqa: A001
    return float(np.min(f.values))


def max(f: ScalarField) -> float:  # noqa: A001
    return float(np.max(f.values))
