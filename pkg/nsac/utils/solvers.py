"""
Sparse operators of the MAC grid and the preconditioned conjugate gradient driver.

Unknowns are flattened in C order of their arrays, so cell ``(i, j)`` has index ``i * ny + j``.
"""
import logging
import typing

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import error

log = logging.getLogger(__name__)


def _neumann_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def _difference(n_rows: int, n_cols: int) -> sp.csr_matrix:
    """
    Forward difference from ``n_cols`` interior face unknowns to ``n_rows`` points between them.

    With ``n_rows == n_cols + 1`` the outer (boundary) unknowns are zero; with
    ``n_rows == n_cols - 1`` only differences between neighbouring unknowns are taken.
    """
    if n_rows == n_cols + 1:
        diagonals, offsets = [np.ones(n_cols), -np.ones(n_cols)], [0, -1]
    else:
        diagonals, offsets = [-np.ones(n_rows), np.ones(n_rows)], [0, 1]
    return sp.diags(diagonals, offsets, shape=(n_rows, n_cols), format="csr")


def neumann_laplacian(nx: int, ny: int, dx: float, dy: float) -> sp.csr_matrix:
    """
    Five-point Laplacian of cell values with homogeneous Neumann boundaries.

    It agrees entry for entry with :func:`nsac.grid.laplacian_neumann`.
    """
    lx = _neumann_1d(nx, dx)
    ly = _neumann_1d(ny, dy)
    return (sp.kron(lx, sp.identity(ny)) + sp.kron(sp.identity(nx), ly)).tocsr()


class ViscousOperator:
    """
    Componentwise viscous diffusion ``div(ν∇u)`` acting on the interior face unknowns.

    ``u`` unknowns are the faces ``1..nx-1`` of every column, ``v`` unknowns the faces
    ``1..ny-1`` of every row. Boundary faces carry zero normal velocity, boundary corners
    zero shear.
    """

    def __init__(self, nx: int, ny: int, dx: float, dy: float):
        self.nx, self.ny, self.dx, self.dy = nx, ny, dx, dy
        self.gx_u = sp.kron(_difference(nx, nx - 1), sp.identity(ny)).tocsr() / dx
        self.gy_u = sp.kron(sp.identity(nx - 1), _difference(ny - 1, ny)).tocsr() / dy
        self.gy_v = sp.kron(sp.identity(nx), _difference(ny, ny - 1)).tocsr() / dy
        self.gx_v = sp.kron(_difference(nx - 1, nx), sp.identity(ny - 1)).tocsr() / dx

    def matrices(self, nu_cells: np.ndarray, nu_corners: np.ndarray, dt: float):
        """
        Backward Euler matrices ``I + dt(Gᵀ diag(ν) G)`` for both components.

        :param nu_cells: ``(nx, ny)`` viscosity at cell centers.
        :param nu_corners: ``(nx + 1, ny + 1)`` viscosity at corners.
        :param dt: Time step.
        :return: ``(A_u, A_v)``, symmetric positive definite.
        """
        nu_c = sp.diags(nu_cells.ravel())
        inner_corners = nu_corners[1:-1, 1:-1].ravel()
        a_u = self.gx_u.T @ nu_c @ self.gx_u + self.gy_u.T @ sp.diags(inner_corners) @ self.gy_u
        a_v = self.gy_v.T @ nu_c @ self.gy_v + self.gx_v.T @ sp.diags(inner_corners) @ self.gx_v
        eye_u = sp.identity(a_u.shape[0])
        eye_v = sp.identity(a_v.shape[0])
        return (eye_u + dt * a_u).tocsr(), (eye_v + dt * a_v).tocsr()


def jacobi(a: sp.spmatrix) -> spla.LinearOperator:
    inv = 1.0 / a.diagonal()
    return spla.LinearOperator(a.shape, matvec=lambda x: inv * x, dtype=float)


def pcg(
    a: sp.spmatrix,
    b: np.ndarray,
    x0: np.ndarray = None,
    rtol: float = 1e-10,
    atol: float = 0.0,
    maxiter: int = 5000,
    name: str = "cg",
) -> typing.Tuple[np.ndarray, int]:
    """
    Jacobi preconditioned conjugate gradient on a symmetric positive (semi)definite system.

    :param a: System matrix.
    :param b: Right hand side; must be in the range of ``a`` when ``a`` is singular.
    :param x0: Initial guess.
    :param rtol: Relative residual tolerance.
    :param atol: Absolute residual tolerance.
    :param maxiter: Iteration cap.
    :param name: Solve name used in logs and errors.
    :return: Solution and number of iterations.
    :raises: :class:`.error.SolverNotConverged`
    """
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x, info = spla.cg(
        a, b, x0=x0, rtol=rtol, atol=atol, maxiter=maxiter, M=jacobi(a), callback=count
    )
    if info != 0:
        residual = float(np.linalg.norm(b - a @ x) / max(np.linalg.norm(b), np.finfo(float).tiny))
        log.error(f"{name} solve stopped after {iterations} iterations, residual {residual:.3e}")
        raise error.SolverNotConverged(name, iterations, residual)
    log.debug(f"{name} solve converged in {iterations} iterations")
    return x, iterations
