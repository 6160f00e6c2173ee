"""Sparse linear solves and the scalar Newton loop for the volume constraint.

The constraint functional Phi(lambda) = int u_hat . nu dS is affine in the
multiplier, so its exact derivative comes from one extra solve with the
right-hand side (-tau (nu, phi), 0, 0, 0); a single Newton update lands on
the root up to solver accuracy.  One factorization serves both solves.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import linalg as spla

from . import _umfpack

__all__ = ["LinearSolverConfig", "NewtonReport", "SolverError",
           "solve_linear", "newton_volume", "factorize"]


def factorize(A):
    """LU-factorize a sparse matrix; returns an object with `.solve(b)`.

    Prefers the system UMFPACK (much lower fill on the coupled
    saddle-point systems); falls back to scipy's SuperLU with symmetric-mode
    options.
    """
    A = A.tocsc()
    A.eliminate_zeros()
    if _umfpack.available():
        return _umfpack.UmfpackLU(A)
    return spla.splu(A, permc_spec="MMD_AT_PLUS_A",
                     options={"SymmetricMode": True, "DiagPivotThresh": 0.01})


class SolverError(RuntimeError):
    pass


@dataclass
class LinearSolverConfig:
    method: str = "direct"          # "direct" or "krylov"
    tolerance: float = 1e-10
    max_iterations: int = 2000

    def __post_init__(self):
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.method not in ("direct", "krylov"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass
class NewtonReport:
    lam: float
    iterations: int
    phi: float
    converged: bool


def _check_residual(A, sol, rhs, config):
    rnorm = np.linalg.norm(rhs)
    if rnorm == 0.0:
        return
    res = np.linalg.norm(A @ sol - rhs) / rnorm
    if not np.isfinite(res) or res > max(config.tolerance, 1e-8):
        raise SolverError(f"linear solve failed, relative residual {res:.3e}")


def solve_linear(A, rhs, config=None):
    """Solve A x = rhs and verify the relative residual."""
    if config is None:
        config = LinearSolverConfig()
    if config.method == "direct":
        sol = factorize(A).solve(rhs)
    else:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
        sol, info = spla.lgmres(A, rhs, M=M, rtol=config.tolerance,
                                maxiter=config.max_iterations)
        if info != 0:
            raise SolverError(f"Krylov solver did not converge (info={info})")
    _check_residual(A, sol, rhs, config)
    return sol


def newton_volume(system, eps=1e-6, max_iter=10, config=None):
    """Solve the coupled system with the volume constraint enforced.

    Returns (solution vector, NewtonReport).  The multiplier lambda starts
    at zero; since Phi is affine, convergence in a single update is
    expected and more than two iterations raise an error.
    """
    if config is None:
        config = LinearSolverConfig()
    A = system.matrix.tocsc()
    g = system.constraint
    tau = system.tau
    nu = system.space.offset_p  # velocity block length

    if config.method == "direct":
        lu = factorize(A)
        solve = lu.solve
    else:
        def solve(b):
            return solve_linear(A, b, config)

    sol = solve(system.rhs)
    _check_residual(A, sol, system.rhs, config)
    phi = float(g[:nu] @ sol[:nu])
    if abs(phi) < eps:
        return sol, NewtonReport(0.0, 1, phi, True)

    dsol = solve(-tau * g)
    dphi = float(g[:nu] @ dsol[:nu])
    if abs(dphi) < 1e-300 or not np.isfinite(dphi):
        raise SolverError("singular volume-constraint direction (dPhi/dlam ~ 0)")

    lam = 0.0
    for it in range(1, max_iter + 1):
        lam = lam - phi / dphi
        cand = sol + lam * dsol
        phi = float(g[:nu] @ cand[:nu])
        if abs(phi) < eps:
            if it > 2:
                raise SolverError(
                    f"volume Newton took {it} iterations for an affine Phi")
            return cand, NewtonReport(lam, it, phi, True)
    raise SolverError(f"volume Newton did not reach |Phi| < {eps:g} "
                      f"in {max_iter} iterations (|Phi| = {abs(phi):.3e})")
