"""Forward transient solution of the circuit DAE on a fixed fine grid.

Implicit one-step schemes (implicit Euler, trapezoidal) with a per-step
Newton iteration.  The trajectory stores both the state phi and its
difference-formula derivative, which the sensitivity integrals need.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50

SCHEMES = ("implicit_euler", "trapezoidal")


class SolverError(RuntimeError):
    """Newton divergence or a singular step matrix, with step context."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    dt: float

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise ValueError("t1 must exceed t0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float) -> int:
        """Grid index of a time that must lie on the grid."""
        k = int(round((t - self.t0) / self.dt))
        if not (0 <= k <= self.n_steps) or abs(self.t0 + k * self.dt - t) > 1e-9 * max(self.dt, 1e-30):
            raise ValueError(f"t={t} is not a grid point")
        return k


@dataclass
class Trajectory:
    grid: TimeGrid
    states: np.ndarray          # (n_steps+1, n)
    derivs: np.ndarray          # (n_steps+1, n)
    newton_iters: int = 0       # total Newton iterations over the run

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def write_csv(self, path, dof_names):
        header = "t," + ",".join(dof_names)
        data = np.column_stack([self.times, self.states])
        with open(path, "w") as f:
            f.write(header + "\n")
            for row in data:
                f.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _solve(A, b):
    if sp.issparse(A):
        return spla.spsolve(A.tocsc(), b)
    return np.linalg.solve(A, b)


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        raise SolverError("solution is not finite (singular step matrix?)", step)


def dc_operating_point(sys, t: float = 0.0, x0=None,
                       tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER) -> np.ndarray:
    """Consistent start state: Newton solve of Jg phi + i_nl(phi) = i_s(t)
    with dphi/dt = 0."""
    phi = np.zeros(sys.n) if x0 is None else np.array(x0, dtype=float)
    i_s = sys.source_eval(t)
    for _ in range(max_iter):
        i_nl, dnl = sys.eval_nonlinear(phi, t)
        residual = sys.Jg @ phi + i_nl - i_s
        A = sys.Jg + dnl
        try:
            delta = _solve(A, -residual)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SolverError(f"singular Jacobian in DC solve: {exc}") from exc
        _check_finite(delta, None)
        phi = phi + delta
        if np.max(np.abs(delta)) <= tol * (1.0 + np.max(np.abs(phi))):
            return phi
    raise SolverError(f"DC operating point did not converge in {max_iter} iterations")


def _newton_step(sys, phi_guess, rhs_const, coef_dt, coef_g, t, step,
                 tol, max_iter):
    """Solve  coef_dt*Jc*phi + coef_g*(Jg*phi + i_nl(phi,t)) + rhs_const = 0."""
    phi = phi_guess.copy()
    iters = 0
    for _ in range(max_iter):
        iters += 1
        i_nl, dnl = sys.eval_nonlinear(phi, t)
        residual = coef_dt * (sys.Jc @ phi) + coef_g * (sys.Jg @ phi + i_nl) + rhs_const
        A = coef_dt * sys.Jc + coef_g * (sys.Jg + dnl)
        try:
            delta = _solve(A, -residual)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SolverError(f"singular step matrix: {exc}", step) from exc
        _check_finite(delta, step)
        phi = phi + delta
        if np.max(np.abs(delta)) <= tol * (1.0 + np.max(np.abs(phi))):
            return phi, iters
    raise SolverError(f"Newton did not converge in {max_iter} iterations", step)


def integrate(sys, x0, grid: TimeGrid, scheme: str = "implicit_euler",
              tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER,
              deriv0=None) -> Trajectory:
    """Integrate the DAE from x0 over the grid.

    Implicit Euler:  Jc (x_{k+1}-x_k)/dt + Jg x_{k+1} + i_nl - i_s(t_{k+1}) = 0.
    Trapezoidal averages the algebraic part over both endpoints.  deriv0 seeds
    the stored derivative at the first grid point (zero for a DC start).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    n_steps = grid.n_steps
    dt = grid.dt
    states = np.empty((n_steps + 1, sys.n))
    derivs = np.empty((n_steps + 1, sys.n))
    states[0] = np.asarray(x0, dtype=float)
    derivs[0] = np.zeros(sys.n) if deriv0 is None else np.asarray(deriv0, dtype=float)
    total_iters = 0
    times = grid.times

    for k in range(n_steps):
        t_next = times[k + 1]
        phi_k = states[k]
        if scheme == "implicit_euler":
            rhs_const = -(sys.Jc @ phi_k) / dt - sys.source_eval(t_next)
            phi, iters = _newton_step(sys, phi_k, rhs_const, 1.0 / dt, 1.0,
                                      t_next, k + 1, tol, max_iter)
            derivs[k + 1] = (phi - phi_k) / dt
        else:  # trapezoidal
            i_nl_k, _ = sys.eval_nonlinear(phi_k, times[k])
            f_k = sys.Jg @ phi_k + i_nl_k - sys.source_eval(times[k])
            rhs_const = (-(sys.Jc @ phi_k) / dt + 0.5 * f_k
                         - 0.5 * sys.source_eval(t_next))
            phi, iters = _newton_step(sys, phi_k, rhs_const, 1.0 / dt, 0.5,
                                      t_next, k + 1, tol, max_iter)
            derivs[k + 1] = 2.0 * (phi - phi_k) / dt - derivs[k]
        states[k + 1] = phi
        total_iters += iters

    return Trajectory(grid, states, derivs, newton_iters=total_iters)
