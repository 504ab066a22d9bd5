"""Quasi-Newton minimization over the free DOF vector.

Limited-memory BFGS with a strong-Wolfe line search.  Non-finite trial
values (the determinant penalty creates cliffs) are treated as failed
sufficient-decrease tests, so the search shrinks through them instead of
aborting the run.  Accepted objective values are monotone non-increasing
and the iterate sequence is deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LBFGS_MEMORY = 10
_WOLFE_C1 = 1e-4
_WOLFE_C2 = 0.9
_MAX_LS_EVALS = 25
_MAX_ZOOM = 30


class InvalidStartError(ValueError):
    """Objective is not finite at the starting point."""


@dataclass
class MinimizeOptions:
    tol_step: float = 1e-10        # step-norm tolerance (TolX)
    tol_fun: float = 1e-4          # function-decrease tolerance (TolFun)
    max_iters: int = 5000
    fd_perturbation: float = 1e-8  # forward-difference step for FD gradients
    gradient_mode: str = "analytic"

    def validate(self) -> None:
        if not (self.tol_step > 0 and self.tol_fun > 0 and self.fd_perturbation > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.gradient_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")

    @property
    def grad_tol(self) -> float:
        """Gradient infinity-norm threshold derived from tol_fun."""
        return 1e-2 * self.tol_fun


@dataclass
class MinimizeResult:
    x_min: np.ndarray
    f_min: float
    iterations: int
    converged_by: str              # step | function | gradient | max_iters
    gradient_norm: float


def _fd_forward(objective, x, f0, h):
    g = np.empty_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xp[i] += h
        g[i] = (objective(xp) - f0) / h
    return g


def _line_search(fun, grad_at, x, f0, g0, d, t0):
    """Strong-Wolfe search along d; returns (t, f, g, evals) or None.

    Non-finite trial values behave like Armijo failures, which brackets the
    step away from penalty cliffs.
    """
    dg0 = float(g0 @ d)

    def phi(t):
        return float(fun(x + t * d))

    def zoom(lo, f_lo, hi):
        for _ in range(_MAX_ZOOM):
            t = 0.5 * (lo + hi)
            ft = phi(t)
            if not np.isfinite(ft) or ft > f0 + _WOLFE_C1 * t * dg0 or ft >= f_lo:
                hi = t
                continue
            gt = grad_at(x + t * d, ft)
            dphi = float(gt @ d)
            if abs(dphi) <= -_WOLFE_C2 * dg0:
                return t, ft, gt
            if dphi * (hi - lo) >= 0.0:
                hi = lo
            lo, f_lo = t, ft
        if f_lo < f0:                        # best Armijo point found so far
            gt = grad_at(x + lo * d, f_lo)
            return lo, f_lo, gt
        return None

    t_prev, f_prev = 0.0, f0
    t = t0
    for i in range(_MAX_LS_EVALS):
        ft = phi(t)
        if not np.isfinite(ft) or ft > f0 + _WOLFE_C1 * t * dg0 \
                or (i > 0 and ft >= f_prev):
            return zoom(t_prev, f_prev, t)
        gt = grad_at(x + t * d, ft)
        dphi = float(gt @ d)
        if abs(dphi) <= -_WOLFE_C2 * dg0:
            return t, ft, gt
        if dphi >= 0.0:
            return zoom(t, ft, t_prev)
        t_prev, f_prev = t, ft
        t *= 2.0
    if t_prev <= 0.0:
        return None
    return t_prev, f_prev, grad_at(x + t_prev * d, f_prev)


def minimize(objective, gradient, x0, options: MinimizeOptions | None = None) -> MinimizeResult:
    """Minimize a smooth objective from x0.

    ``gradient`` may be None, in which case forward differences with
    ``options.fd_perturbation`` are used.  Termination: step norm below
    tol_step, two consecutive accepted decreases below tol_fun, gradient
    infinity-norm below the derived threshold, or max_iters.
    """
    opts = options or MinimizeOptions()
    opts.validate()
    x = np.asarray(x0, dtype=float).copy()
    f = float(objective(x))
    if not np.isfinite(f):
        raise InvalidStartError(f"objective is {f} at the starting point")

    def grad_at(xv, fv):
        if gradient is not None:
            return np.asarray(gradient(xv), dtype=float)
        return _fd_forward(objective, xv, fv, opts.fd_perturbation)

    g = grad_at(x, f)
    gnorm = float(np.max(np.abs(g))) if len(g) else 0.0
    if gnorm <= opts.grad_tol:
        return MinimizeResult(x_min=x, f_min=f, iterations=0,
                              converged_by="gradient", gradient_norm=gnorm)

    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    converged_by = "max_iters"
    it = 0
    small_decreases = 0
    for it in range(1, opts.max_iters + 1):
        d = _lbfgs_direction(g, s_hist, y_hist, rho_hist)
        dg = float(d @ g)
        if dg >= 0.0:                       # not a descent direction: reset memory
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            d = -g
            dg = float(d @ g)

        t0 = 1.0
        if not s_hist:                      # steepest-descent start: conservative step
            dnorm = float(np.linalg.norm(d))
            if dnorm > 0:
                t0 = min(1.0, 1.0 / dnorm)

        hit = _line_search(objective, grad_at, x, f, g, d, t0)
        if hit is None or hit[1] >= f:
            # No acceptable decrease along a descent direction: vanishing step.
            converged_by = "step"
            break
        t, f_new, g_new = hit
        x_new = x + t * d

        step = x_new - x
        ys = float((g_new - g) @ step)
        if ys > 1e-12 * float(np.linalg.norm(step)) * float(np.linalg.norm(g_new - g)):
            s_hist.append(step)
            y_hist.append(g_new - g)
            rho_hist.append(1.0 / ys)
            if len(s_hist) > _LBFGS_MEMORY:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)

        decrease = f - f_new
        step_norm = float(np.linalg.norm(step))
        x, f, g = x_new, f_new, g_new
        gnorm = float(np.max(np.abs(g)))

        if step_norm < opts.tol_step:
            converged_by = "step"
            break
        # stop only on a persistently small decrease: a single slow iteration
        # mid-run (e.g. while escaping a shallow saddle) is not convergence
        small_decreases = small_decreases + 1 if decrease < opts.tol_fun else 0
        if small_decreases >= 2:
            converged_by = "function"
            break
        if gnorm <= opts.grad_tol:
            converged_by = "gradient"
            break

    return MinimizeResult(x_min=x, f_min=f, iterations=it,
                          converged_by=converged_by, gradient_norm=gnorm)


def _lbfgs_direction(g, s_hist, y_hist, rho_hist):
    """Two-loop recursion; scaled steepest descent when the memory is empty."""
    q = -g.copy()
    if not s_hist:
        return q
    k = len(s_hist)
    alphas = np.empty(k)
    for i in range(k - 1, -1, -1):
        alphas[i] = rho_hist[i] * float(s_hist[i] @ q)
        q -= alphas[i] * y_hist[i]
    ys = 1.0 / (rho_hist[-1] * float(y_hist[-1] @ y_hist[-1]))
    q *= ys
    for i in range(k):
        beta = rho_hist[i] * float(y_hist[i] @ q)
        q += (alphas[i] - beta) * s_hist[i]
    return q


def gradient_check(objective, gradient, x, h: float) -> float:
    """Max over coordinates of |analytic - central FD| / (1 + |central FD|)."""
    x = np.asarray(x, dtype=float)
    ga = np.asarray(gradient(x), dtype=float)
    worst = 0.0
    for i in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (objective(xp) - objective(xm)) / (2.0 * h)
        err = abs(ga[i] - fd) / (1.0 + abs(fd))
        if err > worst:
            worst = err
    return worst
