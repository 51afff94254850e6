"""Trust-region dogleg root finder for small square nonlinear systems.

Jacobians come from forward differences; no analytic derivatives are
required of the residual. Matches the usual rho-based radius update.
"""

from __future__ import annotations

import numpy as np


class SolverError(RuntimeError):
    """Root find failed; ``best_x``/``best_f`` hold the best iterate."""

    def __init__(self, msg, best_x=None, best_f=None, iterations=0):
        super().__init__(msg)
        self.best_x = best_x
        self.best_f = best_f
        self.iterations = iterations


def fd_jacobian(fun, x, f0, step=1e-7):
    n = x.size
    J = np.empty((f0.size, n))
    for i in range(n):
        h = step * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h
        J[:, i] = (fun(xp) - f0) / h
    return J


def dogleg_solve(fun, x0, tol=1e-9, max_iter=200, delta0=0.1, fd_step=1e-7):
    """Solve fun(x) = 0. Returns the root; raises SolverError on failure.

    ``tol`` is on the residual infinity norm (the caller is expected to
    scale its residual components to comparable magnitudes).
    """
    x = np.asarray(x0, dtype=float).copy()
    f = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(f)):
        raise SolverError("residual not finite at the initial guess", x, f, 0)
    delta = delta0
    best_x, best_f = x.copy(), f.copy()
    J = None
    for it in range(max_iter):
        if np.max(np.abs(f)) <= tol:
            return x
        if J is None:
            J = fd_jacobian(fun, x, f, fd_step)
        g = J.T @ f
        # Gauss-Newton step (regularized fallback for near-singular J)
        try:
            p_gn = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            p_gn = np.linalg.lstsq(J, -f, rcond=None)[0]
        gn_norm = np.linalg.norm(p_gn)
        if gn_norm <= delta:
            p = p_gn
        else:
            Jg = J @ g
            gg = float(g @ g)
            JgJg = float(Jg @ Jg)
            if JgJg == 0.0:
                raise SolverError("zero gradient away from a root", best_x, best_f, it)
            p_sd = -(gg / JgJg) * g
            sd_norm = np.linalg.norm(p_sd)
            if sd_norm >= delta:
                p = p_sd * (delta / sd_norm)
            else:
                dgs = p_gn - p_sd
                a = float(dgs @ dgs)
                b = 2.0 * float(p_sd @ dgs)
                c = float(p_sd @ p_sd) - delta * delta
                s = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
                p = p_sd + s * dgs
        x_new = x + p
        f_new = np.asarray(fun(x_new), dtype=float)
        finite = np.all(np.isfinite(f_new))
        pred = 0.5 * (float(f @ f) - float(np.linalg.norm(f + J @ p) ** 2))
        ared = 0.5 * (float(f @ f) - float(f_new @ f_new)) if finite else -np.inf
        rho = ared / pred if pred > 0.0 else (1.0 if ared > 0.0 else -1.0)
        if finite and rho > 1e-4:
            x, f = x_new, f_new
            J = None
            if float(f @ f) < float(best_f @ best_f):
                best_x, best_f = x.copy(), f.copy()
        if rho > 0.75 and np.linalg.norm(p) > 0.8 * delta:
            delta = min(2.0 * delta, 1e3)
        elif rho < 0.25:
            delta *= 0.25
        if delta < 1e-13:
            break
    if np.max(np.abs(f)) <= tol:
        return x
    raise SolverError(
        f"dogleg did not converge (|f|_inf={np.max(np.abs(best_f)):.3e})",
        best_x, best_f, max_iter)
