"""Sparse linear-solve helpers shared by the implicit steppers."""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

__all__ = ["LinearSolveError", "bicgstab_solve"]


class LinearSolveError(RuntimeError):
    """Iterative solve failed; carries the recorded residual history."""

    def __init__(self, message: str, residual_history: list[float]):
        tail = ", ".join(f"{r:.3e}" for r in residual_history[-6:])
        super().__init__(f"{message} (last residuals: {tail})")
        self.residual_history = residual_history


def bicgstab_solve(A: sp.spmatrix, b: np.ndarray, x0: np.ndarray | None = None,
                   rtol: float = 1e-10) -> np.ndarray:
    """BiCGStab to relative true residual ``rtol``, iteration cap 10*sqrt(n).

    Restarts the shadow vector on rho/omega breakdown instead of giving up,
    and only accepts convergence on the recomputed true residual.  Raises
    :class:`LinearSolveError` with the residual history when the iteration
    budget runs out.
    """
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b)
    target = rtol * b_norm
    maxiter = max(20, int(math.ceil(10.0 * math.sqrt(b.size))))

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    r_hat = r.copy()
    rho_prev = 1.0
    alpha = 1.0
    omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    history: list[float] = []

    def restart() -> None:
        nonlocal r, r_hat, rho_prev, alpha, omega, v, p
        r = b - A @ x
        r_hat = r.copy()
        rho_prev = alpha = omega = 1.0
        v = np.zeros_like(b)
        p = np.zeros_like(b)

    for _ in range(maxiter):
        r_norm = float(np.linalg.norm(r))
        history.append(r_norm / b_norm)
        if r_norm <= target:
            true_res = b - A @ x
            if float(np.linalg.norm(true_res)) <= target:
                return x
            restart()
            continue
        rho = float(np.dot(r_hat, r))
        if abs(rho) < 1e-30 * max(r_norm * r_norm, 1e-300):
            restart()
            continue
        beta = (rho / rho_prev) * (alpha / omega)
        p = r + beta * (p - omega * v)
        v = A @ p
        denom = float(np.dot(r_hat, v))
        if denom == 0.0:
            restart()
            continue
        alpha = rho / denom
        s = r - alpha * v
        t = A @ s
        tt = float(np.dot(t, t))
        if tt == 0.0:
            x = x + alpha * p
            restart()
            continue
        omega = float(np.dot(t, s)) / tt
        x = x + alpha * p + omega * s
        r = s - omega * t
        rho_prev = rho
        if omega == 0.0:
            restart()

    final = float(np.linalg.norm(b - A @ x)) / b_norm
    if final <= rtol:
        return x
    raise LinearSolveError(
        f"BiCGStab failed to reach rtol={rtol:g} in {maxiter} iterations",
        history + [final])
