"""Vortex-sheet strength from the second-kind equation ``(I + A_mu T) w = -G d_alpha z2``."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import grid
from .curve import Curve, tangent
from .kernels import DEFAULT_MATRIX_CAP, FluidParams, assemble_T_matrix, op_T

log = logging.getLogger(__name__)

METHODS = ("dense", "neumann")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class VorticitySolve:
    w: np.ndarray
    residual: float
    method: str
    iterations: int
    fell_back: bool = False


def _double_mollify_columns(M: np.ndarray, eps: float) -> np.ndarray:
    sym = grid.mollifier_symbol(M.shape[0], eps) ** 2
    return np.fft.ifft(sym[:, None] * np.fft.fft(M, axis=0), axis=0).real


def _solve(apply_T, T_dense, rhs, A, method, tol, max_iter, curve, smoother=None):
    """Shared dense / Neumann driver; ``smoother`` is applied after T when mollifying."""
    smooth = (lambda x: x) if smoother is None else smoother

    def residual_of(w):
        return float(np.max(np.abs(w + A * smooth(apply_T(w)) - rhs)))

    if A == 0.0:
        return VorticitySolve(rhs.copy(), 0.0, method, 0)

    if method == "neumann":
        w = rhs.copy()
        for it in range(1, max_iter + 1):
            w = rhs - A * smooth(apply_T(w))
            res = residual_of(w)
            if res < tol:
                return VorticitySolve(w, res, "neumann", it)
            if not np.isfinite(res):
                break
        log.warning("Neumann iteration did not converge in %d steps; falling back to dense", max_iter)
        fell_back = True
    else:
        fell_back = False

    M = T_dense()
    if smoother is not None:
        M = smoother(M)
    n = rhs.size
    lhs = np.eye(n) + A * M
    try:
        w = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            f"singular vorticity system on curve with N={n}, "
            f"max|q2|={np.max(np.abs(curve.q2)):.3e}: {exc}"
        ) from exc
    return VorticitySolve(w, residual_of(w), "dense", 1, fell_back)


def _operators(curve: Curve, T: np.ndarray | None, cap: int):
    if T is None and curve.N <= cap:
        T = assemble_T_matrix(curve, cap=cap)
    if T is not None:
        return (lambda u: T @ u), (lambda: T)
    return (lambda u: op_T(curve, u)), (lambda: assemble_T_matrix(curve, cap=cap))


def solve_vorticity(
    curve: Curve,
    params: FluidParams,
    method: str = "neumann",
    *,
    T: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 500,
    cap: int = DEFAULT_MATRIX_CAP,
) -> VorticitySolve:
    """Solve ``w + A_mu T(w) = -G d_alpha z2``.

    ``T`` may be a pre-assembled operator matrix for this curve.  Neumann
    iteration falls back to a dense LU solve when it fails to reach ``tol``.
    """
    if method not in METHODS:
        raise SolverError(f"unknown method {method!r}; expected one of {METHODS}")
    _, t2 = tangent(curve)
    rhs = -params.G * t2
    apply_T, T_dense = _operators(curve, T, cap)
    return _solve(apply_T, T_dense, rhs, params.A_mu, method, tol, max_iter, curve)


def solve_vorticity_mollified(
    curve: Curve,
    params: FluidParams,
    eps: float,
    method: str = "neumann",
    *,
    T: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 500,
    cap: int = DEFAULT_MATRIX_CAP,
) -> VorticitySolve:
    """Solve ``w + A_mu D(T w) = -G D(d_alpha z2)`` with ``D`` the double mollifier."""
    if method not in METHODS:
        raise SolverError(f"unknown method {method!r}; expected one of {METHODS}")
    if not eps > 0:
        raise SolverError(f"eps must be positive, got {eps}")
    _, t2 = tangent(curve)
    rhs = -params.G * grid.double_mollify(t2, eps)
    apply_T, T_dense = _operators(curve, T, cap)

    def smoother(x):
        if x.ndim == 2:
            return _double_mollify_columns(x, eps)
        return grid.double_mollify(x, eps)

    return _solve(apply_T, T_dense, rhs, params.A_mu, method, tol, max_iter, curve, smoother)


def resolvent_sweep(curve: Curve, xi_list, T: np.ndarray | None = None) -> list[float]:
    """2-norm condition numbers of ``I - xi T`` for each ``xi`` in ``[-1, 1]``.

    A numerically singular matrix is reported as ``inf``.
    """
    xi_list = [float(x) for x in xi_list]
    bad = [x for x in xi_list if abs(x) > 1]
    if bad:
        raise SolverError(f"xi must lie in [-1, 1], got {bad}")
    M = assemble_T_matrix(curve) if T is None else T
    eye = np.eye(M.shape[0])
    out = []
    for xi in xi_list:
        c = float(np.linalg.cond(eye - xi * M))
        out.append(c if np.isfinite(c) and c < 1e16 else float("inf"))
    return out
