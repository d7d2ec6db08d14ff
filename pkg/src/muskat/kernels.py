"""Periodic vortex-sheet kernels, the double-layer-type operator T and its adjoint.

Principal-value integrals over the period are discretized with the
alternating-node trapezoidal rule: the target node and every source at an
even index offset are skipped and the remaining odd offsets get weight
``2h``.  The odd part of the cot-type singularity cancels between symmetric
neighbours, which gives spectral accuracy without subtracting the
singularity.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import grid
from .curve import Curve, tangent, second_derivative, tangent_speed_sq

FOUR_PI = 4.0 * np.pi
DEFAULT_MATRIX_CAP = 2048


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class FluidParams:
    """Viscosities, densities, permeability and gravity of the two phases.

    Phase 1 occupies the region above the interface and phase 2 the region
    below it, so ``rho2 > rho1`` (heavy fluid below) is the gravitationally
    stable configuration.
    """

    mu1: float = 1.0
    mu2: float = 1.0
    rho1: float = 0.0
    rho2: float = 1.0
    kappa: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        for name in ("mu1", "mu2", "rho1", "rho2", "kappa", "g"):
            if not np.isfinite(getattr(self, name)):
                raise KernelError(f"{name} must be finite")
        if self.mu1 < 0 or self.mu2 < 0 or self.mu1 + self.mu2 <= 0:
            raise KernelError("viscosities must be nonnegative with a positive sum")
        if self.kappa <= 0:
            raise KernelError("kappa must be positive")
        if self.g <= 0:
            raise KernelError("g must be positive")

    @property
    def A_mu(self) -> float:
        """Viscosity contrast multiplying T in ``w + A_mu T(w) = -G d_alpha z2``.

        Equals ``(mu2 - mu1)/(mu2 + mu1)`` so that the equation coincides with
        the jump of Darcy's law across the interface,
        ``(mu2+mu1)/(2 kappa) w + (mu2-mu1)/kappa BR.z_alpha = -g (rho2-rho1) z2_alpha``.
        """
        return (self.mu2 - self.mu1) / (self.mu2 + self.mu1)

    @property
    def G(self) -> float:
        return 2.0 * self.kappa * self.g * (self.rho2 - self.rho1) / (self.mu2 + self.mu1)

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("mu1", "mu2", "rho1", "rho2", "kappa", "g")}


@dataclass(frozen=True)
class KernelSample:
    V1: float
    V2: float
    W1: float
    W2: float


def wrap(x):
    """Map ``x`` into ``[-pi, pi)``."""
    return (np.asarray(x) + np.pi) % grid.TWO_PI - np.pi


def pair_differences(curve: Curve, i, j):
    """``(beta, dz1, dz2)`` for ``z(alpha_i) - z(alpha_i - beta)`` with ``alpha_i - beta = alpha_j``.

    ``beta`` is the index offset wrapped into ``[-pi, pi)``; ``dz1`` uses the
    unwrapped horizontal coordinate so it is ``beta`` plus a periodic part.
    """
    i = np.asarray(i)
    j = np.asarray(j)
    n = curve.N
    h = grid.spacing(n)
    beta = wrap((i - j) * h)
    dz1 = beta + curve.q1[i % n] - curve.q1[j % n]
    dz2 = curve.q2[i % n] - curve.q2[j % n]
    return beta, dz1, dz2


def kernel_V(curve: Curve, i: int, j: int) -> KernelSample:
    """Half-difference kernels for the node pair ``(i, j)``.

    ``V = (tan(dz1/2), tanh(dz2/2))``, ``W = (wrap(dz1)/2, dz2/2)``.  A pole of
    tan is returned as ``inf``; the velocity kernels never use tan alone.
    """
    if (i - j) % curve.N == 0:
        raise KernelError("kernel_V is undefined on the diagonal")
    _, dz1, dz2 = pair_differences(curve, i, j)
    c = np.cos(0.5 * dz1)
    v1 = float(np.sin(0.5 * dz1) / c) if abs(c) > 1e-300 else float(np.copysign(np.inf, np.sin(0.5 * dz1)))
    return KernelSample(V1=v1, V2=float(np.tanh(0.5 * dz2)), W1=float(0.5 * wrap(dz1)), W2=float(0.5 * dz2))


def br_kernel(dz1, dz2, delta: float = 0.0):
    """Birkhoff-Rott integrand per unit vortex strength, without the quadrature weight.

    Both components are written over ``sin^2 + (tanh^2 + delta) cos^2`` (the
    printed form multiplied through by ``cos^2(dz1/2)``) so poles of
    ``tan(dz1/2)`` cancel.
    """
    s = np.sin(0.5 * dz1)
    c = np.cos(0.5 * dz1)
    th = np.tanh(0.5 * dz2)
    den = s * s + (th * th + delta) * c * c
    k1 = -th / (FOUR_PI * den)
    k2 = s * c * (1.0 - th * th) / (FOUR_PI * den)
    return k1, k2


def _odd_offsets(n: int) -> np.ndarray:
    return np.arange(1, n, 2)


def _check_curve(curve: Curve):
    dz = np.hypot(np.diff(curve.z1), np.diff(curve.z2))
    if np.any(dz == 0):
        raise KernelError("coincident neighbouring nodes: curve is degenerate")


def birkhoff_rott_delta(curve: Curve, w, delta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Birkhoff-Rott velocity at the nodes with ``delta`` added to the kernel denominator.

    Matrix-free: loops over odd index offsets so memory stays O(N).
    """
    if delta < 0:
        raise KernelError(f"delta must be nonnegative, got {delta}")
    w = grid.as_field(w, "w")
    n = curve.N
    if w.size != n:
        raise KernelError(f"w has {w.size} nodes, curve has {n}")
    h = grid.spacing(n)
    out1 = np.zeros(n)
    out2 = np.zeros(n)
    for m in _odd_offsets(n):
        # source index i - m for target i
        dz1 = m * h + curve.q1 - np.roll(curve.q1, m)
        dz2 = curve.q2 - np.roll(curve.q2, m)
        k1, k2 = br_kernel(dz1, dz2, delta)
        ws = np.roll(w, m)
        out1 += k1 * ws
        out2 += k2 * ws
    if not (np.all(np.isfinite(out1)) and np.all(np.isfinite(out2))):
        raise KernelError("non-finite Birkhoff-Rott velocity: curve self-intersects at grid resolution")
    return 2.0 * h * out1, 2.0 * h * out2


def birkhoff_rott(curve: Curve, w) -> tuple[np.ndarray, np.ndarray]:
    return birkhoff_rott_delta(curve, w, 0.0)


@lru_cache(maxsize=16)
def _pair_index(n: int):
    """Target/source indices of the odd-offset pairs with offset ``m <= n/2``.

    The kernel is odd under swapping target and source, so the remaining
    pairs follow by antisymmetry.
    """
    ms = np.arange(1, n // 2 + 1, 2)
    tgt = np.tile(np.arange(n), ms.size)
    off = np.repeat(ms, n)
    src = (tgt - off) % n
    if (n // 2) % 2 == 1:
        # offset n/2 is its own partner: keep each unordered pair once
        keep = (off < n // 2) | (tgt < n // 2)
        tgt, off, src = tgt[keep], off[keep], src[keep]
    for a in (tgt, off, src):
        a.setflags(write=False)
    return tgt, off, src


def br_matrices(curve: Curve, delta: float = 0.0, cap: int = DEFAULT_MATRIX_CAP):
    """Dense quadrature matrices ``(B1, B2)`` with ``BR = (B1 @ w, B2 @ w)``.

    Entries vanish at even index offsets (alternating-node rule); the
    odd-offset part is antisymmetric.
    """
    n = curve.N
    if n > cap:
        raise KernelError(f"N={n} exceeds the dense-matrix cap {cap}")
    h = grid.spacing(n)
    tgt, off, src = _pair_index(n)
    dz1 = off * h + curve.q1[tgt] - curve.q1[src]
    dz2 = curve.q2[tgt] - curve.q2[src]
    with np.errstate(divide="ignore", invalid="ignore"):
        k1, k2 = br_kernel(dz1, dz2, delta)
    if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2))):
        raise KernelError("non-finite kernel entries: curve self-intersects at grid resolution")
    B1 = np.zeros((n, n))
    B2 = np.zeros((n, n))
    B1[tgt, src] = 2.0 * h * k1
    B1[src, tgt] = -2.0 * h * k1
    B2[tgt, src] = 2.0 * h * k2
    B2[src, tgt] = -2.0 * h * k2
    return B1, B2


def op_T(curve: Curve, u) -> np.ndarray:
    """``T(u) = 2 BR(z, u) . z_alpha``."""
    b1, b2 = birkhoff_rott(curve, u)
    t1, t2 = tangent(curve)
    return 2.0 * (b1 * t1 + b2 * t2)


def t_matrix_from(B1, B2, curve: Curve) -> np.ndarray:
    t1, t2 = tangent(curve)
    return 2.0 * (t1[:, None] * B1 + t2[:, None] * B2)


def assemble_T_matrix(curve: Curve, cap: int = DEFAULT_MATRIX_CAP) -> np.ndarray:
    """Dense matrix of T on the grid (same quadrature as :func:`op_T`)."""
    B1, B2 = br_matrices(curve, cap=cap)
    return t_matrix_from(B1, B2, curve)


def adjoint_kernel_printed(dz1, dz2, t1_src, t2_src):
    """Three-integral adjoint integrand in its pole-free combined form.

    ``(1/2pi) [t2 tan - t1 tanh - t2 tan tanh^2 - t1 tanh tan^2] / (tan^2 + tanh^2)``
    with the tangent taken at the source point.  This expression is the
    negative of the L^2 adjoint of T (see :func:`op_T_adjoint`).
    """
    s = np.sin(0.5 * dz1)
    c = np.cos(0.5 * dz1)
    th = np.tanh(0.5 * dz2)
    den = s * s + th * th * c * c
    return (t2_src * s * c * (1.0 - th * th) - t1_src * th) / (2.0 * np.pi * den)


def op_T_adjoint(curve: Curve, u) -> np.ndarray:
    """L^2 adjoint of T: ``T*(u)(a) = int u(b) 2 K(b, a) . z_alpha(b) db``.

    Evaluated from the three-integral expression with its overall sign
    flipped, which is what makes ``<T u, v> = <u, T* v>`` hold.
    """
    u = grid.as_field(u, "u")
    n = curve.N
    h = grid.spacing(n)
    t1, t2 = tangent(curve)
    out = np.zeros(n)
    for m in _odd_offsets(n):
        dz1 = m * h + curve.q1 - np.roll(curve.q1, m)
        dz2 = curve.q2 - np.roll(curve.q2, m)
        out += adjoint_kernel_printed(dz1, dz2, np.roll(t1, m), np.roll(t2, m)) * np.roll(u, m)
    return -2.0 * h * out


# ---------------------------------------------------------------------------
# desingularized kernels


def kernel_decompositions(curve: Curve, i, j, w=None) -> dict:
    """Kernels with their leading singularity at ``beta -> 0`` subtracted.

    Evaluated at ``(alpha, alpha - beta) = (alpha_i, alpha_j)`` and vectorized
    over index arrays.  Returns a dict with

    * ``A1 = V2/|V|^2 - z2'/(|z'|^2 tan(beta/2))``, ``A2`` the same with index 1
    * ``B``: ``V1 (V^perp . z')/|V|^4 + z1' (z''^perp . z')/(|z'|^4 tan(beta/2))``
    * ``C`` (only when ``w`` is given, shape (2, ...)):
      ``V^perp w(alpha-beta) beta/|V|^4 - 2 z'^perp w(alpha)/(|z'|^4 sin^2(beta/2))``
    * ``Q1_C``: ``1/|V|^2 - 4/(|z'|^2 beta^2) - 4 z'.z''/(|z'|^4 beta)``
    * ``Q1``: ``-(z'^perp / 2) Q1_C``, shape (2, ...)

    Each subtracted term is the exact leading Taylor part, so A1, A2, B, Q1
    stay bounded and ``C`` grows at most like ``1/|beta|``.
    """
    i = np.asarray(i)
    j = np.asarray(j)
    n = curve.N
    if np.any((i - j) % n == 0):
        raise KernelError("kernel_decompositions needs i != j")
    beta, dz1, dz2 = pair_differences(curve, i, j)
    t1, t2 = (x[i % n] for x in tangent(curve))
    s1, s2 = (x[i % n] for x in second_derivative(curve))
    tsq = t1 * t1 + t2 * t2
    V1 = np.tan(0.5 * dz1)
    V2 = np.tanh(0.5 * dz2)
    Vsq = V1 * V1 + V2 * V2
    tb = np.tan(0.5 * beta)
    out = {
        "beta": beta,
        "A1": V2 / Vsq - t2 / (tsq * tb),
        "A2": V1 / Vsq - t1 / (tsq * tb),
    }
    # perp(a, b) = (-b, a)
    vperp_dot_t = -V2 * t1 + V1 * t2
    sperp_dot_t = -s2 * t1 + s1 * t2
    out["B"] = V1 * vperp_dot_t / Vsq**2 + t1 * sperp_dot_t / (tsq**2 * tb)
    q1c = 1.0 / Vsq - 4.0 / (tsq * beta**2) - 4.0 * (t1 * s1 + t2 * s2) / (tsq**2 * beta)
    out["Q1_C"] = q1c
    out["Q1"] = np.stack([0.5 * t2 * q1c, -0.5 * t1 * q1c])
    if w is not None:
        w = grid.as_field(w, "w")
        wi = w[i % n]
        wj = w[j % n]
        sb2 = np.sin(0.5 * beta) ** 2
        c_first = np.stack([-V2, V1]) * wj * beta / Vsq**2
        c_sub = 2.0 * np.stack([-t2, t1]) * wi / (tsq**2 * sb2)
        out["C"] = c_first - c_sub
    return out
