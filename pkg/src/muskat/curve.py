"""Periodic interface curves ``z(alpha) = (alpha + q1(alpha), q2(alpha))``."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import grid


class CurveError(ValueError):
    pass


class ReparametrizationError(CurveError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (worst residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Curve:
    """Interface sampled on the uniform grid.

    Only the periodic parts are stored, so ``z1 - alpha`` and ``z2`` are
    periodic by construction.
    """

    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        q1 = grid.as_field(self.q1, "q1").copy()
        q2 = grid.as_field(self.q2, "q2").copy()
        if q1.size != q2.size:
            raise CurveError(f"q1 and q2 sizes differ: {q1.size} != {q2.size}")
        q1.setflags(write=False)
        q2.setflags(write=False)
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)

    @property
    def N(self) -> int:
        return self.q1.size

    @cached_property
    def _tangent(self) -> tuple[np.ndarray, np.ndarray]:
        t1 = 1.0 + grid.spectral_derivative(self.q1, 1)
        t2 = grid.spectral_derivative(self.q2, 1)
        t1.setflags(write=False)
        t2.setflags(write=False)
        return t1, t2

    @property
    def alpha(self) -> np.ndarray:
        return grid.nodes(self.N)

    @property
    def z1(self) -> np.ndarray:
        return self.alpha + self.q1

    @property
    def z2(self) -> np.ndarray:
        return self.q2

    @classmethod
    def flat(cls, n: int, height: float = 0.0) -> "Curve":
        return cls(np.zeros(n), np.full(n, float(height)))

    @classmethod
    def from_functions(cls, n: int, q1=None, q2=None) -> "Curve":
        """Sample callables ``q1(alpha)``, ``q2(alpha)`` (``None`` means zero)."""
        a = grid.nodes(n)
        return cls(
            np.zeros(n) if q1 is None else np.asarray(q1(a), dtype=float) * np.ones(n),
            np.zeros(n) if q2 is None else np.asarray(q2(a), dtype=float) * np.ones(n),
        )

    @classmethod
    def from_modes(cls, n: int, modes) -> "Curve":
        """Build from a list of ``{"k", "amplitude", "component", "phase"}`` dicts.

        ``component`` is 1 or 2 (default 2), each mode contributes
        ``amplitude * cos(k*alpha + phase)``.
        """
        a = grid.nodes(n)
        q = {1: np.zeros(n), 2: np.zeros(n)}
        for m in modes:
            comp = int(m.get("component", 2))
            if comp not in q:
                raise CurveError(f"mode component must be 1 or 2, got {comp}")
            k = int(m["k"])
            if not 0 <= k < n // 2:
                raise CurveError(f"mode k={k} not representable on N={n}")
            q[comp] += float(m["amplitude"]) * np.cos(k * a + float(m.get("phase", 0.0)))
        return cls(q[1], q[2])

    def shifted(self, dz1: float = 0.0, dz2: float = 0.0) -> "Curve":
        return Curve(self.q1 + dz1, self.q2 + dz2)

    def resampled(self, m: int) -> "Curve":
        return Curve(grid.resample(self.q1, m), grid.resample(self.q2, m))


def tangent(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    """``(d z1/d alpha, d z2/d alpha)`` on the grid (read-only, cached per curve)."""
    return curve._tangent


def second_derivative(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    return grid.spectral_derivative(curve.q1, 2), grid.spectral_derivative(curve.q2, 2)


def tangent_speed_sq(curve: Curve) -> np.ndarray:
    t1, t2 = tangent(curve)
    return t1 * t1 + t2 * t2


def tangent_speed_deviation(curve: Curve) -> float:
    """``max |(|z_alpha|^2 - A)| / A`` with ``A`` the grid mean of ``|z_alpha|^2``."""
    s = tangent_speed_sq(curve)
    a = s.mean()
    return float(np.max(np.abs(s - a)) / a)


# ---------------------------------------------------------------------------
# arc-chord


@dataclass(frozen=True)
class ArcChordReport:
    sup_F: float
    diag_F: np.ndarray
    argmax: tuple[float, float]

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.sup_F))


def arc_chord_value(dz1, dz2, beta):
    """Arc-chord quotient for coordinate differences ``z(alpha) - z(alpha - beta)``."""
    den = np.tan(0.5 * dz1) ** 2 + np.tanh(0.5 * dz2) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(den > 0, 0.25 * np.asarray(beta) ** 2 / np.where(den > 0, den, 1.0), np.inf)
    return val


def shifted_samples(f, betas) -> np.ndarray:
    """Rows ``f(alpha_j - beta_m)`` of the trigonometric interpolant, shape (len(betas), N)."""
    f = np.asarray(f, dtype=float)
    n = f.size
    k = grid.wavenumbers(n)
    fhat = np.fft.fft(f)
    betas = np.atleast_1d(betas)
    return np.fft.ifft(fhat[None, :] * np.exp(-1j * np.outer(betas, k)), axis=1).real


def beta_lattice(n_beta: int) -> np.ndarray:
    """Uniform offsets in (-pi, pi) shifted by half a spacing so ``beta = 0`` is avoided."""
    hb = grid.TWO_PI / n_beta
    return -np.pi + (np.arange(n_beta) + 0.5) * hb


def arc_chord_field(curve: Curve, betas) -> np.ndarray:
    """``F(z)(alpha_j, beta_m)`` as an array of shape (len(betas), N)."""
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    dq1 = curve.q1[None, :] - shifted_samples(curve.q1, betas)
    dq2 = curve.q2[None, :] - shifted_samples(curve.q2, betas)
    return arc_chord_value(betas[:, None] + dq1, dq2, betas[:, None])


def _lattice_rows(curve: Curve, n_beta: int):
    """Yield ``(betas, F)`` blocks of the lattice field when ``n_beta = r N``.

    Row ``m = s + r l`` samples ``f(alpha_j - beta_m) = g_s(alpha_{j - l + N/2})``
    where ``g_s`` is ``f`` shifted by ``(s + 1/2) h / r``, so each block is a
    gather from one FFT shift instead of a dense phase matrix.
    """
    n = curve.N
    r = n_beta // n
    h = grid.spacing(n)
    betas = beta_lattice(n_beta)
    chunk = max(1, 2**21 // n)
    j = np.arange(n)
    for sub in range(r):
        shift = (sub + 0.5) * h / r
        g1 = shifted_samples(curve.q1, shift)[0]
        g2 = shifted_samples(curve.q2, shift)[0]
        for l0 in range(0, n, chunk):
            ls = np.arange(l0, min(n, l0 + chunk))
            idx = (j[None, :] - ls[:, None] + n // 2) % n
            b = betas[sub + r * ls]
            F = arc_chord_value(b[:, None] + curve.q1[None, :] - g1[idx], curve.q2[None, :] - g2[idx], b[:, None])
            yield b, F


def arc_chord(curve: Curve, n_beta: int | None = None) -> ArcChordReport:
    """Supremum of the arc-chord quotient over the half-shifted beta lattice.

    The diagonal ``beta = 0`` enters through its limit ``1/|z_alpha|^2``.  A
    vanishing denominator (self-intersection at grid resolution) yields
    ``sup_F = inf`` with the offending point recorded in ``argmax``.
    """
    n = curve.N
    n_beta = n if n_beta is None else int(n_beta)
    if n_beta < n:
        raise CurveError(f"n_beta must be >= N ({n}), got {n_beta}")
    alpha = curve.alpha
    diag = 1.0 / tangent_speed_sq(curve)
    best = float(diag.max())
    where = (float(alpha[int(diag.argmax())]), 0.0)
    betas = beta_lattice(n_beta)
    if n_beta % n == 0:
        rows = _lattice_rows(curve, n_beta)
    else:
        chunk = max(1, 2**21 // n)
        rows = ((betas[i:i + chunk], arc_chord_field(curve, betas[i:i + chunk])) for i in range(0, n_beta, chunk))
    for b, F in rows:
        idx = np.unravel_index(int(np.argmax(F)), F.shape)
        val = float(F[idx])
        if val > best:
            best = val
            where = (float(alpha[idx[1]]), float(b[idx[0]]))
            if not np.isfinite(val):
                break
    return ArcChordReport(sup_F=best, diag_F=diag, argmax=where)


# ---------------------------------------------------------------------------
# reparametrization


def reparametrize_uniform(curve: Curve, tol: float = 1e-13, max_iter: int = 50) -> Curve:
    """Resample the same geometric curve at equal arclength spacing.

    Arclength ``s(alpha)`` is integrated spectrally, then the nodes
    ``alpha(gamma_j)`` with ``s(alpha) = L (gamma_j + pi) / 2pi`` are found by
    Newton iteration on the trigonometric interpolants.
    """
    n = curve.N
    speed = np.sqrt(tangent_speed_sq(curve))
    mean_speed, s_periodic = grid.antiderivative(speed)
    gamma = curve.alpha
    targets = mean_speed * (gamma + np.pi)

    def arclength(a):
        return mean_speed * (a + np.pi) + grid.trig_eval(s_periodic, a)

    a = gamma.copy()
    for _ in range(max_iter):
        resid = arclength(a) - targets
        worst = float(np.max(np.abs(resid)))
        if worst <= tol * max(1.0, mean_speed):
            break
        a = a - resid / grid.trig_eval(speed, a)
    else:
        resid = arclength(a) - targets
        worst = float(np.max(np.abs(resid)))
        if worst > 1e3 * tol * max(1.0, mean_speed):
            raise ReparametrizationError("arclength inversion did not converge", worst)
    z1 = a + grid.trig_eval(curve.q1, a)
    z2 = grid.trig_eval(curve.q2, a)
    return Curve(z1 - gamma, z2)


# ---------------------------------------------------------------------------
# snapshot I/O


def write_snapshot(curve: Curve, path, time: float = 0.0) -> Path:
    """Write ``# {json header}`` followed by CSV rows ``alpha,z1,z2``."""
    path = Path(path)
    header = json.dumps({"N": curve.N, "time": float(time)}, sort_keys=True)
    lines = [f"# {header}", "alpha,z1,z2"]
    for a, x, y in zip(curve.alpha, curve.z1, curve.z2):
        lines.append(f"{a:.17g},{x:.17g},{y:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_snapshot(path) -> tuple[Curve, dict]:
    path = Path(path)
    text = path.read_text(encoding="utf-8").splitlines()
    if len(text) < 2 or not text[0].startswith("#"):
        raise CurveError(f"{path}: missing JSON header line or column header")
    meta = json.loads(text[0][1:])
    if text[1].strip() != "alpha,z1,z2":
        raise CurveError(f"{path}: expected columns alpha,z1,z2, got {text[1]!r}")
    data = np.array([[float(v) for v in row.split(",")] for row in text[2:] if row.strip()])
    n = int(meta["N"])
    if data.shape != (n, 3):
        raise CurveError(f"{path}: header says N={n} but found {data.shape[0]} rows")
    alpha = grid.nodes(n)
    if np.max(np.abs(data[:, 0] - alpha)) > 1e-12:
        raise CurveError(f"{path}: alpha column is not the uniform grid on [-pi, pi)")
    return Curve(data[:, 1] - alpha, data[:, 2]), meta
