"""Interface velocity, time stepping and full runs."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import grid
from .curve import Curve, CurveError, arc_chord, reparametrize_uniform, tangent, tangent_speed_sq
from .diagnostics import DiagnosticsRecord, energy_report, lambda_pointwise_check, stretch_rate
from .kernels import FluidParams, KernelError, br_matrices, t_matrix_from
from .vorticity import SolverError, VorticitySolve, solve_vorticity, solve_vorticity_mollified

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    """A step could not be completed; ``state`` is the last valid state."""

    def __init__(self, message: str, state: "SimState"):
        super().__init__(message)
        self.state = state


# ---------------------------------------------------------------------------
# configuration


class InitialCurve(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["flat", "single_mode", "sum_of_modes", "from_file"] = "flat"
    k: int | None = None
    amplitude: float | None = None
    component: Literal[1, 2] = 2
    modes: list[dict] | None = None
    path: str | None = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "single_mode" and (self.k is None or self.amplitude is None):
            raise ValueError("initial: single_mode needs k and amplitude")
        if self.kind == "sum_of_modes" and not self.modes:
            raise ValueError("initial: sum_of_modes needs a non-empty modes list")
        if self.kind == "from_file" and not self.path:
            raise ValueError("initial: from_file needs path")
        return self

    def build(self, n: int) -> Curve:
        from .curve import read_snapshot

        if self.kind == "flat":
            return Curve.flat(n)
        if self.kind == "single_mode":
            return Curve.from_modes(n, [{"k": self.k, "amplitude": self.amplitude, "component": self.component}])
        if self.kind == "sum_of_modes":
            return Curve.from_modes(n, self.modes)
        curve, _ = read_snapshot(self.path)
        if curve.N != n:
            curve = curve.resampled(n) if curve.N < n else _truncate(curve, n)
        return curve


def _truncate(curve: Curve, n: int) -> Curve:
    def down(f):
        c = np.fft.fft(f)
        out = np.zeros(n, dtype=complex)
        half = n // 2
        out[:half] = c[:half]
        out[n - half + 1:] = c[curve.N - half + 1:]
        return np.fft.ifft(out).real * (n / curve.N)

    return Curve(down(curve.q1), down(curve.q2))


class SimConfig(BaseModel):
    """Numerical parameters of a run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    N: int = 256
    dt: float | None = Field(default=None, gt=0)
    t_end: float = Field(default=0.1, ge=0)
    scheme: Literal["rk4", "euler"] = "rk4"
    eps: float = Field(default=0.0, ge=0)
    delta: float = Field(default=0.0, ge=0)
    output_every: int | None = Field(default=None, ge=1)
    diagnostics_every: int = Field(default=1, ge=1)
    solver: Literal["neumann", "dense"] = "neumann"
    solver_tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=500, ge=1)
    breakdown_factor: float = Field(default=1e6, gt=1)
    expect_stable: bool = False
    reparametrize: bool = True
    probe_offset: float | None = Field(default=1e-2, gt=0)
    initial: InitialCurve = Field(default_factory=InitialCurve)

    @field_validator("N")
    @classmethod
    def _even_n(cls, v):
        if v < 16 or v % 2:
            raise ValueError(f"N must be even and >= 16, got {v}")
        return v

    @field_validator("initial", mode="before")
    @classmethod
    def _initial_shorthand(cls, v):
        return {"kind": v} if isinstance(v, str) else v

    def default_dt(self, params: FluidParams) -> float:
        """``0.5/(max(1,|G|) N)``, shortened so a whole number of steps reaches ``t_end``."""
        dt = 0.5 / (max(1.0, abs(params.G)) * self.N)
        if self.t_end > 0:
            dt = self.t_end / np.ceil(self.t_end / dt - 1e-9)
        return float(dt)

    def n_steps(self, dt: float) -> int:
        return int(round(self.t_end / dt))


# ---------------------------------------------------------------------------
# state and right-hand side


@dataclass(frozen=True)
class SimState:
    curve: Curve
    w: np.ndarray
    t: float
    params: FluidParams
    eps: float = 0.0
    delta: float = 0.0
    residual: float = 0.0
    br: tuple | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class SolverOptions:
    method: str = "neumann"
    tol: float = 1e-10
    max_iter: int = 500


def tangential_velocity(curve: Curve, br) -> np.ndarray:
    """Tangential speed ``c(alpha)`` keeping ``|z_alpha|^2`` independent of alpha.

    ``c = (alpha+pi)/(2pi) int_T g - int_{-pi}^alpha g`` with
    ``g = z_alpha . d_alpha BR / |z_alpha|^2``; the cumulative integral is the
    spectral antiderivative, so ``c(-pi) = c(pi) = 0``.
    """
    g = _stretch_integrand(curve, br)
    mean, periodic = grid.antiderivative(g)
    shift = curve.alpha + np.pi
    total = grid.TWO_PI * mean
    return shift / grid.TWO_PI * total - (mean * shift + periodic)


def tangential_velocity_endpoint(curve: Curve, br) -> float:
    """``c`` evaluated at ``alpha = pi`` from the same formula (zero up to rounding)."""
    g = _stretch_integrand(curve, br)
    mean, periodic = grid.antiderivative(g)
    total = grid.TWO_PI * mean
    cumulative = mean * grid.TWO_PI + float(grid.trig_eval(periodic, np.pi)[0])
    return total - cumulative


def _stretch_integrand(curve: Curve, br) -> np.ndarray:
    t1, t2 = tangent(curve)
    db1 = grid.spectral_derivative(br[0], 1)
    db2 = grid.spectral_derivative(br[1], 1)
    return (t1 * db1 + t2 * db2) / (t1 * t1 + t2 * t2)


def log_stretch_rate(curve: Curve, br) -> float:
    """``A'(t)/(2A(t))``; the growth rate of ``|z_alpha|^2`` is twice this."""
    return stretch_rate(curve, br)


def evaluate(curve: Curve, params: FluidParams, eps: float = 0.0, delta: float = 0.0, opts: SolverOptions = SolverOptions()):
    """Solve for the vortex strength and return ``(velocity, solve, br)``."""
    B1, B2 = br_matrices(curve)
    T = t_matrix_from(B1, B2, curve)
    if eps > 0:
        sol = solve_vorticity_mollified(curve, params, eps, opts.method, T=T, tol=opts.tol, max_iter=opts.max_iter)
    else:
        sol = solve_vorticity(curve, params, opts.method, T=T, tol=opts.tol, max_iter=opts.max_iter)
    if delta > 0:
        B1, B2 = br_matrices(curve, delta)
    br = (B1 @ sol.w, B2 @ sol.w)
    c = tangential_velocity(curve, br)
    t1, t2 = tangent(curve)
    vel = (br[0] + c * t1, br[1] + c * t2)
    return vel, sol, br


def make_state(curve: Curve, params: FluidParams, t: float = 0.0, eps: float = 0.0, delta: float = 0.0,
               opts: SolverOptions = SolverOptions()) -> SimState:
    _, sol, br = evaluate(curve, params, eps, delta, opts)
    return SimState(curve, sol.w, t, params, eps, delta, sol.residual, br)


def rhs(state: SimState, opts: SolverOptions = SolverOptions()) -> tuple[np.ndarray, np.ndarray]:
    """Interface velocity ``BR(z, w) + c z_alpha`` (``BR^delta`` when ``delta > 0``)."""
    vel, _, _ = evaluate(state.curve, state.params, state.eps, state.delta, opts)
    return vel


def step(state: SimState, dt: float, scheme: str = "rk4", opts: SolverOptions = SolverOptions()) -> SimState:
    """Advance ``(q1, q2)`` by one explicit step and re-solve for ``w``.

    Raises :class:`StepFailure` carrying the input state if any stage fails.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    p, eps, delta = state.params, state.eps, state.delta

    def f(q1, q2):
        vel, _, _ = evaluate(Curve(q1, q2), p, eps, delta, opts)
        return vel

    q1, q2 = state.curve.q1, state.curve.q2
    try:
        if scheme == "euler":
            k1 = f(q1, q2)
            n1, n2 = q1 + dt * k1[0], q2 + dt * k1[1]
        elif scheme == "rk4":
            k1 = f(q1, q2)
            k2 = f(q1 + 0.5 * dt * k1[0], q2 + 0.5 * dt * k1[1])
            k3 = f(q1 + 0.5 * dt * k2[0], q2 + 0.5 * dt * k2[1])
            k4 = f(q1 + dt * k3[0], q2 + dt * k3[1])
            n1 = q1 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            n2 = q2 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        return make_state(Curve(n1, n2), p, state.t + dt, eps, delta, opts)
    except (KernelError, SolverError, CurveError, np.linalg.LinAlgError) as exc:
        raise StepFailure(f"step at t={state.t:.6g} failed: {exc}", state) from exc


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunResult:
    snapshots: list[SimState]
    records: list[DiagnosticsRecord]
    steps_taken: int
    dt: float
    reason: str | None = None
    rt_violation: bool = False
    wall_time: float = 0.0
    record_curves: list[Curve] = field(default_factory=list)

    @property
    def final(self) -> SimState:
        return self.snapshots[-1]


def initial_state(config: SimConfig, params: FluidParams, curve: Curve | None = None) -> SimState:
    curve = config.initial.build(config.N) if curve is None else curve
    if not arc_chord(curve).finite:
        raise CurveError("initial curve self-intersects at grid resolution")
    if config.reparametrize:
        curve = reparametrize_uniform(curve)
    opts = SolverOptions(config.solver, config.solver_tol, config.max_iter)
    return make_state(curve, params, 0.0, config.eps, config.delta, opts)


def record_for(state: SimState, config: SimConfig, probe: bool = True) -> DiagnosticsRecord:
    """Diagnostics for ``state``; off-curve probes run only when ``probe`` is set."""
    return energy_report(
        state.curve, state.w, state.params, state.t,
        br=state.br, residual=state.residual, probe_offset=config.probe_offset if probe else None,
    )


def run(
    config: SimConfig,
    params: FluidParams,
    curve: Curve | None = None,
    on_record: Callable[[DiagnosticsRecord], None] | None = None,
) -> RunResult:
    """Integrate from the (reparametrized) initial curve to ``t_end`` or breakdown.

    Pressure and velocity-jump probes are evaluated at snapshot steps only;
    other records carry NaN there.  Halts with ``reason`` set when the arc-chord supremum exceeds
    ``breakdown_factor`` times its initial value, when ``expect_stable`` is
    set and the minimum of sigma becomes negative, when the Lambda inequality
    fails on a field, or when a step fails.
    """
    t0 = time.perf_counter()
    dt = config.dt if config.dt is not None else config.default_dt(params)
    n_steps = config.n_steps(dt)
    every = config.output_every or max(n_steps, 1)
    opts = SolverOptions(config.solver, config.solver_tol, config.max_iter)

    state = initial_state(config, params, curve)
    rec = record_for(state, config)
    records = [rec]
    curves = [state.curve]
    if on_record:
        on_record(rec)
    snapshots = [state]
    sup0 = rec.sup_F
    rt = rec.min_sigma < 0
    reason = None
    steps = 0
    for n in range(1, n_steps + 1):
        try:
            state = step(state, dt, config.scheme, opts)
        except StepFailure as exc:
            reason = str(exc)
            log.error(reason)
            break
        steps = n
        snapshot_step = n % every == 0 or n == n_steps
        if n % config.diagnostics_every == 0 or n == n_steps:
            rec = record_for(state, config, probe=snapshot_step)
            records.append(rec)
            curves.append(state.curve)
            if on_record:
                on_record(rec)
            rt = rt or rec.min_sigma < 0
            reason = _halt_reason(rec, sup0, config)
        if n % every == 0 or n == n_steps or reason:
            snapshots.append(state)
        if reason:
            log.warning("run halted at t=%.6g: %s", state.t, reason)
            break
    if snapshots[-1] is not state:
        snapshots.append(state)
    return RunResult(snapshots, records, steps, dt, reason, rt, time.perf_counter() - t0, curves)


def _halt_reason(rec: DiagnosticsRecord, sup0: float, config: SimConfig) -> str | None:
    if not np.isfinite(rec.sup_F) or rec.sup_F > config.breakdown_factor * sup0:
        return f"arc-chord breakdown: sup F = {rec.sup_F:.3e} (initial {sup0:.3e})"
    if config.expect_stable and rec.min_sigma < 0:
        return f"Rayleigh-Taylor violation: min sigma = {rec.min_sigma:.3e} at alpha = {rec.argmin_sigma:.4f}"
    if rec.lambda_inequality_min < -1e-10:
        return f"pointwise Lambda inequality failed: min = {rec.lambda_inequality_min:.3e}"
    return None
