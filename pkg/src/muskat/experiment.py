"""Experiment descriptions, run directories and plot-ready data."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .curve import Curve, arc_chord, read_snapshot, write_snapshot
from .diagnostics import curve_sobolev_norm
from .dynamics import RunResult, SimConfig, run
from .kernels import FluidParams

log = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ("t", "sup_F", "min_sigma", "H3_norm", "tangent_dev", "residual", "b_t", "mode_amplitude")
THREADS_ENV = "MUSKAT_THREADS"


class SpecError(ValueError):
    pass


class ParamsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mu1: float = 1.0
    mu2: float = 1.0
    rho1: float = 0.0
    rho2: float = 1.0
    kappa: float = Field(default=1.0, gt=0)
    g: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _viscosities(self):
        if self.mu1 < 0 or self.mu2 < 0 or self.mu1 + self.mu2 <= 0:
            raise ValueError("params: mu1, mu2 must be nonnegative with a positive sum")
        return self

    def to_params(self) -> FluidParams:
        return FluidParams(**self.model_dump())


class ExperimentSpec(SimConfig):
    """A SimConfig plus fluid parameters, output directory and seed.

    ``output_every`` is the snapshot cadence in steps and must divide the
    step count.
    """

    params: ParamsModel = Field(default_factory=ParamsModel)
    out_dir: str | None = None
    seed: int = 0

    @model_validator(mode="after")
    def _cadence_divides(self):
        if self.output_every is not None:
            n = self.n_steps(self.resolved_dt())
            if n % self.output_every:
                raise ValueError(f"output_every={self.output_every} does not divide the step count {n}")
        return self

    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else self.default_dt(self.params.to_params())

    def sim_config(self) -> SimConfig:
        data = self.model_dump(exclude={"params", "out_dir", "seed"})
        return SimConfig(**data)

    def resolved(self) -> "ExperimentSpec":
        """Copy with every default materialized (dt and output cadence filled in)."""
        dt = self.resolved_dt()
        every = self.output_every or max(self.n_steps(dt), 1)
        return self.model_copy(update={"dt": dt, "output_every": every})


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "spec"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_spec(data: dict) -> ExperimentSpec:
    try:
        spec = ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        raise SpecError(_describe(exc)) from None
    try:
        curve = spec.initial.build(spec.N)
    except (OSError, ValueError) as exc:
        raise SpecError(f"initial: cannot build curve: {exc}") from None
    if not arc_chord(curve).finite:
        raise SpecError("initial: curve self-intersects at grid resolution")
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path} must contain a JSON object")
    return parse_spec(data)


def dump_spec(spec: ExperimentSpec, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(spec.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# running


def tracked_mode(spec: ExperimentSpec, curve: Curve) -> int:
    """Wavenumber followed in the ``mode_amplitude`` column."""
    if spec.initial.kind == "single_mode":
        return abs(int(spec.initial.k))
    amp = np.abs(np.fft.rfft(curve.q2))
    amp[0] = 0.0
    return int(np.argmax(amp)) if amp.max() > 0 else 1


def mode_amplitude(curve: Curve, k: int) -> float:
    """Amplitude of ``cos/sin(k alpha)`` in ``q2``."""
    return float(2.0 * np.abs(np.fft.rfft(curve.q2)[k]) / curve.N)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_diagnostics(path: Path, rows: list[dict]):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in DIAGNOSTIC_COLUMNS])


def _summary(spec: ExperimentSpec, result: RunResult, k: int) -> dict:
    final = result.final
    first = result.records[0]
    last = result.records[-1]
    q2_0 = result.snapshots[0].curve.q2
    displacement = max(float(np.max(np.abs(s.curve.q2 - q2_0))) for s in result.snapshots)
    return {
        "status": "breakdown" if result.reason else "completed",
        "reason": result.reason,
        "steps_taken": result.steps_taken,
        "dt": result.dt,
        "t_final": final.t,
        "wall_time": result.wall_time,
        "max_displacement": displacement,
        "max_abs_z2": float(np.max(np.abs(final.curve.q2))),
        "min_sigma_initial": first.min_sigma,
        "rt_unstable_initial": bool(first.min_sigma < 0),
        "rt_violation": bool(result.rt_violation),
        "final_norms": {f"H{s}": curve_sobolev_norm(final.curve, s) for s in (0, 1, 2, 3)},
        "final_sup_F": last.sup_F,
        "final_min_sigma": last.min_sigma,
        "max_tangent_dev": max(r.tangent_dev for r in result.records),
        "mode_k": k,
    }


def execute(spec: ExperimentSpec, out_dir=None) -> tuple[int, Path]:
    """Run ``spec`` and write its artifact directory; returns ``(status, dir)``.

    Status is 0 on completion (including a recorded breakdown) and 1 when the
    run raised; summary.json describes either outcome.
    """
    out = Path(out_dir or spec.out_dir or "muskat-run")
    snaps = out / "snapshots"
    snaps.mkdir(parents=True, exist_ok=True)
    spec = spec.resolved()
    dump_spec(spec, out / "resolved-config.json")
    t0 = time.perf_counter()
    try:
        config = spec.sim_config()
        params = spec.params.to_params()
        curve0 = spec.initial.build(spec.N)
        k = tracked_mode(spec, curve0)
        result = run(config, params, curve0)
        rows = []
        for rec, curve in zip(result.records, result.record_curves):
            d = rec.to_dict()
            d["H3_norm"] = rec.H3_norm
            d["mode_amplitude"] = mode_amplitude(curve, k)
            rows.append(d)
        _write_diagnostics(out / "diagnostics.csv", rows)
        step_of = [int(round(s.t / result.dt)) for s in result.snapshots]
        for s, n in zip(result.snapshots, step_of):
            write_snapshot(s.curve, snaps / f"step_{n:06d}.csv", s.t)
        summary = _summary(spec, result, k)
        status = 0
    except Exception as exc:  # noqa: BLE001 - every failure is reported in summary.json
        log.error("run failed: %s", exc)
        summary = {
            "status": "failed",
            "reason": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(),
            "wall_time": time.perf_counter() - t0,
        }
        status = 1
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return status, out


# ---------------------------------------------------------------------------
# plot data


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_plot_data(run_dir, plot_dir=None) -> Path:
    """Write tidy long-format CSVs for a finished run plus a hashed manifest.

    ``diagnostics_long.csv`` has columns ``t, quantity, value`` (including
    ``log_mode_amplitude``); one ``profile_<step>.csv`` per snapshot has
    ``t, alpha, z1, z2``.
    """
    run_dir = Path(run_dir)
    diag = run_dir / "diagnostics.csv"
    snaps = sorted((run_dir / "snapshots").glob("*.csv")) if (run_dir / "snapshots").is_dir() else []
    missing = [str(p) for p in (diag, run_dir / "snapshots") if not p.exists()]
    if missing:
        raise FileNotFoundError(f"run directory is incomplete, missing: {', '.join(missing)}")
    if not snaps:
        raise FileNotFoundError(f"no snapshot CSVs in {run_dir / 'snapshots'}")
    plot = Path(plot_dir) if plot_dir else run_dir / "plot"
    plot.mkdir(parents=True, exist_ok=True)
    written = []

    with diag.open() as fh:
        rows = list(csv.DictReader(fh))
    long_path = plot / "diagnostics_long.csv"
    with long_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "quantity", "value"])
        for row in rows:
            for name in DIAGNOSTIC_COLUMNS[1:]:
                writer.writerow([row["t"], name, row[name]])
            amp = float(row["mode_amplitude"])
            writer.writerow([row["t"], "log_mode_amplitude", _fmt(np.log(amp)) if amp > 0 else "nan"])
    written.append(long_path)

    for snap in snaps:
        curve, meta = read_snapshot(snap)
        path = plot / f"profile_{snap.stem}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "alpha", "z1", "z2"])
            t = _fmt(meta.get("time", 0.0))
            for a, z1, z2 in zip(curve.alpha, curve.z1, curve.z2):
                writer.writerow([t, _fmt(a), _fmt(z1), _fmt(z2)])
        written.append(path)

    manifest = {"run_dir": str(run_dir), "files": [{"path": p.name, "sha256": _sha256(p)} for p in written]}
    (plot / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return plot


# ---------------------------------------------------------------------------
# sweeps


def thread_budget() -> int:
    """Worker count from ``MUSKAT_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise SpecError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise SpecError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def _sweep_one(args) -> dict:
    data, out = args
    status, path = execute(ExperimentSpec.model_validate(data), out)
    summary = json.loads((path / "summary.json").read_text())
    return {"dir": str(path), "exit": status, **{k: summary.get(k) for k in ("status", "reason", "max_displacement", "final_min_sigma", "max_tangent_dev")}}


def sweep(base: ExperimentSpec, field: str, values, out_dir, workers: int | None = None) -> list[dict]:
    """Run ``base`` once per value of ``field`` (a top-level or ``params.`` key).

    Runs are independent; with ``workers > 1`` they execute in separate
    processes.  Results come back in the order of ``values``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, v in enumerate(values):
        data = base.model_dump(mode="json")
        if field.startswith("params."):
            data["params"][field.split(".", 1)[1]] = v
        else:
            data[field] = v
        spec = parse_spec(data)
        jobs.append((spec.model_dump(mode="json"), str(out_dir / f"run_{i:03d}")))
    workers = thread_budget() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    for row, v in zip(rows, values):
        row[field] = v
    with (out_dir / "sweep.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[field, "dir", "exit", "status", "reason", "max_displacement",
                                                "final_min_sigma", "max_tangent_dev"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows
