"""Experiment presets and the run driver that persists results to an output directory."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, replace
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, from_sections
from .diagnostics import (
    ConvergenceRow,
    TimeSeries,
    audit_energy_laws,
    sav_consistency,
    simulate,
    spatial_convergence,
    temporal_convergence,
)
from .fileio import (
    Checkpoint,
    read_checkpoint,
    read_csv,
    read_snapshot,
    write_checkpoint,
    write_csv,
    write_json,
    write_pgm,
    write_snapshot,
)
from .initial import PRNG_NAME, CrystalliteIC, Patch, RandomIC, TrigIC, build_initial, crystal_profile
from .model import PfcParams, resolve_c0
from .schemes import BlowUpError, State, StepReport, initial_state, run
from .spectral import Grid, make_grid

log = logging.getLogger(__name__)

SERIES_FILE = "series.csv"
MANIFEST_FILE = "manifest.json"
CHECKPOINT_FILE = "checkpoint.pfcc"


def code_version() -> str:
    try:
        return metadata.version("pfcsav")
    except metadata.PackageNotFoundError:
        return "unknown"


# --- presets -----------------------------------------------------------------

def preset_accuracy(scheme: str = "first") -> RunConfig:
    """Accuracy test on (0,32)^2 with the band-limited trigonometric datum."""
    return RunConfig(
        Lx=32.0, Ly=32.0, N=64,
        params=PfcParams(M=1.0, beta=1.0, eps=0.025, lam=0.01, S=5.0, dt=1 / 80),
        scheme=scheme, T=1.0, ic=TrigIC(), output="out/accuracy",
        dts=(1 / 5, 1 / 10, 1 / 20, 1 / 40, 1 / 80), Ns=(4, 8, 16, 32, 64),
        dt_small=1e-3, T_space=0.1,
    )


def preset_random() -> RunConfig:
    """Phase evolution from noise around 0.06 on (0,128)^2."""
    return RunConfig(
        Lx=128.0, Ly=128.0, N=256,
        params=PfcParams(M=1.0, beta=1.0, eps=0.025, lam=0.001, S=0.01, dt=1.0),
        scheme="second", T=2000.0, ic=RandomIC(0.06, 0.01), output="out/random",
        series_interval=1, snapshot_times=(150.0, 260.0, 400.0, 500.0, 1000.0, 2000.0),
        checkpoint_interval=250,
    )


def preset_crystal() -> RunConfig:
    """Three rotated crystallites growing in a supercooled liquid.

    The domain size is not given with the original experiment; (0,800)^2 holds
    all three patch centers and is recorded in the manifest notes.
    """
    return RunConfig(
        Lx=800.0, Ly=800.0, N=512,
        params=PfcParams(M=1.0, beta=1.0, eps=0.25, lam=0.001, S=0.1, dt=0.05),
        scheme="second", T=800.0, ic=CrystalliteIC(), output="out/crystal",
        snapshot_times=(0.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 800.0),
        series_interval=20, checkpoint_interval=2000,
        notes=["domain (0,800)^2 is an assumption: the crystal-growth domain size is not stated"],
    )


def preset_crystal_desk() -> RunConfig:
    """Reduced crystal growth: one unrotated patch on (0,200)^2 up to t = 50."""
    return RunConfig(
        Lx=200.0, Ly=200.0, N=128,
        params=PfcParams(M=1.0, beta=1.0, eps=0.25, lam=0.001, S=0.1, dt=0.05),
        scheme="second", T=50.0,
        ic=CrystalliteIC(patches=(Patch(100.0, 100.0, 40.0, 0.0),)),
        output="out/crystal-desk", snapshot_interval=100, series_interval=1,
    )


PRESETS = {
    "accuracy": preset_accuracy,
    "random": preset_random,
    "crystal": preset_crystal,
    "crystal-desk": preset_crystal_desk,
}


# --- run driver ----------------------------------------------------------------

class OutputLock:
    """Exclusive ownership of an output directory for the duration of a run."""

    def __init__(self, directory: Path):
        self.path = Path(directory) / ".lock"

    def __enter__(self) -> "OutputLock":
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise OSError(f"output directory is locked by another run ({self.path})") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc) -> None:
        self.path.unlink(missing_ok=True)


@dataclass
class RunResult:
    state: State
    previous: State | None
    series: TimeSeries
    out_dir: Path
    manifest: dict


def _snapshot_steps(cfg: RunConfig) -> set[int]:
    return {int(round(t / cfg.params.dt)) for t in cfg.snapshot_times}


def _manifest(cfg: RunConfig, grid: Grid, status: dict, snapshots: list, resumed_from: int | None) -> dict:
    p = cfg.params
    return {
        "code_version": code_version(),
        "numpy_version": np.__version__,
        "config": cfg.to_sections(),
        "resolved": {
            "Lx": grid.Lx, "Ly": grid.Ly, "N": grid.N, "hx": grid.hx, "hy": grid.hy,
            "M": p.M, "beta": p.beta, "eps": p.eps, "lambda": p.lam, "S": p.S, "dt": p.dt,
            "C0": resolve_c0(p, grid), "C0_policy": "auto" if p.C0 is None else "explicit",
            "dealias": p.dealias, "scheme": cfg.scheme, "T": cfg.T, "n_steps": cfg.n_steps,
            "initial_condition": cfg.to_sections()["initial"],
        },
        "seed": cfg.seed,
        "prng": PRNG_NAME,
        "notes": list(cfg.notes),
        "status": status,
        "resumed_from_step": resumed_from,
        "snapshots": snapshots,
        "series_file": SERIES_FILE,
        "checkpoint_file": CHECKPOINT_FILE,
    }


def load_series(path: Path) -> TimeSeries:
    header, rows = read_csv(path)
    series = TimeSeries()
    for row in rows:
        rec = dict(zip(header, row))
        for col in TimeSeries.CSV_COLUMNS:
            val = int(rec[col]) if col == "step" else float(rec[col])
            getattr(series, col).append(val)
    return series


def run_experiment(
    cfg: RunConfig,
    out_dir: str | os.PathLike | None = None,
    checkpoint: Checkpoint | None = None,
    figures: bool = True,
) -> RunResult:
    """Run ``cfg`` and write manifest, series, snapshots, checkpoints and figures.

    With ``checkpoint`` the run continues from the stored level(s) into the same
    directory; series rows past the checkpoint step are discarded first.
    Raises :class:`BlowUpError` after recording the failure in the manifest.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(cfg.Lx, cfg.Ly, cfg.N)
    p = cfg.params
    sections = cfg.to_sections()
    snap_steps = _snapshot_steps(cfg)
    snapshots: list[dict] = []

    def snapshot(state: State) -> None:
        name = f"phi_{state.step_index:08d}"
        write_snapshot(snap_dir / f"{name}.pfcf", grid, state.phi, state.t, state.step_index)
        write_pgm(snap_dir / f"{name}.pgm", state.phi)
        snapshots.append({"file": f"snapshots/{name}.pfcf", "image": f"snapshots/{name}.pgm",
                          "t": state.t, "step": state.step_index})

    def wants_snapshot(step: int) -> bool:
        return step in snap_steps or (cfg.snapshot_interval > 0 and step % cfg.snapshot_interval == 0)

    with OutputLock(out):
        series_path = out / SERIES_FILE
        if checkpoint is None:
            phi0 = build_initial(cfg.ic, grid, cfg.seed)
            state = initial_state(grid, phi0, p)
            previous = None
            series = TimeSeries()
            series.append_initial(state, p)
            write_csv(series_path, TimeSeries.CSV_COLUMNS, series.rows())
            if wants_snapshot(0):
                snapshot(state)
            resumed_from = None
        else:
            if checkpoint.state.grid != grid:
                raise ConfigError("checkpoint grid does not match the configuration")
            if checkpoint.scheme != cfg.scheme:
                raise ConfigError(f"checkpoint was written by the {checkpoint.scheme}-order scheme")
            state = replace(checkpoint.state, dt=p.dt)
            previous = checkpoint.previous
            resumed_from = state.step_index
            old = load_series(series_path) if series_path.exists() else TimeSeries()
            keep = [r for r in old.rows() if r[0] <= resumed_from]
            write_csv(series_path, TimeSeries.CSV_COLUMNS, keep)
            old_manifest = out / MANIFEST_FILE
            if old_manifest.exists():
                prior = json.loads(old_manifest.read_text())
                snapshots.extend(s for s in prior.get("snapshots", []) if s["step"] <= resumed_from)
                cfg.notes.extend(n for n in prior.get("notes", []) if n not in cfg.notes)

        n_remaining = cfg.n_steps - state.step_index
        pending: list[tuple] = []
        tracker = {"prev": previous, "cur": state}
        new_series = TimeSeries()

        def flush() -> None:
            write_csv(series_path, TimeSeries.CSV_COLUMNS, pending, append=True)
            pending.clear()

        def observe(st: State, rep: StepReport) -> None:
            tracker["prev"], tracker["cur"] = tracker["cur"], st
            new_series.append_report(st, rep)
            if rep.step % cfg.series_interval == 0 or rep.step == cfg.n_steps:
                pending.append(next(iter(_single_row(st, rep))))
            if wants_snapshot(rep.step):
                snapshot(st)
            if cfg.checkpoint_interval and rep.step % cfg.checkpoint_interval == 0:
                flush()
                _checkpoint(out, tracker, cfg.scheme, sections)

        status = {"state": "completed", "step": cfg.n_steps}
        try:
            if n_remaining > 0:
                run(state, p, cfg.scheme, n_remaining, hooks=[observe], prev=previous)
        except BlowUpError as exc:
            flush()
            status = {"state": "blow-up", "step": exc.step, "message": str(exc)}
            write_json(out / MANIFEST_FILE, _manifest(cfg, grid, status, snapshots, resumed_from))
            raise
        flush()
        _checkpoint(out, tracker, cfg.scheme, sections)
        full = load_series(series_path)
        status.update(_summary(full))
        manifest = _manifest(cfg, grid, status, snapshots, resumed_from)
        write_json(out / MANIFEST_FILE, manifest)
        if figures and len(full) > 1:
            plotting.energy_figure(full, out / "energy.png")
            imgs = [(s["t"], _read_field(out / s["file"])) for s in snapshots]
            if imgs:
                plotting.snapshot_panel(imgs, out / "snapshots.png", extent=(0, grid.Lx, 0, grid.Ly))
    log.info("run finished in %s: %s", out, status)
    return RunResult(tracker["cur"], tracker["prev"], new_series, out, manifest)


def _single_row(st: State, rep: StepReport):
    s = TimeSeries()
    s.append_report(st, rep)
    return s.rows()


def _checkpoint(out: Path, tracker: dict, scheme: str, sections: dict) -> None:
    prev = tracker["prev"] if scheme == "second" else None
    write_checkpoint(out / CHECKPOINT_FILE, tracker["cur"], scheme, sections, previous=prev)


def _read_field(path: Path) -> np.ndarray:
    return read_snapshot(path).phi


def _summary(series: TimeSeries) -> dict:
    mass = series.array("mass")
    e = series.array("E_modified")
    drift_max, drift_final = sav_consistency(series)
    return {
        "final_t": series.t[-1],
        "final_E_modified": float(e[-1]),
        "final_E_original": series.E_original[-1],
        "mass_drift": float(np.max(np.abs(mass - mass[0]))),
        "min_denominator": float(np.min(series.array("denominator"))),
        "max_sav_drift": drift_max,
        "final_sav_drift": drift_final,
    }


def resume_experiment(
    checkpoint_path: str | os.PathLike,
    out_dir: str | os.PathLike | None = None,
    T: float | None = None,
    figures: bool = True,
) -> RunResult:
    """Continue a run from its checkpoint, optionally extending the final time."""
    ckpt = read_checkpoint(checkpoint_path)
    cfg = from_sections(ckpt.config)
    if T is not None:
        cfg = replace(cfg, T=float(T)).validate()
    grid = make_grid(cfg.Lx, cfg.Ly, cfg.N)
    ckpt = read_checkpoint(checkpoint_path, grid=grid, scheme=cfg.scheme)
    out = Path(out_dir) if out_dir is not None else Path(checkpoint_path).parent
    return run_experiment(cfg, out, checkpoint=ckpt, figures=figures)


# --- studies -------------------------------------------------------------------

def ic_expression(cfg: RunConfig):
    """Pointwise initial datum, for studies that sample it on several grids."""
    ic = cfg.ic
    if isinstance(ic, TrigIC):
        return lambda x, y: np.sin(np.pi * x / 16) * np.cos(np.pi * y / 16)
    if isinstance(ic, CrystalliteIC):
        def expr(x, y):
            phi = np.full(np.shape(x), ic.phi_ave)
            for patch in ic.patches:
                half = patch.width / 2
                mask = (np.abs(x - patch.cx) <= half) & (np.abs(y - patch.cy) <= half)
                phi[mask] = crystal_profile(x[mask], y[mask], patch.theta, ic.phi_ave, ic.C1, ic.C2)
            return phi
        return expr
    raise ConfigError("spatial convergence needs a deterministic pointwise initial condition (trig or crystallites)")


TEMPORAL_COLUMNS = ("dt", "err_phi", "rate_phi", "err_r", "rate_r")
SPATIAL_COLUMNS = ("N", "err", "ratio")


def converge_time(cfg: RunConfig, out_dir: str | os.PathLike | None = None, max_workers: int = 1) -> list[ConvergenceRow]:
    dts = cfg.dts or (1 / 5, 1 / 10, 1 / 20, 1 / 40, 1 / 80)
    grid = make_grid(cfg.Lx, cfg.Ly, cfg.N)
    phi0 = build_initial(cfg.ic, grid, cfg.seed)
    rows = temporal_convergence(cfg.scheme, cfg.params, grid, phi0, cfg.T, dts, max_workers=max_workers)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / f"convergence_time_{cfg.scheme}.csv", TEMPORAL_COLUMNS,
                  [(r.dt, r.err_phi, r.rate_phi, r.err_r, r.rate_r) for r in rows])
        plotting.temporal_convergence_figure(rows, out / f"convergence_time_{cfg.scheme}.png",
                                             title=f"{cfg.scheme}-order scheme")
        write_json(out / f"convergence_time_{cfg.scheme}.json",
                   {"config": cfg.to_sections(), "code_version": code_version(), "seed": cfg.seed,
                    "C0": resolve_c0(cfg.params, grid), "sampling": "coarse step times"})
    return rows


def converge_space(cfg: RunConfig, out_dir: str | os.PathLike | None = None, max_workers: int = 1) -> list[tuple[int, float]]:
    Ns = cfg.Ns or (4, 8, 16, 32, 64)
    T = cfg.T_space if cfg.T_space is not None else cfg.T
    rows = spatial_convergence(cfg.scheme, cfg.params, ic_expression(cfg), cfg.Lx, cfg.Ly, T, Ns,
                               dt_small=cfg.dt_small, max_workers=max_workers)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table = []
        for i, (n, e) in enumerate(rows):
            ratio = e / rows[i - 1][1] if i and rows[i - 1][1] > 0 else math.nan
            table.append((n, e, ratio))
        write_csv(out / f"convergence_space_{cfg.scheme}.csv", SPATIAL_COLUMNS, table)
        plotting.spatial_convergence_figure(rows, out / f"convergence_space_{cfg.scheme}.png")
    return rows


@dataclass
class StabilizationStudy:
    t: np.ndarray
    reference: np.ndarray
    curves: dict[float, np.ndarray]
    deviation: dict[float, float]
    drift: dict[float, float]


def compare_stabilization(
    cfg: RunConfig,
    S_values: Sequence[float] = (0.0, 0.01),
    dt: float = 1.0,
    ref_dt: float = 0.02,
    ref_S: float | None = None,
    T: float | None = None,
    out_dir: str | os.PathLike | None = None,
) -> StabilizationStudy:
    """Modified-energy trajectories at a large step for several ``S``, against a small-step reference.

    Deviations are maxima over the large-step times of ``|E_S(t) - E_ref(t)|``.
    """
    T = cfg.T if T is None else T
    grid = make_grid(cfg.Lx, cfg.Ly, cfg.N)
    phi0 = build_initial(cfg.ic, grid, cfg.seed)
    ref_p = cfg.params.replace(dt=ref_dt, S=cfg.params.S if ref_S is None else ref_S)
    n_ref = int(round(T / ref_dt))
    _, ref_series = simulate(initial_state(grid, phi0, ref_p), ref_p, cfg.scheme, n_ref)
    stride = int(round(dt / ref_dt))
    if not math.isclose(stride * ref_dt, dt, rel_tol=1e-12):
        raise ValueError("the large step must be a multiple of the reference step")
    reference = ref_series.array("E_modified")[::stride]
    t = ref_series.array("t")[::stride]
    curves, deviation, drift = {}, {}, {}
    for S in S_values:
        p = cfg.params.replace(dt=dt, S=S)
        _, series = simulate(initial_state(grid, phi0, p), p, cfg.scheme, int(round(T / dt)))
        curves[S] = series.array("E_modified")
        deviation[S] = float(np.max(np.abs(curves[S] - reference)))
        drift[S] = sav_consistency(series)[1]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = ["t", f"E_ref_dt{ref_dt:g}"] + [f"E_S{S:g}_dt{dt:g}" for S in S_values]
        write_csv(out / "stabilization.csv", cols,
                  zip(t, reference, *[curves[S] for S in S_values]))
        plotting.energy_comparison_figure(
            {f"reference dt={ref_dt:g}": (t, reference),
             **{f"S={S:g}, dt={dt:g}": (t, curves[S]) for S in S_values}},
            out / "stabilization.png",
        )
    return StabilizationStudy(t, reference, curves, deviation, drift)


def audit_run(series: TimeSeries, S: float, tol: float = 1e-9):
    return audit_energy_laws(series, S, tol)
