"""Convergence harnesses, time series and energy-law audits."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .model import PfcParams, energy_modified, sav_gap
from .schemes import Scheme, State, StepReport, initial_state, run
from .spectral import Grid, full_spectrum, interpolate_initial, make_grid, norm_l2

FieldExpr = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    err_phi: float
    err_r: float
    rate_phi: float = math.nan
    rate_r: float = math.nan


@dataclass
class TimeSeries:
    """Per-step records; row 0 is the initial state (no dissipation, unit denominator)."""

    step: list[int] = field(default_factory=list)
    t: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    E_original: list[float] = field(default_factory=list)
    E_modified: list[float] = field(default_factory=list)
    E_modified_tilde: list[float] = field(default_factory=list)
    R: list[float] = field(default_factory=list)
    sav_drift: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    denominator: list[float] = field(default_factory=list)
    grad_increment_sq: list[float] = field(default_factory=list)
    dropped: list[float] = field(default_factory=list)
    order: list[int] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)

    CSV_COLUMNS = (
        "step", "t", "mass", "E_original", "E_modified", "E_modified_tilde",
        "R", "sav_drift", "dissipation", "denominator",
    )

    def __len__(self) -> int:
        return len(self.step)

    def append_initial(self, s0: State, p: PfcParams) -> None:
        en = energy_modified(s0.phi, s0.R, s0.grid, p)
        self._append(
            s0.step_index, s0.t, float(np.mean(s0.phi)), en.original, en.modified, en.modified_tilde,
            s0.R, sav_gap(s0.R, en.e1), 0.0, 1.0, 0.0, 0.0, 0, 0.0,
        )

    def append_report(self, state: State, rep: StepReport) -> None:
        en = rep.energy
        self._append(
            rep.step, rep.t, rep.mass, en.original, en.modified, en.modified_tilde, state.R,
            rep.sav_drift, rep.dissipation, rep.rank_one_denominator, rep.grad_increment_sq,
            rep.dropped, rep.order, rep.residual,
        )

    def _append(self, *values) -> None:
        for f, v in zip(fields(self), values):
            getattr(self, f.name).append(v)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        for i in range(len(self)):
            yield tuple(getattr(self, c)[i] for c in self.CSV_COLUMNS)


def record(s0: State, p: PfcParams, reports: Sequence[StepReport], states: Sequence[State]) -> TimeSeries:
    series = TimeSeries()
    series.append_initial(s0, p)
    for st, rep in zip(states, reports):
        series.append_report(st, rep)
    return series


def simulate(s0: State, p: PfcParams, scheme: Scheme, n_steps: int) -> tuple[State, TimeSeries]:
    """Run and collect a full :class:`TimeSeries`, initial row included."""
    series = TimeSeries()
    series.append_initial(s0, p)
    final, _ = run(s0, p, scheme, n_steps, hooks=[series.append_report])
    return final, series


def _steps_for(T: float, dt: float) -> int:
    n = T / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
        raise ValueError(f"time step {dt} does not divide final time {T}")
    return int(round(n))


def _trajectory(args) -> tuple[np.ndarray, np.ndarray]:
    grid, phi0, p, scheme, T = args
    n = _steps_for(T, p.dt)
    s0 = initial_state(grid, phi0, p)
    phis = np.empty((n + 1, *grid.shape))
    Rs = np.empty(n + 1)
    phis[0], Rs[0] = s0.phi, s0.R

    def keep(state: State, _rep: StepReport) -> None:
        phis[state.step_index], Rs[state.step_index] = state.phi, state.R

    run(s0, p, scheme, n, hooks=[keep])
    return phis, Rs


def _map(fn, jobs, max_workers: int):
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def log2_rates(errors: Sequence[float]) -> list[float]:
    """``log2(err[i-1] / err[i])``; NaN for the first row or any zero/undefined pair."""
    rates = [math.nan]
    for a, b in zip(errors[:-1], errors[1:]):
        rates.append(math.log2(a / b) if a > 0 and b > 0 else math.nan)
    return rates


def temporal_convergence(
    scheme: Scheme,
    p: PfcParams,
    grid: Grid,
    phi0: np.ndarray,
    T: float,
    dts: Sequence[float],
    max_workers: int = 1,
) -> list[ConvergenceRow]:
    """Cauchy errors between runs at ``dt`` and ``dt/2`` for each ``dt``.

    The error is the maximum over the coarse run's step times of the L2 norm
    (resp. absolute value for ``R``) of the difference.
    """
    dts = [float(d) for d in dts]
    for a, b in zip(dts[:-1], dts[1:]):
        if not math.isclose(a, 2 * b, rel_tol=1e-12):
            raise ValueError(f"time steps must halve successively, got {a} then {b}")
    all_dts = dts + [dts[-1] / 2]
    for d in all_dts:
        _steps_for(T, d)
    jobs = [(grid, phi0, p.replace(dt=d), scheme, T) for d in all_dts]
    trajs = _map(_trajectory, jobs, max_workers)

    errs_phi, errs_r = [], []
    for (coarse, Rc), (fine, Rf) in zip(trajs[:-1], trajs[1:]):
        diff = coarse - fine[::2]
        errs_phi.append(max(norm_l2(grid, d) for d in diff))
        errs_r.append(float(np.max(np.abs(Rc - Rf[::2]))))
    rp, rr = log2_rates(errs_phi), log2_rates(errs_r)
    return [ConvergenceRow(d, e, er, a, b) for d, e, er, a, b in zip(dts, errs_phi, errs_r, rp, rr)]


def _final_field(args) -> np.ndarray:
    Lx, Ly, N, expr, p, scheme, T = args
    grid = make_grid(Lx, Ly, N)
    s0 = initial_state(grid, interpolate_initial(expr, grid), p)
    final, _ = run(s0, p, scheme, _steps_for(T, p.dt))
    return final.phi


def spectral_distance(coarse: Grid, phi_c: np.ndarray, fine: Grid, phi_f: np.ndarray) -> float:
    """L2 distance of two solutions on the modes ``|k|, |l| < N_coarse/2`` they share."""
    n, h = coarse.N, coarse.N // 2
    cc = full_spectrum(coarse, phi_c)
    cf = full_spectrum(fine, phi_f)
    ic = np.r_[0:h, n - h + 1 : n]
    jf = np.r_[0:h, fine.N - h + 1 : fine.N]
    d = cc[np.ix_(ic, ic)] - cf[np.ix_(jf, jf)]
    return float(np.sqrt(coarse.area * np.sum(np.abs(d) ** 2)))


def spatial_convergence(
    scheme: Scheme,
    p: PfcParams,
    expr: FieldExpr,
    Lx: float,
    Ly: float,
    T: float,
    Ns: Sequence[int],
    dt_small: float = 1e-3,
    max_workers: int = 1,
) -> list[tuple[int, float]]:
    """Cauchy error between ``N`` and ``2N`` solutions at time ``T``, for each ``N``."""
    Ns = [int(n) for n in Ns]
    pp = p.replace(dt=dt_small)
    all_N = sorted(set(Ns) | {2 * n for n in Ns})
    jobs = [(Lx, Ly, n, expr, pp, scheme, T) for n in all_N]
    finals = dict(zip(all_N, _map(_final_field, jobs, max_workers)))
    out = []
    for n in Ns:
        gc, gf = make_grid(Lx, Ly, n), make_grid(Lx, Ly, 2 * n)
        out.append((n, spectral_distance(gc, finals[n], gf, finals[2 * n])))
    return out


@dataclass
class Violation:
    index: int
    kind: str
    amount: float


@dataclass
class AuditReport:
    violations: list[Violation]
    worst: float
    # largest relative defect of the equality with the full S ||grad increment||^2 term;
    # informational only, since that equality is not exact for S > 0
    tilde_equality_worst: float

    @property
    def ok(self) -> bool:
        return not self.violations


def identity_defects(series: TimeSeries, S: float) -> np.ndarray:
    """Relative defect of the exact per-step energy identity of each step.

    First-order steps:
        E^{n+1} - E^n + S|grad d^{n+1}|^2 + 1/2|(L+beta) d|^2 + lam/2 |d|^2 + (dR)^2 = -diss
    Second-order steps:
        E^{n+1} - E^n + S/2 (|grad d^{n+1}|^2 - |grad d^n|^2) + S/2 |grad(d^{n+1}-d^n)|^2 = -diss
    The quantities after ``S |grad d|^2`` are the ``dropped`` column.
    """
    E = series.array("E_modified")
    G = series.array("grad_increment_sq")
    dropped = series.array("dropped")
    diss = series.array("dissipation")
    order = np.asarray(series.order)
    out = np.zeros(len(E) - 1)
    for n in range(len(E) - 1):
        if order[n + 1] == 1:
            lhs = E[n + 1] - E[n] + S * G[n + 1] + dropped[n + 1]
            scale = abs(E[n]) + 1
        else:
            lhs = E[n + 1] - E[n] + 0.5 * S * (G[n + 1] - G[n]) + dropped[n + 1]
            scale = abs(E[n] + S * G[n]) + 1
        out[n] = abs(lhs + diss[n + 1]) / scale
    return out


def tilde_equality_defects(series: TimeSeries) -> np.ndarray:
    """Relative defect of ``Et^{n+1} - Et^n + diss = 0`` with ``Et = E + S|grad d|^2``, second-order steps only."""
    Et = series.array("E_modified_tilde")
    diss = series.array("dissipation")
    order = np.asarray(series.order)
    out = np.zeros(len(Et) - 1)
    for n in range(len(Et) - 1):
        if order[n + 1] == 2:
            out[n] = abs(Et[n + 1] - Et[n] + diss[n + 1]) / (abs(Et[n]) + 1)
    return out


def dissipated_energy(series: TimeSeries, S: float) -> np.ndarray:
    """The energy each step provably does not increase.

    ``E`` for first-order steps; ``E + S/2 |grad d|^2`` once second-order steps begin.
    """
    E = series.array("E_modified")
    G = series.array("grad_increment_sq")
    order = np.asarray(series.order)
    second = order == 2
    if second.any():
        return E + 0.5 * S * G
    return E


def audit_energy_laws(series: TimeSeries, S: float, tol: float = 1e-9) -> AuditReport:
    """Check monotone decay and the exact per-step identities; report, never raise."""
    violations: list[Violation] = []
    defects = identity_defects(series, S)
    for n, d in enumerate(defects):
        if not d <= tol:
            violations.append(Violation(n + 1, "identity", float(d)))
    energy = dissipated_energy(series, S)
    for n in range(len(energy) - 1):
        rise = (energy[n + 1] - energy[n]) / (abs(energy[n]) + 1)
        if not rise <= tol:
            violations.append(Violation(n + 1, "increase", float(rise)))
    worst = max([v.amount for v in violations], default=0.0)
    tilde = tilde_equality_defects(series)
    return AuditReport(violations, worst, float(tilde.max(initial=0.0)))


def sav_consistency(series: TimeSeries) -> tuple[float, float]:
    """Maximum and final ``|R^2 - E1(phi)|`` over the series."""
    drift = series.array("sav_drift")
    return float(drift.max()), float(drift[-1])
