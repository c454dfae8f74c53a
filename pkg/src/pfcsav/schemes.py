"""Stabilized SAV time steppers with Fourier-spectral spatial discretization.

Each step eliminates the scalar auxiliary variable from the coupled linear
system: two diagonal solves in Fourier space followed by one scalar division.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterable, Literal

import numpy as np

from .model import EnergyBreakdown, PfcParams, e1, energy_original, f_prime, quadratic_energy, resolve_c0, sav_gap
from .spectral import Grid, dealias_mask, from_spectral, spectral_inner, spectral_norm_sq, to_spectral

Scheme = Literal["first", "second"]

BLOWUP_LIMIT = 1e3


class BlowUpError(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"blow-up at step {step}: {reason}")
        self.step = step


class BootstrapError(RuntimeError):
    """Raised when the second-order scheme is started without a previous level."""


@dataclass(frozen=True)
class State:
    grid: Grid
    phi: np.ndarray
    R: float
    step_index: int = 0
    dt: float = 0.0

    @property
    def t(self) -> float:
        return self.step_index * self.dt


@dataclass(frozen=True)
class StepReport:
    step: int
    t: float
    mass: float
    energy: EnergyBreakdown
    dissipation: float
    rank_one_denominator: float
    sav_drift: float
    residual: float
    # ||grad(phi^{n+1} - phi^n)||^2
    grad_increment_sq: float
    # nonnegative terms the energy law drops to become an inequality
    dropped: float
    order: int


@dataclass(frozen=True)
class SchemeOperator:
    """Diagonal symbols of one scheme on one grid, built once per (grid, params, order)."""

    grid: Grid
    params: PfcParams
    order: int
    inv_A: np.ndarray
    # multiplies phi^n, and phi^{n-1} for the second-order scheme
    explicit_n: np.ndarray
    explicit_nm1: np.ndarray | None
    # multiplies the nonlinear coefficient b in the right-hand side
    coupling: np.ndarray
    # chemical-potential symbol without the stabilizer
    mu_linear: np.ndarray
    dealias: np.ndarray | None

    @classmethod
    def build(cls, grid: Grid, p: PfcParams, order: int) -> "SchemeOperator":
        return _build_operator(grid, p, order)


@lru_cache(maxsize=32)
def _build_operator(grid: Grid, p: PfcParams, order: int) -> SchemeOperator:
    k2 = grid.ksq
    sh = (p.beta - k2) ** 2
    mdt = p.M * p.dt
    if order == 1:
        A = 1 + mdt * k2 * (sh + p.lam + p.S * k2)
        explicit_n = 1 + mdt * p.S * k2**2
        explicit_nm1 = None
        coupling = -mdt * k2
    elif order == 2:
        A = 1 + mdt * k2 * (0.5 * sh + 0.5 * p.lam + p.S * k2)
        explicit_n = 1 - 0.5 * mdt * k2 * (sh + p.lam) + 2 * mdt * p.S * k2**2
        explicit_nm1 = -mdt * p.S * k2**2
        coupling = -0.5 * mdt * k2
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    arrays = [1.0 / A, explicit_n, explicit_nm1, coupling, sh + p.lam]
    for a in arrays:
        if a is not None:
            a.setflags(write=False)
    mask = dealias_mask(grid) if p.dealias else None
    return SchemeOperator(grid, p, order, *arrays, dealias=mask)


def initial_state(grid: Grid, phi0: np.ndarray, p: PfcParams) -> State:
    """State at step 0 with ``R = sqrt(E1(phi0))``."""
    phi0 = np.array(grid.check(phi0), dtype=float)
    _check_finite(phi0, 0)
    return State(grid, phi0, float(np.sqrt(e1(phi0, grid, p))), 0, p.dt)


def _check_finite(phi: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(phi)):
        raise BlowUpError(step, "non-finite values in phi")
    peak = float(np.max(np.abs(phi)))
    if peak > BLOWUP_LIMIT:
        raise BlowUpError(step, f"max|phi| = {peak:.3e} exceeds {BLOWUP_LIMIT:g}")


def _nonlinear_coefficient(op: SchemeOperator, phi_star: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficients of ``b = F'(phi*) / sqrt(E1(phi*))`` and the value ``E1(phi*)``."""
    energy1 = e1(phi_star, op.grid, op.params)
    b_hat = to_spectral(op.grid, f_prime(phi_star, op.params)) / np.sqrt(energy1)
    if op.dealias is not None:
        b_hat = b_hat * op.dealias
    return b_hat, energy1


def _solve(op: SchemeOperator, g_hat: np.ndarray, b_hat: np.ndarray, phi_hat: np.ndarray, R_n: float):
    """Rank-one decoupled solve; returns ``(phi^{n+1} coefficients, R^{n+1}, denominator)``."""
    grid = op.grid
    phi1 = g_hat * op.inv_A
    phi2 = op.coupling * b_hat * op.inv_A
    denom = 1.0 - 0.5 * spectral_inner(grid, b_hat, phi2)
    R_new = (R_n + 0.5 * spectral_inner(grid, b_hat, phi1 - phi_hat)) / denom
    return phi1 + R_new * phi2, R_new, denom


def _report(
    op: SchemeOperator,
    step: int,
    phi_new: np.ndarray,
    new_hat: np.ndarray,
    R_new: float,
    mu_hat: np.ndarray,
    residual: float,
    denom: float,
    d_hat: np.ndarray,
    dropped: float,
) -> StepReport:
    grid, p = op.grid, op.params
    grad = np.sqrt(grid.ksq)
    quad = quadratic_energy(new_hat, grid, p)
    c0 = resolve_c0(p, grid)
    energy1 = e1(phi_new, grid, p)
    grad_inc = spectral_norm_sq(grid, d_hat, grad)
    modified = quad + R_new * R_new - c0
    energy = EnergyBreakdown(
        original=energy_original(phi_new, grid, p),
        modified=modified,
        modified_tilde=modified + p.S * grad_inc,
        quadratic=quad,
        e1=energy1,
        r_squared=R_new * R_new,
    )
    return StepReport(
        step=step,
        t=step * p.dt,
        mass=float(new_hat[0, 0].real),
        energy=energy,
        dissipation=p.M * p.dt * spectral_norm_sq(grid, mu_hat, grad),
        rank_one_denominator=denom,
        sav_drift=sav_gap(R_new, energy1),
        residual=residual,
        grad_increment_sq=grad_inc,
        dropped=dropped,
        order=op.order,
    )


def _residual(op: SchemeOperator, d_hat: np.ndarray, mu_hat: np.ndarray, dR: float, b_hat: np.ndarray) -> float:
    """Max-norm residual of the mass equation and the scalar equation."""
    grid, p = op.grid, op.params
    res_phi = from_spectral(grid, d_hat + p.M * p.dt * grid.ksq * mu_hat)
    res_r = dR - 0.5 * spectral_inner(grid, b_hat, d_hat)
    return max(float(np.max(np.abs(res_phi))), abs(res_r))


def step_first_order(s: State, p: PfcParams) -> tuple[State, StepReport]:
    grid = s.grid
    op = SchemeOperator.build(grid, p, 1)
    phi_hat = to_spectral(grid, s.phi)
    b_hat, _ = _nonlinear_coefficient(op, s.phi)
    g_hat = op.explicit_n * phi_hat
    new_hat, R_new, denom = _solve(op, g_hat, b_hat, phi_hat, s.R)
    phi_new = from_spectral(grid, new_hat)
    step = s.step_index + 1
    _check_finite(phi_new, step)

    d_hat = new_hat - phi_hat
    dR = R_new - s.R
    mu_hat = op.mu_linear * new_hat + p.S * grid.ksq * d_hat + R_new * b_hat
    dropped = 0.5 * spectral_norm_sq(grid, d_hat, p.beta - grid.ksq)
    dropped += 0.5 * p.lam * spectral_norm_sq(grid, d_hat) + dR * dR
    residual = _residual(op, d_hat, mu_hat, dR, b_hat)
    report = _report(op, step, phi_new, new_hat, R_new, mu_hat, residual, denom, d_hat, dropped)
    return State(grid, phi_new, R_new, step, p.dt), report


def step_second_order(s_n: State, s_nm1: State, p: PfcParams) -> tuple[State, StepReport]:
    """One Crank-Nicolson step; ``s_nm1`` is the level before ``s_n``."""
    grid = s_n.grid
    if s_nm1 is None or s_n.step_index < 1:
        raise BootstrapError("second-order step needs phi^{n-1}; bootstrap with one first-order step")
    if s_nm1.grid != grid:
        raise ValueError("states live on different grids")
    if s_nm1.step_index != s_n.step_index - 1:
        raise ValueError(f"levels {s_nm1.step_index} and {s_n.step_index} are not consecutive")
    op = SchemeOperator.build(grid, p, 2)
    phi_hat = to_spectral(grid, s_n.phi)
    prev_hat = to_spectral(grid, s_nm1.phi)
    phi_star = 0.5 * (3 * s_n.phi - s_nm1.phi)
    b_hat, _ = _nonlinear_coefficient(op, phi_star)
    g_hat = op.explicit_n * phi_hat + op.explicit_nm1 * prev_hat + s_n.R * op.coupling * b_hat
    new_hat, R_new, denom = _solve(op, g_hat, b_hat, phi_hat, s_n.R)
    phi_new = from_spectral(grid, new_hat)
    step = s_n.step_index + 1
    _check_finite(phi_new, step)

    d_hat = new_hat - phi_hat
    dR = R_new - s_n.R
    second_diff = new_hat - 2 * phi_hat + prev_hat
    mu_hat = (
        0.5 * op.mu_linear * (new_hat + phi_hat)
        + p.S * grid.ksq * second_diff
        + 0.5 * (R_new + s_n.R) * b_hat
    )
    dropped = 0.5 * p.S * spectral_norm_sq(grid, second_diff, np.sqrt(grid.ksq))
    residual = _residual(op, d_hat, mu_hat, dR, b_hat)
    report = _report(op, step, phi_new, new_hat, R_new, mu_hat, residual, denom, d_hat, dropped)
    return State(grid, phi_new, R_new, step, p.dt), report


def bootstrap_second_order(s0: State, p: PfcParams) -> tuple[State, StepReport]:
    """First level of a second-order run, computed with one first-order step."""
    return step_first_order(s0, p)


Observer = Callable[[State, StepReport], None]


def run(
    s0: State,
    p: PfcParams,
    scheme: Scheme,
    n_steps: int,
    hooks: Iterable[Observer] = (),
    prev: State | None = None,
) -> tuple[State, list[StepReport]]:
    """Advance ``n_steps`` steps and return the final state with per-step reports.

    For the second-order scheme, ``prev`` is the level before ``s0``; without it
    the first step is a first-order bootstrap step.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if scheme not in ("first", "second"):
        raise ValueError(f"unknown scheme {scheme!r}")
    hooks = list(hooks)
    reports: list[StepReport] = []
    state = replace(s0, dt=p.dt)
    for _ in range(n_steps):
        if scheme == "first":
            new, rep = step_first_order(state, p)
        elif prev is None:
            new, rep = bootstrap_second_order(state, p)
        else:
            new, rep = step_second_order(state, prev, p)
        prev, state = state, new
        reports.append(rep)
        for hook in hooks:
            hook(state, rep)
    return state, reports


def run_with_previous(
    s0: State, p: PfcParams, scheme: Scheme, n_steps: int, hooks: Iterable[Observer] = (), prev: State | None = None
) -> tuple[State, State, list[StepReport]]:
    """Like :func:`run` but also returns the level before the final one (needed to restart)."""
    last_two: list[State] = [prev, s0]

    def keep(state: State, _rep: StepReport) -> None:
        last_two[0], last_two[1] = last_two[1], state

    final, reports = run(s0, p, scheme, n_steps, [keep, *hooks], prev=prev)
    return final, last_two[0], reports
