"""Phase field crystal free energy and its scalar-auxiliary-variable split."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import Grid, spectral_norm_sq, to_spectral


class EnergyError(ValueError):
    """Raised when the shifted nonlinear energy ``E1`` is not positive."""


@dataclass(frozen=True)
class PfcParams:
    """Physical and scheme constants.

    ``C0=None`` selects the default shift ``|Omega|(eps+lam)^2/4 + 1``, which keeps
    ``E1`` positive for every field; see :func:`resolve_c0`.
    """

    M: float = 1.0
    beta: float = 1.0
    eps: float = 0.025
    lam: float = 0.01
    S: float = 0.0
    dt: float = 0.1
    C0: float | None = None
    dealias: bool = False

    def __post_init__(self) -> None:
        if not self.M > 0:
            raise ValueError(f"mobility M must be positive, got {self.M}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0 < self.eps < self.beta**2:
            raise ValueError(f"need 0 < eps < beta^2, got eps={self.eps}, beta={self.beta}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.S >= 0:
            raise ValueError(f"stabilization S must be >= 0, got {self.S}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.C0 is not None and not self.C0 >= 0:
            raise ValueError(f"C0 must be >= 0, got {self.C0}")

    def replace(self, **changes) -> "PfcParams":
        return PfcParams(**{**asdict(self), **changes})


def resolve_c0(p: PfcParams, grid: Grid) -> float:
    if p.C0 is not None:
        return float(p.C0)
    return grid.area * (p.eps + p.lam) ** 2 / 4 + 1.0


@dataclass(frozen=True)
class EnergyBreakdown:
    original: float
    modified: float
    modified_tilde: float
    quadratic: float
    e1: float
    r_squared: float


def potential(phi: np.ndarray, p: PfcParams) -> np.ndarray:
    """Pointwise ``F(phi) = phi^4/4 - (eps+lam)/2 phi^2``."""
    return 0.25 * phi**4 - 0.5 * (p.eps + p.lam) * phi**2


def f_prime(phi: np.ndarray, p: PfcParams) -> np.ndarray:
    # product form keeps the map exactly odd in floating point
    return phi * (phi * phi - (p.eps + p.lam))


def e1(phi: np.ndarray, grid: Grid, p: PfcParams) -> float:
    phi = grid.check(phi)
    value = grid.hx * grid.hy * float(np.sum(potential(phi, p))) + resolve_c0(p, grid)
    if not value > 0:
        raise EnergyError(f"E1 = {value} is not positive; increase C0")
    return value


def r_init(phi0: np.ndarray, grid: Grid, p: PfcParams) -> float:
    return float(np.sqrt(e1(phi0, grid, p)))


def sav_gap(R: float, energy1: float) -> float:
    """``|R^2 - E1|`` in factored form, exactly zero when ``R = sqrt(E1)``."""
    root = math.sqrt(energy1)
    return abs(R - root) * abs(R + root)


def quadratic_energy(phi_hat: np.ndarray, grid: Grid, p: PfcParams) -> float:
    """``1/2 ||(Laplacian + beta) phi||^2 + lam/2 ||phi||^2`` from coefficients."""
    sym = p.beta - grid.ksq
    return 0.5 * spectral_norm_sq(grid, phi_hat, sym) + 0.5 * p.lam * spectral_norm_sq(grid, phi_hat)


def energy_original(phi: np.ndarray, grid: Grid, p: PfcParams) -> float:
    """Swift-Hohenberg free energy; quadratic part spectrally, quartic part by quadrature."""
    phi = grid.check(phi)
    phi_hat = to_spectral(grid, phi)
    quad = 0.5 * spectral_norm_sq(grid, phi_hat, p.beta - grid.ksq)
    local = grid.hx * grid.hy * float(np.sum(0.25 * phi**4 - 0.5 * p.eps * phi**2))
    return quad + local


def energy_modified(
    phi: np.ndarray,
    R: float,
    grid: Grid,
    p: PfcParams,
    increment: np.ndarray | None = None,
) -> EnergyBreakdown:
    """All energies of a state.

    ``increment`` is ``phi^{n+1} - phi^n``; it only enters ``modified_tilde``,
    which adds ``S ||grad increment||^2``.
    """
    phi = grid.check(phi)
    phi_hat = to_spectral(grid, phi)
    quad = quadratic_energy(phi_hat, grid, p)
    c0 = resolve_c0(p, grid)
    modified = quad + R * R - c0
    tilde = modified
    if increment is not None:
        d_hat = to_spectral(grid, increment)
        tilde += p.S * spectral_norm_sq(grid, d_hat, np.sqrt(grid.ksq))
    return EnergyBreakdown(
        original=energy_original(phi, grid, p),
        modified=modified,
        modified_tilde=tilde,
        quadratic=quad,
        e1=e1(phi, grid, p),
        r_squared=R * R,
    )
