"""Initial conditions used by the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .spectral import Grid, interpolate_initial

PRNG_NAME = "numpy.random.Generator(PCG64)"


@dataclass(frozen=True)
class TrigIC:
    """``sin(pi x / 16) cos(pi y / 16)``."""

    kind: str = field(default="trig", init=False)


@dataclass(frozen=True)
class RandomIC:
    """Uniform nodal noise ``mean + U(-amplitude, amplitude)``."""

    mean: float = 0.06
    amplitude: float = 0.01
    kind: str = field(default="random", init=False)


@dataclass(frozen=True)
class Patch:
    cx: float
    cy: float
    width: float
    theta: float


DEFAULT_PATCHES = (
    Patch(350.0, 400.0, 40.0, -math.pi / 4),
    Patch(200.0, 200.0, 40.0, 0.0),
    Patch(600.0, 300.0, 40.0, math.pi / 4),
)


@dataclass(frozen=True)
class CrystalliteIC:
    """Perfect hexagonal crystallites in square patches on a uniform liquid."""

    phi_ave: float = 0.285
    C1: float = 0.446
    C2: float = 0.66
    patches: tuple[Patch, ...] = DEFAULT_PATCHES
    kind: str = field(default="crystallites", init=False)


InitialCondition = Union[TrigIC, RandomIC, CrystalliteIC]


def crystal_profile(x, y, theta: float, phi_ave: float, C1: float, C2: float):
    """One-mode hexagonal density in the lattice frame rotated by ``theta``."""
    xl = x * np.sin(theta) + y * np.cos(theta)
    yl = -x * np.cos(theta) + y * np.sin(theta)
    return phi_ave + C1 * (
        np.cos(C2 / np.sqrt(3) * yl) * np.cos(C2 * xl) - 0.5 * np.cos(2 * C2 / np.sqrt(3) * yl)
    )


def patch_mask(grid: Grid, patch: Patch) -> np.ndarray:
    X, Y = grid.nodes()
    half = patch.width / 2
    return (np.abs(X - patch.cx) <= half) & (np.abs(Y - patch.cy) <= half)


def build_initial(ic: InitialCondition, grid: Grid, seed: int | None = None) -> np.ndarray:
    if isinstance(ic, TrigIC):
        return interpolate_initial(lambda x, y: np.sin(np.pi * x / 16) * np.cos(np.pi * y / 16), grid)
    if isinstance(ic, RandomIC):
        if ic.amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")
        rng = np.random.default_rng(seed)
        return ic.mean + rng.uniform(-ic.amplitude, ic.amplitude, grid.shape)
    if isinstance(ic, CrystalliteIC):
        phi = np.full(grid.shape, ic.phi_ave)
        X, Y = grid.nodes()
        for patch in ic.patches:
            half = patch.width / 2
            if patch.width <= 0:
                raise ValueError(f"patch width must be positive: {patch}")
            if (
                patch.cx - half < 0 or patch.cx + half > grid.Lx
                or patch.cy - half < 0 or patch.cy + half > grid.Ly
            ):
                raise ValueError(f"patch {patch} does not fit in (0,{grid.Lx})x(0,{grid.Ly})")
            mask = patch_mask(grid, patch)
            phi[mask] = crystal_profile(X[mask], Y[mask], patch.theta, ic.phi_ave, ic.C1, ic.C2)
        return phi
    raise TypeError(f"unknown initial condition {ic!r}")


def patterned_fraction(phi: np.ndarray, phi_ave: float, threshold: float = 0.1) -> float:
    """Fraction of nodes deviating from the liquid density by more than ``threshold``."""
    return float(np.mean(np.abs(phi - phi_ave) > threshold))
