"""Periodic grid, Fourier transforms and diagonal spectral operators.

Fields are real ``(N, N)`` float arrays indexed ``f[i, j] = f(x_i, y_j)``.
Spectral coefficients use the real-to-complex layout of :func:`numpy.fft.rfft2`
(shape ``(N, N//2 + 1)``) and are normalized so that the ``(0, 0)`` coefficient
is the mean of the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridMismatchError(ValueError):
    """Raised when a field does not live on the grid it is used with."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic discretization of ``(0, Lx) x (0, Ly)`` with ``N`` modes per direction."""

    Lx: float
    Ly: float
    N: int
    xi: np.ndarray = field(init=False, repr=False, compare=False)
    eta: np.ndarray = field(init=False, repr=False, compare=False)
    # squared wavenumber magnitude |k|^2 on the reduced (rfft) layout
    ksq: np.ndarray = field(init=False, repr=False, compare=False)
    # multiplicity of each reduced mode in the full spectrum (1 or 2)
    weight: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise ValueError(f"N must be an integer, got {self.N!r}")
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be even and >= 4, got {self.N}")
        if not (np.isfinite(self.Lx) and np.isfinite(self.Ly)) or self.Lx <= 0 or self.Ly <= 0:
            raise ValueError(f"domain lengths must be positive, got Lx={self.Lx}, Ly={self.Ly}")
        N = int(self.N)
        xi = 2 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / self.Lx
        eta = 2 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / self.Ly
        eta_r = 2 * np.pi * np.fft.rfftfreq(N, d=1.0 / N) / self.Ly
        ksq = xi[:, None] ** 2 + eta_r[None, :] ** 2
        weight = np.full(ksq.shape, 2.0)
        weight[:, 0] = 1.0
        weight[:, -1] = 1.0
        for name, arr in (("xi", xi), ("eta", eta), ("ksq", ksq), ("weight", weight)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "Lx", float(self.Lx))
        object.__setattr__(self, "Ly", float(self.Ly))

    @property
    def hx(self) -> float:
        return self.Lx / self.N

    @property
    def hy(self) -> float:
        return self.Ly / self.N

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.N)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.N, self.N // 2 + 1)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X, Y)`` with ``X[i, j] = i*hx`` and ``Y[i, j] = j*hy``."""
        x = np.arange(self.N) * self.hx
        y = np.arange(self.N) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise GridMismatchError(f"field of shape {f.shape} does not match grid {self.shape}")
        return f

    def check_spectral(self, c: np.ndarray) -> np.ndarray:
        if c.shape != self.spectral_shape:
            raise GridMismatchError(
                f"coefficients of shape {c.shape} do not match grid {self.spectral_shape}"
            )
        return c


def make_grid(Lx: float, Ly: float, N: int) -> Grid:
    return Grid(Lx, Ly, N)


def to_spectral(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Fourier coefficients of ``f``; the constant mode equals the mean of ``f``."""
    f = grid.check(f)
    return np.fft.rfft2(f) / (grid.N * grid.N)


def from_spectral(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    coeffs = grid.check_spectral(coeffs)
    return np.fft.irfft2(coeffs * (grid.N * grid.N), s=grid.shape)


def full_spectrum(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Coefficients on the full ``(N, N)`` mode set, in FFT index order."""
    return np.fft.fft2(grid.check(f)) / (grid.N * grid.N)


def symbol_laplacian(grid: Grid) -> np.ndarray:
    return -grid.ksq


def symbol_sh(grid: Grid, beta: float) -> np.ndarray:
    """Symbol of the Swift-Hohenberg operator ``(Laplacian + beta)^2``."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return (beta - grid.ksq) ** 2


def apply_symbol(grid: Grid, sigma: np.ndarray | float, f: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim and sigma.shape != grid.spectral_shape:
        raise GridMismatchError(f"symbol of shape {sigma.shape} does not match grid")
    return from_spectral(grid, sigma * to_spectral(grid, f))


def spectral_sum(grid: Grid, density: np.ndarray) -> float:
    """``sum over the full mode set`` of a density given on the reduced layout."""
    return float(np.sum(grid.weight * density))


def spectral_inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """L2 inner product of two real fields given by their coefficients (Parseval)."""
    return grid.area * spectral_sum(grid, (a.conj() * b).real)


def spectral_norm_sq(grid: Grid, a: np.ndarray, sigma: np.ndarray | float = 1.0) -> float:
    """``||Op f||^2`` for the diagonal operator with symbol ``sigma``, from coefficients ``a``."""
    return grid.area * spectral_sum(grid, np.abs(sigma) ** 2 * np.abs(a) ** 2)


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Trapezoidal L2 inner product."""
    f, g = grid.check(f), grid.check(g)
    return float(grid.hx * grid.hy * np.sum(f * g))


def norm_l2(grid: Grid, f: np.ndarray) -> float:
    # scaled so that tiny nonzero fields do not underflow to a zero norm
    f = grid.check(f)
    peak = float(np.max(np.abs(f)))
    if peak == 0.0 or not np.isfinite(peak):
        return peak
    return peak * float(np.sqrt(grid.hx * grid.hy * np.sum((f / peak) ** 2)))


def mean(grid: Grid, f: np.ndarray) -> float:
    f = grid.check(f)
    return float(np.mean(f))


def grad_norm_sq(grid: Grid, f: np.ndarray) -> float:
    """``||grad f||^2`` in Parseval form, ``|Omega| * sum |k|^2 |f_k|^2``."""
    c = to_spectral(grid, f)
    return grid.area * spectral_sum(grid, grid.ksq * np.abs(c) ** 2)


def dealias_mask(grid: Grid) -> np.ndarray:
    """Two-thirds rule: keep modes with ``|k|, |l| < N/3`` in index units."""
    k = np.abs(np.fft.fftfreq(grid.N, d=1.0 / grid.N))
    l = np.fft.rfftfreq(grid.N, d=1.0 / grid.N)
    cut = grid.N / 3
    return (k[:, None] < cut) & (l[None, :] < cut)


def restrict(fine: Grid, coarse: Grid, f: np.ndarray) -> np.ndarray:
    """Project a fine-grid field onto the coarse grid's modes and sample it there.

    The coarse Nyquist row/column is dropped from the fine spectrum, so the result
    is the exact L2 projection onto the coarse mode set without the ambiguous
    Nyquist terms.
    """
    if (fine.Lx, fine.Ly) != (coarse.Lx, coarse.Ly) or fine.N < coarse.N:
        raise GridMismatchError("restriction needs a finer grid on the same domain")
    c = np.fft.fft2(fine.check(f)) / fine.N**2
    n, h = coarse.N, coarse.N // 2
    idx = np.r_[0:h, fine.N - h + 1 : fine.N]
    out = np.zeros((n, n), dtype=complex)
    tgt = np.r_[0:h, n - h + 1 : n]
    out[np.ix_(tgt, tgt)] = c[np.ix_(idx, idx)]
    return np.fft.ifft2(out * n * n).real


def interpolate_initial(expr: Callable[[np.ndarray, np.ndarray], np.ndarray], grid: Grid) -> np.ndarray:
    """Sample ``expr(x, y)`` at the grid nodes."""
    X, Y = grid.nodes()
    values = np.broadcast_to(np.asarray(expr(X, Y), dtype=float), grid.shape).copy()
    if not np.all(np.isfinite(values)):
        raise ValueError("initial condition is not finite at every node")
    return values
