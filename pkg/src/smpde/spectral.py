"""Periodic-grid fields, Fourier spectral operators, and diagonal solves.

Everything here works on uniform periodic grids over [0, lx) x [0, ly).
The transform convention is numpy's: unnormalized forward FFT, normalized
inverse, so the (0, 0) coefficient of a constant field c equals c * nx * ny.
Quadrature is the rectangle rule, which is spectrally exact for trigonometric
polynomials on periodic grids.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid2D",
    "NonFiniteFieldError",
    "RealField",
    "SpectralField",
    "DiagonalSymbol",
    "to_spectral",
    "to_real",
    "apply_symbol",
    "gradient",
    "divergence",
    "vorticity",
    "laplacian",
    "integral",
    "inner",
    "l2_norm",
    "mean",
    "spectral_l2sq",
    "spectral_grad_l2sq",
    "solve_shifted",
    "dealias_two_thirds",
    "leray_project",
    "leray_pressure",
    "write_snapshot",
    "read_snapshot",
]

SNAPSHOT_MAGIC = b"SMF1"


class NonFiniteFieldError(ValueError):
    """A field carried NaN or infinity; mid-run this signals blow-up."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid with precomputed wavenumber arrays.

    Axis 0 of every field array is the x direction, axis 1 is y (row = x
    index).  Grid sizes must be even and at least 4; the Nyquist mode of
    first-derivative symbols is zeroed (standard odd-derivative convention).
    """

    nx: int
    ny: int
    lx: float = 2.0 * np.pi
    ly: float = 2.0 * np.pi

    def __post_init__(self) -> None:
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if int(n) != n or n < 4 or n % 2 != 0:
                raise ValueError(f"{name} must be an even integer >= 4, got {n}")
        for name, length in (("lx", self.lx), ("ly", self.ly)):
            if not np.isfinite(length) or length <= 0:
                raise ValueError(f"{name} must be positive, got {length}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @cached_property
    def x(self) -> np.ndarray:
        """x coordinates, shape (nx, 1), broadcastable over fields."""
        return (np.arange(self.nx) * self.dx)[:, None]

    @cached_property
    def y(self) -> np.ndarray:
        """y coordinates, shape (1, ny)."""
        return (np.arange(self.ny) * self.dy)[None, :]

    @cached_property
    def kx(self) -> np.ndarray:
        """Radian wavenumbers along x, shape (nx, 1). Nyquist included."""
        return (2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx))[:, None]

    @cached_property
    def ky(self) -> np.ndarray:
        return (2.0 * np.pi * np.fft.fftfreq(self.ny, d=self.dy))[None, :]

    @cached_property
    def kx_diff(self) -> np.ndarray:
        """First-derivative wavenumbers along x: Nyquist mode set to 0."""
        k = self.kx.copy()
        k[self.nx // 2, 0] = 0.0
        return k

    @cached_property
    def ky_diff(self) -> np.ndarray:
        k = self.ky.copy()
        k[0, self.ny // 2] = 0.0
        return k

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2, shape (nx, ny); the symbol of the negative Laplacian."""
        return self.kx**2 + self.ky**2

    @cached_property
    def k2_diff(self) -> np.ndarray:
        """|k|^2 built from the first-derivative wavenumbers (Nyquist zeroed)."""
        return self.kx_diff**2 + self.ky_diff**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask keeping integer modes |m| <= n/3 (2/3 rule)."""
        mx = np.rint(np.fft.fftfreq(self.nx) * self.nx).astype(int)[:, None]
        my = np.rint(np.fft.fftfreq(self.ny) * self.ny).astype(int)[None, :]
        return (np.abs(mx) <= self.nx / 3.0) & (np.abs(my) <= self.ny / 3.0)


def _check_same_grid(*objs) -> Grid2D:
    grid = objs[0].grid
    for o in objs[1:]:
        if o.grid != grid:
            raise ValueError(f"grid mismatch: {o.grid} vs {grid}")
    return grid


@dataclass(frozen=True)
class RealField:
    """Real samples of a scalar field on a periodic grid."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteFieldError("field contains non-finite samples")
        object.__setattr__(self, "values", vals)

    @staticmethod
    def full(grid: Grid2D, value: float) -> "RealField":
        return RealField(grid, np.full(grid.shape, float(value)))

    @staticmethod
    def from_function(grid: Grid2D, fn) -> "RealField":
        """Sample fn(x, y) on the grid; fn receives broadcastable coordinate arrays."""
        return RealField(grid, np.broadcast_to(fn(grid.x, grid.y), grid.shape).astype(np.float64))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients (numpy fft2 layout, unnormalized forward)."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coeff shape {c.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class DiagonalSymbol:
    """Per-mode real multiplier a(k) >= 0 of a positive semi-definite operator."""

    grid: Grid2D
    symbol: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.symbol, dtype=np.float64)
        if s.shape != self.grid.shape:
            raise ValueError(f"symbol shape {s.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("symbol contains non-finite entries")
        if np.any(s < 0.0):
            raise ValueError("symbol must be nonnegative for a positive semi-definite operator")
        object.__setattr__(self, "symbol", s)


def to_spectral(f: RealField) -> SpectralField:
    return SpectralField(f.grid, np.fft.fft2(f.values))


def to_real(F: SpectralField) -> RealField:
    return RealField(F.grid, np.fft.ifft2(F.coeffs).real)


def apply_symbol(F: SpectralField, s: DiagonalSymbol) -> SpectralField:
    _check_same_grid(F, s)
    return SpectralField(F.grid, F.coeffs * s.symbol)


def gradient(f: RealField) -> tuple[RealField, RealField]:
    """Spectral gradient (df/dx, df/dy)."""
    g = f.grid
    fh = np.fft.fft2(f.values)
    fx = np.fft.ifft2(1j * g.kx_diff * fh).real
    fy = np.fft.ifft2(1j * g.ky_diff * fh).real
    return RealField(g, fx), RealField(g, fy)


def divergence(fx: RealField, fy: RealField) -> RealField:
    g = _check_same_grid(fx, fy)
    d = (np.fft.ifft2(1j * g.kx_diff * np.fft.fft2(fx.values)).real
         + np.fft.ifft2(1j * g.ky_diff * np.fft.fft2(fy.values)).real)
    return RealField(g, d)


def vorticity(u1: RealField, u2: RealField) -> RealField:
    """Scalar curl d(u2)/dx - d(u1)/dy of a 2D velocity field."""
    g = _check_same_grid(u1, u2)
    w = (np.fft.ifft2(1j * g.kx_diff * np.fft.fft2(u2.values)).real
         - np.fft.ifft2(1j * g.ky_diff * np.fft.fft2(u1.values)).real)
    return RealField(g, w)


def laplacian(f: RealField) -> RealField:
    g = f.grid
    return RealField(g, np.fft.ifft2(-g.k2 * np.fft.fft2(f.values)).real)


def integral(f: RealField) -> float:
    """Rectangle-rule integral over the periodic domain."""
    return float(f.grid.cell_area * f.values.sum())


def inner(f: RealField, g: RealField) -> float:
    grid = _check_same_grid(f, g)
    return float(grid.cell_area * np.vdot(f.values, g.values).real)


def l2_norm(f: RealField) -> float:
    return float(np.sqrt(f.grid.cell_area) * np.linalg.norm(f.values))


def mean(f: RealField) -> float:
    return float(f.values.mean())


def spectral_l2sq(F: SpectralField) -> float:
    """||f||_{L^2}^2 from coefficients (Parseval with this transform convention)."""
    g = F.grid
    return float(g.area / (g.nx * g.ny) ** 2 * np.vdot(F.coeffs, F.coeffs).real)


def spectral_grad_l2sq(F: SpectralField) -> float:
    """||grad f||_{L^2}^2 from coefficients, k^2-weighted Parseval sum."""
    g = F.grid
    return float(g.area / (g.nx * g.ny) ** 2 * np.sum(g.k2 * np.abs(F.coeffs) ** 2))


def solve_shifted(a: float, b: float, s: DiagonalSymbol, rhs: SpectralField) -> SpectralField:
    """Solve (a + b*A) u = rhs per mode, where A has diagonal symbol s.

    Raises ValueError if a + b*s(k) <= 0 for any mode (singular or indefinite
    shift), which also guards the k = 0 mode of pure-derivative operators.
    """
    _check_same_grid(s, rhs)
    denom = a + b * s.symbol
    if denom.min() <= 0.0:
        raise ValueError(
            f"singular mode in shifted solve: min(a + b*s) = {denom.min():g} <= 0"
        )
    return SpectralField(rhs.grid, rhs.coeffs / denom)


def dealias_two_thirds(F: SpectralField) -> SpectralField:
    """Zero all modes with |m_x| > nx/3 or |m_y| > ny/3."""
    return SpectralField(F.grid, F.coeffs * F.grid.dealias_mask)


def leray_project(F1: SpectralField, F2: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Remove the gradient component per mode: P(k) = I - k k^T / |k|^2.

    Uses the first-derivative wavenumbers (Nyquist zeroed) so the projector is
    conjugate-symmetric and commutes with the real transforms.  Modes whose
    reduced wavenumber vanishes (the mean and pure-Nyquist corners) are left
    untouched: they carry no resolvable gradient part.
    """
    g = _check_same_grid(F1, F2)
    k2 = np.where(g.k2_diff == 0.0, 1.0, g.k2_diff)
    kdotu = (g.kx_diff * F1.coeffs + g.ky_diff * F2.coeffs) / k2
    p1 = F1.coeffs - g.kx_diff * kdotu
    p2 = F2.coeffs - g.ky_diff * kdotu
    return SpectralField(g, p1), SpectralField(g, p2)


def leray_pressure(F1: SpectralField, F2: SpectralField) -> SpectralField:
    """Scalar potential p with grad p equal to the component leray_project removes."""
    g = _check_same_grid(F1, F2)
    k2 = np.where(g.k2_diff == 0.0, 1.0, g.k2_diff)
    ph = (g.kx_diff * F1.coeffs + g.ky_diff * F2.coeffs) / (1j * k2)
    ph[g.k2_diff == 0.0] = 0.0
    return SpectralField(g, ph)


def write_snapshot(path, f: RealField) -> None:
    """Write the binary field snapshot: magic, u32 nx, u32 ny, f64 lx, f64 ly,
    then nx*ny f64 samples in row-major (x-major) order, all little-endian."""
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<IIdd", g.nx, g.ny, g.lx, g.ly))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path) -> RealField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"not a field snapshot (bad magic {magic!r})")
        nx, ny, lx, ly = struct.unpack("<IIdd", fh.read(24))
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8")
        if data.size != nx * ny:
            raise ValueError("truncated snapshot file")
    return RealField(Grid2D(nx, ny, lx, ly), data.reshape(nx, ny).copy())
