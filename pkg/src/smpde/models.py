"""Concrete dissipative systems: u_t + A u + g(u) = 0 with dE_tot/dt = -K(u).

Each model supplies the diagonal symbol of its positive semi-definite linear
operator A, the nonlinear term g evaluated pseudo-spectrally (pointwise
nonlinearities in physical space, derivatives in spectral space), the total
energy E_tot, the dissipation rate K >= 0, a variational derivative used by
consistency checks, and the right-hand side -A u - g(u) + f for explicit
reference integration.

Scalar phase-field models (Allen-Cahn, Cahn-Hilliard, no-slope MBE) act on a
single RealField.  The incompressible Navier-Stokes model acts on a velocity
pair (u1, u2) and the ternary Cahn-Hilliard model on a phase pair
(phi1, phi2); phi3 = 1 - phi1 - phi2 is eliminated by the volume constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    DiagonalSymbol,
    Grid2D,
    RealField,
    SpectralField,
    dealias_two_thirds,
    gradient,
    l2_norm,
    laplacian,
    leray_project,
    spectral_grad_l2sq,
    to_real,
    to_spectral,
)

__all__ = [
    "AllenCahn",
    "CahnHilliard",
    "MbeNoSlope",
    "NavierStokes2D",
    "TernaryCahnHilliard",
    "SeparableCosineExact",
    "NsTaylorExact",
    "manufactured_forcing",
    "make_forcing",
]


def _maybe_dealias(f: RealField, on: bool) -> RealField:
    if not on:
        return f
    return to_real(dealias_two_thirds(to_spectral(f)))


@dataclass(frozen=True)
class AllenCahn:
    """L^2 gradient flow of the double-well energy, A = -Laplacian.

    g(u) = (u^3 - u)/eps^2, E_tot = int 1/2 |grad u|^2 + (u^2 - 1)^2/(4 eps^2),
    K = ||-Lap u + g(u)||^2.
    """

    eps: float
    dealias: bool = False

    kind = "allen-cahn"
    default_c0 = 1.0
    default_variant = "log"

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def linear_symbol(self, grid: Grid2D) -> DiagonalSymbol:
        return DiagonalSymbol(grid, grid.k2)

    def nonlinear(self, u: RealField) -> RealField:
        g = RealField(u.grid, (u.values**3 - u.values) / self.eps**2)
        return _maybe_dealias(g, self.dealias)

    def energy_tot(self, u: RealField) -> float:
        uh = to_spectral(u)
        well = (u.values**2 - 1.0) ** 2 / (4.0 * self.eps**2)
        return 0.5 * spectral_grad_l2sq(uh) + float(u.grid.cell_area * well.sum())

    def variational_derivative(self, u: RealField) -> RealField:
        lap = laplacian(u)
        return RealField(u.grid, -lap.values + (u.values**3 - u.values) / self.eps**2)

    def dissipation(self, u: RealField) -> float:
        return l2_norm(self.variational_derivative(u)) ** 2

    def energy_and_dissipation(self, u: RealField) -> tuple[float, float]:
        return self.energy_tot(u), self.dissipation(u)

    def rhs(self, u: RealField, forcing: RealField | None = None) -> RealField:
        out = laplacian(u).values - self.nonlinear(u).values  # -A u - g, A = -Lap
        if forcing is not None:
            out = out + forcing.values
        return RealField(u.grid, out)


@dataclass(frozen=True)
class CahnHilliard:
    """Conserved double-well dynamics, A = Lap^2, g(u) = -Lap((u^3 - u)/eps^2).

    K = ||grad mu||^2 with chemical potential mu = -Lap u + (u^3 - u)/eps^2.
    The spatial mean of u is conserved by the semi-flow.
    """

    eps: float
    dealias: bool = False

    kind = "cahn-hilliard"
    default_c0 = 1.0
    default_variant = "log"

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def linear_symbol(self, grid: Grid2D) -> DiagonalSymbol:
        return DiagonalSymbol(grid, grid.k2**2)

    def _well_derivative(self, u: RealField) -> RealField:
        w = RealField(u.grid, (u.values**3 - u.values) / self.eps**2)
        return _maybe_dealias(w, self.dealias)

    def nonlinear(self, u: RealField) -> RealField:
        w = self._well_derivative(u)
        return RealField(u.grid, -laplacian(w).values)

    def energy_tot(self, u: RealField) -> float:
        uh = to_spectral(u)
        well = (u.values**2 - 1.0) ** 2 / (4.0 * self.eps**2)
        return 0.5 * spectral_grad_l2sq(uh) + float(u.grid.cell_area * well.sum())

    def variational_derivative(self, u: RealField) -> RealField:
        """Chemical potential mu; the H^-1 flow is u_t = Lap mu."""
        return RealField(u.grid, -laplacian(u).values + (u.values**3 - u.values) / self.eps**2)

    def dissipation(self, u: RealField) -> float:
        mu = self.variational_derivative(u)
        return spectral_grad_l2sq(to_spectral(mu))

    def energy_and_dissipation(self, u: RealField) -> tuple[float, float]:
        return self.energy_tot(u), self.dissipation(u)

    def rhs(self, u: RealField, forcing: RealField | None = None) -> RealField:
        g = u.grid
        uh = np.fft.fft2(u.values)
        out = np.fft.ifft2(-(g.k2**2) * uh).real - self.nonlinear(u).values
        if forcing is not None:
            out = out + forcing.values
        return RealField(g, out)


@dataclass(frozen=True)
class MbeNoSlope:
    """Molecular beam epitaxy without slope selection, A = M eps^2 Lap^2.

    Ehrlich-Schwoebel energy E_tot = int (eps^2/2) |Lap phi|^2 - ln(1+|grad phi|^2)/2,
    unbounded below, hence the arctangent auxiliary-variable variant by default.
    Nonlinear force F'(phi) = div(grad phi / (1 + |grad phi|^2)); the evolution
    nonlinearity is g(phi) = M F'(phi) and K = M ||eps^2 Lap^2 phi + F'(phi)||^2.
    """

    mobility: float
    eps: float
    dealias: bool = False

    kind = "mbe-no-slope"
    default_c0 = 0.0
    default_variant = "arctan"

    def __post_init__(self) -> None:
        if self.mobility <= 0 or self.eps <= 0:
            raise ValueError("mobility and eps must be positive")

    def linear_symbol(self, grid: Grid2D) -> DiagonalSymbol:
        return DiagonalSymbol(grid, self.mobility * self.eps**2 * grid.k2**2)

    def nonlinear_force(self, phi: RealField) -> RealField:
        """F'(phi) = div(grad phi / (1 + |grad phi|^2))."""
        g = phi.grid
        px, py = gradient(phi)
        denom = 1.0 + px.values**2 + py.values**2
        vx = _maybe_dealias(RealField(g, px.values / denom), self.dealias)
        vy = _maybe_dealias(RealField(g, py.values / denom), self.dealias)
        div = (np.fft.ifft2(1j * g.kx_diff * np.fft.fft2(vx.values)).real
               + np.fft.ifft2(1j * g.ky_diff * np.fft.fft2(vy.values)).real)
        return RealField(g, div)

    def nonlinear(self, phi: RealField) -> RealField:
        return RealField(phi.grid, self.mobility * self.nonlinear_force(phi).values)

    def energy_tot(self, phi: RealField) -> float:
        g = phi.grid
        ph = to_spectral(phi)
        lap_sq = float(g.area / (g.nx * g.ny) ** 2 * np.sum(g.k2**2 * np.abs(ph.coeffs) ** 2))
        px, py = gradient(phi)
        logterm = -0.5 * np.log1p(px.values**2 + py.values**2)
        return 0.5 * self.eps**2 * lap_sq + float(g.cell_area * logterm.sum())

    def variational_derivative(self, phi: RealField) -> RealField:
        g = phi.grid
        biharm = np.fft.ifft2(g.k2**2 * np.fft.fft2(phi.values)).real
        return RealField(g, self.eps**2 * biharm + self.nonlinear_force(phi).values)

    def dissipation(self, phi: RealField) -> float:
        return self.mobility * l2_norm(self.variational_derivative(phi)) ** 2

    def energy_and_dissipation(self, phi: RealField) -> tuple[float, float]:
        g = phi.grid
        ph = np.fft.fft2(phi.values)
        lap_sq = float(g.area / (g.nx * g.ny) ** 2 * np.sum(g.k2**2 * np.abs(ph) ** 2))
        px = np.fft.ifft2(1j * g.kx_diff * ph).real
        py = np.fft.ifft2(1j * g.ky_diff * ph).real
        grad_sq = px**2 + py**2
        e_tot = 0.5 * self.eps**2 * lap_sq - 0.5 * float(g.cell_area * np.log1p(grad_sq).sum())
        denom = 1.0 + grad_sq
        fx = np.fft.fft2(px / denom)
        fy = np.fft.fft2(py / denom)
        force_h = 1j * g.kx_diff * fx + 1j * g.ky_diff * fy
        grad_flow_h = self.eps**2 * g.k2**2 * ph + force_h
        k = self.mobility * float(g.area / (g.nx * g.ny) ** 2 * np.sum(np.abs(grad_flow_h) ** 2))
        return e_tot, k

    def rhs(self, phi: RealField, forcing: RealField | None = None) -> RealField:
        out = -self.mobility * self.variational_derivative(phi).values
        if forcing is not None:
            out = out + forcing.values
        return RealField(phi.grid, out)


@dataclass(frozen=True)
class NavierStokes2D:
    """Incompressible Navier-Stokes on the periodic box; state is (u1, u2).

    E = 1/2 ||u||^2, K = nu ||grad u||^2, nonlinearity (u . grad) u.  The
    pressure is not part of the state; incompressibility is enforced by the
    per-mode Leray projection.  Set advection=False for a pure Stokes flow.
    """

    nu: float
    advection: bool = True
    dealias: bool = False

    kind = "navier-stokes"
    default_c0 = 1.0
    default_variant = "log"

    def __post_init__(self) -> None:
        if self.nu <= 0:
            raise ValueError("nu must be positive")

    def linear_symbol(self, grid: Grid2D) -> DiagonalSymbol:
        return DiagonalSymbol(grid, self.nu * grid.k2)

    def nonlinear(self, state: tuple[RealField, RealField]) -> tuple[RealField, RealField]:
        u1, u2 = state
        g = u1.grid
        if not self.advection:
            z = RealField(g, np.zeros(g.shape))
            return z, z
        u1x, u1y = gradient(u1)
        u2x, u2y = gradient(u2)
        a1 = RealField(g, u1.values * u1x.values + u2.values * u1y.values)
        a2 = RealField(g, u1.values * u2x.values + u2.values * u2y.values)
        return _maybe_dealias(a1, self.dealias), _maybe_dealias(a2, self.dealias)

    def energy_tot(self, state: tuple[RealField, RealField]) -> float:
        u1, u2 = state
        return 0.5 * (l2_norm(u1) ** 2 + l2_norm(u2) ** 2)

    def dissipation(self, state: tuple[RealField, RealField]) -> float:
        u1, u2 = state
        return self.nu * (spectral_grad_l2sq(to_spectral(u1)) + spectral_grad_l2sq(to_spectral(u2)))

    def energy_and_dissipation(self, state) -> tuple[float, float]:
        u1, u2 = state
        g = u1.grid
        f1, f2 = np.fft.fft2(u1.values), np.fft.fft2(u2.values)
        norm = g.area / (g.nx * g.ny) ** 2
        e = 0.5 * norm * float(np.vdot(f1, f1).real + np.vdot(f2, f2).real)
        k = self.nu * norm * float(np.sum(g.k2 * (np.abs(f1) ** 2 + np.abs(f2) ** 2)))
        return e, k

    def variational_derivative(self, state):
        return state  # dE/du of the kinetic energy is the velocity itself

    def rhs(self, state, forcing=None) -> tuple[RealField, RealField]:
        """Leray-projected right-hand side nu Lap u - P[(u.grad)u - f]."""
        u1, u2 = state
        g = u1.grid
        a1, a2 = self.nonlinear(state)
        r1 = -a1.values
        r2 = -a2.values
        if forcing is not None:
            r1 = r1 + forcing[0].values
            r2 = r2 + forcing[1].values
        P1, P2 = leray_project(SpectralField(g, np.fft.fft2(r1)), SpectralField(g, np.fft.fft2(r2)))
        out1 = np.fft.ifft2(P1.coeffs - self.nu * g.k2 * np.fft.fft2(u1.values)).real
        out2 = np.fft.ifft2(P2.coeffs - self.nu * g.k2 * np.fft.fft2(u2.values)).real
        return RealField(g, out1), RealField(g, out2)


@dataclass(frozen=True)
class TernaryCahnHilliard:
    """Three-phase Cahn-Hilliard system with phi3 eliminated by the constraint.

    Spreading coefficients Sigma_l derive from the pairwise surface tensions;
    construction requires Sigma_1, Sigma_2 > 0 and
    Sigma_1 Sigma_2 + Sigma_1 Sigma_3 + Sigma_2 Sigma_3 > 0 so the coupled
    implicit mode matrices stay invertible.  K uses the chemical potentials:
    K = M (||grad mu1||^2 / Sigma_1 + ||grad mu2||^2 / Sigma_2).
    """

    sigma12: float
    sigma13: float
    sigma23: float
    lam: float
    mobility: float
    eps: float
    dealias: bool = False

    kind = "ternary-cahn-hilliard"
    default_c0 = 1.0
    default_variant = "log"

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.mobility <= 0 or self.eps <= 0:
            raise ValueError("mobility and eps must be positive")
        s1, s2, s3 = self.spreading
        if s1 <= 0 or s2 <= 0:
            raise ValueError(f"Sigma_1={s1:g}, Sigma_2={s2:g} must be positive")
        if s1 * s2 + s1 * s3 + s2 * s3 <= 0:
            raise ValueError("surface tensions violate the well-posedness condition")

    @property
    def spreading(self) -> tuple[float, float, float]:
        s1 = self.sigma12 + self.sigma13 - self.sigma23
        s2 = self.sigma12 + self.sigma23 - self.sigma13
        s3 = self.sigma13 + self.sigma23 - self.sigma12
        return s1, s2, s3

    def linear_symbol(self, grid: Grid2D) -> DiagonalSymbol:
        # phi1 diagonal block of the coupled operator; the stepper inverts the
        # full per-mode 2x2 block, this is only a stiffness-scale proxy
        s1, _, s3 = self.spreading
        return DiagonalSymbol(grid, self.mobility / s1 * 0.75 * self.eps**2 * (s1 + s3) * grid.k2**2)

    def bulk_potential(self, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
        s1, s2, s3 = self.spreading
        s = phi1 + phi2
        return (0.5 * s1 * phi1**2 * (1.0 - phi1) ** 2
                + 0.5 * s2 * phi2**2 * (1.0 - phi2) ** 2
                + 0.5 * s3 * s**2 * (1.0 - s) ** 2
                + 3.0 * self.lam * phi1**2 * phi2**2 * (1.0 - s) ** 2)

    def bulk_derivatives(self, phi1: np.ndarray, phi2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s1, s2, s3 = self.spreading
        s = phi1 + phi2
        common = s3 * s * (1.0 - s) * (1.0 - 2.0 * s)
        d1 = (s1 * phi1 * (1.0 - phi1) * (1.0 - 2.0 * phi1) + common
              + 6.0 * self.lam * (phi1 * phi2**2 * (1.0 - s) ** 2 - phi1**2 * phi2**2 * (1.0 - s)))
        d2 = (s2 * phi2 * (1.0 - phi2) * (1.0 - 2.0 * phi2) + common
              + 6.0 * self.lam * (phi1**2 * phi2 * (1.0 - s) ** 2 - phi1**2 * phi2**2 * (1.0 - s)))
        return d1, d2

    def nonlinear(self, state: tuple[RealField, RealField]) -> tuple[RealField, RealField]:
        """Conservative nonlinearity -M/Sigma_l Lap(12 dF/dphi_l), zero mean."""
        phi1, phi2 = state
        g = phi1.grid
        s1, s2, _ = self.spreading
        d1, d2 = self.bulk_derivatives(phi1.values, phi2.values)
        f1 = _maybe_dealias(RealField(g, 12.0 * d1), self.dealias)
        f2 = _maybe_dealias(RealField(g, 12.0 * d2), self.dealias)
        n1 = self.mobility / s1 * np.fft.ifft2(g.k2 * np.fft.fft2(f1.values)).real
        n2 = self.mobility / s2 * np.fft.ifft2(g.k2 * np.fft.fft2(f2.values)).real
        return RealField(g, n1), RealField(g, n2)

    def chemical_potentials(self, state) -> tuple[RealField, RealField]:
        phi1, phi2 = state
        g = phi1.grid
        s1, s2, s3 = self.spreading
        l1 = laplacian(phi1).values
        l2 = laplacian(phi2).values
        d1, d2 = self.bulk_derivatives(phi1.values, phi2.values)
        mu1 = -0.75 * self.eps**2 * ((s1 + s3) * l1 + s3 * l2) + 12.0 * d1
        mu2 = -0.75 * self.eps**2 * (s3 * l1 + (s2 + s3) * l2) + 12.0 * d2
        return RealField(g, mu1), RealField(g, mu2)

    def energy_tot(self, state) -> float:
        phi1, phi2 = state
        g = phi1.grid
        s1, s2, s3 = self.spreading
        f1, f2 = to_spectral(phi1), to_spectral(phi2)
        fsum = SpectralField(g, f1.coeffs + f2.coeffs)
        grad_part = 0.375 * self.eps**2 * (
            s1 * spectral_grad_l2sq(f1) + s2 * spectral_grad_l2sq(f2) + s3 * spectral_grad_l2sq(fsum)
        )
        bulk = 12.0 * float(g.cell_area * self.bulk_potential(phi1.values, phi2.values).sum())
        return grad_part + bulk

    def variational_derivative(self, state):
        return self.chemical_potentials(state)

    def dissipation(self, state) -> float:
        s1, s2, _ = self.spreading
        mu1, mu2 = self.chemical_potentials(state)
        return self.mobility * (spectral_grad_l2sq(to_spectral(mu1)) / s1
                                + spectral_grad_l2sq(to_spectral(mu2)) / s2)

    def energy_and_dissipation(self, state) -> tuple[float, float]:
        phi1, phi2 = state
        g = phi1.grid
        s1, s2, s3 = self.spreading
        norm = g.area / (g.nx * g.ny) ** 2
        f1 = np.fft.fft2(phi1.values)
        f2 = np.fft.fft2(phi2.values)
        d1, d2 = self.bulk_derivatives(phi1.values, phi2.values)
        grad_part = 0.375 * self.eps**2 * norm * float(np.sum(
            g.k2 * (s1 * np.abs(f1) ** 2 + s2 * np.abs(f2) ** 2 + s3 * np.abs(f1 + f2) ** 2)))
        bulk = 12.0 * float(g.cell_area * self.bulk_potential(phi1.values, phi2.values).sum())
        mu1_h = 0.75 * self.eps**2 * ((s1 + s3) * g.k2 * f1 + s3 * g.k2 * f2) + 12.0 * np.fft.fft2(d1)
        mu2_h = 0.75 * self.eps**2 * (s3 * g.k2 * f1 + (s2 + s3) * g.k2 * f2) + 12.0 * np.fft.fft2(d2)
        k = self.mobility * norm * float(np.sum(
            g.k2 * (np.abs(mu1_h) ** 2 / s1 + np.abs(mu2_h) ** 2 / s2)))
        return grad_part + bulk, k

    def rhs(self, state, forcing=None) -> tuple[RealField, RealField]:
        """phi_l_t = M/Sigma_l Lap mu_l (+ f_l)."""
        phi1, phi2 = state
        g = phi1.grid
        s1, s2, _ = self.spreading
        mu1, mu2 = self.chemical_potentials(state)
        r1 = self.mobility / s1 * laplacian(mu1).values
        r2 = self.mobility / s2 * laplacian(mu2).values
        if forcing is not None:
            r1 = r1 + forcing[0].values
            r2 = r2 + forcing[1].values
        return RealField(g, r1), RealField(g, r2)


class SeparableCosineExact:
    """Analytic solution u(x, y, t) = amp(t) cos(x) cos(y) for scalar models."""

    def __init__(self, amp, damp):
        self.amp = amp
        self.damp = damp

    def field(self, grid: Grid2D, t: float) -> RealField:
        return RealField(grid, self.amp(t) * np.cos(grid.x) * np.cos(grid.y))

    def dfield_dt(self, grid: Grid2D, t: float) -> RealField:
        return RealField(grid, self.damp(t) * np.cos(grid.x) * np.cos(grid.y))

    @staticmethod
    def sin_time() -> "SeparableCosineExact":
        return SeparableCosineExact(math.sin, math.cos)

    @staticmethod
    def exp_decay() -> "SeparableCosineExact":
        return SeparableCosineExact(lambda t: math.exp(-t), lambda t: -math.exp(-t))


class NsTaylorExact:
    """Swirling manufactured Navier-Stokes solution on the unit periodic box.

    u = pi a(t) (sin(2 pi x) cos(2 pi y), -cos(2 pi x) sin(2 pi y)),
    p = a(t) cos(2 pi x) sin(2 pi y); the velocity is divergence-free.
    The time profile a(t) is sin(t) by default; the "linear" profile a(t) = t
    exercises the exactness of trapezoidal stepping on linear-in-time data.
    """

    def __init__(self, time_profile: str = "sin"):
        if time_profile == "sin":
            self.amp, self.damp = math.sin, math.cos
        elif time_profile == "linear":
            self.amp, self.damp = (lambda t: t), (lambda t: 1.0)
        else:
            raise ValueError(f"unknown time profile {time_profile!r}")

    def _trig(self, grid: Grid2D):
        tx = 2.0 * np.pi * grid.x
        ty = 2.0 * np.pi * grid.y
        return np.sin(tx), np.cos(tx), np.sin(ty), np.cos(ty)

    def velocity(self, grid: Grid2D, t: float) -> tuple[RealField, RealField]:
        sx, cx, sy, cy = self._trig(grid)
        a = np.pi * self.amp(t)
        return RealField(grid, a * sx * cy), RealField(grid, -a * cx * sy)

    def dvelocity_dt(self, grid: Grid2D, t: float) -> tuple[RealField, RealField]:
        sx, cx, sy, cy = self._trig(grid)
        a = np.pi * self.damp(t)
        return RealField(grid, a * sx * cy), RealField(grid, -a * cx * sy)

    def pressure_gradient(self, grid: Grid2D, t: float) -> tuple[RealField, RealField]:
        sx, cx, sy, cy = self._trig(grid)
        a = self.amp(t) * 2.0 * np.pi
        return RealField(grid, -a * sx * sy), RealField(grid, a * cx * cy)


def manufactured_forcing(model, exact, grid: Grid2D, t: float):
    """Forcing f = u_t + A u + g(u) (+ grad p for Navier-Stokes) so that the
    analytic solution solves the forced system exactly on the grid."""
    if isinstance(model, NavierStokes2D):
        u = exact.velocity(grid, t)
        ut = exact.dvelocity_dt(grid, t)
        a1, a2 = model.nonlinear(u)
        visc1 = model.nu * laplacian(u[0]).values
        visc2 = model.nu * laplacian(u[1]).values
        gp1, gp2 = exact.pressure_gradient(grid, t)
        return (
            RealField(grid, ut[0].values - visc1 + a1.values + gp1.values),
            RealField(grid, ut[1].values - visc2 + a2.values + gp2.values),
        )
    u = exact.field(grid, t)
    ut = exact.dfield_dt(grid, t)
    symbol = model.linear_symbol(grid)
    au = np.fft.ifft2(symbol.symbol * np.fft.fft2(u.values)).real
    g = model.nonlinear(u)
    return RealField(grid, ut.values + au + g.values)


def make_forcing(model, exact):
    """Bind a manufactured solution into a forcing callable f(grid, t)."""
    def forcing(grid: Grid2D, t: float):
        return manufactured_forcing(model, exact, grid, t)
    return forcing


def forcing_work(model, state, f_value) -> float:
    """Rate of energy input by the forcing, <dE/du, f>.

    Along the forced flow dE_tot/dt = -K(u) + W, so the auxiliary-variable
    updates subtract W from the dissipation drain; W = 0 without forcing and
    the monotone decay law is recovered.
    """
    from .spectral import inner

    mu = model.variational_derivative(state)
    if isinstance(state, tuple):
        return inner(mu[0], f_value[0]) + inner(mu[1], f_value[1])
    return inner(mu, f_value)
