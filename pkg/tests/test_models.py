"""Tests for the concrete dissipative models."""

import math

import numpy as np
import pytest

from smpde.models import (
    AllenCahn,
    CahnHilliard,
    MbeNoSlope,
    NavierStokes2D,
    NsTaylorExact,
    SeparableCosineExact,
    TernaryCahnHilliard,
    manufactured_forcing,
)
from smpde.spectral import Grid2D, RealField, divergence, inner, integral, l2_norm, mean

GRID = Grid2D(32, 32)

# frozen analytic oracles for u = cos(x) cos(y) on [0, 2pi)^2, eps = 0.7,
# from closed-form trig moments / 30-digit quadrature
AC_K_COSCOS = 15.1486712282859470
AC_E_COSCOS = 22.7731050530237879
CH_K_COSCOS = 55.9887325052218280
MBE_E_COSCOS_EPS01 = -7.52297427785472489


def coscos(grid=GRID, amp=1.0):
    return RealField(grid, amp * np.cos(grid.x) * np.cos(grid.y))


def smooth_random(grid, rng, amplitude=0.3, kmax=4):
    """Random band-limited real field, modes |m| <= kmax, given peak scale."""
    coeffs = np.zeros(grid.shape, dtype=complex)
    for mx in range(-kmax, kmax + 1):
        for my in range(-kmax, kmax + 1):
            c = rng.standard_normal() + 1j * rng.standard_normal()
            coeffs[mx % grid.nx, my % grid.ny] += c
            coeffs[(-mx) % grid.nx, (-my) % grid.ny] += np.conj(c)
    vals = np.fft.ifft2(coeffs).real
    peak = np.max(np.abs(vals))
    return RealField(grid, amplitude * vals / peak)


def all_models():
    return [
        AllenCahn(eps=0.7),
        CahnHilliard(eps=0.7),
        MbeNoSlope(mobility=0.1, eps=0.1),
        NavierStokes2D(nu=0.05),
        TernaryCahnHilliard(1.0, 1.0, 1.0, lam=7.0, mobility=1e-3, eps=0.1),
    ]


def random_state(model, rng, grid=GRID):
    if isinstance(model, NavierStokes2D):
        psi = smooth_random(grid, rng)
        from smpde.spectral import gradient

        px, py = gradient(psi)  # (d/dx, d/dy)
        return (RealField(grid, py.values), RealField(grid, -px.values))
    if isinstance(model, TernaryCahnHilliard):
        f1 = smooth_random(grid, rng, amplitude=0.2)
        f2 = smooth_random(grid, rng, amplitude=0.2)
        return (RealField(grid, 0.3 + f1.values), RealField(grid, 0.3 + f2.values))
    return smooth_random(grid, rng)


# --- pointwise nonlinearity values -----------------------------------------


def test_allen_cahn_nonlinear_at_well_minimum():
    g = AllenCahn(eps=0.7).nonlinear(RealField.full(GRID, 1.0))
    assert np.max(np.abs(g.values)) < 1e-13


def test_allen_cahn_nonlinear_constant_two():
    g = AllenCahn(eps=0.7).nonlinear(RealField.full(GRID, 2.0))
    assert g.values[3, 5] == pytest.approx((8.0 - 2.0) / 0.49)  # 12.244897959...


def test_mbe_force_of_constant_is_zero():
    f = MbeNoSlope(mobility=1.0, eps=0.1).nonlinear_force(RealField.full(GRID, 0.7))
    assert np.max(np.abs(f.values)) < 1e-13


# --- energies ----------------------------------------------------------------


def test_allen_cahn_energy_of_zero_field():
    e = AllenCahn(eps=0.7).energy_tot(RealField.full(GRID, 0.0))
    assert e == pytest.approx(4.0 * np.pi**2 / (4.0 * 0.49), rel=1e-13)  # 20.142050


def test_allen_cahn_energy_of_minimum():
    assert AllenCahn(eps=0.7).energy_tot(RealField.full(GRID, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_allen_cahn_energy_coscos_oracle():
    assert AllenCahn(eps=0.7).energy_tot(coscos()) == pytest.approx(AC_E_COSCOS, rel=1e-12)


def test_navier_stokes_energy_analytic():
    u = (
        RealField.from_function(GRID, lambda x, y: -np.sin(y) + 0.0 * x),
        RealField.from_function(GRID, lambda x, y: np.sin(x) + 0.0 * y),
    )
    assert NavierStokes2D(nu=1.0).energy_tot(u) == pytest.approx(2.0 * np.pi**2, rel=1e-13)


def test_mbe_energy_coscos_oracle():
    e = MbeNoSlope(mobility=1.0, eps=0.1).energy_tot(coscos())
    assert e == pytest.approx(MBE_E_COSCOS_EPS01, rel=1e-10)


# --- dissipation rates --------------------------------------------------------


def test_dissipation_zero_at_equilibrium():
    assert AllenCahn(eps=0.7).dissipation(RealField.full(GRID, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_navier_stokes_dissipation_analytic():
    u = (
        RealField.from_function(GRID, lambda x, y: -np.sin(y) + 0.0 * x),
        RealField.from_function(GRID, lambda x, y: np.sin(x) + 0.0 * y),
    )
    assert NavierStokes2D(nu=1.0).dissipation(u) == pytest.approx(4.0 * np.pi**2, rel=1e-12)


def test_allen_cahn_dissipation_coscos_oracle():
    assert AllenCahn(eps=0.7).dissipation(coscos()) == pytest.approx(AC_K_COSCOS, rel=1e-12)


def test_cahn_hilliard_dissipation_coscos_oracle():
    assert CahnHilliard(eps=0.7).dissipation(coscos()) == pytest.approx(CH_K_COSCOS, rel=1e-12)


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.kind)
def test_dissipation_nonnegative_random_sweep(model):
    rng = np.random.default_rng(42)
    grid = Grid2D(8, 8)
    for _ in range(10_000):
        state = random_state(model, rng, grid)
        assert model.dissipation(state) >= 0.0


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.kind)
def test_combined_energy_dissipation_matches_separate(model):
    rng = np.random.default_rng(1)
    state = random_state(model, rng)
    e, k = model.energy_and_dissipation(state)
    assert e == pytest.approx(model.energy_tot(state), rel=1e-11)
    assert k == pytest.approx(model.dissipation(state), rel=1e-11)


# --- variational consistency ---------------------------------------------------


@pytest.mark.parametrize(
    "model",
    [AllenCahn(eps=0.7), CahnHilliard(eps=0.7), MbeNoSlope(mobility=0.1, eps=0.2)],
    ids=lambda m: m.kind,
)
def test_energy_gradient_chain_rule(model):
    # central difference of E_tot along a random direction must match the
    # inner product with the variational derivative at second order in h
    rng = np.random.default_rng(3)
    u = smooth_random(GRID, rng)
    v = smooth_random(GRID, rng, amplitude=0.2)
    mu = model.variational_derivative(u)
    exact = inner(mu, v)
    hs = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
    errs = []
    for h in hs:
        up = RealField(GRID, u.values + h * v.values)
        um = RealField(GRID, u.values - h * v.values)
        fd = (model.energy_tot(up) - model.energy_tot(um)) / (2.0 * h)
        errs.append(abs(fd - exact))
    slope = np.polyfit(np.log(hs), np.log(np.maximum(errs, 1e-300)), 1)[0]
    assert slope >= 1.9


def test_ternary_energy_gradient_chain_rule():
    model = TernaryCahnHilliard(3.0, 1.0, 1.0, lam=7.0, mobility=1.0, eps=0.1)
    rng = np.random.default_rng(4)
    state = random_state(model, rng)
    v1 = smooth_random(GRID, rng, amplitude=0.1)
    v2 = smooth_random(GRID, rng, amplitude=0.1)
    mu1, mu2 = model.variational_derivative(state)
    exact = inner(mu1, v1) + inner(mu2, v2)
    hs = np.array([1e-2, 5e-3, 2.5e-3])
    errs = []
    for h in hs:
        up = (RealField(GRID, state[0].values + h * v1.values), RealField(GRID, state[1].values + h * v2.values))
        um = (RealField(GRID, state[0].values - h * v1.values), RealField(GRID, state[1].values - h * v2.values))
        errs.append(abs((model.energy_tot(up) - model.energy_tot(um)) / (2.0 * h) - exact))
    slope = np.polyfit(np.log(hs), np.log(np.maximum(errs, 1e-300)), 1)[0]
    assert slope >= 1.9


# --- structure of the nonlinear terms ------------------------------------------


def test_cahn_hilliard_nonlinear_has_zero_mean():
    rng = np.random.default_rng(5)
    u = smooth_random(GRID, rng)
    g = CahnHilliard(eps=0.7).nonlinear(u)
    assert abs(mean(g)) <= 1e-12


def test_ternary_nonlinear_has_zero_mean():
    model = TernaryCahnHilliard(1.0, 1.0, 1.0, lam=7.0, mobility=1e-3, eps=0.1)
    rng = np.random.default_rng(6)
    state = random_state(model, rng)
    n1, n2 = model.nonlinear(state)
    assert abs(mean(n1)) <= 1e-12
    assert abs(mean(n2)) <= 1e-12


def test_navier_stokes_advection_skew_symmetry():
    model = NavierStokes2D(nu=1.0)
    rng = np.random.default_rng(7)
    u = random_state(model, rng)  # divergence-free by construction
    assert np.max(np.abs(divergence(*u).values)) < 1e-10
    a1, a2 = model.nonlinear(u)
    assert abs(inner(a1, u[0]) + inner(a2, u[1])) <= 1e-10


# --- exact solutions and manufactured forcing -----------------------------------


def test_forcing_of_zero_solution_vanishes():
    exact = SeparableCosineExact(lambda t: 0.0, lambda t: 0.0)
    f = manufactured_forcing(AllenCahn(eps=0.7), exact, GRID, 0.3)
    assert np.max(np.abs(f.values)) < 1e-13


def test_forcing_at_time_zero_is_time_derivative():
    # u_e = cos x cos y sin t: at t=0 the field vanishes, so A u_e and g(u_e)
    # drop and only the time derivative cos(0) cos x cos y survives
    exact = SeparableCosineExact.sin_time()
    f = manufactured_forcing(AllenCahn(eps=0.7), exact, GRID, 0.0)
    expected = np.cos(GRID.x) * np.cos(GRID.y)
    assert np.max(np.abs(f.values - expected)) < 1e-12


def test_ns_manufactured_forcing_residual():
    # hand-derived analytic terms, independent of the package operators
    grid = Grid2D(64, 64, 1.0, 1.0)
    model = NavierStokes2D(nu=1.0)
    exact = NsTaylorExact()
    t = np.pi / 2.0
    f1, f2 = manufactured_forcing(model, exact, grid, t)
    x, y = grid.x, grid.y
    sx, cx = np.sin(2 * np.pi * x), np.cos(2 * np.pi * x)
    sy, cy = np.sin(2 * np.pi * y), np.cos(2 * np.pi * y)
    st, ct = math.sin(t), math.cos(t)
    u1 = np.pi * st * sx * cy
    u2 = -np.pi * st * cx * sy
    du1 = np.pi * ct * sx * cy
    du2 = -np.pi * ct * cx * sy
    lap1 = -8.0 * np.pi**2 * u1
    lap2 = -8.0 * np.pi**2 * u2
    adv1 = u1 * (np.pi * st * 2 * np.pi * cx * cy) + u2 * (-np.pi * st * 2 * np.pi * sx * sy)
    adv2 = u1 * (np.pi * st * 2 * np.pi * sx * sy) + u2 * (-np.pi * st * 2 * np.pi * cx * cy)
    gp1 = -2 * np.pi * st * sx * sy
    gp2 = 2 * np.pi * st * cx * cy
    r1 = f1.values - (du1 - model.nu * lap1 + adv1 + gp1)
    r2 = f2.values - (du2 - model.nu * lap2 + adv2 + gp2)
    assert max(np.max(np.abs(r1)), np.max(np.abs(r2))) <= 1e-10


def test_ns_exact_velocity_divergence_free():
    grid = Grid2D(32, 32, 1.0, 1.0)
    u = NsTaylorExact().velocity(grid, 0.7)
    assert np.max(np.abs(divergence(*u).values)) < 1e-10


# --- energy law consistency against explicit reference ---------------------------


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.kind)
def test_energy_law_matches_dissipation(model):
    # |[E(u(dt)) - E(u)]/dt + K| -> 0 as dt -> 0 along the unforced semi-flow,
    # integrated with the classical explicit 4-stage reference
    from smpde.harness import rk4_reference

    rng = np.random.default_rng(11)
    grid = Grid2D(16, 16)
    state = random_state(model, rng, grid)
    errs = []
    dts = [4e-6, 2e-6, 1e-6]
    for dt in dts:
        half = rk4_reference(model, state, dt / 2.0, dt / 2.0)
        full = rk4_reference(model, state, dt / 2.0, dt)
        de = (model.energy_tot(full) - model.energy_tot(state)) / dt
        errs.append(abs(de + model.dissipation(half)))
    # the difference quotient hits its round-off floor near 1e-9; all that
    # matters is that the defect is far below the dissipation scale
    scale = abs(model.dissipation(state)) + 1.0
    assert errs[-1] / scale < 1e-5


def test_model_parameter_validation():
    with pytest.raises(ValueError):
        AllenCahn(eps=-1.0)
    with pytest.raises(ValueError):
        NavierStokes2D(nu=0.0)
    with pytest.raises(ValueError):
        TernaryCahnHilliard(1.0, 1.0, 5.0, lam=7.0, mobility=1.0, eps=0.1)  # Sigma_1 < 0
    with pytest.raises(ValueError):
        TernaryCahnHilliard(1.0, 1.0, 1.0, lam=-1.0, mobility=1.0, eps=0.1)
