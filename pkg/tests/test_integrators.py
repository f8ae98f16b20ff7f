"""Tests for the staggered-mesh steppers and baselines."""

import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smpde.harness import smooth_random_field
from smpde.integrators import (
    BDF_ALPHA,
    BDF_BETA,
    BDF_EXTRAP,
    ArctanBranchError,
    AuxState,
    SMConfig,
    baseline_cn_imex_step,
    bdfk_sm_step,
    bootstrap,
    chi_eval,
    cn_sm_step,
    gsav_baseline_step,
    gsav_bootstrap,
    ns_bootstrap,
    ns_cn_sm_step,
    swapped_bootstrap,
    swapped_mesh_step,
    ternary_bootstrap,
    ternary_cn_sm_step,
    update_v_arctan,
    update_v_log,
)
from smpde.models import (
    AllenCahn,
    MbeNoSlope,
    NavierStokes2D,
    SeparableCosineExact,
    TernaryCahnHilliard,
    make_forcing,
)
from smpde.spectral import DiagonalSymbol, Grid2D, RealField, l2_norm, mean

GRID = Grid2D(16, 16)


@dataclass(frozen=True)
class PureDiffusion:
    """Heat flow with a constant declared energy: g = 0, K = 0."""

    energy: float = 5.0

    kind = "pure-diffusion"
    default_c0 = 1.0
    default_variant = "log"

    def linear_symbol(self, grid):
        return DiagonalSymbol(grid, grid.k2)

    def nonlinear(self, u):
        return RealField(u.grid, np.zeros(u.grid.shape))

    def energy_tot(self, u):
        return self.energy

    def dissipation(self, u):
        return 0.0

    def energy_and_dissipation(self, u):
        return self.energy, 0.0

    def variational_derivative(self, u):
        return RealField(u.grid, np.zeros(u.grid.shape))

    def rhs(self, u, forcing=None):
        from smpde.spectral import laplacian

        out = laplacian(u).values
        if forcing is not None:
            out = out + forcing.values
        return RealField(u.grid, out)


@dataclass(frozen=True)
class FrozenModel(PureDiffusion):
    """No dynamics at all: A = 0, g = 0."""

    def linear_symbol(self, grid):
        return DiagonalSymbol(grid, np.zeros(grid.shape))

    def rhs(self, u, forcing=None):
        z = np.zeros(u.grid.shape)
        if forcing is not None:
            z = z + forcing.values
        return RealField(u.grid, z)


# --- scalar auxiliary updates ------------------------------------------------------


def test_update_v_log_no_dissipation():
    assert update_v_log(3.7, 0.0, 2.0, 1.0, 123.0) == 3.7


def test_update_v_log_halving():
    assert update_v_log(1.0, 1.0, 1.0, 1.0, math.log(2.0)) == pytest.approx(0.5, rel=1e-15)


def test_update_v_log_rejects_bad_inputs():
    with pytest.raises(ValueError):
        update_v_log(-1.0, 0.0, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        update_v_log(1.0, 0.0, -1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        update_v_log(1.0, -1.0, 1.0, 1.0, 0.1)


def test_update_v_log_property_sweep():
    # 1e5 random tuples: result stays in (0, v_prev] whenever it is
    # representable; the log track handles the underflowing remainder
    rng = np.random.default_rng(2024)
    for _ in range(100_000):
        v = 10.0 ** rng.uniform(-5, 5)
        k = rng.uniform(0.0, 10.0)
        e = 10.0 ** rng.uniform(-2, 2)
        theta = 10.0 ** rng.uniform(-2, 1)
        dt = 10.0 ** rng.uniform(-6, 6)
        decrement = theta * k / e * dt
        out = update_v_log(v, k, e, theta, dt)
        assert out <= v
        if decrement < 700.0:
            assert out > 0.0


@given(
    track=st.floats(-1e12, 700.0),
    k=st.floats(0.0, 1e6),
    e=st.floats(1e-6, 1e6),
    theta=st.floats(1e-3, 1e3),
    dt=st.floats(1e-9, 1e6),
)
@settings(max_examples=300, deadline=None)
def test_log_track_monotone_and_finite(track, k, e, theta, dt):
    # the canonical representation never loses positivity: ln V stays finite
    # and non-increasing for any admissible rate, with zero tolerance
    new = track - theta * k / e * dt
    assert math.isfinite(new) or new == -math.inf
    if math.isfinite(new):
        assert new <= track


def test_update_v_arctan_no_dissipation():
    assert update_v_arctan(0.7, 0.0, 3.0, 1.0, 10.0) == pytest.approx(0.7, rel=1e-15)


def test_update_v_arctan_quarter_turn():
    # from v = 0, a rate*dt of pi/4 lands on tan(-pi/4) = -1
    out = update_v_arctan(0.0, math.pi / 4.0, 0.0, 1.0, 1.0)
    assert out == pytest.approx(-1.0, rel=1e-12)


def test_update_v_arctan_clamp():
    # drive the value from -0.2 toward -0.3; the floor C* = -0.25 wins
    rate = math.atan(-0.2) - math.atan(-0.3)
    out = update_v_arctan(-0.2, rate, 0.0, 1.0, 1.0, c_star=-0.25)
    assert out == -0.25


def test_update_v_arctan_branch_error():
    with pytest.raises(ArctanBranchError, match="smaller theta"):
        update_v_arctan(0.0, 10.0, 0.0, 1.0, 1.0)


def test_chi_all_kinds_equal_one_at_reference():
    for kind in ("chi1", "chi2", "chi3", "chi4"):
        assert chi_eval(kind, 2.5, 2.5) == 1.0


def test_chi_examples():
    assert chi_eval("chi1", 2.0, 4.0) == pytest.approx(0.5)
    assert chi_eval("chi3", 4.0 + math.pi, 4.0) == pytest.approx(-1.0)
    assert chi_eval("chi4", 2.0, 1.5) == pytest.approx(1.5)
    assert chi_eval("chi2", 3.0, 2.0, chi2_base=10.0) == pytest.approx(10.0)


def test_chi1_zero_reference_rejected():
    with pytest.raises(ValueError):
        chi_eval("chi1", 1.0, 0.0)


# --- bootstrap ---------------------------------------------------------------------


def test_bootstrap_frozen_dynamics():
    model = FrozenModel()
    u0 = RealField(GRID, np.cos(GRID.x) + 0.0 * GRID.y)
    u_bar, state = bootstrap(model, SMConfig(dt=0.25), u0)
    assert np.max(np.abs(u_bar.values - u0.values)) < 1e-14
    assert np.max(np.abs(state.u.values - u0.values)) < 1e-14
    assert state.aux.eta == 1.0


def test_bootstrap_diagonal_half_step():
    model = PureDiffusion()
    dt = 0.2
    u0 = RealField(GRID, np.cos(GRID.x) + 0.0 * GRID.y)
    u_bar, _ = bootstrap(model, SMConfig(dt=dt), u0)
    expected = np.cos(GRID.x + 0.0 * GRID.y) / (1.0 + dt / 2.0)  # |k|^2 = 1 mode
    assert np.max(np.abs(u_bar.values - expected)) < 1e-13


def test_bootstrap_half_level_is_second_order():
    # local truncation of the half-level predictor is O(dt^2): the log-log
    # slope of the error must be at least 2 (degenerate data can do better)
    grid = Grid2D(32, 32)
    model = AllenCahn(eps=0.7)
    exact = SeparableCosineExact(lambda t: math.cos(t + 0.4), lambda t: -math.sin(t + 0.4))
    forcing = make_forcing(model, exact)
    u0 = exact.field(grid, 0.0)
    dts = np.array([0.1, 0.05, 0.025])
    errs = []
    for dt in dts:
        u_bar, _ = bootstrap(model, SMConfig(dt=dt), u0, forcing)
        target = exact.field(grid, dt / 2.0)
        errs.append(l2_norm(RealField(grid, u_bar.values - target.values)))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope >= 1.9


def test_bootstrap_rejects_nonpositive_shifted_energy():
    model = PureDiffusion(energy=-3.0)
    u0 = RealField(GRID, np.cos(GRID.x) + 0.0 * GRID.y)
    with pytest.raises(ValueError, match="c0"):
        bootstrap(model, SMConfig(dt=0.1, c0=0.0), u0)


# --- CN-SM stepping ------------------------------------------------------------------


def test_cn_sm_linear_case_v_constant_eta_one():
    model = PureDiffusion()
    cfg = SMConfig(dt=0.3)
    u0 = RealField(GRID, np.cos(GRID.x) + 0.0 * GRID.y)
    _, st = bootstrap(model, cfg, u0)
    v0 = st.aux.v_half
    for _ in range(10):
        st = cn_sm_step(model, cfg, st)
        assert st.aux.eta == 1.0
        assert st.aux.v_half == v0
    # pure CN diffusion of the |k|^2 = 1 mode
    factor = ((1.0 - cfg.dt / 2.0) / (1.0 + cfg.dt / 2.0)) ** 10
    # one bootstrap step + 10 CN steps
    factor *= (1.0 - cfg.dt / 2.0) / (1.0 + cfg.dt / 2.0)
    expected = factor * (np.cos(GRID.x) + 0.0 * GRID.y)
    assert np.max(np.abs(st.u.values - expected)) < 1e-12


@pytest.mark.parametrize("dt", [1e-6, 10.0, 1e3])
def test_cn_sm_stability_across_step_sizes(dt):
    model = AllenCahn(eps=0.7)
    cfg = SMConfig(dt=dt)
    rng = np.random.default_rng(5)
    u0 = smooth_random_field(GRID, rng)
    _, st = bootstrap(model, cfg, u0)
    tracks = [st.aux.track]
    for _ in range(100):
        st = cn_sm_step(model, cfg, st)
        tracks.append(st.aux.track)
    tracks = np.array(tracks)
    assert np.all(np.isfinite(tracks))
    assert np.all(np.diff(tracks) <= 0.0)  # ln V non-increasing, zero tolerance


def test_cn_exactness_on_linear_in_time_data():
    # CN reproduces u = a(x) + t b(x) exactly when g = 0 and f is linear in t
    model = PureDiffusion()
    grid = GRID
    a = np.cos(grid.x) + 0.0 * grid.y
    b = np.sin(grid.x) + np.cos(grid.y)

    def forcing(g, t):
        # f = b + A(a + t b), A = -Lap acting on single harmonics
        return RealField(g, b + (np.cos(g.x) + 0.0 * g.y)
                         + t * (np.sin(g.x) + np.cos(g.y)))

    u0 = RealField(grid, a)
    for cn_modified in (False, True):
        cfg = SMConfig(dt=0.125, cn_modified=cn_modified)
        _, st = bootstrap(model, cfg, u0, forcing)
        for _ in range(7):
            st = cn_sm_step(model, cfg, st, forcing)
        exact = a + st.t * b
        scale = np.max(np.abs(exact))
        assert np.max(np.abs(st.u.values - exact)) <= 1e-12 * scale


def test_cn_sm_second_order_quick():
    grid = Grid2D(32, 32)
    model = AllenCahn(eps=0.7)
    exact = SeparableCosineExact.sin_time()
    forcing = make_forcing(model, exact)
    errs = []
    for dt in (0.05, 0.025):
        cfg = SMConfig(dt=dt)
        _, st = bootstrap(model, cfg, exact.field(grid, 0.0), forcing)
        while st.index < round(1.0 / dt):
            st = cn_sm_step(model, cfg, st, forcing)
        errs.append(l2_norm(RealField(grid, st.u.values - exact.field(grid, 1.0).values)))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_eta_placement_variants_agree_at_second_order():
    grid = Grid2D(32, 32)
    model = AllenCahn(eps=0.7)
    exact = SeparableCosineExact.sin_time()
    forcing = make_forcing(model, exact)
    diffs = []
    for dt in (0.05, 0.025):
        finals = []
        for placement in ("inside_g", "outside_g"):
            cfg = SMConfig(dt=dt, eta_placement=placement)
            _, st = bootstrap(model, cfg, exact.field(grid, 0.0), forcing)
            while st.index < round(0.5 / dt):
                st = cn_sm_step(model, cfg, st, forcing)
            finals.append(st.u.values)
        diffs.append(float(np.max(np.abs(finals[0] - finals[1]))))
    assert 3.0 < diffs[0] / diffs[1] < 5.0


def test_stabilized_step_runs_and_stays_monotone():
    model = AllenCahn(eps=0.7)
    cfg = SMConfig(dt=1.0, s_stab=2.0)
    rng = np.random.default_rng(8)
    _, st = bootstrap(model, cfg, smooth_random_field(GRID, rng))
    tracks = [st.aux.track]
    for _ in range(50):
        st = cn_sm_step(model, cfg, st)
        tracks.append(st.aux.track)
    assert np.all(np.diff(tracks) <= 0.0)


# --- swapped mesh -----------------------------------------------------------------------


def test_swapped_v_constant_without_dissipation():
    model = PureDiffusion()
    cfg = SMConfig(dt=0.2)
    u0 = RealField(GRID, np.cos(GRID.x) + 0.0 * GRID.y)
    st = swapped_bootstrap(model, cfg, u0)
    v0 = st.aux.v_half
    for _ in range(5):
        st = swapped_mesh_step(model, cfg, st)
        assert st.aux.v_half == v0


def test_swapped_mesh_second_order():
    grid = Grid2D(32, 32)
    model = AllenCahn(eps=0.7)
    exact = SeparableCosineExact.sin_time()
    forcing = make_forcing(model, exact)
    errs = []
    for dt in (0.05, 0.025):
        cfg = SMConfig(dt=dt)
        st = swapped_bootstrap(model, cfg, exact.field(grid, 0.0), forcing)
        for _ in range(round(1.0 / dt)):
            st = swapped_mesh_step(model, cfg, st, forcing)
        target = exact.field(grid, st.t)
        errs.append(l2_norm(RealField(grid, st.u.values - target.values)))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_swapped_monotone_at_huge_step():
    model = AllenCahn(eps=0.7)
    cfg = SMConfig(dt=10.0)
    rng = np.random.default_rng(9)
    st = swapped_bootstrap(model, cfg, smooth_random_field(GRID, rng))
    tracks = [st.aux.track]
    for _ in range(100):
        st = swapped_mesh_step(model, cfg, st)
        tracks.append(st.aux.track)
    assert np.all(np.isfinite(tracks))
    assert np.all(np.diff(tracks) <= 0.0)


# --- BDFk ------------------------------------------------------------------------------


def test_bdf_coefficient_tables():
    assert BDF_ALPHA[2] == pytest.approx(1.5)
    assert BDF_BETA[2] == (2.0, -0.5)
    assert BDF_EXTRAP[2] == (2.0, -1.0)
    assert BDF_ALPHA[3] == pytest.approx(11.0 / 6.0)
    assert BDF_BETA[3] == (3.0, -1.5, pytest.approx(1.0 / 3.0))
    assert BDF_EXTRAP[3] == (3.0, -3.0, 1.0)
    assert BDF_ALPHA[4] == pytest.approx(25.0 / 12.0)
    assert BDF_EXTRAP[4] == (4.0, -6.0, 4.0, -1.0)


def test_bdfk_insufficient_history_rejected():
    model = AllenCahn(eps=0.7)
    cfg = SMConfig(dt=0.1, bdf_order=3)
    rng = np.random.default_rng(1)
    _, st = bootstrap(model, cfg, smooth_random_field(GRID, rng))
    with pytest.raises(ValueError, match="history"):
        bdfk_sm_step(model, cfg, st)


def test_bdfk_eta_is_one_when_chi_is_one():
    # constant declared energy makes chi = (3V - V)/(2E) = 1 exactly, so the
    # correction vanishes and eta = 1 - (1 - 1)^2 = 1
    model = PureDiffusion()
    cfg = SMConfig(dt=0.2, bdf_order=2)
    u0 = RealField(GRID, np.cos(GRID.x) + 0.0 * GRID.y)
    _, st = bootstrap(model, cfg, u0)
    st = bdfk_sm_step(model, cfg, st)
    assert st.aux.eta == 1.0


def test_bdf2_and_bdf3_orders_quick():
    grid = Grid2D(32, 32)
    model = AllenCahn(eps=0.7)
    exact = SeparableCosineExact.sin_time()
    forcing = make_forcing(model, exact)
    for k, lo, hi in ((2, 3.0, 5.0), (3, 6.5, 9.5)):
        cfg_err = []
        for dt in (0.025, 0.0125):
            cfg = SMConfig(dt=dt, bdf_order=k)
            _, st = bootstrap(model, cfg, exact.field(grid, 0.0), forcing)
            while st.index < round(1.0 / dt):
                if st.index < k - 1 or len(st.history) < k - 1:
                    st = cn_sm_step(model, cfg, st, forcing)
                else:
                    st = bdfk_sm_step(model, cfg, st, forcing)
            cfg_err.append(l2_norm(RealField(grid, st.u.values - exact.field(grid, 1.0).values)))
        assert lo < cfg_err[0] / cfg_err[1] < hi


# --- baselines ----------------------------------------------------------------------------


def test_cn_imex_matches_cn_sm_bit_for_bit_when_eta_is_one():
    # with a constant declared energy chi1 evaluates to exactly 1.0 and the
    # two steppers must produce identical floating-point trajectories
    model = PureDiffusion()
    cfg = SMConfig(dt=0.17)
    u0 = RealField(GRID, np.cos(GRID.x) * np.cos(GRID.y))
    _, st_sm = bootstrap(model, cfg, u0)
    st_base = st_sm
    for _ in range(6):
        st_sm = cn_sm_step(model, cfg, st_sm)
        st_base = baseline_cn_imex_step(model, cfg, st_base)
        assert np.array_equal(st_sm.u.values, st_base.u.values)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gsav_baseline_stable_and_r_non_increasing():
    model = AllenCahn(eps=0.7)
    cfg = SMConfig(dt=1.0)
    rng = np.random.default_rng(12)
    st = gsav_bootstrap(model, cfg, smooth_random_field(GRID, rng, amplitude=0.1))
    rs = [st.aux.track]
    for _ in range(100):
        st = gsav_baseline_step(model, cfg, st)
        rs.append(st.aux.track)
    rs = np.array(rs)
    assert np.all(np.isfinite(rs))
    assert np.all(np.diff(rs) <= 0.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cn_imex_baseline_stable_at_unit_step():
    # the plain semi-implicit scheme needs the standard ~2/eps^2 stabilization
    # to survive dt = 1 on Allen-Cahn; u must settle toward the wells
    model = AllenCahn(eps=0.7)
    cfg = SMConfig(dt=1.0, s_stab=2.0 / 0.49)
    rng = np.random.default_rng(13)
    from smpde.integrators import StepState

    st = StepState(t=0.0, index=0, u=smooth_random_field(GRID, rng, amplitude=0.1),
                   history=(), aux=None)
    for _ in range(100):
        st = baseline_cn_imex_step(model, cfg, st)
    assert np.all(np.isfinite(st.u.values))
    assert np.abs(st.u.values).max() < 1.1


# --- Navier-Stokes stepper -------------------------------------------------------------------


def test_ns_pure_stokes_mode_decay():
    # without advection each mode decays by the CN factor per step
    model = NavierStokes2D(nu=0.1, advection=False)
    cfg = SMConfig(dt=0.2)
    grid = GRID
    u0 = (
        RealField.from_function(grid, lambda x, y: -np.sin(y) + 0.0 * x),
        RealField.from_function(grid, lambda x, y: np.sin(x) + 0.0 * y),
    )
    _, st = ns_bootstrap(model, cfg, u0)
    n_extra = 9
    for _ in range(n_extra):
        st = ns_cn_sm_step(model, cfg, st)
    # |k|^2 = 1 for both initial harmonics; bootstrap's first step is also CN
    rho = (1.0 - 0.5 * model.nu * cfg.dt) / (1.0 + 0.5 * model.nu * cfg.dt)
    factor = rho ** (n_extra + 1)
    assert np.max(np.abs(st.u[0].values - factor * u0[0].values)) < 1e-12
    assert np.max(np.abs(st.u[1].values - factor * u0[1].values)) < 1e-12


def test_ns_step_keeps_divergence_free():
    from smpde.spectral import divergence

    model = NavierStokes2D(nu=0.01)
    cfg = SMConfig(dt=0.01)
    grid = Grid2D(32, 32, 1.0, 1.0)
    rng = np.random.default_rng(3)
    psi = smooth_random_field(grid, rng)
    from smpde.spectral import gradient

    py, px = gradient(psi)
    u0 = (py, RealField(grid, -px.values))
    _, st = ns_bootstrap(model, cfg, u0)
    for _ in range(5):
        st = ns_cn_sm_step(model, cfg, st)
        assert np.max(np.abs(divergence(*st.u).values)) < 1e-10


def test_ns_pressure_recovery_on_request():
    model = NavierStokes2D(nu=0.01)
    cfg = SMConfig(dt=0.01)
    grid = Grid2D(32, 32, 1.0, 1.0)
    rng = np.random.default_rng(4)
    psi = smooth_random_field(grid, rng)
    from smpde.spectral import gradient

    py, px = gradient(psi)
    _, st = ns_bootstrap(model, cfg, (py, RealField(grid, -px.values)))
    st = ns_cn_sm_step(model, cfg, st, want_pressure=True)
    assert st.extras is not None and st.extras["pressure"] is not None
    assert st.extras["pressure"].grid == grid


# --- ternary stepper ------------------------------------------------------------------------


def _ternary_model():
    return TernaryCahnHilliard(1.0, 1.0, 1.0, lam=7.0, mobility=1e-3, eps=0.1)


def test_ternary_constant_state_is_stationary():
    model = _ternary_model()
    cfg = SMConfig(dt=0.5)
    phi0 = (RealField.full(GRID, 0.3), RealField.full(GRID, 0.4))
    _, st = ternary_bootstrap(model, cfg, phi0)
    v0 = st.aux.v_half
    for _ in range(5):
        st = ternary_cn_sm_step(model, cfg, st)
    assert np.max(np.abs(st.u[0].values - 0.3)) < 1e-12
    assert np.max(np.abs(st.u[1].values - 0.4)) < 1e-12
    assert st.aux.v_half == pytest.approx(v0, rel=1e-14)


def test_ternary_mean_conservation_long_run():
    model = _ternary_model()
    cfg = SMConfig(dt=1e-3)
    rng = np.random.default_rng(21)
    phi0 = (
        RealField(GRID, 0.3 + 0.1 * smooth_random_field(GRID, rng).values),
        RealField(GRID, 0.3 + 0.1 * smooth_random_field(GRID, rng).values),
    )
    m1, m2 = mean(phi0[0]), mean(phi0[1])
    _, st = ternary_bootstrap(model, cfg, phi0)
    for _ in range(1000):
        st = ternary_cn_sm_step(model, cfg, st)
    assert abs(mean(st.u[0]) - m1) <= 1e-12
    assert abs(mean(st.u[1]) - m2) <= 1e-12


def test_ternary_monotone_v_at_large_step():
    model = _ternary_model()
    cfg = SMConfig(dt=10.0)
    rng = np.random.default_rng(22)
    phi0 = (
        RealField(GRID, 0.3 + 0.1 * smooth_random_field(GRID, rng).values),
        RealField(GRID, 0.3 + 0.1 * smooth_random_field(GRID, rng).values),
    )
    _, st = ternary_bootstrap(model, cfg, phi0)
    tracks = [st.aux.track]
    for _ in range(50):
        st = ternary_cn_sm_step(model, cfg, st)
        tracks.append(st.aux.track)
    assert np.all(np.diff(tracks) <= 0.0)


# --- eta consistency ---------------------------------------------------------------------------


def test_eta_deviation_shrinks_second_order():
    grid = Grid2D(32, 32)
    model = AllenCahn(eps=0.7)
    exact = SeparableCosineExact.sin_time()
    forcing = make_forcing(model, exact)
    devs = []
    for dt in (0.05, 0.025):
        cfg = SMConfig(dt=dt)
        _, st = bootstrap(model, cfg, exact.field(grid, 0.0), forcing)
        worst = 0.0
        while st.index < round(1.0 / dt):
            st = cn_sm_step(model, cfg, st, forcing)
            worst = max(worst, abs(st.aux.eta - 1.0))
        devs.append(worst)
    assert 3.0 < devs[0] / devs[1] < 5.0


def test_mbe_arctan_accuracy_quick():
    grid = Grid2D(32, 32)
    model = MbeNoSlope(mobility=0.1, eps=0.1)
    exact = SeparableCosineExact.exp_decay()
    forcing = make_forcing(model, exact)
    errs = []
    for dt in (0.05, 0.025):
        cfg = SMConfig(dt=dt, variant="arctan")
        _, st = bootstrap(model, cfg, exact.field(grid, 0.0), forcing)
        while st.index < round(1.0 / dt):
            st = cn_sm_step(model, cfg, st, forcing)
        errs.append(l2_norm(RealField(grid, st.u.values - exact.field(grid, 1.0).values)))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_config_validation():
    with pytest.raises(ValueError):
        SMConfig(dt=-0.1)
    with pytest.raises(ValueError):
        SMConfig(dt=0.1, theta=0.0)
    with pytest.raises(ValueError):
        SMConfig(dt=0.1, variant="nope")
    with pytest.raises(ValueError):
        SMConfig(dt=0.1, chi_kind="chi9")
    with pytest.raises(ValueError):
        SMConfig(dt=0.1, bdf_order=5)
    with pytest.raises(ValueError):
        SMConfig(dt=0.1, s_stab=-1.0)
