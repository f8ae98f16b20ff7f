"""Staggered-mesh auxiliary-variable time steppers and comparison baselines.

The schemes discretize the PDE state u at integer time levels and a scalar
auxiliary energy variable V at half-integer levels.  V substitutes the
(scaled, shifted) total energy; its staggered update is exactly monotone for
every time step size, which is the unconditional-stability guarantee:

  log variant     V^{n+1/2} = exp(-theta K(u^n) / (theta E_tot(u^n) + C0) dt) V^{n-1/2}
  arctan variant  atan V^{n+1/2} = atan V^{n-1/2} - dt theta K(u^n) / (theta^2 E_tot(u^n)^2 + 1)

A control factor eta = chi(V), equal to 1 at the continuous level, multiplies
the explicitly extrapolated nonlinearity.  The state update is a linear
constant-coefficient (IMEX Crank-Nicolson or BDFk) solve, diagonal per Fourier
mode, so each step costs the same as a plain semi-implicit scheme.

Auxiliary-variable bookkeeping is kept in the monotone representation
(ln V, or atan V) so positivity and monotonicity are structural: they survive
arbitrarily large dissipation rates that would underflow V itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .spectral import (
    RealField,
    SpectralField,
    leray_project,
    leray_pressure,
    to_real,
    to_spectral,
)

__all__ = [
    "ArctanBranchError",
    "AuxState",
    "BlowUpError",
    "SMConfig",
    "StepState",
    "BDF_ALPHA",
    "BDF_BETA",
    "BDF_EXTRAP",
    "update_v_log",
    "update_v_arctan",
    "chi_eval",
    "bootstrap",
    "cn_sm_step",
    "swapped_bootstrap",
    "swapped_mesh_step",
    "bdfk_sm_step",
    "baseline_cn_imex_step",
    "gsav_bootstrap",
    "gsav_baseline_step",
    "ns_bootstrap",
    "ns_cn_sm_step",
    "ternary_bootstrap",
    "ternary_cn_sm_step",
]


class BlowUpError(RuntimeError):
    """A field became non-finite; carries the offending step and last finite state."""

    def __init__(self, step_index: int, t: float, last_state=None):
        super().__init__(f"solution blew up at step {step_index} (t = {t:g})")
        self.step_index = step_index
        self.t = t
        self.last_state = last_state


class ArctanBranchError(ValueError):
    """The arctan update left the principal branch (-pi/2, pi/2)."""

    def __init__(self, argument: float):
        super().__init__(
            f"arctan-variant update reached {argument:.6g}, outside (-pi/2, pi/2); "
            "the energy drain rate is too large for this scaling, rerun with a "
            "smaller theta"
        )
        self.argument = argument


# BDFk tables: alpha_k u^{n+1} - beta_k(u^n, ...) over dt, and the explicit
# extrapolation coefficients for u(t^{n+1}); beta/extrap listed newest first.
BDF_ALPHA = {2: 1.5, 3: 11.0 / 6.0, 4: 25.0 / 12.0}
BDF_BETA = {2: (2.0, -0.5), 3: (3.0, -1.5, 1.0 / 3.0), 4: (4.0, -3.0, 4.0 / 3.0, -0.25)}
BDF_EXTRAP = {2: (2.0, -1.0), 3: (3.0, -3.0, 1.0), 4: (4.0, -6.0, 4.0, -1.0)}

_CHI_KINDS = ("chi1", "chi2", "chi3", "chi4")
_VARIANTS = ("log", "arctan")
_PLACEMENTS = ("inside_g", "outside_g")


@dataclass(frozen=True)
class SMConfig:
    """Scheme configuration; dt is the only required field."""

    dt: float
    variant: str = "log"
    chi_kind: str = "chi1"
    theta: float = 1.0
    c0: float | None = None  # None: use the model's default energy shift
    s_stab: float = 0.0
    c_star: float | None = None
    eta_placement: str = "inside_g"
    bdf_order: int = 1
    cn_modified: bool = False
    chi2_base: float = math.e

    def __post_init__(self) -> None:
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.theta > 0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        if self.chi_kind not in _CHI_KINDS:
            raise ValueError(f"chi_kind must be one of {_CHI_KINDS}, got {self.chi_kind!r}")
        if self.eta_placement not in _PLACEMENTS:
            raise ValueError(f"eta_placement must be one of {_PLACEMENTS}")
        if self.bdf_order not in (1, 2, 3, 4):
            raise ValueError(f"bdf_order must be 1 (CN), 2, 3 or 4, got {self.bdf_order}")
        if self.s_stab < 0:
            raise ValueError("stabilization coefficient must be nonnegative")
        if self.c0 is not None and self.c0 < 0:
            raise ValueError("energy shift c0 must be nonnegative")
        if self.chi2_base <= 0:
            raise ValueError("chi2 base must be positive")

    def resolve_c0(self, model) -> float:
        return float(model.default_c0 if self.c0 is None else self.c0)

    @property
    def history_depth(self) -> int:
        return max(1, self.bdf_order - 1)


@dataclass(frozen=True)
class AuxState:
    """Auxiliary variable at a staggered time level.

    ``track`` is the canonical monotone representation: ln V for the log
    variant (so V > 0 is structural), atan V for the arctan variant, and V
    itself for the raw baseline bookkeeping.
    """

    variant: str
    track: float
    eta: float
    t_half: float

    @property
    def v_half(self) -> float:
        if self.variant == "log":
            return math.exp(self.track)
        if self.variant == "arctan":
            return math.tan(self.track)
        return self.track


def _initial_aux(variant: str, v0: float, t_half: float) -> AuxState:
    if variant == "log":
        if not (v0 > 0):
            raise ValueError(
                f"initial auxiliary value must be positive in the log variant, got {v0:g}; "
                "increase the energy shift c0"
            )
        return AuxState("log", math.log(v0), 1.0, t_half)
    if variant == "arctan":
        return AuxState("arctan", math.atan(v0), 1.0, t_half)
    return AuxState("raw", v0, 1.0, t_half)


@dataclass(frozen=True)
class StepState:
    """State of a time-stepping run after step ``index`` (u at t = index*dt)."""

    t: float
    index: int
    u: object
    history: tuple
    aux: AuxState | None
    aux_prev: AuxState | None = None
    extras: dict | None = None


# --- auxiliary-variable updates ------------------------------------------------


def update_v_log(v_prev: float, k_n: float, e_n: float, theta: float, dt: float) -> float:
    """V^{n+1/2} = exp(-theta K / E dt) V^{n-1/2} with E = theta E_tot + C0 > 0.

    Strictly positive and never above v_prev; may underflow to 0 for extreme
    rate*dt (the steppers avoid this by working on ln V directly).
    """
    if not (v_prev > 0):
        raise ValueError(f"v_prev must be positive in the log variant, got {v_prev:g}")
    if not (e_n > 0):
        raise ValueError(f"shifted energy must be positive, got {e_n:g}; increase c0")
    if k_n < 0:
        raise ValueError(f"dissipation rate must be nonnegative, got {k_n:g}")
    return v_prev * math.exp(-theta * k_n / e_n * dt)


def update_v_arctan(
    v_prev: float,
    k_n: float,
    e_tot_n: float,
    theta: float,
    dt: float,
    c_star: float | None = None,
) -> float:
    """atan V^{n+1/2} = atan V^{n-1/2} - dt theta K / (theta^2 E_tot^2 + 1).

    Raises ArctanBranchError when the pre-tangent argument leaves the principal
    branch; when c_star is given, results below it are clamped to c_star (the
    system is considered to have reached a stable state).
    """
    if k_n < 0:
        raise ValueError(f"dissipation rate must be nonnegative, got {k_n:g}")
    arg = math.atan(v_prev) - dt * theta * k_n / (theta**2 * e_tot_n**2 + 1.0)
    if arg <= -0.5 * math.pi:
        raise ArctanBranchError(arg)
    out = math.tan(arg)
    if c_star is not None and out < c_star:
        return c_star
    return out


def _advance_aux(aux: AuxState, k_n: float, e_tot_n: float, config: SMConfig, c0: float,
                 work: float = 0.0) -> AuxState:
    """Advance the auxiliary track by one staggered step, staying in the
    monotone representation.

    ``work`` is the forcing input rate <dE/du, f>; the net energy drain is
    K - work, which reduces to the monotone decay law when there is no forcing.
    """
    theta = config.theta
    if k_n < 0:
        # dissipation rates are norms; tolerate only exact negatives as errors
        raise ValueError(f"dissipation rate must be nonnegative, got {k_n:g}")
    drain = k_n - work
    if aux.variant == "log":
        e_n = theta * e_tot_n + c0
        if not (e_n > 0):
            raise ValueError(f"shifted energy {e_n:g} <= 0; increase c0")
        track = aux.track - theta * drain / e_n * config.dt
    else:
        track = aux.track - config.dt * theta * drain / (theta**2 * e_tot_n**2 + 1.0)
        if abs(track) >= 0.5 * math.pi:
            raise ArctanBranchError(track)
        if config.c_star is not None:
            track = max(track, math.atan(config.c_star))
    if not math.isfinite(track):
        raise ValueError(f"auxiliary track became non-finite: {track}")
    return AuxState(aux.variant, track, aux.eta, aux.t_half + config.dt)


def chi_eval(kind: str, v_half: float, e_ref: float, chi2_base: float = math.e) -> float:
    """Control-factor functionals; every kind evaluates to 1 when v == e."""
    if kind == "chi1":
        if e_ref == 0.0:
            raise ValueError("chi1 requires a nonzero reference energy")
        return v_half / e_ref
    if kind == "chi2":
        return chi2_base ** (v_half - e_ref)
    if kind == "chi3":
        return math.cos(v_half - e_ref)
    if kind == "chi4":
        return 1.0 + v_half - e_ref
    raise ValueError(f"unknown chi kind {kind!r}")


# --- shared pieces ---------------------------------------------------------------


def _as_spectral(f: RealField) -> np.ndarray:
    return np.fft.fft2(f.values)


@lru_cache(maxsize=64)
def _symbol_array(model, grid) -> np.ndarray:
    # models and grids are frozen dataclasses, safe as cache keys
    return model.linear_symbol(grid).symbol


def _finite_or_blowup(values: np.ndarray, index: int, t: float, last_state=None) -> None:
    if not np.all(np.isfinite(values)):
        raise BlowUpError(index, t, last_state)


def _forcing_hat(forcing, grid, t):
    if forcing is None:
        return None
    return _as_spectral(forcing(grid, t))


def _forcing_work(model, state_u, forcing, grid, t: float) -> float:
    if forcing is None:
        return 0.0
    from .models import forcing_work

    return forcing_work(model, state_u, forcing(grid, t))


def _extrapolate(u: RealField, u_prev: RealField) -> RealField:
    return RealField(u.grid, 1.5 * u.values - 0.5 * u_prev.values)


def _half_step_predict(model, config: SMConfig, u: RealField, t: float, forcing) -> RealField:
    """First-order semi-implicit half step, local error O(dt^2):
    (ubar - u)/(dt/2) + A ubar + g(u) = f."""
    grid = u.grid
    s = _symbol_array(model, grid)
    half = 0.5 * config.dt
    rhs = _as_spectral(u) / half - _as_spectral(model.nonlinear(u))
    fh = _forcing_hat(forcing, grid, t + 0.5 * half)
    if fh is not None:
        rhs = rhs + fh
    ubar = np.fft.ifft2(rhs / (1.0 / half + s)).real
    return RealField(grid, ubar)


def _eta_reference(model, config: SMConfig, c0: float, state_for_e) -> float:
    return config.theta * model.energy_tot(state_for_e) + c0


def _nonlinear_term(model, config: SMConfig, eta: float, u_bar: RealField) -> RealField:
    if config.eta_placement == "inside_g":
        return model.nonlinear(RealField(u_bar.grid, eta * u_bar.values))
    g = model.nonlinear(u_bar)
    return RealField(u_bar.grid, eta * g.values)


def _cn_solve(model, config: SMConfig, u_n: RealField, u_nm1: RealField | None,
              g_term: RealField, eta: float, u_bar: RealField, t_mid: float, forcing) -> np.ndarray:
    """One Crank-Nicolson (or 3/4-1/4 modified) IMEX solve, returning samples of
    u^{n+1}.  The stabilized form adds S((u^{n+1}+u^n)/2 - eta ubar)."""
    grid = u_n.grid
    s = _symbol_array(model, grid)
    S = config.s_stab
    dt = config.dt
    un_hat = _as_spectral(u_n)
    rhs = -_as_spectral(g_term)
    if S != 0.0:
        rhs = rhs + S * eta * _as_spectral(u_bar)
    fh = _forcing_hat(forcing, grid, t_mid)
    if fh is not None:
        rhs = rhs + fh
    if config.cn_modified and u_nm1 is not None:
        # the 3/4-1/4 implicit split needs u^{n-1}; the very first step (no
        # history yet) takes the standard trapezoidal form below
        rhs = rhs + (1.0 / dt - 0.5 * S) * un_hat - 0.25 * s * _as_spectral(u_nm1)
        denom = 1.0 / dt + 0.75 * s + 0.5 * S
    else:
        rhs = rhs + (1.0 / dt - 0.5 * (s + S)) * un_hat
        denom = 1.0 / dt + 0.5 * (s + S)
    if denom.min() <= 0.0:
        raise ValueError("singular mode in the implicit solve")
    return np.fft.ifft2(rhs / denom).real


# --- CN-SM scheme (standard staggering) --------------------------------------------


def bootstrap(model, config: SMConfig, u0: RealField, forcing=None) -> tuple[RealField, StepState]:
    """Start-up for the staggered schemes.

    Computes the half-level predictor ubar^{1/2}, initializes
    V^{1/2} = theta E_tot(ubar^{1/2}) + C0, and takes the first Crank-Nicolson
    step with the nonlinearity frozen at ubar^{1/2} (eta = 1 exactly there).
    Returns (ubar^{1/2}, state after step one).
    """
    c0 = config.resolve_c0(model)
    u_bar = _half_step_predict(model, config, u0, 0.0, forcing)
    e_ref = _eta_reference(model, config, c0, u_bar)
    if config.variant == "log":
        aux = _initial_aux("log", e_ref, 0.5 * config.dt)
    else:
        aux = _initial_aux("arctan", e_ref, 0.5 * config.dt)
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    g_term = _nonlinear_term(model, config, eta, u_bar)
    vals = _cn_solve(model, config, u0, None, g_term, eta, u_bar, 0.5 * config.dt, forcing)
    _finite_or_blowup(vals, 1, config.dt, u0)
    u1 = RealField(u0.grid, vals)
    state = StepState(t=config.dt, index=1, u=u1, history=(u0,), aux=aux, aux_prev=None)
    return u_bar, state


def cn_sm_step(model, config: SMConfig, state: StepState, forcing=None) -> StepState:
    """One CN-SM step: staggered V update, eta = chi(V), IMEX CN solve."""
    c0 = config.resolve_c0(model)
    u_n = state.u
    u_nm1 = state.history[0]
    e_tot_n, k_n = model.energy_and_dissipation(u_n)
    work = _forcing_work(model, u_n, forcing, u_n.grid, state.t)
    aux = _advance_aux(state.aux, k_n, e_tot_n, config, c0, work)
    u_bar = _extrapolate(u_n, u_nm1)
    e_ref = _eta_reference(model, config, c0, u_bar)
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    g_term = _nonlinear_term(model, config, eta, u_bar)
    t_mid = state.t + 0.5 * config.dt
    vals = _cn_solve(model, config, u_n, u_nm1, g_term, eta, u_bar, t_mid, forcing)
    _finite_or_blowup(vals, state.index + 1, state.t + config.dt, u_n)
    history = (u_n,) + state.history[: config.history_depth - 1]
    return StepState(t=state.t + config.dt, index=state.index + 1,
                     u=RealField(u_n.grid, vals), history=history,
                     aux=aux, aux_prev=state.aux)


# --- swapped staggering: u on half-integer levels, V on integer levels --------------


def swapped_bootstrap(model, config: SMConfig, u0: RealField, forcing=None) -> StepState:
    """u moves to t = dt/2 by the semi-implicit predictor; V^0 is exact at t = 0."""
    c0 = config.resolve_c0(model)
    v0 = config.theta * model.energy_tot(u0) + c0
    aux = _initial_aux(config.variant, v0, 0.0)
    u_half = _half_step_predict(model, config, u0, 0.0, forcing)
    return StepState(t=0.5 * config.dt, index=0, u=u_half, history=(), aux=aux, aux_prev=None)


def swapped_mesh_step(model, config: SMConfig, state: StepState, forcing=None) -> StepState:
    """CN step between half-integer levels; V advances on integer levels using
    the dissipation of the half-level state."""
    c0 = config.resolve_c0(model)
    u_h = state.u  # u^{n+1/2}
    e_tot, k = model.energy_and_dissipation(u_h)
    work = _forcing_work(model, u_h, forcing, u_h.grid, state.t)
    aux = _advance_aux(state.aux, k, e_tot, config, c0, work)  # V^{n+1}
    if state.history:
        u_bar = _extrapolate(u_h, state.history[0])  # approximates u(t^{n+1})
    else:
        u_bar = _half_step_predict(model, config, u_h, state.t, forcing)
    e_ref = _eta_reference(model, config, c0, u_bar)
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    g_term = _nonlinear_term(model, config, eta, u_bar)
    t_mid = state.t + 0.5 * config.dt  # = t^{n+1}
    vals = _cn_solve(model, config, u_h, state.history[0] if state.history else None,
                     g_term, eta, u_bar, t_mid, forcing)
    _finite_or_blowup(vals, state.index + 1, state.t + config.dt, u_h)
    return StepState(t=state.t + config.dt, index=state.index + 1,
                     u=RealField(u_h.grid, vals), history=(u_h,),
                     aux=aux, aux_prev=state.aux)


# --- BDFk-SM -------------------------------------------------------------------------


def bdfk_sm_step(model, config: SMConfig, state: StepState, forcing=None) -> StepState:
    """kth-order IMEX BDF solve for ubar^{n+1}, then the staggered correction
    u^{n+1} = eta_k ubar^{n+1} with chi = (3 V^{n+1/2} - V^{n-1/2}) / (2 E(ubar^{n+1}))."""
    k = config.bdf_order
    if k not in (2, 3, 4):
        raise ValueError("bdfk_sm_step requires bdf_order in {2, 3, 4}")
    if len(state.history) < k - 1:
        raise ValueError(
            f"BDF{k} needs {k - 1} history states, have {len(state.history)}; "
            "advance with CN-SM steps first"
        )
    c0 = config.resolve_c0(model)
    grid = state.u.grid
    chain = (state.u,) + state.history[: k - 1]
    e_tot_n, k_n = model.energy_and_dissipation(state.u)
    work = _forcing_work(model, state.u, forcing, grid, state.t)
    aux = _advance_aux(state.aux, k_n, e_tot_n, config, c0, work)
    beta = sum(c * f.values for c, f in zip(BDF_BETA[k], chain))
    u_hat_extrap = sum(c * f.values for c, f in zip(BDF_EXTRAP[k], chain))
    g_term = model.nonlinear(RealField(grid, u_hat_extrap))
    s = _symbol_array(model, grid)
    rhs = np.fft.fft2(beta) / config.dt - _as_spectral(g_term)
    fh = _forcing_hat(forcing, grid, state.t + config.dt)
    if fh is not None:
        rhs = rhs + fh
    denom = BDF_ALPHA[k] / config.dt + s
    u_bar_vals = np.fft.ifft2(rhs / denom).real
    _finite_or_blowup(u_bar_vals, state.index + 1, state.t + config.dt, state.u)
    u_bar = RealField(grid, u_bar_vals)
    e_ref = _eta_reference(model, config, c0, u_bar)
    chi = (3.0 * aux.v_half - state.aux.v_half) / (2.0 * e_ref)
    # the squared correction keeps eta an O(dt^2) approximation of 1 while
    # removing the systematic per-step drift a bare chi accumulates over T/dt
    # steps; for k = 2 it preserves the clean global second order
    eta = 1.0 - (1.0 - chi) ** 2
    aux = replace(aux, eta=eta)
    u_new = RealField(grid, eta * u_bar.values)
    history = (state.u,) + state.history[: config.history_depth - 1]
    return StepState(t=state.t + config.dt, index=state.index + 1, u=u_new,
                     history=history, aux=aux, aux_prev=state.aux)


# --- baselines -------------------------------------------------------------------------


def baseline_cn_imex_step(model, config: SMConfig, state: StepState, forcing=None) -> StepState:
    """Plain semi-implicit Crank-Nicolson: the CN-SM solve with eta frozen at 1
    and no auxiliary variable."""
    u_n = state.u
    u_bar = (_extrapolate(u_n, state.history[0]) if state.history
             else _half_step_predict(model, config, u_n, state.t, forcing))
    g_term = model.nonlinear(u_bar)
    t_mid = state.t + 0.5 * config.dt
    vals = _cn_solve(model, config, u_n, state.history[0] if state.history else None,
                     g_term, 1.0, u_bar, t_mid, forcing)
    _finite_or_blowup(vals, state.index + 1, state.t + config.dt, u_n)
    return StepState(t=state.t + config.dt, index=state.index + 1,
                     u=RealField(u_n.grid, vals), history=(u_n,),
                     aux=state.aux, aux_prev=state.aux)


def gsav_bootstrap(model, config: SMConfig, u0: RealField) -> StepState:
    """Baseline auxiliary variable r^0 = theta E_tot(u^0) + C0 on the integer mesh."""
    c0 = config.resolve_c0(model)
    r0 = config.theta * model.energy_tot(u0) + c0
    if not (r0 > 0):
        raise ValueError("GSAV baseline needs a positive shifted energy; increase c0")
    return StepState(t=0.0, index=0, u=u0, history=(), aux=AuxState("raw", r0, 1.0, 0.0))


def gsav_baseline_step(model, config: SMConfig, state: StepState, forcing=None) -> StepState:
    """Generalized-SAV style baseline: CN-IMEX candidate ubar^{n+1}, then
    r^{n+1} = r^n - dt (r^n / E(ubar^{n+1})) K(ubar^{n+1}) and
    u^{n+1} = (r^{n+1} / E(ubar^{n+1})) ubar^{n+1}.  The modified energy r is
    first-order accurate by construction."""
    c0 = config.resolve_c0(model)
    u_n = state.u
    u_bar_mid = (_extrapolate(u_n, state.history[0]) if state.history
                 else _half_step_predict(model, config, u_n, state.t, forcing))
    g_term = model.nonlinear(u_bar_mid)
    t_mid = state.t + 0.5 * config.dt
    vals = _cn_solve(model, config, u_n, state.history[0] if state.history else None,
                     g_term, 1.0, u_bar_mid, t_mid, forcing)
    _finite_or_blowup(vals, state.index + 1, state.t + config.dt, u_n)
    u_bar = RealField(u_n.grid, vals)
    e_tot, k = model.energy_and_dissipation(u_bar)
    e_ref = config.theta * e_tot + c0
    work = _forcing_work(model, u_bar, forcing, u_n.grid, state.t + config.dt)
    r = state.aux.track
    r_new = r - config.dt * (r / e_ref) * (k - work)
    xi = r_new / e_ref
    u_new = RealField(u_n.grid, xi * u_bar.values)
    aux = AuxState("raw", r_new, xi, state.t + config.dt)
    return StepState(t=state.t + config.dt, index=state.index + 1, u=u_new,
                     history=(u_n,), aux=aux, aux_prev=state.aux)


# --- Navier-Stokes -----------------------------------------------------------------------


def _ns_assemble_and_solve(model, config: SMConfig, u_n, adv, t_mid, forcing,
                           want_pressure: bool):
    """Crank-Nicolson diffusion with projected right-hand side; returns the new
    divergence-free velocity pair (and optionally the pressure field)."""
    grid = u_n[0].grid
    nu_k2 = model.nu * grid.k2
    dt = config.dt
    f_pair = forcing(grid, t_mid) if forcing is not None else None
    rhs = []
    for i in range(2):
        r = (1.0 / dt - 0.5 * nu_k2) * _as_spectral(u_n[i]) - _as_spectral(adv[i])
        if f_pair is not None:
            r = r + _as_spectral(f_pair[i])
        rhs.append(r)
    R1 = SpectralField(grid, rhs[0])
    R2 = SpectralField(grid, rhs[1])
    P1, P2 = leray_project(R1, R2)
    denom = 1.0 / dt + 0.5 * nu_k2
    out1 = np.fft.ifft2(P1.coeffs / denom).real
    out2 = np.fft.ifft2(P2.coeffs / denom).real
    pressure = None
    if want_pressure:
        pressure = to_real(leray_pressure(R1, R2))
    return out1, out2, pressure


def ns_bootstrap(model, config: SMConfig, u0, forcing=None):
    """Start-up for the Navier-Stokes scheme; the initial velocity is projected
    onto the divergence-free space once, then never leaves it."""
    grid = u0[0].grid
    c0 = config.resolve_c0(model)
    P1, P2 = leray_project(to_spectral(u0[0]), to_spectral(u0[1]))
    u0 = (to_real(P1), to_real(P2))
    # semi-implicit half step with projection
    nu_k2 = model.nu * grid.k2
    half = 0.5 * config.dt
    adv = model.nonlinear(u0)
    f_pair = forcing(grid, 0.5 * half) if forcing is not None else None
    ubar = []
    rhs_pair = []
    for i in range(2):
        r = _as_spectral(u0[i]) / half - _as_spectral(adv[i])
        if f_pair is not None:
            r = r + _as_spectral(f_pair[i])
        rhs_pair.append(r)
    Q1, Q2 = leray_project(SpectralField(grid, rhs_pair[0]), SpectralField(grid, rhs_pair[1]))
    for i, Q in enumerate((Q1, Q2)):
        ubar.append(RealField(grid, np.fft.ifft2(Q.coeffs / (1.0 / half + nu_k2)).real))
    u_bar = tuple(ubar)
    e_ref = config.theta * model.energy_tot(u_bar) + c0
    aux = _initial_aux(config.variant, e_ref, 0.5 * config.dt)
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    adv1 = model.nonlinear((RealField(grid, eta * u_bar[0].values),
                            RealField(grid, eta * u_bar[1].values)))
    o1, o2, _ = _ns_assemble_and_solve(model, config, u0, adv1, 0.5 * config.dt, forcing, False)
    _finite_or_blowup(o1, 1, config.dt, u0)
    _finite_or_blowup(o2, 1, config.dt, u0)
    u1 = (RealField(grid, o1), RealField(grid, o2))
    state = StepState(t=config.dt, index=1, u=u1, history=(u0,), aux=aux, aux_prev=None)
    return u_bar, state


def ns_cn_sm_step(model, config: SMConfig, state: StepState, forcing=None,
                  want_pressure: bool = False) -> StepState:
    """CN-SM step for incompressible flow: explicit advection of the controlled
    extrapolation (eta ubar . grad) eta ubar, implicit CN diffusion, per-mode
    Leray projection of the assembled right-hand side."""
    c0 = config.resolve_c0(model)
    grid = state.u[0].grid
    u_n = state.u
    e_tot_n, k_n = model.energy_and_dissipation(u_n)
    work = _forcing_work(model, u_n, forcing, grid, state.t)
    aux = _advance_aux(state.aux, k_n, e_tot_n, config, c0, work)
    u_prev = state.history[0]
    u_bar = (_extrapolate(u_n[0], u_prev[0]), _extrapolate(u_n[1], u_prev[1]))
    e_ref = config.theta * model.energy_tot(u_bar) + c0
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    if config.eta_placement == "inside_g":
        adv = model.nonlinear((RealField(grid, eta * u_bar[0].values),
                               RealField(grid, eta * u_bar[1].values)))
    else:
        a1, a2 = model.nonlinear(u_bar)
        adv = (RealField(grid, eta * a1.values), RealField(grid, eta * a2.values))
    t_mid = state.t + 0.5 * config.dt
    o1, o2, pressure = _ns_assemble_and_solve(model, config, u_n, adv, t_mid, forcing,
                                              want_pressure)
    _finite_or_blowup(o1, state.index + 1, state.t + config.dt, u_n)
    _finite_or_blowup(o2, state.index + 1, state.t + config.dt, u_n)
    extras = {"pressure": pressure} if want_pressure else None
    return StepState(t=state.t + config.dt, index=state.index + 1,
                     u=(RealField(grid, o1), RealField(grid, o2)),
                     history=(u_n,), aux=aux, aux_prev=state.aux, extras=extras)


# --- ternary Cahn-Hilliard ------------------------------------------------------------------


@lru_cache(maxsize=64)
def _ternary_mode_blocks(model, grid, dt: float, w_impl: float):
    """Precomputed per-mode arrays of the coupled 2x2 implicit solve."""
    s1, s2, s3 = model.spreading
    k2 = grid.k2
    k4 = k2**2
    c1 = dt * model.mobility / s1 * 0.75 * model.eps**2 * k4
    c2 = dt * model.mobility / s2 * 0.75 * model.eps**2 * k4
    b1 = dt * model.mobility / s1 * k2
    b2 = dt * model.mobility / s2 * k2
    a11 = 1.0 + w_impl * c1 * (s1 + s3)
    a12 = w_impl * c1 * s3
    a21 = w_impl * c2 * s3
    a22 = 1.0 + w_impl * c2 * (s2 + s3)
    det = a11 * a22 - a12 * a21
    if det.min() <= 0.0:
        raise ValueError("singular coupled mode matrix; check the surface tensions")
    w_ex = 1.0 - w_impl
    r11 = 1.0 - w_ex * c1 * (s1 + s3)
    r12 = -w_ex * c1 * s3
    r21 = -w_ex * c2 * s3
    r22 = 1.0 - w_ex * c2 * (s2 + s3)
    return a11, a12, a21, a22, det, b1, b2, r11, r12, r21, r22


def _ternary_mode_solve(model, grid, dt: float, w_impl: float, phi, nonlin, forcing_pair):
    """Per-mode 2x2 solve of the Sigma-coupled implicit system.

    w_impl is the implicit weight of the fourth-order coupling (1/2 for
    Crank-Nicolson, 1 for the backward start-up half step); the nonlinear terms
    enter fully explicitly and the k = 0 block is the identity, so the spatial
    means of both phases are conserved exactly.
    """
    a11, a12, a21, a22, det, b1, b2, r11, r12, r21, r22 = _ternary_mode_blocks(
        model, grid, dt, w_impl)
    p1h = _as_spectral(phi[0])
    p2h = _as_spectral(phi[1])
    r1 = r11 * p1h + r12 * p2h - b1 * _as_spectral(nonlin[0])
    r2 = r21 * p1h + r22 * p2h - b2 * _as_spectral(nonlin[1])
    if forcing_pair is not None:
        r1 = r1 + dt * _as_spectral(forcing_pair[0])
        r2 = r2 + dt * _as_spectral(forcing_pair[1])
    o1 = (a22 * r1 - a12 * r2) / det
    o2 = (a11 * r2 - a21 * r1) / det
    return np.fft.ifft2(o1).real, np.fft.ifft2(o2).real


def _ternary_bulk_terms(model, phi, eta: float) -> tuple[RealField, RealField]:
    grid = phi[0].grid
    d1, d2 = model.bulk_derivatives(phi[0].values, phi[1].values)
    return (RealField(grid, 12.0 * eta * d1), RealField(grid, 12.0 * eta * d2))


def ternary_bootstrap(model, config: SMConfig, phi0, forcing=None):
    """Backward half step for the coupled pair, then the first CN step with the
    bulk terms frozen at the half-level predictor."""
    grid = phi0[0].grid
    c0 = config.resolve_c0(model)
    bulk0 = _ternary_bulk_terms(model, phi0, 1.0)
    f_pair = forcing(grid, 0.25 * config.dt) if forcing is not None else None
    b1, b2 = _ternary_mode_solve(model, grid, 0.5 * config.dt, 1.0, phi0, bulk0, f_pair)
    phi_bar = (RealField(grid, b1), RealField(grid, b2))
    e_ref = config.theta * model.energy_tot(phi_bar) + c0
    aux = _initial_aux(config.variant, e_ref, 0.5 * config.dt)
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    bulk = _ternary_bulk_terms(model, phi_bar, eta)
    f_pair = forcing(grid, 0.5 * config.dt) if forcing is not None else None
    o1, o2 = _ternary_mode_solve(model, grid, config.dt, 0.5, phi0, bulk, f_pair)
    _finite_or_blowup(o1, 1, config.dt, phi0)
    _finite_or_blowup(o2, 1, config.dt, phi0)
    state = StepState(t=config.dt, index=1,
                      u=(RealField(grid, o1), RealField(grid, o2)),
                      history=(phi0,), aux=aux, aux_prev=None)
    return phi_bar, state


def ternary_cn_sm_step(model, config: SMConfig, state: StepState, forcing=None) -> StepState:
    """CN-SM step for the coupled ternary system; eta multiplies the whole bulk
    force terms (the outside placement of the coupled scheme)."""
    c0 = config.resolve_c0(model)
    grid = state.u[0].grid
    phi_n = state.u
    e_tot_n, k_n = model.energy_and_dissipation(phi_n)
    work = _forcing_work(model, phi_n, forcing, grid, state.t)
    aux = _advance_aux(state.aux, k_n, e_tot_n, config, c0, work)
    prev = state.history[0]
    phi_bar = (_extrapolate(phi_n[0], prev[0]), _extrapolate(phi_n[1], prev[1]))
    e_ref = config.theta * model.energy_tot(phi_bar) + c0
    eta = chi_eval(config.chi_kind, aux.v_half, e_ref, config.chi2_base)
    aux = replace(aux, eta=eta)
    bulk = _ternary_bulk_terms(model, phi_bar, eta)
    f_pair = forcing(grid, state.t + 0.5 * config.dt) if forcing is not None else None
    o1, o2 = _ternary_mode_solve(model, grid, config.dt, 0.5, phi_n, bulk, f_pair)
    _finite_or_blowup(o1, state.index + 1, state.t + config.dt, phi_n)
    _finite_or_blowup(o2, state.index + 1, state.t + config.dt, phi_n)
    return StepState(t=state.t + config.dt, index=state.index + 1,
                     u=(RealField(grid, o1), RealField(grid, o2)),
                     history=(phi_n,), aux=aux, aux_prev=state.aux)
