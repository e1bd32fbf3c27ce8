"""Single-excitation dynamics of a driven three-level atom in a leaky cavity.

Bare basis: |s>|0>, |e>|0>, |g>|1> with amplitudes (c1, c2, c3).  The drive
W(t) couples |s>-|e>, the cavity coupling g0 couples |e>-|g,1 photon>, and
the cavity leaks at rate kappa into the traveling field through

    a_in(t) + a_out(t) = sqrt(kappa) c3(t).

The zero-eigenvalue (dark) superposition of |s>|0> and |g>|1> never touches
the lossy |e> level; with cos(theta) = W / sqrt(g0^2 + W^2) its amplitude
obeys a closed scalar equation that this module also evaluates in closed
form, both for photon emission and for absorption (where the memory kernel
J maps the incoming field onto the dark amplitude).

Full propagation happens in the bare basis; the dark/bright projections are
diagnostics, not the integrated system.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridError, PulseError, StabilityError
from .integrators import propagate_three_level
from .pulses import SampledPulse, TimeGrid, make_grid

if TYPE_CHECKING:  # pragma: no cover
    from .control import ControlEnvelope

__all__ = [
    "CavityParams",
    "AmplitudeState",
    "AmplitudeTrajectory",
    "AdiabaticityReport",
    "default_dt",
    "simulation_grid",
    "cos_theta",
    "sin_theta",
    "evolve_emission",
    "evolve_absorption",
    "dark_state_emission",
    "dark_state_absorption",
    "kernel_J",
    "kernel_profile",
    "adiabaticity_diagnostics",
    "flux_balance",
    "write_trajectory_csv",
]

# Largest stable phase advance per RK4 step; steps beyond this are refused.
MAX_PHASE_PER_STEP = 0.05


@dataclass(frozen=True)
class CavityParams:
    """Physical constants of one atom-cavity node.

    g0: atom-cavity coupling (angular frequency), kappa: cavity decay rate,
    T: duration of one time bin, n: protocol horizon in bins (pulses span
    [0, nT]).
    """

    g0: float
    kappa: float
    T: float = 1.0
    n: int = 3

    def __post_init__(self):
        if self.g0 <= 0 or self.kappa <= 0 or self.T <= 0:
            raise ValueError("g0, kappa and T must all be positive")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")

    @property
    def strong_coupling(self) -> bool:
        """Advisory flag: the adiabatic dark-state picture needs g0 >> kappa."""
        return self.g0 >= 10.0 * self.kappa

    @classmethod
    def from_ratios(cls, kappa_T: float, g0_kappa_ratio: float, n: int = 3, T: float = 1.0) -> "CavityParams":
        kappa = kappa_T / T
        return cls(g0=g0_kappa_ratio * kappa, kappa=kappa, T=T, n=n)


def default_dt(params: CavityParams) -> float:
    """Default fixed integration step: min(0.05/g0, T/2000)."""
    return min(MAX_PHASE_PER_STEP / params.g0, params.T / 2000.0)


def simulation_grid(params: CavityParams, t_end: float | None = None, t_start: float = 0.0) -> TimeGrid:
    """Uniform grid over [t_start, t_end] at the default step (or finer)."""
    t_end = params.T if t_end is None else t_end
    intervals = int(math.ceil((t_end - t_start) / default_dt(params) - 1e-9))
    return make_grid(t_start, t_end, intervals + 1)


def cos_theta(omega: np.ndarray | float, g0: float) -> np.ndarray | float:
    """Mixing-angle cosine W / sqrt(g0^2 + W^2); carries the sign of W."""
    return omega / np.sqrt(g0 * g0 + omega * omega)


def sin_theta(omega: np.ndarray | float, g0: float) -> np.ndarray | float:
    return g0 / np.sqrt(g0 * g0 + omega * omega)


@dataclass(frozen=True)
class AmplitudeState:
    c1: complex = 0.0
    c2: complex = 0.0
    c3: complex = 0.0

    def norm_sq(self) -> float:
        return abs(self.c1) ** 2 + abs(self.c2) ** 2 + abs(self.c3) ** 2


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Propagated amplitudes plus the outgoing field and dark-basis views.

    ``states`` has one row (c1, c2, c3) per grid point; ``out_pulse`` holds
    sqrt(kappa) c3 - a_in.  The projections c_dark, c0 (= sqrt2 c2) and c_e
    (bright superposition) quantify how well the evolution stayed dark.
    """

    grid: TimeGrid
    states: np.ndarray
    out_pulse: SampledPulse
    c_dark: np.ndarray
    c0: np.ndarray
    c_e: np.ndarray

    @property
    def c1(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def c2(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def c3(self) -> np.ndarray:
        return self.states[:, 2]

    def population(self) -> np.ndarray:
        """|c1|^2 + |c2|^2 + |c3|^2 at every grid point."""
        return np.sum(np.abs(self.states) ** 2, axis=1)

    @property
    def final_state(self) -> AmplitudeState:
        c = self.states[-1]
        return AmplitudeState(complex(c[0]), complex(c[1]), complex(c[2]))

    @property
    def residual_population(self) -> float:
        return float(self.population()[-1])


def _check_step(control: "ControlEnvelope", params: CavityParams, enforce: bool) -> None:
    dt = control.grid.dt
    phase = params.g0 * dt
    if enforce and phase > MAX_PHASE_PER_STEP * (1.0 + 1e-9):
        needed = int(math.ceil(control.grid.span * params.g0 / MAX_PHASE_PER_STEP)) + 1
        raise StabilityError(
            f"g0*dt = {phase:.3g} exceeds {MAX_PHASE_PER_STEP}; "
            f"use at least {needed} samples on [{control.grid.t_start:g}, {control.grid.t_end:g}]"
        )


def _dark_projections(states: np.ndarray, omega: np.ndarray, g0: float):
    ct = cos_theta(omega, g0)
    st = sin_theta(omega, g0)
    c_dark = st * states[:, 0] - ct * states[:, 2]
    c0 = math.sqrt(2.0) * states[:, 1]
    c_e = math.sqrt(2.0) * (ct * states[:, 0] + st * states[:, 2])
    return c_dark, c0, c_e


def _evolve(control, params, a_in, initial, enforce_stability) -> AmplitudeTrajectory:
    _check_step(control, params, enforce_stability)
    states = propagate_three_level(
        control.omega,
        a_in,
        params.g0,
        params.kappa,
        control.grid.dt,
        (initial.c1, initial.c2, initial.c3),
    )
    out = math.sqrt(params.kappa) * states[:, 2]
    if a_in is not None:
        out = out - a_in
    c_dark, c0, c_e = _dark_projections(states, control.omega, params.g0)
    return AmplitudeTrajectory(
        grid=control.grid,
        states=states,
        out_pulse=SampledPulse(control.grid, out),
        c_dark=c_dark,
        c0=c0,
        c_e=c_e,
    )


def evolve_emission(
    control: "ControlEnvelope",
    params: CavityParams,
    initial: AmplitudeState = AmplitudeState(1.0, 0.0, 0.0),
    enforce_stability: bool = True,
) -> AmplitudeTrajectory:
    """Propagate the closed-input system (a_in = 0); photon leaves as out_pulse."""
    if initial.norm_sq() > 1.0 + 1e-6:
        raise PulseError(f"initial state norm^2 = {initial.norm_sq():.6g} exceeds 1")
    return _evolve(control, params, None, initial, enforce_stability)


def evolve_absorption(
    control: "ControlEnvelope",
    params: CavityParams,
    input_pulse: SampledPulse,
    initial: AmplitudeState = AmplitudeState(),
    enforce_stability: bool = True,
) -> AmplitudeTrajectory:
    """Propagate with an incoming field; out_pulse is the reflected remainder."""
    if not control.grid.matches(input_pulse.grid):
        raise GridError("input pulse and control must share one grid")
    return _evolve(control, params, input_pulse.amps, initial, enforce_stability)


def _cos2_cumulative(control: "ControlEnvelope", params: CavityParams) -> tuple[np.ndarray, np.ndarray]:
    ct = cos_theta(control.omega, params.g0)
    cum = cumulative_trapezoid(ct * ct, dx=control.grid.dt, initial=0.0)
    return ct, cum


def dark_state_emission(
    control: "ControlEnvelope", params: CavityParams, c_dark_0: complex = 1.0
) -> tuple[np.ndarray, SampledPulse]:
    """Closed-form dark-state decay and the emitted field it predicts.

    c_D(t) = c_D(0) exp[-(kappa/2) int_0^t cos^2(theta)], and the outgoing
    field is -sqrt(kappa) cos(theta(t)) c_D(t).
    """
    ct, cum = _cos2_cumulative(control, params)
    c_dark = c_dark_0 * np.exp(-0.5 * params.kappa * cum)
    out = SampledPulse(control.grid, -math.sqrt(params.kappa) * ct * c_dark)
    return c_dark, out


def dark_state_absorption(
    control: "ControlEnvelope",
    params: CavityParams,
    input_pulse: SampledPulse,
    c_dark_0: complex = 0.0,
) -> np.ndarray:
    """Dark amplitude under driving by an incoming field, in closed form.

    Evaluates c_D(t) = c_D(0) E(t) + int_0^t J(t,t') a_in(t') dt' with
    E(t) = exp[-(kappa/2) int_0^t cos^2(theta)]; with the matched catch
    drive the terminal value reduces to the overlap of the incoming field
    with the drive's caught mode.
    """
    if not control.grid.matches(input_pulse.grid):
        raise GridError("input pulse and control must share one grid")
    ct, cum = _cos2_cumulative(control, params)
    decay = np.exp(-0.5 * params.kappa * cum)
    integrand = math.sqrt(params.kappa) * ct * input_pulse.amps / decay
    inner = cumulative_trapezoid(integrand, dx=control.grid.dt, initial=0.0)
    return decay * (c_dark_0 + inner)


def kernel_profile(control: "ControlEnvelope", params: CavityParams, t_end: float | None = None) -> np.ndarray:
    """Absorption kernel J(t_end, t') over the whole grid.

    J(t, t') = sqrt(kappa) cos(theta(t')) exp[(kappa/2) int_t^{t'} cos^2],
    the weight with which the field at t' contributes to c_D(t).  For a
    drive that absorbs a unit-norm mode f completely, J(t_end, .) equals
    conj(f) pointwise.
    """
    ct, cum = _cos2_cumulative(control, params)
    idx = control.grid.n_samples - 1 if t_end is None else control.grid.index_of(t_end)
    return math.sqrt(params.kappa) * ct * np.exp(0.5 * params.kappa * (cum - cum[idx]))


def kernel_J(control: "ControlEnvelope", params: CavityParams, t: float, t_prime: float) -> float:
    """Point evaluation of the absorption kernel at (t, t')."""
    profile = kernel_profile(control, params, t_end=t)
    return float(profile[control.grid.index_of(t_prime)])


@dataclass(frozen=True)
class AdiabaticityReport:
    """Worst-case departures from the dark-state picture along a trajectory."""

    max_c0: float
    max_c_e: float
    max_theta_rate_ratio: float  # max |d theta/dt| / g0

    @property
    def flagged(self) -> bool:
        return max(self.max_c0, self.max_c_e, self.max_theta_rate_ratio) > 0.1


def adiabaticity_diagnostics(
    traj: AmplitudeTrajectory, control: "ControlEnvelope", params: CavityParams
) -> AdiabaticityReport:
    """Project the bare trajectory onto the bright combinations and bound theta-dot."""
    if not traj.grid.matches(control.grid):
        raise GridError("trajectory and control must share one grid")
    theta = np.arctan2(params.g0, control.omega)
    theta_rate = np.gradient(theta, control.grid.dt)
    return AdiabaticityReport(
        max_c0=float(np.max(np.abs(traj.c0))),
        max_c_e=float(np.max(np.abs(traj.c_e))),
        max_theta_rate_ratio=float(np.max(np.abs(theta_rate)) / params.g0),
    )


def flux_balance(traj: AmplitudeTrajectory, input_pulse: SampledPulse | None = None) -> np.ndarray:
    """Excitation bookkeeping residual; ~0 for a faithful integration.

    residual(t) = [population(t) + int_0^t |out|^2] - [population(0) + int_0^t |a_in|^2].
    """
    dt = traj.grid.dt
    pop = traj.population()
    out_flux = cumulative_trapezoid(np.abs(traj.out_pulse.amps) ** 2, dx=dt, initial=0.0)
    residual = pop + out_flux - pop[0]
    if input_pulse is not None:
        if not traj.grid.matches(input_pulse.grid):
            raise GridError("input pulse and trajectory must share one grid")
        residual = residual - cumulative_trapezoid(np.abs(input_pulse.amps) ** 2, dx=dt, initial=0.0)
    return residual


def write_trajectory_csv(traj: AmplitudeTrajectory, path: str, stride: int = 1) -> None:
    """Write ``t,re_c1,im_c1,re_c2,im_c2,re_c3,im_c3,re_out,im_out`` rows."""
    if stride < 1:
        raise PulseError("stride must be >= 1")
    t = traj.grid.times[::stride]
    s = traj.states[::stride]
    o = traj.out_pulse.amps[::stride]
    rows = np.column_stack(
        [t, s[:, 0].real, s[:, 0].imag, s[:, 1].real, s[:, 1].imag, s[:, 2].real, s[:, 2].imag, o.real, o.imag]
    )
    tmp = f"{path}.tmp-{os.getpid()}"
    np.savetxt(
        tmp,
        rows,
        fmt="%.17g",
        delimiter=",",
        header="t,re_c1,im_c1,re_c2,im_c2,re_c3,im_c3,re_out,im_out",
        comments="",
    )
    os.replace(tmp, path)
