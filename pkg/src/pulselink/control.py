"""Drive-envelope inversion: find the Rabi drive that emits a target pulse.

The closed-form dark-state emission gives |out(t)|^2 = kappa cos^2(theta)
P(t) with P(t) = 1 - int_0^t |out|^2, so a target shape determines
cos^2(theta(t)) = |f(t)|^2 / (kappa P(t)) and hence the drive
W = g0 cos(theta)/sin(theta).  The inversion is singular where P -> 0 (all
population emitted) and degenerate where f -> 0; numeric floors keep W
finite and confine the distortion to regions carrying negligible photon
norm.  Targets at full unit norm are first renormalized to 1 - 1e-3 so the
singular endpoint stays outside the support.

Drive values are real; a sign flip encodes a pi phase flip of the drive
field, which is what emitting or catching a pulse with a sign change in its
envelope requires.  Every construction here derives |W| from |target| and
copies the target's sign pattern.

Absorption drives come from time reversal: invert the time-reversed
conjugated target, then reverse the resulting drive.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from .dynamics import CavityParams, evolve_emission
from .errors import GridError, InversionError, PulseError
from .pulses import SampledPulse, TimeGrid, make_grid, overlap

__all__ = [
    "ControlEnvelope",
    "InversionReport",
    "EmissionScore",
    "RefineOptions",
    "invert_emission",
    "refine_control",
    "catch_control",
    "emission_fidelity",
    "emission_report",
    "extend_with_ramp",
    "write_control_csv",
    "read_control_csv",
]

P_FLOOR = 1e-6  # smallest remaining-population denominator
S_FLOOR = 1e-3  # smallest sin(theta) divisor
CAP_FACTOR = 10.0  # |W| <= CAP_FACTOR * g0
NORM_RESERVE = 1e-3  # population left un-emitted to avoid the P -> 0 endpoint


@dataclass(frozen=True)
class ControlEnvelope:
    """Real Rabi-drive samples on a uniform grid (sign = pi drive phase)."""

    grid: TimeGrid
    omega: np.ndarray

    def __post_init__(self):
        omega = np.ascontiguousarray(self.omega, dtype=np.float64)
        if omega.ndim != 1 or omega.shape[0] != self.grid.n_samples:
            raise PulseError(f"expected {self.grid.n_samples} drive samples, got {omega.shape}")
        if not np.all(np.isfinite(omega)):
            raise PulseError("drive samples must be finite")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    def reversed(self) -> "ControlEnvelope":
        return ControlEnvelope(self.grid, self.omega[::-1].copy())

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.omega)))


@dataclass(frozen=True)
class EmissionScore:
    """Full-model scoring of a drive against a target pulse."""

    fidelity: float  # |<target_hat, out_hat>|^2
    l2_error: float  # || out - e^{i phi} target || after optimal global phase
    emitted_norm_sq: float
    residual_population: float


@dataclass(frozen=True)
class InversionReport:
    control: ControlEnvelope
    infidelity: float
    clamp_fraction: float
    residual_population: float
    improved: bool = True  # False when refinement returned the seed unchanged


@dataclass(frozen=True)
class RefineOptions:
    n_knots: int = 64
    max_evals: int = 256
    init_step: float = 0.5  # initial knot perturbation, in log-drive units
    min_step: float = 0.02
    target_infidelity: float | None = None


def _aligned_real(target: SampledPulse) -> np.ndarray:
    """Strip the global phase; reject targets with genuine complex structure.

    Real targets pass through unrotated (their sign pattern is part of the
    shape); complex targets are rotated by the phase of their peak sample.
    """
    amps = target.amps
    peak = float(np.max(np.abs(amps)))
    if peak == 0.0:
        return np.zeros(len(amps))
    if np.max(np.abs(amps.imag)) <= 1e-9 * peak:
        return amps.real.copy()
    ref = amps[int(np.argmax(np.abs(amps)))]
    aligned = amps * np.conj(ref) / abs(ref)
    if np.max(np.abs(aligned.imag)) > 1e-8 * peak:
        raise InversionError("target has a time-dependent complex phase; only real envelopes are invertible")
    return aligned.real


def _sign_pattern(values: np.ndarray) -> np.ndarray:
    """Sign of the envelope with zeros carried forward (start positive)."""
    scale = np.max(np.abs(values))
    signs = np.where(values > 1e-12 * scale, 1.0, np.where(values < -1e-12 * scale, -1.0, 0.0))
    nonzero = np.where(signs != 0.0, np.arange(signs.size), 0)
    np.maximum.accumulate(nonzero, out=nonzero)
    filled = signs[nonzero]
    filled[filled == 0.0] = 1.0  # leading stretch before the first nonzero sample
    return filled


def invert_emission(target: SampledPulse, params: CavityParams) -> InversionReport:
    """Closed-form drive for a target emission shape, with a full-model check.

    Raises :class:`InversionError` for targets with norm above one or shapes
    too fast for the cavity linewidth (cos^2 theta would exceed 1).
    """
    norm_sq = target.norm_sq()
    if norm_sq > 1.0 + 1e-9:
        raise InversionError(f"target norm^2 = {norm_sq:.6g} exceeds 1 (unphysical)")
    grid = target.grid
    aligned = _aligned_real(target)
    if norm_sq > 1.0 - NORM_RESERVE:
        aligned = aligned * math.sqrt((1.0 - NORM_RESERVE) / norm_sq)

    power = aligned * aligned
    remaining = 1.0 - cumulative_trapezoid(power, dx=grid.dt, initial=0.0)
    floored = np.maximum(remaining, P_FLOOR)
    cos2 = power / (params.kappa * floored)
    if np.any(cos2 > 1.0):
        t_bad = grid.times[int(np.argmax(cos2 > 1.0))]
        raise InversionError(f"target too fast for kappa: cos^2(theta) > 1 first at t = {t_bad:.6g}")

    sin_t = np.sqrt(1.0 - cos2)
    sin_floored = np.maximum(sin_t, S_FLOOR)
    magnitude = params.g0 * np.sqrt(cos2) / sin_floored
    cap = CAP_FACTOR * params.g0
    clamped = (remaining <= P_FLOOR) | (sin_t <= S_FLOOR) | (magnitude >= cap)
    control = ControlEnvelope(grid, _sign_pattern(aligned) * np.minimum(magnitude, cap))

    score = emission_report(control, target, params)
    return InversionReport(
        control=control,
        infidelity=1.0 - score.fidelity,
        clamp_fraction=float(np.mean(clamped)),
        residual_population=score.residual_population,
    )


def emission_report(control: ControlEnvelope, target: SampledPulse, params: CavityParams) -> EmissionScore:
    """Simulate the drive from |s>|0> and score the emitted field."""
    if not control.grid.matches(target.grid):
        raise GridError("control and target must share one grid")
    traj = evolve_emission(control, params)
    out = traj.out_pulse
    emitted = out.norm_sq()
    target_norm = target.norm_sq()
    if emitted <= 0.0 or target_norm <= 0.0:
        fidelity = 0.0
        l2_sq = emitted + target_norm
    else:
        cross = abs(overlap(target, out))
        fidelity = cross * cross / (emitted * target_norm)
        l2_sq = max(emitted + target_norm - 2.0 * cross, 0.0)
    return EmissionScore(
        fidelity=fidelity,
        l2_error=math.sqrt(l2_sq),
        emitted_norm_sq=emitted,
        residual_population=traj.residual_population,
    )


def emission_fidelity(control: ControlEnvelope, target: SampledPulse, params: CavityParams) -> float:
    """|<normalized target, normalized simulated output>|^2 in [0, 1]."""
    return emission_report(control, target, params).fidelity


def refine_control(
    seed: ControlEnvelope,
    target: SampledPulse,
    params: CavityParams,
    opts: RefineOptions = RefineOptions(),
) -> InversionReport:
    """Derivative-free polish of a drive against the full model.

    Coordinate descent over log-|drive| values at a coarse knot grid
    (monotone-cubic resampled to the control grid, so positivity of the
    magnitude is structural); the seed's sign pattern is kept.  The result
    is never worse than the seed: if the budget runs out without improving
    on it, the seed comes back with ``improved=False``.
    """
    if not seed.grid.matches(target.grid):
        raise GridError("seed control and target must share one grid")

    def objective(control: ControlEnvelope) -> tuple[float, EmissionScore]:
        score = emission_report(control, target, params)
        return score.l2_error**2, score

    seed_obj, seed_score = objective(seed)
    seed_report = InversionReport(
        control=seed,
        infidelity=1.0 - seed_score.fidelity,
        clamp_fraction=float(np.mean(np.abs(seed.omega) >= CAP_FACTOR * params.g0)),
        residual_population=seed_score.residual_population,
        improved=False,
    )
    if opts.max_evals <= 0:
        return seed_report
    if opts.target_infidelity is not None and 1.0 - seed_score.fidelity <= opts.target_infidelity:
        return seed_report

    grid = seed.grid
    signs = _sign_pattern(seed.omega)
    log_floor = math.log(1e-8 * params.g0)
    knot_t = np.linspace(grid.t_start, grid.t_end, opts.n_knots)
    seed_at_knots = np.interp(knot_t, grid.times, np.abs(seed.omega))
    knots = np.log(np.maximum(seed_at_knots, math.exp(log_floor)))
    cap = CAP_FACTOR * params.g0

    def build(values: np.ndarray) -> ControlEnvelope:
        log_w = PchipInterpolator(knot_t, values)(grid.times)
        return ControlEnvelope(grid, signs * np.minimum(np.exp(log_w), cap))

    evals = 0
    best = knots.copy()
    best_obj, best_score = objective(build(best))
    evals += 1
    step = opts.init_step
    while step >= opts.min_step and evals < opts.max_evals:
        improved_this_sweep = False
        for i in range(opts.n_knots):
            if evals >= opts.max_evals:
                break
            for delta in (step, -step):
                trial = best.copy()
                trial[i] = max(trial[i] + delta, log_floor)
                obj, score = objective(build(trial))
                evals += 1
                if obj < best_obj * (1.0 - 1e-12):
                    best, best_obj, best_score = trial, obj, score
                    improved_this_sweep = True
                    break
                if evals >= opts.max_evals:
                    break
            if (
                opts.target_infidelity is not None
                and 1.0 - best_score.fidelity <= opts.target_infidelity
            ):
                step = 0.0
                break
        if not improved_this_sweep:
            step *= 0.5

    if best_obj >= seed_obj:
        return seed_report
    control = build(best)
    return InversionReport(
        control=control,
        infidelity=1.0 - best_score.fidelity,
        clamp_fraction=float(np.mean(np.abs(control.omega) >= cap)),
        residual_population=best_score.residual_population,
        improved=True,
    )


def catch_control(
    input_target: SampledPulse,
    params: CavityParams,
    refine: RefineOptions | None = None,
) -> ControlEnvelope:
    """Drive that absorbs ``input_target``: invert its time reverse, then flip.

    The emission/absorption pair is related by time reversal, so the drive
    that emits f(t_end - t) absorbs f(t) when played backwards.
    """
    emit_target = input_target.reversed().conjugated()
    report = invert_emission(emit_target, params)
    if refine is not None:
        report = refine_control(report.control, emit_target, params, refine)
    return report.control.reversed()


def extend_with_ramp(
    control: ControlEnvelope,
    input_pulse: SampledPulse | None,
    tail: float,
) -> tuple[ControlEnvelope, SampledPulse | None]:
    """Append a tail of duration ``tail`` where the drive ramps linearly to zero.

    The input pulse (when given) is zero-padded over the tail.  Used before
    measuring the atom: with the drive off, the dark state coincides with
    the atomic storage state, making |c1|^2 the retrieval probability.
    """
    grid = control.grid
    extra = max(int(round(tail / grid.dt)), 1)
    new_grid = make_grid(grid.t_start, grid.t_end + extra * grid.dt, grid.n_samples + extra)
    ramp = np.linspace(control.omega[-1], 0.0, extra + 1)[1:]
    new_control = ControlEnvelope(new_grid, np.concatenate([control.omega, ramp]))
    if input_pulse is None:
        return new_control, None
    padded = np.concatenate([input_pulse.amps, np.zeros(extra, np.complex128)])
    return new_control, SampledPulse(new_grid, padded)


def write_control_csv(
    control: ControlEnvelope,
    params: CavityParams,
    path: str,
    params_path: str | None = None,
    stride: int = 1,
) -> None:
    """Write ``t,omega_over_g0`` rows plus the companion params record.

    The record stores dimensionless ratios only, so reading back assumes
    times are expressed in units of T (the CLI convention, T = 1).
    """
    if stride < 1:
        raise PulseError("stride must be >= 1")
    times = control.grid.times[::stride]
    rows = np.column_stack([times, control.omega[::stride] / params.g0])
    tmp = f"{path}.tmp-{os.getpid()}"
    np.savetxt(tmp, rows, fmt="%.17g", delimiter=",", header="t,omega_over_g0", comments="")
    os.replace(tmp, path)
    if params_path is None:
        params_path = os.path.splitext(path)[0] + "_params.json"
    record = {
        "g0_kappa_ratio": params.g0 / params.kappa,
        "kappa_T": params.kappa * params.T,
        "n": params.n,
        "grid_samples": len(times),
    }
    tmp = f"{params_path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2)
    os.replace(tmp, params_path)


def read_control_csv(path: str, params_path: str) -> tuple[ControlEnvelope, CavityParams]:
    """Read a control written by :func:`write_control_csv` (stride 1 only)."""
    with open(params_path, encoding="utf-8") as fh:
        record = json.load(fh)
    params = CavityParams.from_ratios(
        kappa_T=record["kappa_T"], g0_kappa_ratio=record["g0_kappa_ratio"], n=record["n"], T=1.0
    )
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise PulseError(f"expected 2 columns (t,omega_over_g0) in {path}")
    t = data[:, 0]
    if len(t) != record["grid_samples"]:
        raise GridError(
            f"{path} has {len(t)} rows but params record expects {record['grid_samples']}"
        )
    grid = make_grid(t[0], t[-1], len(t))
    return ControlEnvelope(grid, data[:, 1] * params.g0), params
