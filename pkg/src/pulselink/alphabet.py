"""Four-symbol time-bin pulse alphabet and its constraint checks.

Each symbol is a unit-norm two-bin pulse on [0, nT]: half the photon in
[0, T], half in [(n-1)T, nT], nothing in between.  Bit value is encoded in
the relative sign of the bins, basis in the temporal mode used inside each
bin (Gaussian for basis A, Gaussian+odd-Hermite superposition for basis B,
which pins the inter-basis bin overlap at exactly 1/sqrt(2)).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CavityParams, simulation_grid
from .errors import AlphabetConstraintError
from .pulses import (
    SampledPulse,
    TimeGrid,
    gaussian_bin,
    hermite_bin,
    overlap,
    overlap_between,
)

__all__ = [
    "PulseAlphabet",
    "ConstraintCheck",
    "ConstraintReport",
    "build_alphabet",
    "validate_alphabet",
    "SYMBOLS",
]

SYMBOLS = ("alpha", "beta", "gamma", "mu")

_INV_2SQRT2 = 1.0 / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class PulseAlphabet:
    """The four symbol pulses plus the bin bookkeeping needed to use them."""

    f_alpha: SampledPulse
    f_beta: SampledPulse
    f_gamma: SampledPulse
    f_mu: SampledPulse
    bin_edges: tuple[float, float]  # (T, (n-1)T)
    bin_sigma: float
    # Unit-norm single-bin modes of each basis; what a first-bin-only
    # interceptor can re-emit.
    first_bin_mode_a: SampledPulse | None = field(repr=False, default=None)
    first_bin_mode_b: SampledPulse | None = field(repr=False, default=None)

    @property
    def grid(self) -> TimeGrid:
        return self.f_alpha.grid

    def pulse(self, symbol: str) -> SampledPulse:
        try:
            return getattr(self, f"f_{symbol}")
        except AttributeError:
            raise KeyError(f"unknown symbol {symbol!r}, expected one of {SYMBOLS}") from None


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    value: float
    expected: float
    tol: float

    @property
    def residual(self) -> float:
        return abs(self.value - self.expected)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "expected": self.expected,
            "residual": self.residual,
            "tol": self.tol,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.as_dict() for c in self.checks]}

    def write_json(self, path: str) -> None:
        tmp = f"{path}.tmp-{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2)
        os.replace(tmp, path)


def build_alphabet(
    params: CavityParams,
    bin_sigma: float | None = None,
    grid: TimeGrid | None = None,
) -> PulseAlphabet:
    """Construct the four symbols on [0, nT] and verify every constraint.

    Basis A uses Gaussian bins x, y centered at T/2 and (n-1/2)T.  Basis B
    uses x' = (x + x_perp)/sqrt2 built from the odd Hermite-Gaussian mode
    x_perp, so <x|x'> = 1/sqrt2 holds by construction.  Bit 1 adds the bins
    in phase, bit 0 with a relative pi phase:

        f_alpha = (x + y)/sqrt2    f_gamma = (x - y)/sqrt2
        f_beta  = (x' + y')/sqrt2  f_mu    = (x' - y')/sqrt2

    Raises :class:`AlphabetConstraintError` (carrying the residual report)
    if any constraint fails, e.g. for a bin_sigma too wide to leave the
    middle window empty.
    """
    T, n = params.T, params.n
    sigma = T / 10.0 if bin_sigma is None else float(bin_sigma)
    if grid is None:
        grid = simulation_grid(params, t_end=n * T)

    c_x = 0.5 * T
    c_y = (n - 0.5) * T
    x = gaussian_bin(c_x, sigma, grid)
    y = gaussian_bin(c_y, sigma, grid)
    x_perp = hermite_bin(c_x, sigma, grid)
    y_perp = hermite_bin(c_y, sigma, grid)
    rt2 = math.sqrt(0.5)
    x_p = SampledPulse(grid, rt2 * (x.amps + x_perp.amps))
    y_p = SampledPulse(grid, rt2 * (y.amps + y_perp.amps))

    alphabet = PulseAlphabet(
        f_alpha=SampledPulse(grid, rt2 * (x.amps + y.amps)).normalized(),
        f_beta=SampledPulse(grid, rt2 * (x_p.amps + y_p.amps)).normalized(),
        f_gamma=SampledPulse(grid, rt2 * (x.amps - y.amps)).normalized(),
        f_mu=SampledPulse(grid, rt2 * (x_p.amps - y_p.amps)).normalized(),
        bin_edges=(T, (n - 1) * T),
        bin_sigma=sigma,
        first_bin_mode_a=x,
        first_bin_mode_b=x_p.normalized(),
    )
    report = validate_alphabet(alphabet)
    if not report.ok:
        raise AlphabetConstraintError(report)
    return alphabet


def validate_alphabet(alphabet: PulseAlphabet) -> ConstraintReport:
    """Evaluate every alphabet constraint; report-only, never raises."""
    t_lo, t_hi = alphabet.bin_edges
    grid = alphabet.grid
    checks: list[ConstraintCheck] = []

    for name in SYMBOLS:
        f = alphabet.pulse(name)
        checks.append(ConstraintCheck(f"unit_norm_{name}", f.norm_sq(), 1.0, 1e-4))
        checks.append(
            ConstraintCheck(f"first_bin_norm_{name}", f.norm_sq_between(grid.t_start, t_lo), 0.5, 1e-3)
        )
        checks.append(
            ConstraintCheck(f"last_bin_norm_{name}", f.norm_sq_between(t_hi, grid.t_end), 0.5, 1e-3)
        )
        i, j = grid.index_of(t_lo), grid.index_of(t_hi)
        quiet = float(np.max(np.abs(f.amps[i + 1 : j]))) if j > i + 1 else 0.0
        checks.append(ConstraintCheck(f"quiet_middle_{name}", quiet / f.peak(), 0.0, 1e-3))

    checks.append(
        ConstraintCheck(
            "first_bin_overlap_alpha_beta",
            abs(overlap_between(alphabet.f_alpha, alphabet.f_beta, grid.t_start, t_lo)),
            _INV_2SQRT2,
            1e-3,
        )
    )
    checks.append(
        ConstraintCheck(
            "first_bin_overlap_gamma_mu",
            abs(overlap_between(alphabet.f_gamma, alphabet.f_mu, grid.t_start, t_lo)),
            _INV_2SQRT2,
            1e-3,
        )
    )
    checks.append(
        ConstraintCheck("orthogonal_alpha_gamma", abs(overlap(alphabet.f_alpha, alphabet.f_gamma)), 0.0, 1e-3)
    )
    checks.append(
        ConstraintCheck("orthogonal_beta_mu", abs(overlap(alphabet.f_beta, alphabet.f_mu)), 0.0, 1e-3)
    )
    return ConstraintReport(tuple(checks))
