"""Run configuration: JSON file -> validated parameter objects.

Conventions (documented per key, no hidden defaults -- the shipped
``default.json`` is the single source):

    kappa_T             cavity decay rate times the bin duration (kappa * T)
    g0_kappa_ratio      atom-cavity coupling over kappa
    n                   pulse horizon in bins; symbols live on [0, nT]
    bin_sigma_T         alphabet bin width sigma, in units of T
    grid_intervals_per_T  grid intervals per T; null = stability default
    stride              CSV decimation factor for bulky outputs
    refine              drive-polish options; "enabled": false skips it
    protocol.*          session size, seed, eavesdropper, thresholds;
                        sender_delay_T in units of T

All times are expressed in units of T; internally T = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .control import RefineOptions
from .dynamics import CavityParams, make_grid, simulation_grid
from .errors import ConfigError
from .protocol import EveStrategy, ProtocolConfig, SecurityThresholds
from .pulses import TimeGrid

__all__ = ["RunConfig", "load_config"]


@dataclass(frozen=True)
class RunConfig:
    params: CavityParams
    bin_sigma: float
    grid_intervals_per_T: int | None
    stride: int
    refine: RefineOptions | None
    protocol_raw: dict

    def grid(self, span_T: float) -> TimeGrid:
        """Uniform grid over [0, span_T * T] at the configured resolution."""
        t_end = span_T * self.params.T
        if self.grid_intervals_per_T is None:
            return simulation_grid(self.params, t_end=t_end)
        intervals = int(round(span_T * self.grid_intervals_per_T))
        return make_grid(0.0, t_end, intervals + 1)

    def protocol(self, alphabet=None, seed: int | None = None) -> ProtocolConfig:
        raw = self.protocol_raw
        return ProtocolConfig(
            n_channels=int(raw["n_channels"]),
            m_check=int(raw["m_check"]),
            payload_bits=raw["payload_bits"],
            seed=int(raw["seed"] if seed is None else seed),
            params=self.params,
            alphabet=alphabet,
            eve=EveStrategy(kind=raw["eve_kind"], intercept_prob=float(raw["intercept_prob"])),
            thresholds=SecurityThresholds(z_crit=float(raw["z_crit"])),
            sender_delay=float(raw["sender_delay_T"]) * self.params.T,
        )


def _default_raw() -> dict:
    with resources.files("pulselink.data").joinpath("default.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def load_config(path: str | None = None) -> RunConfig:
    """Load ``default.json`` and overlay the user's file (if any) on top."""
    raw = _default_raw()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        for key, value in user.items():
            if key not in raw:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(raw[key], dict) and isinstance(value, dict):
                unknown = set(value) - set(raw[key])
                if unknown:
                    raise ConfigError(f"unknown config keys under {key!r}: {sorted(unknown)}")
                raw[key] = {**raw[key], **value}
            else:
                raw[key] = value

    try:
        params = CavityParams.from_ratios(
            kappa_T=float(raw["kappa_T"]),
            g0_kappa_ratio=float(raw["g0_kappa_ratio"]),
            n=int(raw["n"]),
            T=1.0,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    refine_raw = raw["refine"]
    refine = None
    if refine_raw.get("enabled", False):
        refine = RefineOptions(
            n_knots=int(refine_raw["n_knots"]),
            max_evals=int(refine_raw["max_evals"]),
            init_step=float(refine_raw["init_step"]),
            min_step=float(refine_raw["min_step"]),
            target_infidelity=refine_raw["target_infidelity"],
        )

    bin_sigma = float(raw["bin_sigma_T"]) * params.T
    if bin_sigma <= 0:
        raise ConfigError("bin_sigma_T must be positive")
    stride = int(raw["stride"])
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    per_T = raw["grid_intervals_per_T"]
    if per_T is not None and int(per_T) < 2:
        raise ConfigError("grid_intervals_per_T must be >= 2 when set")

    return RunConfig(
        params=params,
        bin_sigma=bin_sigma,
        grid_intervals_per_T=None if per_T is None else int(per_T),
        stride=stride,
        refine=refine,
        protocol_raw=dict(raw["protocol"]),
    )
