"""Discrete-event Monte-Carlo of the time-bin data-transfer protocol.

One session runs many independent atom-cavity channels.  Per channel the
sender draws a basis, encodes one payload bit as a symbol pulse, and ships
it; the receiver draws a catch basis uniformly from {A, B}.  After the
first time bin a random subset of channels is measured; the observed
one-rates (50% expected when the bases matched, 25% when not) form the
eavesdropping check.  Only when the check passes does the sender release
the second bins, and only unchecked matched-basis channels deliver bits.

All physics enters through a cache of absorption simulations, one per
(effective pulse, receiver basis) pair, so the per-channel work reduces to
Bernoulli draws.  Randomness is counter-based (Philox) with one stream per
party and fixed per-channel draw slots: adding an eavesdropper can never
perturb the receiver's draws, and identical configs reproduce transcripts
byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .alphabet import PulseAlphabet, build_alphabet
from .control import ControlEnvelope, RefineOptions, catch_control, extend_with_ramp
from .dynamics import CavityParams, evolve_absorption, flux_balance
from .errors import ConfigError
from .pulses import SampledPulse

__all__ = [
    "BASES",
    "PULSE_KEYS",
    "EveStrategy",
    "SecurityThresholds",
    "CheckReport",
    "ProtocolConfig",
    "Transcript",
    "SessionResult",
    "PhysicsCache",
    "encode_bit",
    "transmit_probabilities",
    "measure_atom",
    "eve_apply",
    "decide_security",
    "run_session",
]

BASES = ("A", "B")  # A = catch drive of f_alpha, B = catch drive of f_beta
SYMBOL_FOR = {("A", 1): "alpha", ("A", 0): "gamma", ("B", 1): "beta", ("B", 0): "mu"}
BIT_FOR_SYMBOL = {"alpha": 1, "gamma": 0, "beta": 1, "mu": 0}
# Everything a receiver may be handed: the four symbols, a bare first-bin
# mode of either basis (what a first-bin interceptor re-emits), or vacuum.
PULSE_KEYS = ("alpha", "beta", "gamma", "mu", "bin_a", "bin_b", "vacuum")

MEASUREMENT_RAMP_FRACTION = 0.05  # drive ramp-down window before reading the atom

_PARTY_SENDER, _PARTY_RECEIVER, _PARTY_EVE, _PARTY_SESSION, _PARTY_PAYLOAD = range(5)


def encode_bit(bit: int, basis: str) -> str:
    """Symbol carrying ``bit`` in ``basis``: (1,A)->alpha (0,A)->gamma (1,B)->beta (0,B)->mu."""
    try:
        return SYMBOL_FOR[(basis, int(bit))]
    except KeyError:
        raise ValueError(f"bit must be 0/1 and basis one of {BASES}, got ({bit!r}, {basis!r})") from None


@dataclass(frozen=True)
class EveStrategy:
    """Per-photon (individual) attack model.

    ``intercept_resend_full`` catches the whole pulse in a random basis,
    measures the atom at the end, and re-emits that basis's symbol matching
    the outcome.  ``intercept_first_bin`` measures right after the first
    bin and re-emits its basis's bare first-bin mode on outcome 1, vacuum
    on outcome 0.  Each channel is attacked independently with probability
    ``intercept_prob``.
    """

    kind: str = "none"
    intercept_prob: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "intercept_resend_full", "intercept_first_bin"):
            raise ConfigError(f"unknown eavesdropper kind {self.kind!r}")
        if not 0.0 <= self.intercept_prob <= 1.0:
            raise ConfigError(f"intercept_prob must be in [0, 1], got {self.intercept_prob}")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.intercept_prob > 0.0


@dataclass(frozen=True)
class SecurityThresholds:
    z_crit: float = 3.0
    expected_r: float = 0.5
    expected_nr: float = 0.25


@dataclass(frozen=True)
class CheckReport:
    """Mid-protocol check statistics split by basis-match class."""

    r_count: int
    r_ones: int
    nr_count: int
    nr_ones: int
    z_r: float
    z_nr: float
    verdict: str  # pass | abort | warn

    @property
    def r_rate(self) -> float:
        return self.r_ones / self.r_count if self.r_count else math.nan

    @property
    def nr_rate(self) -> float:
        return self.nr_ones / self.nr_count if self.nr_count else math.nan

    def as_dict(self) -> dict:
        return {
            "r_count": self.r_count,
            "r_ones": self.r_ones,
            "nr_count": self.nr_count,
            "nr_ones": self.nr_ones,
            "z_r": self.z_r,
            "z_nr": self.z_nr,
            "verdict": self.verdict,
        }

    def write_json(self, path: str) -> None:
        tmp = f"{path}.tmp-{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2)
        os.replace(tmp, path)


def _z_score(count: int, ones: int, expected: float) -> float:
    if count <= 0:
        return math.nan
    return (ones / count - expected) / math.sqrt(expected * (1.0 - expected) / count)


def decide_security(report: CheckReport, thresholds: SecurityThresholds = SecurityThresholds()) -> str:
    """Two-sided binomial z-test per class; ``warn`` when a class is empty."""
    if report.r_count == 0 or report.nr_count == 0:
        return "warn"
    if abs(report.z_r) > thresholds.z_crit or abs(report.z_nr) > thresholds.z_crit:
        return "abort"
    return "pass"


def _make_check_report(
    r_count: int, r_ones: int, nr_count: int, nr_ones: int, thresholds: SecurityThresholds
) -> CheckReport:
    partial = CheckReport(
        r_count=r_count,
        r_ones=r_ones,
        nr_count=nr_count,
        nr_ones=nr_ones,
        z_r=_z_score(r_count, r_ones, thresholds.expected_r),
        z_nr=_z_score(nr_count, nr_ones, thresholds.expected_nr),
        verdict="",
    )
    return CheckReport(**{**partial.as_dict(), "verdict": decide_security(partial, thresholds)})


def measure_atom(p1: float, rng: np.random.Generator) -> int:
    """Projective atom readout: Bernoulli(p1) from the supplied stream.

    Rejects probabilities outside [0, 1] by more than 1e-6; smaller
    excursions (simulation roundoff) are clamped.
    """
    if p1 < -1e-6 or p1 > 1.0 + 1e-6:
        raise ValueError(f"probability {p1} outside [0, 1]")
    return int(rng.random() < min(max(p1, 0.0), 1.0))


class PhysicsCache:
    """Absorption probabilities per (pulse, receiver basis), solved once.

    Holds the two catch drives (extended with the measurement ramp) and the
    candidate input pulses; each requested pair is simulated through the
    full model and memoised.  ``flux_residuals`` keeps the worst excitation
    bookkeeping error of every simulation for conservation audits.
    """

    def __init__(
        self,
        params: CavityParams,
        alphabet: PulseAlphabet | None = None,
        refine: RefineOptions | None = None,
    ):
        self.params = params
        self.alphabet = build_alphabet(params) if alphabet is None else alphabet
        tail = MEASUREMENT_RAMP_FRACTION * params.T
        self._controls: dict[str, ControlEnvelope] = {}
        for basis, pulse in (("A", self.alphabet.f_alpha), ("B", self.alphabet.f_beta)):
            control = catch_control(pulse, params, refine=refine)
            self._controls[basis], _ = extend_with_ramp(control, None, tail)
        grid = self._controls["A"].grid
        self._mid_index = grid.index_of((1.0 + MEASUREMENT_RAMP_FRACTION) * params.T)
        self._pulses: dict[str, SampledPulse] = {}
        self._probs: dict[tuple[str, str], tuple[float, float]] = {}
        self.flux_residuals: dict[tuple[str, str], float] = {}

    def control(self, basis: str) -> ControlEnvelope:
        return self._controls[basis]

    def effective_pulse(self, key: str) -> SampledPulse:
        """Input pulse for ``key``, zero-padded onto the extended grid."""
        if key not in self._pulses:
            grid = self._controls["A"].grid
            amps = np.zeros(grid.n_samples, np.complex128)
            if key != "vacuum":
                base = {
                    "bin_a": self.alphabet.first_bin_mode_a,
                    "bin_b": self.alphabet.first_bin_mode_b,
                }.get(key) or self.alphabet.pulse(key)
                amps[: base.grid.n_samples] = base.amps
            self._pulses[key] = SampledPulse(grid, amps)
        return self._pulses[key]

    def probabilities(self, key: str, basis: str) -> tuple[float, float]:
        """(p1 at the mid check, p1 at the final readout) for one pairing."""
        pair = (key, basis)
        if pair not in self._probs:
            pulse = self.effective_pulse(key)
            traj = evolve_absorption(self._controls[basis], self.params, pulse)
            p_mid = float(abs(traj.c1[self._mid_index]) ** 2)
            p_final = float(abs(traj.c1[-1]) ** 2)
            self._probs[pair] = (p_mid, p_final)
            self.flux_residuals[pair] = float(np.max(np.abs(flux_balance(traj, pulse))))
        return self._probs[pair]


def transmit_probabilities(
    symbol: str,
    receiver_basis: str,
    eve: EveStrategy = EveStrategy(),
    params: CavityParams | None = None,
    alphabet: PulseAlphabet | None = None,
    cache: PhysicsCache | None = None,
    eve_rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Receiver's (mid, final) one-probabilities for one transmitted symbol.

    With an active eavesdropper the per-photon attack is resolved first
    (drawing from ``eve_rng``), then the effective pulse is scored against
    the receiver's catch basis.
    """
    if cache is None:
        if params is None:
            raise ConfigError("either a cache or params must be provided")
        cache = PhysicsCache(params, alphabet)
    key = eve_apply(eve, symbol, eve_rng, cache)
    return cache.probabilities(key, receiver_basis)


def eve_apply(
    strategy: EveStrategy,
    symbol: str,
    rng: np.random.Generator | None,
    cache: PhysicsCache,
) -> str:
    """Resolve one channel's attack; returns the key of the pulse the receiver sees."""
    if not strategy.active:
        return symbol
    if rng is None:
        raise ConfigError("an active eavesdropper needs an rng stream")
    if rng.random() >= strategy.intercept_prob:
        return symbol
    basis = BASES[int(rng.random() >= 0.5)]
    if strategy.kind == "intercept_resend_full":
        outcome = measure_atom(cache.probabilities(symbol, basis)[1], rng)
        return encode_bit(outcome, basis)
    # intercept_first_bin: measured after bin one, re-emit that basis's bin
    # mode on 1, nothing on 0.
    outcome = measure_atom(cache.probabilities(symbol, basis)[0], rng)
    if not outcome:
        return "vacuum"
    return "bin_a" if basis == "A" else "bin_b"


@dataclass(frozen=True)
class ProtocolConfig:
    """One session's worth of knobs.

    ``payload_bits`` may be an explicit 0/1 sequence (assigned to channels
    cyclically) or an integer count of random bits drawn from the payload
    stream of ``seed``.  ``sender_delay`` is the extra fiber delay on the
    sender side; the timing soundness condition sender_delay > t_r + T
    (checked here) guarantees no second bin has left the sender when the
    check verdict lands.
    """

    n_channels: int
    m_check: int
    payload_bits: object
    seed: int
    params: CavityParams
    alphabet: PulseAlphabet | None = None
    eve: EveStrategy = EveStrategy()
    thresholds: SecurityThresholds = SecurityThresholds()
    sender_delay: float | None = None

    def resolved_delay(self) -> float:
        return 2.5 * self.params.T if self.sender_delay is None else self.sender_delay

    def check_time(self) -> float:
        """t_r: the mid check happens after bin one plus the drive ramp."""
        return (1.0 + MEASUREMENT_RAMP_FRACTION) * self.params.T

    def validate(self) -> None:
        if self.n_channels < 1:
            raise ConfigError("n_channels must be >= 1")
        if not 0 <= self.m_check < self.n_channels:
            raise ConfigError(f"need 0 <= m_check < n_channels, got m={self.m_check}, n={self.n_channels}")
        if isinstance(self.payload_bits, (int, np.integer)):
            if self.payload_bits < 1:
                raise ConfigError("payload bit count must be >= 1")
        else:
            bits = np.asarray(self.payload_bits)
            if bits.size == 0 or not np.all(np.isin(bits, (0, 1))):
                raise ConfigError("payload_bits must be a non-empty sequence of 0/1")
        t_r = self.check_time()
        if self.resolved_delay() <= t_r + self.params.T:
            raise ConfigError(
                f"sender_delay {self.resolved_delay():g} must exceed t_r + T = "
                f"{t_r + self.params.T:g}; second bins would escape before the check"
            )


@dataclass(frozen=True)
class Transcript:
    """Per-channel protocol record plus the session timeline."""

    channel: np.ndarray
    bit_sent: np.ndarray
    symbol: np.ndarray
    rx_basis: np.ndarray
    match: np.ndarray
    checked: np.ndarray
    mid_outcome: np.ndarray  # -1 when not measured
    aborted: np.ndarray
    final_outcome: np.ndarray  # -1 when absent
    decoded: np.ndarray  # -1 when absent
    timeline: dict = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        tmp = f"{path}.tmp-{os.getpid()}"
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("channel,bit_sent,symbol,rx_basis,match,checked,mid_outcome,aborted,final_outcome,decoded\n")
            for i in range(len(self.channel)):
                mid = "" if self.mid_outcome[i] < 0 else str(self.mid_outcome[i])
                fin = "" if self.final_outcome[i] < 0 else str(self.final_outcome[i])
                dec = "" if self.decoded[i] < 0 else str(self.decoded[i])
                fh.write(
                    f"{self.channel[i]},{self.bit_sent[i]},{self.symbol[i]},{self.rx_basis[i]},"
                    f"{self.match[i]:d},{self.checked[i]:d},{mid},{self.aborted[i]:d},{fin},{dec}\n"
                )
        os.replace(tmp, path)


@dataclass(frozen=True)
class SessionResult:
    transcript: Transcript
    check: CheckReport
    decoded_bits: np.ndarray


def _stream(seed: int, party: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(party,))))


def _resolve_payload(config: ProtocolConfig) -> np.ndarray:
    if isinstance(config.payload_bits, (int, np.integer)):
        return _stream(config.seed, _PARTY_PAYLOAD).integers(0, 2, int(config.payload_bits))
    return np.asarray(config.payload_bits, dtype=np.int64)


def run_session(config: ProtocolConfig, cache: PhysicsCache | None = None) -> SessionResult:
    """Execute one full protocol session; deterministic in (config, seed)."""
    config.validate()
    if cache is None:
        cache = PhysicsCache(config.params, config.alphabet)

    n = config.n_channels
    payload = _resolve_payload(config)
    bits = payload[np.arange(n) % len(payload)]

    # Fixed draw slots per channel and party; outcomes can shift probabilities
    # but never which uniform lands where.
    snd_u = _stream(config.seed, _PARTY_SENDER).random(n)
    rx_u = _stream(config.seed, _PARTY_RECEIVER).random((n, 3))
    eve_u = _stream(config.seed, _PARTY_EVE).random((n, 3))
    checked_idx = _stream(config.seed, _PARTY_SESSION).permutation(n)[: config.m_check]

    sender_basis = np.where(snd_u < 0.5, "A", "B")
    symbols = np.array([encode_bit(b, s) for b, s in zip(bits, sender_basis)])
    rx_basis = np.where(rx_u[:, 0] < 0.5, "A", "B")
    match = sender_basis == rx_basis

    key_index = {k: i for i, k in enumerate(PULSE_KEYS)}
    eff_idx = np.array([key_index[s] for s in symbols])
    if config.eve.active:
        intercepted = eve_u[:, 0] < config.eve.intercept_prob
        eve_basis = np.where(eve_u[:, 1] < 0.5, "A", "B")
        eve_slot = 1 if config.eve.kind == "intercept_resend_full" else 0
        for i in np.flatnonzero(intercepted):
            p_eve = cache.probabilities(symbols[i], eve_basis[i])[eve_slot]
            outcome = int(eve_u[i, 2] < min(max(p_eve, 0.0), 1.0))
            if config.eve.kind == "intercept_resend_full":
                key = encode_bit(outcome, eve_basis[i])
            elif not outcome:
                key = "vacuum"
            else:
                key = "bin_a" if eve_basis[i] == "A" else "bin_b"
            eff_idx[i] = key_index[key]

    # Gather probabilities through the cache (unique pairs only get solved once).
    basis_idx = (rx_basis == "B").astype(np.int64)
    p_mid = np.empty(n)
    p_final = np.empty(n)
    for k in np.unique(eff_idx):
        for b in (0, 1):
            mask = (eff_idx == k) & (basis_idx == b)
            if np.any(mask):
                pm, pf = cache.probabilities(PULSE_KEYS[k], BASES[b])
                p_mid[mask] = min(max(pm, 0.0), 1.0)
                p_final[mask] = min(max(pf, 0.0), 1.0)

    checked = np.zeros(n, dtype=bool)
    checked[checked_idx] = True
    mid_outcome = np.full(n, -1, dtype=np.int64)
    mid_outcome[checked] = (rx_u[checked, 1] < p_mid[checked]).astype(np.int64)

    r_mask = checked & match
    nr_mask = checked & ~match
    report = _make_check_report(
        int(r_mask.sum()),
        int(mid_outcome[r_mask].sum()),
        int(nr_mask.sum()),
        int(mid_outcome[nr_mask].sum()),
        config.thresholds,
    )

    t_r = config.check_time()
    timeline = {
        "t_mid": t_r,
        "t_r": t_r,
        "second_bin_release": config.resolved_delay() - config.params.T,
        "verdict": report.verdict,
    }

    final_outcome = np.full(n, -1, dtype=np.int64)
    decoded = np.full(n, -1, dtype=np.int64)
    if report.verdict == "abort":
        # Global stop: every unchecked second bin stays inside the sender's
        # delay line (guaranteed by the validated timing), nothing decoded.
        aborted = ~checked
        timeline["aborted_at"] = t_r
    else:
        aborted = ~checked & ~match
        survivors = ~checked & match
        final_outcome[survivors] = (rx_u[survivors, 2] < p_final[survivors]).astype(np.int64)
        decoded[survivors] = final_outcome[survivors]

    transcript = Transcript(
        channel=np.arange(n, dtype=np.int64),
        bit_sent=bits.astype(np.int64),
        symbol=symbols,
        rx_basis=rx_basis,
        match=match,
        checked=checked,
        mid_outcome=mid_outcome,
        aborted=aborted,
        final_outcome=final_outcome,
        decoded=decoded,
        timeline=timeline,
    )
    return SessionResult(
        transcript=transcript,
        check=report,
        decoded_bits=decoded[decoded >= 0].copy(),
    )
