"""Protocol mechanics: encoding, measurement, checks, sessions, eavesdroppers."""

import numpy as np
import pytest

from pulselink import (
    CheckReport,
    ConfigError,
    EveStrategy,
    ProtocolConfig,
    SecurityThresholds,
    decide_security,
    encode_bit,
    eve_apply,
    measure_atom,
    run_session,
    transmit_probabilities,
)


def _config(fast_params, fast_alphabet, **kw):
    defaults = dict(
        n_channels=2000,
        m_check=400,
        payload_bits=2000,
        seed=42,
        params=fast_params,
        alphabet=fast_alphabet,
    )
    defaults.update(kw)
    return ProtocolConfig(**defaults)


def test_encode_bit_mapping():
    assert encode_bit(1, "A") == "alpha"
    assert encode_bit(0, "A") == "gamma"
    assert encode_bit(1, "B") == "beta"
    assert encode_bit(0, "B") == "mu"
    with pytest.raises(ValueError):
        encode_bit(2, "A")
    with pytest.raises(ValueError):
        encode_bit(0, "C")


def test_measure_atom_extremes_and_statistics():
    rng = np.random.default_rng(7)
    assert all(measure_atom(0.0, rng) == 0 for _ in range(100))
    assert all(measure_atom(1.0, rng) == 1 for _ in range(100))
    draws = np.array([measure_atom(0.5, rng) for _ in range(100_000)])
    assert abs(draws.mean() - 0.5) < 0.005  # 3 sigma for 1e5 draws
    measure_atom(1.0 + 5e-7, rng)  # tiny excursions are clamped
    with pytest.raises(ValueError):
        measure_atom(1.1, rng)


def _report(r_count, r_rate, nr_count, nr_rate):
    partial = CheckReport(
        r_count=r_count,
        r_ones=round(r_rate * r_count),
        nr_count=nr_count,
        nr_ones=round(nr_rate * nr_count),
        z_r=0.0,
        z_nr=0.0,
        verdict="",
    )
    from pulselink.protocol import _make_check_report

    return _make_check_report(partial.r_count, partial.r_ones, partial.nr_count, partial.nr_ones, SecurityThresholds())


def test_decide_security_accepts_expected_rates():
    report = _report(5000, 0.5, 5000, 0.25)
    assert report.verdict == "pass"
    assert decide_security(report) == "pass"


def test_decide_security_aborts_on_skewed_rates():
    report = _report(1000, 0.75, 1000, 0.25)
    assert report.verdict == "abort"
    assert report.z_r == pytest.approx(15.81, abs=0.02)


def test_decide_security_warns_without_evidence():
    report = _report(0, 0.0, 0, 0.0)
    assert report.verdict == "warn"


def test_transmit_probabilities_match_design_targets(fast_params, fast_cache):
    same = [("alpha", "A"), ("gamma", "A"), ("beta", "B"), ("mu", "B")]
    cross = [("beta", "A"), ("mu", "A"), ("alpha", "B"), ("gamma", "B")]
    for sym, basis in same:
        mid, _ = transmit_probabilities(sym, basis, cache=fast_cache)
        assert mid == pytest.approx(0.5, abs=0.02)
    for sym, basis in cross:
        mid, _ = transmit_probabilities(sym, basis, cache=fast_cache)
        assert mid == pytest.approx(0.25, abs=0.02)
    assert transmit_probabilities("alpha", "A", cache=fast_cache)[1] > 0.95
    assert transmit_probabilities("gamma", "A", cache=fast_cache)[1] < 0.02
    assert transmit_probabilities("beta", "B", cache=fast_cache)[1] > 0.95
    assert transmit_probabilities("mu", "B", cache=fast_cache)[1] < 0.02


def test_eve_apply_identity_without_interception(fast_cache):
    rng = np.random.default_rng(3)
    assert eve_apply(EveStrategy("none"), "alpha", rng, fast_cache) == "alpha"
    off = EveStrategy("intercept_resend_full", intercept_prob=0.0)
    assert not off.active
    assert eve_apply(off, "mu", rng, fast_cache) == "mu"


def test_eve_matched_basis_interception_is_transparent(fast_cache):
    # When the interceptor happens to pick the sender's basis, her readout is
    # (near-)deterministic and the re-emitted symbol reproduces the original.
    for symbol, basis in (("alpha", "A"), ("gamma", "A"), ("beta", "B"), ("mu", "B")):
        p_final = fast_cache.probabilities(symbol, basis)[1]
        outcome = int(p_final > 0.5)
        assert encode_bit(outcome, basis) == symbol
        assert p_final > 0.95 or p_final < 0.05


def test_eve_apply_draws_consistent_resends(fast_cache):
    rng = np.random.default_rng(11)
    strategy = EveStrategy("intercept_resend_full")
    keys = {eve_apply(strategy, "alpha", rng, fast_cache) for _ in range(200)}
    # wrong-basis interceptions re-emit beta or mu; right-basis ones alpha
    assert keys <= {"alpha", "beta", "mu", "gamma"}
    assert "alpha" in keys and ("beta" in keys or "mu" in keys)

    first_bin = EveStrategy("intercept_first_bin")
    keys = {eve_apply(first_bin, "alpha", rng, fast_cache) for _ in range(200)}
    assert keys <= {"bin_a", "bin_b", "vacuum"}
    assert "vacuum" in keys


def test_honest_session_passes_and_decodes(fast_params, fast_alphabet, fast_cache):
    result = run_session(_config(fast_params, fast_alphabet), cache=fast_cache)
    assert result.check.verdict == "pass"
    tr = result.transcript
    survivors = tr.decoded >= 0
    # decoded only on unchecked, matched, unaborted channels
    assert np.all(~tr.checked[survivors])
    assert np.all(tr.match[survivors])
    assert np.all(~tr.aborted[survivors])
    # wrong-basis channels never decode and are stopped
    assert np.all(tr.decoded[~tr.match] < 0)
    assert np.all(tr.aborted[~tr.checked & ~tr.match])
    # checked channels all carry a mid outcome, nobody else does
    assert np.all(tr.mid_outcome[tr.checked] >= 0)
    assert np.all(tr.mid_outcome[~tr.checked] < 0)
    # final outcomes exactly on survivors
    assert np.all((tr.final_outcome >= 0) == survivors)
    # decoding is faithful up to the physics round-trip error
    errors = np.mean(tr.decoded[survivors] != tr.bit_sent[survivors])
    assert errors < 0.02
    assert len(result.decoded_bits) == survivors.sum()


def test_session_determinism(fast_params, fast_alphabet, fast_cache):
    config = _config(fast_params, fast_alphabet)
    a = run_session(config, cache=fast_cache)
    b = run_session(config, cache=fast_cache)
    for field in ("bit_sent", "symbol", "rx_basis", "match", "checked", "mid_outcome", "aborted", "final_outcome", "decoded"):
        assert np.array_equal(getattr(a.transcript, field), getattr(b.transcript, field))
    assert a.check.as_dict() == b.check.as_dict()


def test_receiver_draws_unchanged_by_eve(fast_params, fast_alphabet, fast_cache):
    honest = run_session(_config(fast_params, fast_alphabet), cache=fast_cache)
    attacked = run_session(
        _config(fast_params, fast_alphabet, eve=EveStrategy("intercept_resend_full")),
        cache=fast_cache,
    )
    # party-separated streams: bases and check membership are identical
    assert np.array_equal(honest.transcript.rx_basis, attacked.transcript.rx_basis)
    assert np.array_equal(honest.transcript.checked, attacked.transcript.checked)


def test_full_interception_detected_and_aborts(fast_params, fast_alphabet, fast_cache):
    config = _config(fast_params, fast_alphabet, n_channels=4000, m_check=1000, eve=EveStrategy("intercept_resend_full"))
    result = run_session(config, cache=fast_cache)
    assert result.check.verdict == "abort"
    tr = result.transcript
    assert len(result.decoded_bits) == 0
    assert np.all(tr.final_outcome < 0)
    assert np.all(tr.aborted[~tr.checked])
    assert tr.timeline["second_bin_release"] > tr.timeline["t_r"]


def test_detection_rate_shifts_monotonically_with_interception(fast_params, fast_alphabet, fast_cache):
    rates = []
    for p in (0.0, 0.5, 1.0):
        config = _config(
            fast_params,
            fast_alphabet,
            n_channels=6000,
            m_check=3000,
            eve=EveStrategy("intercept_resend_full", intercept_prob=p),
        )
        rates.append(run_session(config, cache=fast_cache).check.r_rate)
    assert rates[0] > rates[1] > rates[2]
    assert rates[0] == pytest.approx(0.5, abs=0.05)
    assert rates[2] == pytest.approx(0.375, abs=0.05)


def test_empty_check_warns_but_proceeds(fast_params, fast_alphabet, fast_cache):
    result = run_session(_config(fast_params, fast_alphabet, m_check=0), cache=fast_cache)
    assert result.check.verdict == "warn"
    assert len(result.decoded_bits) > 0  # degenerate config still delivers


def test_config_validation(fast_params, fast_alphabet):
    with pytest.raises(ConfigError, match="m_check"):
        _config(fast_params, fast_alphabet, m_check=2000).validate()
    with pytest.raises(ConfigError, match="sender_delay"):
        _config(fast_params, fast_alphabet, sender_delay=1.5 * fast_params.T).validate()
    with pytest.raises(ConfigError, match="payload"):
        _config(fast_params, fast_alphabet, payload_bits=[]).validate()
    with pytest.raises(ConfigError, match="kind"):
        EveStrategy("collective_attack")


def test_explicit_payload_is_tiled(fast_params, fast_alphabet, fast_cache):
    payload = [1, 0, 1, 1]
    result = run_session(
        _config(fast_params, fast_alphabet, n_channels=977, m_check=100, payload_bits=payload),
        cache=fast_cache,
    )
    tr = result.transcript
    expected = np.array([payload[i % 4] for i in range(977)])
    assert np.array_equal(tr.bit_sent, expected)


def test_transcript_csv_format(tmp_path, fast_params, fast_alphabet, fast_cache):
    result = run_session(_config(fast_params, fast_alphabet, n_channels=50, m_check=10), cache=fast_cache)
    path = tmp_path / "transcript.csv"
    result.transcript.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "channel,bit_sent,symbol,rx_basis,match,checked,mid_outcome,aborted,final_outcome,decoded"
    assert len(lines) == 51
    first = lines[1].split(",")
    assert len(first) == 10
    assert first[2] in ("alpha", "beta", "gamma", "mu")
    assert first[3] in ("A", "B")


def test_check_report_json_keys(tmp_path, fast_params, fast_alphabet, fast_cache):
    import json

    result = run_session(_config(fast_params, fast_alphabet), cache=fast_cache)
    path = tmp_path / "check.json"
    result.check.write_json(str(path))
    payload = json.loads(path.read_text())
    assert set(payload) == {"r_count", "r_ones", "nr_count", "nr_ones", "z_r", "z_nr", "verdict"}
