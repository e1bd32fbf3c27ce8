"""Command-line interface: artifacts, exit codes, determinism."""

import json
import os

import pytest

from pulselink.cli import main
from pulselink.config import load_config
from pulselink.pulses import gaussian_target, read_pulse_csv, write_pulse_csv

FAST_CONFIG = {
    "kappa_T": 100.0,
    "g0_kappa_ratio": 25.0,
    "stride": 500,
    "refine": {"enabled": False},
    "protocol": {"n_channels": 400, "m_check": 100, "payload_bits": 400, "seed": 42},
}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(FAST_CONFIG))
    return str(path)


@pytest.fixture
def out_dir(tmp_path):
    d = tmp_path / "out"
    d.mkdir()
    return str(d)


def _run(*argv):
    return main(list(argv))


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        _run("--help")
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        _run("protocol", "--help")
    assert exc.value.code == 0


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        _run("alphabet", "--frobnicate")
    assert exc.value.code == 2


def test_missing_output_dir_exits_two(cfg_path, tmp_path, capsys):
    missing = str(tmp_path / "nope")
    assert _run("--config", cfg_path, "--out", missing, "alphabet") == 2
    assert missing in capsys.readouterr().err


def test_bad_config_exits_two(tmp_path, out_dir):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kappa_T": -5}))
    assert _run("--config", str(bad), "--out", out_dir, "alphabet") == 2
    bad.write_text(json.dumps({"made_up_key": 1}))
    assert _run("--config", str(bad), "--out", out_dir, "alphabet") == 2


def test_alphabet_writes_pulses_and_report(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "alphabet") == 0
    for name in ("alpha", "beta", "gamma", "mu"):
        assert os.path.exists(os.path.join(out_dir, f"f_{name}.csv"))
    report = json.loads(open(os.path.join(out_dir, "alphabet_report.json")).read())
    assert report["ok"]
    assert all(c["passed"] for c in report["checks"])


def test_alphabet_constraint_failure_exits_four(tmp_path, out_dir):
    cfg = dict(FAST_CONFIG, bin_sigma_T=1.0)
    path = tmp_path / "wide.json"
    path.write_text(json.dumps(cfg))
    with pytest.warns(UserWarning):
        code = _run("--config", str(path), "--out", out_dir, "alphabet")
    assert code == 4
    report = json.loads(open(os.path.join(out_dir, "alphabet_report.json")).read())
    assert not report["ok"]
    failed = {c["name"] for c in report["checks"] if not c["passed"]}
    assert any(name.startswith("quiet_middle") for name in failed)


def test_invert_emit_and_catch(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "invert", "--target", "fa") == 0
    assert os.path.exists(os.path.join(out_dir, "control_fa.csv"))
    assert os.path.exists(os.path.join(out_dir, "control_fa_params.json"))
    report = json.loads(open(os.path.join(out_dir, "control_fa_report.json")).read())
    assert report["infidelity"] < 1e-2

    assert _run("--config", cfg_path, "--out", out_dir, "emit", "--target", "fa") == 0
    summary = json.loads(open(os.path.join(out_dir, "emit_fa_summary.json")).read())
    assert summary["emitted_norm"] > 0.99

    assert _run("--config", cfg_path, "--out", out_dir, "catch", "--target", "fa") == 0
    assert os.path.exists(os.path.join(out_dir, "catch_fa.csv"))


def test_emit_from_stored_control(cfg_path, out_dir):
    _run("--config", cfg_path, "--out", out_dir, "invert", "--target", "fa")
    code = _run(
        "--config", cfg_path, "--out", out_dir, "emit",
        "--control", os.path.join(out_dir, "control_fa.csv"),
        "--control-params", os.path.join(out_dir, "control_fa_params.json"),
    )
    assert code == 0
    assert _run("--config", cfg_path, "--out", out_dir, "emit") == 2  # neither target nor control


def test_absorb_matched_and_crossed(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "absorb", "--input", "fa") == 0
    matched = json.loads(open(os.path.join(out_dir, "absorb_fa_fa_summary.json")).read())
    assert matched["terminal_amplitude"] == pytest.approx(1.0, abs=0.05)
    assert _run("--config", cfg_path, "--out", out_dir, "absorb", "--input", "fb", "--catch", "fa") == 0
    crossed = json.loads(open(os.path.join(out_dir, "absorb_fb_fa_summary.json")).read())
    assert crossed["terminal_amplitude"] == pytest.approx(0.707, abs=0.05)


def test_absorb_pulse_csv_input(cfg_path, out_dir):
    cfg = load_config(cfg_path)
    pulse_path = os.path.join(out_dir, "input.csv")
    write_pulse_csv(gaussian_target(cfg.grid(1.0)), pulse_path)
    assert read_pulse_csv(pulse_path).grid.matches(cfg.grid(1.0))
    code = _run("--config", cfg_path, "--out", out_dir, "absorb", "--input", pulse_path, "--catch", "fa")
    assert code == 0


def test_figure_fig2_summary(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "figure", "fig2") == 0
    summary = json.loads(open(os.path.join(out_dir, "fig2_summary.json")).read())
    assert summary["fidelity_a"] > 0.99
    assert summary["fidelity_b"] > 0.99
    assert summary["overlap_ab"] == pytest.approx(0.7071, abs=1e-3)
    for name in ("a", "b"):
        for kind in ("target", "control", "output"):
            assert os.path.exists(os.path.join(out_dir, f"fig2_{kind}_{name}.csv"))


def test_figure_fig3_summary(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "figure", "fig3") == 0
    summary = json.loads(open(os.path.join(out_dir, "fig3_summary.json")).read())
    assert summary["c_aa"] == pytest.approx(1.0, abs=0.05)
    assert summary["c_ba"] == pytest.approx(0.707, abs=0.05)
    for pair in ("aa", "bb", "ba", "ab"):
        assert os.path.exists(os.path.join(out_dir, f"fig3_traj_{pair}.csv"))


def test_figure_fig4_summary(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "figure", "fig4") == 0
    summary = json.loads(open(os.path.join(out_dir, "fig4_summary.json")).read())
    assert summary["alphabet_ok"]
    assert summary["mid"]["alpha_A"] == pytest.approx(0.5, abs=0.05)
    assert summary["mid"]["beta_A"] == pytest.approx(0.25, abs=0.05)
    assert summary["final"]["alpha_A"] == pytest.approx(1.0, abs=0.05)
    assert summary["final"]["gamma_A"] == pytest.approx(0.0, abs=0.02)
    assert os.path.exists(os.path.join(out_dir, "fig4_traj_mu_B.csv"))


def test_protocol_honest_run_exits_zero(cfg_path, out_dir):
    assert _run("--config", cfg_path, "--out", out_dir, "protocol") == 0
    assert os.path.exists(os.path.join(out_dir, "transcript.csv"))
    check = json.loads(open(os.path.join(out_dir, "check_report.json")).read())
    assert check["verdict"] in ("pass", "warn")


def test_protocol_with_eavesdropper_exits_three(tmp_path, out_dir):
    cfg = dict(FAST_CONFIG)
    cfg["protocol"] = dict(cfg["protocol"], eve_kind="intercept_resend_full", n_channels=2000, m_check=600)
    path = tmp_path / "eve.json"
    path.write_text(json.dumps(cfg))
    assert _run("--config", str(path), "--out", out_dir, "protocol") == 3
    check = json.loads(open(os.path.join(out_dir, "check_report.json")).read())
    assert check["verdict"] == "abort"


def test_protocol_unsound_timing_exits_two(tmp_path, out_dir, capsys):
    cfg = dict(FAST_CONFIG)
    cfg["protocol"] = dict(cfg["protocol"], sender_delay_T=1.5)
    path = tmp_path / "short_delay.json"
    path.write_text(json.dumps(cfg))
    assert _run("--config", str(path), "--out", out_dir, "protocol") == 2
    assert "sender_delay" in capsys.readouterr().err


def test_protocol_reruns_are_byte_identical(cfg_path, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    out1.mkdir()
    out2.mkdir()
    assert _run("--config", cfg_path, "--out", str(out1), "protocol", ) == 0
    assert _run("--config", cfg_path, "--out", str(out2), "protocol") == 0
    assert (out1 / "transcript.csv").read_bytes() == (out2 / "transcript.csv").read_bytes()
    assert (out1 / "check_report.json").read_bytes() == (out2 / "check_report.json").read_bytes()


def test_seed_flag_changes_transcript(cfg_path, tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    out1.mkdir()
    out2.mkdir()
    _run("--config", cfg_path, "--out", str(out1), "--seed", "1", "protocol")
    _run("--config", cfg_path, "--out", str(out2), "--seed", "2", "protocol")
    assert (out1 / "transcript.csv").read_bytes() != (out2 / "transcript.csv").read_bytes()


def test_stride_controls_csv_size(cfg_path, out_dir, tmp_path):
    _run("--config", cfg_path, "--out", out_dir, "--stride", "5000", "alphabet")
    n_coarse = len(open(os.path.join(out_dir, "f_alpha.csv")).readlines())
    other = tmp_path / "fine"
    other.mkdir()
    _run("--config", cfg_path, "--out", str(other), "--stride", "1000", "alphabet")
    n_fine = len(open(os.path.join(str(other), "f_alpha.csv")).readlines())
    assert n_fine > 4 * (n_coarse - 1)
