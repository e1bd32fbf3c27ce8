"""Command-line front end.

Subcommands: ``alphabet``, ``invert``, ``emit``, ``absorb``, ``catch``,
``figure {fig2|fig3|fig4}``, ``protocol``.  Every command is a pure
function of (config file, seed): identical invocations rewrite identical
bytes.  Exit codes: 0 ok/check passed, 2 usage or config problem,
3 security abort, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .alphabet import build_alphabet, validate_alphabet
from .config import RunConfig, load_config
from .control import (
    catch_control,
    invert_emission,
    read_control_csv,
    refine_control,
    write_control_csv,
)
from .dynamics import evolve_emission, write_trajectory_csv
from .errors import AlphabetConstraintError, ConfigError, PulselinkError
from .figures import absorb_panel, fig2_dataset, fig3_dataset, fig4_dataset
from .protocol import run_session
from .pulses import gaussian_target, read_pulse_csv, three_gaussian_target, write_pulse_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_NUMERICAL = 4

TARGET_NAMES = ("fa", "fb", "alpha", "beta", "gamma", "mu")


def _write_json(payload: dict, path: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    os.replace(tmp, path)


def _resolve_target(name: str, cfg: RunConfig):
    """Named pulse: fa/fb on [0, T], alphabet symbols on [0, nT]."""
    if name == "fa":
        return gaussian_target(cfg.grid(1.0))
    if name == "fb":
        return three_gaussian_target(cfg.grid(1.0))
    if name in ("alpha", "beta", "gamma", "mu"):
        alphabet = build_alphabet(cfg.params, bin_sigma=cfg.bin_sigma, grid=cfg.grid(float(cfg.params.n)))
        return alphabet.pulse(name)
    raise ConfigError(f"unknown target {name!r}; expected one of {TARGET_NAMES} or a CSV path")


def _load_input(args, cfg: RunConfig):
    if args.input in TARGET_NAMES:
        return _resolve_target(args.input, cfg)
    if os.path.exists(args.input):
        return read_pulse_csv(args.input)
    raise ConfigError(f"input {args.input!r} is neither a named target nor an existing CSV")


def cmd_alphabet(args, cfg: RunConfig, out: str) -> int:
    try:
        alphabet = build_alphabet(cfg.params, bin_sigma=cfg.bin_sigma, grid=cfg.grid(float(cfg.params.n)))
    except AlphabetConstraintError as exc:
        exc.report.write_json(os.path.join(out, "alphabet_report.json"))
        print(f"alphabet constraints failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name in ("alpha", "beta", "gamma", "mu"):
        write_pulse_csv(alphabet.pulse(name), os.path.join(out, f"f_{name}.csv"), stride=args.stride)
    validate_alphabet(alphabet).write_json(os.path.join(out, "alphabet_report.json"))
    print(f"alphabet written to {out} (all constraints satisfied)")
    return EXIT_OK


def cmd_invert(args, cfg: RunConfig, out: str) -> int:
    target = _resolve_target(args.target, cfg)
    report = invert_emission(target, cfg.params)
    if cfg.refine is not None and not args.no_refine:
        report = refine_control(report.control, target, cfg.params, cfg.refine)
    base = os.path.join(out, f"control_{args.target}")
    write_control_csv(report.control, cfg.params, f"{base}.csv", f"{base}_params.json")
    _write_json(
        {
            "target": args.target,
            "infidelity": report.infidelity,
            "clamp_fraction": report.clamp_fraction,
            "residual_population": report.residual_population,
            "improved": report.improved,
        },
        f"{base}_report.json",
    )
    print(f"inverted {args.target}: infidelity {report.infidelity:.3e}")
    return EXIT_OK


def cmd_emit(args, cfg: RunConfig, out: str) -> int:
    if args.control:
        control, params = read_control_csv(args.control, args.control_params)
        name = os.path.splitext(os.path.basename(args.control))[0]
    else:
        target = _resolve_target(args.target, cfg)
        report = invert_emission(target, cfg.params)
        if cfg.refine is not None and not args.no_refine:
            report = refine_control(report.control, target, cfg.params, cfg.refine)
        control, params, name = report.control, cfg.params, args.target
    traj = evolve_emission(control, params)
    write_trajectory_csv(traj, os.path.join(out, f"emit_{name}.csv"), stride=args.stride)
    summary = {
        "emitted_norm": traj.out_pulse.norm_sq(),
        "residual_population": traj.residual_population,
    }
    _write_json(summary, os.path.join(out, f"emit_{name}_summary.json"))
    print(f"emitted {name}: norm {summary['emitted_norm']:.6f}")
    return EXIT_OK


def cmd_absorb(args, cfg: RunConfig, out: str) -> int:
    pulse = _load_input(args, cfg)
    input_name = (
        args.input
        if args.input in TARGET_NAMES
        else os.path.splitext(os.path.basename(args.input))[0]
    )
    if args.control:
        control, _ = read_control_csv(args.control, args.control_params)
        catch_name = "file"
    else:
        catch_name = args.catch or input_name
        catch_target = _resolve_target(catch_name, cfg) if catch_name in TARGET_NAMES else None
        if catch_target is None:
            raise ConfigError(f"--catch must name one of {TARGET_NAMES}")
        if not catch_target.grid.matches(pulse.grid):
            raise ConfigError(
                f"input {args.input!r} and catch target {catch_name!r} live on different grids"
            )
        control = catch_control(catch_target, cfg.params, refine=cfg.refine)
    panel = absorb_panel(f"{input_name}_{catch_name}", pulse, control, cfg)
    write_trajectory_csv(panel.trajectory, os.path.join(out, f"absorb_{panel.name}.csv"), stride=args.stride)
    summary = {
        "terminal_amplitude": panel.terminal_amplitude,
        "terminal_probability": panel.final_probability,
        "max_flux_residual": panel.max_flux_residual,
    }
    _write_json(summary, os.path.join(out, f"absorb_{panel.name}_summary.json"))
    print(f"absorbed {args.input} with catch {catch_name}: |c1| = {panel.terminal_amplitude:.4f}")
    return EXIT_OK


def cmd_catch(args, cfg: RunConfig, out: str) -> int:
    target = _resolve_target(args.target, cfg)
    control = catch_control(target, cfg.params, refine=cfg.refine)
    base = os.path.join(out, f"catch_{args.target}")
    write_control_csv(control, cfg.params, f"{base}.csv", f"{base}_params.json")
    print(f"catch drive for {args.target} written to {base}.csv")
    return EXIT_OK


def cmd_figure(args, cfg: RunConfig, out: str) -> int:
    stride = args.stride
    if args.which == "fig2":
        panels, summary = fig2_dataset(cfg)
        for p in panels:
            write_pulse_csv(p.target, os.path.join(out, f"fig2_target_{p.name}.csv"), stride)
            write_control_csv(p.control, cfg.params, os.path.join(out, f"fig2_control_{p.name}.csv"), stride=stride)
            write_trajectory_csv(p.trajectory, os.path.join(out, f"fig2_output_{p.name}.csv"), stride)
    elif args.which == "fig3":
        panels, summary = fig3_dataset(cfg)
        for p in panels:
            write_trajectory_csv(p.trajectory, os.path.join(out, f"fig3_traj_{p.name}.csv"), stride)
    else:
        panels, summary = fig4_dataset(cfg)
        for p in panels:
            write_trajectory_csv(p.trajectory, os.path.join(out, f"fig4_traj_{p.name}.csv"), stride)
            write_pulse_csv(p.input_pulse, os.path.join(out, f"f_{p.name.split('_')[0]}.csv"), stride)
    _write_json(summary, os.path.join(out, f"{args.which}_summary.json"))
    print(f"{args.which} data written to {out}")
    return EXIT_OK


def cmd_protocol(args, cfg: RunConfig, out: str) -> int:
    alphabet = build_alphabet(cfg.params, bin_sigma=cfg.bin_sigma, grid=cfg.grid(float(cfg.params.n)))
    session_config = cfg.protocol(alphabet=alphabet, seed=args.seed)
    result = run_session(session_config)
    result.transcript.to_csv(os.path.join(out, "transcript.csv"))
    result.check.write_json(os.path.join(out, "check_report.json"))
    check = result.check
    print(
        f"verdict {check.verdict}: type r {check.r_ones}/{check.r_count}, "
        f"type nr {check.nr_ones}/{check.nr_count}, decoded {len(result.decoded_bits)} bits"
    )
    return EXIT_ABORT if check.verdict == "abort" else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulselink",
        description="Shaped-photon atom-cavity link: pulse alphabets, drive inversion, "
        "absorption simulation and the time-bin data-transfer protocol.",
    )
    parser.add_argument("--config", help="JSON config overlaying the packaged default")
    parser.add_argument("--seed", type=int, help="override the protocol session seed")
    parser.add_argument("--out", default=".", help="output directory (must exist)")
    parser.add_argument("--stride", type=int, help="CSV decimation factor override")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("alphabet", help="write the four symbol pulses and their constraint report")

    p = sub.add_parser("invert", help="derive the emission drive for a target pulse")
    p.add_argument("--target", required=True, choices=TARGET_NAMES)
    p.add_argument("--no-refine", action="store_true", help="skip the full-model polish")

    p = sub.add_parser("emit", help="simulate emission of a target or a stored drive")
    p.add_argument("--target", choices=TARGET_NAMES)
    p.add_argument("--control", help="drive CSV (with --control-params)")
    p.add_argument("--control-params", help="companion params JSON for --control")
    p.add_argument("--no-refine", action="store_true")

    p = sub.add_parser("absorb", help="simulate absorption of a pulse by a catch drive")
    p.add_argument("--input", required=True, help=f"one of {TARGET_NAMES} or a pulse CSV")
    p.add_argument("--catch", help="named target whose catch drive to use (default: the input)")
    p.add_argument("--control", help="drive CSV (with --control-params)")
    p.add_argument("--control-params", help="companion params JSON for --control")

    p = sub.add_parser("catch", help="derive the absorption drive for a target pulse")
    p.add_argument("--target", required=True, choices=TARGET_NAMES)

    p = sub.add_parser("figure", help="write plot-ready data for one demonstration")
    p.add_argument("which", choices=("fig2", "fig3", "fig4"))

    sub.add_parser("protocol", help="run one protocol session")
    return parser


_COMMANDS = {
    "alphabet": cmd_alphabet,
    "invert": cmd_invert,
    "emit": cmd_emit,
    "absorb": cmd_absorb,
    "catch": cmd_catch,
    "figure": cmd_figure,
    "protocol": cmd_protocol,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.stride is None:
            args.stride = cfg.stride
        elif args.stride < 1:
            raise ConfigError("--stride must be >= 1")
        out = args.out
        if not os.path.isdir(out):
            print(f"output directory does not exist: {out}", file=sys.stderr)
            return EXIT_CONFIG
        if args.command == "emit" and not (args.target or args.control):
            raise ConfigError("emit needs --target or --control")
        if getattr(args, "control", None) and not getattr(args, "control_params", None):
            raise ConfigError("--control requires --control-params")
        return _COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PulselinkError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
