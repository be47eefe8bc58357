"""Command-line front end.

    sim run <scenario.yaml> [--seed N] [--out DIR] [--phy-fidelity packet|sample]
    sim validate <scenario.yaml>
    sim sweep <scenario.yaml> --param dotted.key --values a,b,c [--out DIR]
    sim ber-curve --snr-min -4 --snr-max 24 --step 2 --bits 1000000 [--coded] [--out DIR]

Exit codes: 0 success, 2 validation error, 3 invariant violation.
The SIM_OUT environment variable supplies the default output directory.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import channel as chan
from .engine.scenario import dump_effective, load_scenario, scenario_from_dict
from .engine.simulation import run_scenario
from .errors import InvariantViolation, ScenarioValidationError, SimError
from .io_utils import write_csv, write_json
from .phy.chain import measure_coded_ber, measure_uncoded_ber
from .rng import stream

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3


def _default_out() -> str:
    return os.environ.get("SIM_OUT", "sim_out")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write metric artifacts")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--phy-fidelity", choices=("packet", "sample"), default=None)

    p_val = sub.add_parser("validate", help="validate a scenario and echo the effective config")
    p_val.add_argument("scenario", type=Path)

    p_sweep = sub.add_parser("sweep", help="run a scenario once per value of one parameter")
    p_sweep.add_argument("scenario", type=Path)
    p_sweep.add_argument("--param", required=True, help="dotted key, e.g. channel.snr_db")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", type=Path, default=None)

    p_ber = sub.add_parser("ber-curve", help="Monte Carlo BER over an SNR grid vs the closed form")
    p_ber.add_argument("--snr-min", type=float, default=-4.0)
    p_ber.add_argument("--snr-max", type=float, default=24.0)
    p_ber.add_argument("--step", type=float, default=2.0)
    p_ber.add_argument("--bits", type=int, default=1_000_000)
    p_ber.add_argument("--seed", type=int, default=0)
    p_ber.add_argument("--coded", action="store_true", help="also run the coded sample-level chain")
    p_ber.add_argument("--out", type=Path, default=None)
    return parser


def _parse_scalar(text: str):
    return yaml.safe_load(text)


def _set_dotted(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for key in keys[:-1]:
        if not isinstance(cur.get(key), dict):
            raise ScenarioValidationError([f"{dotted}: no such parameter"])
        cur = cur[key]
    if keys[-1] not in cur:
        raise ScenarioValidationError([f"{dotted}: no such parameter"])
    cur[keys[-1]] = value


def _cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    raw = cfg.effective_dict()
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.phy_fidelity is not None:
        raw["phy_fidelity"] = args.phy_fidelity
    cfg = scenario_from_dict(raw)
    out = args.out or Path(_default_out())
    metrics = run_scenario(cfg, out)
    summary = metrics.summary()
    print(f"run {summary['run_id']}: packets={summary['packets']} "
          f"mean_ber={summary['mean_ber']:.6g} artifacts in {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_scenario(args.scenario)
    sys.stdout.write(dump_effective(cfg))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    base = load_scenario(args.scenario).effective_dict()
    out = args.out or Path(_default_out())
    rows = []
    for text in args.values.split(","):
        value = _parse_scalar(text)
        raw = scenario_from_dict(base).effective_dict()
        _set_dotted(raw, args.param, value)
        cfg = scenario_from_dict(raw)
        subdir = out / f"{args.param.replace('.', '_')}={text}"
        metrics = run_scenario(cfg, subdir)
        summary = metrics.summary()
        rows.append((text, summary["packets"], summary["mean_ber"], summary["total_bits"]))
        print(f"{args.param}={text}: packets={summary['packets']} mean_ber={summary['mean_ber']:.6g}")
    write_csv(out / "sweep_summary.csv", (args.param, "packets", "mean_ber", "total_bits"), rows)
    return EXIT_OK


def _cmd_ber_curve(args) -> int:
    if args.step <= 0 or args.snr_max < args.snr_min or args.bits < 4:
        raise ScenarioValidationError(["ber-curve: need step > 0, snr-max >= snr-min, bits >= 4"])
    out = args.out or Path(_default_out())
    grid = np.arange(args.snr_min, args.snr_max + args.step / 2, args.step)
    rows = []
    for snr in grid:
        snr = float(snr)
        measured = measure_uncoded_ber(snr, args.bits, stream(args.seed, "ber-curve", snr))
        analytic = chan.analytic_ber_16qam(snr)
        row = [snr, measured, analytic]
        if args.coded:
            row.append(
                measure_coded_ber(snr, args.bits, stream(args.seed, "ber-curve-coded", snr))
            )
        rows.append(tuple(row))
        print(f"snr={snr:+.1f} dB: measured={measured:.3e} analytic={analytic:.3e}"
              + (f" coded={row[3]:.3e}" if args.coded else ""))
    header = ["snr_db", "ber_measured", "ber_analytic"] + (["ber_coded"] if args.coded else [])
    write_csv(out / "ber_curve.csv", header, rows)
    write_json(out / "ber_curve_meta.json", {"bits": args.bits, "seed": args.seed})
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "sweep": _cmd_sweep,
        "ber-curve": _cmd_ber_curve,
    }
    try:
        return handlers[args.command](args)
    except ScenarioValidationError as exc:
        for err in exc.errors:
            print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
