"""
Command-line front end

Sub-commands:
    analyze     closed-form rates, output variances and fidelity at one point
    sweep       (eta1, eta2) surfaces (--fig 2 or 3) or the delta_i envelope (--fig 4)
    simulate    seeded Monte Carlo session with optional attack
    thresholds  loss threshold eta* and critical fidelity F_c

Usage:
    python -m pingpong_qkd analyze --eta1 0.9 --eta2 0.9
    python -m pingpong_qkd sweep --fig 4 --out envelope.csv
    python -m pingpong_qkd simulate --eta 0.9 --n-runs 100000 --seed 7
"""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import dotenv_values
from pydantic import ValidationError

from .adversary import eve_snr, optimal_k
from .analysis import (
    delta_i_vs_fidelity,
    fidelity_at,
    output_variances,
    rate_point,
    snr_ab,
    sweep_fig2,
    sweep_fig3,
    thresholds,
)
from .errors import EXIT_CODES, PingPongError, UsageError
from .models import (
    AttackConfig,
    BeamSplitterAttack,
    Command,
    LossyLineAttack,
    NoAttack,
    OutputFormat,
    ProtocolParams,
    RunConfig,
)
from .protocol import derive_sigma, run_session

logger = logging.getLogger(__name__)

RATE_HEADER = ["eta1", "eta2", "i_ab_bits", "i_ae_bits", "delta_i_bits", "fidelity"]
ENVELOPE_HEADER = ["fidelity_bin", "delta_i_min_bits"]
RUNS_HEADER = ["basis", "alpha", "x", "bob_measurement", "disclosed"]

MIN_SIMULATION_RUNS = 100

# Config-file spellings that differ from the RunConfig field names.
KEY_ALIASES = {"out": "output_path", "output": "output_path"}

EXIT_CODE_HELP = """exit codes:
  0  ok (an abort decision of simulate is a result, not a failure)
  2  parameter domain or usage error
  3  I/O failure
  4  estimation error (too few disclosed runs)
  5  solver error (no sign change / no critical fidelity)
"""


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def _format_number(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_number(value) for value in row])
    return buffer.getvalue()


def render_json(payload: Any) -> str:
    return json.dumps(payload, indent=2) + "\n"


def write_output(text: str, path: Optional[str]) -> None:
    """Write to ``path`` (UTF-8, LF endings) or to stdout when no path is given."""
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    logger.info(f"✓ Wrote {path}")


def read_config_file(path: str) -> Dict[str, str]:
    """
    Parse a key=value config file.

    Keys may use '-' or '_'. Nothing is exported to the environment.

    Raises:
        FileNotFoundError: If the file does not exist
    """
    if not Path(path).is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        name = key.strip().lower().replace("-", "_")
        name = KEY_ALIASES.get(name, name)
        if value is None or value == "":
            continue
        values[name] = value
    logger.debug(f"Loaded {len(values)} settings from {path}")
    return values


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the --config file and command-line flags, in that order."""
    values: Dict[str, Any] = {}
    if args.config:
        values.update(read_config_file(args.config))
        # A file-level eta is only a default for both legs; --eta1/--eta2 still win.
        if "eta" in values:
            file_eta = values.pop("eta")
            values.setdefault("eta1", file_eta)
            values.setdefault("eta2", file_eta)
    for field in RunConfig.model_fields:
        flag_value = getattr(args, field, None)
        if field != "command" and flag_value is not None:
            values[field] = flag_value
    values["command"] = args.command
    return RunConfig(**values)


def attack_from_config(config: RunConfig) -> AttackConfig:
    if config.eta is not None:
        return LossyLineAttack(eta=config.eta)
    if config.eta1 < 1.0 or config.eta2 < 1.0 or config.k is not None:
        return BeamSplitterAttack(eta1=config.eta1, eta2=config.eta2, k=config.k)
    return NoAttack()


def cmd_analyze(config: RunConfig) -> Dict[str, Any]:
    """Closed-form report at one (eta1, eta2)."""
    sigma2 = derive_sigma(config.r)
    point = rate_point(config.r, config.sigma_prime2, config.eta1, config.eta2, k=config.k)
    v1, v2 = output_variances(config.r, sigma2, config.sigma_prime2, config.eta1, config.eta2)
    k = config.k if config.k is not None else optimal_k(config.r, config.eta1, config.eta2)
    report = {
        "r": config.r,
        "sigma_prime2": config.sigma_prime2,
        "eta1": config.eta1,
        "eta2": config.eta2,
        "i_ab_bits": point.i_ab,
        "i_ae_bits": point.i_ae,
        "delta_i_bits": point.delta_i,
        "snr_ab": snr_ab(config.r, config.sigma_prime2, config.eta1, config.eta2),
        "eve_snr": eve_snr(config.r, config.sigma_prime2, config.eta1, config.eta2, k),
        "k": k,
        "v1": v1,
        "v2": v2,
        "fidelity": point.fidelity,
        "secure": bool(point.delta_i > 0),
    }
    logger.info(f"✓ delta_i={point.delta_i:.6g} bits, F={point.fidelity:.6g} at ({config.eta1}, {config.eta2})")
    write_output(render_json(report), config.output_path)
    return report


def cmd_sweep(config: RunConfig) -> List[Dict[str, float]]:
    """Figure tables: rate surfaces or the delta_i envelope."""
    if config.fig == 4:
        envelope = delta_i_vs_fidelity(config.r, config.sigma_prime2, config.grid_n, config.bins)
        header = ENVELOPE_HEADER
        rows = [[point.fidelity_bin, point.delta_i_min] for point in envelope]
    else:
        sweep = sweep_fig2 if config.fig == 2 else sweep_fig3
        points = sweep(config.r, config.sigma_prime2, config.grid_n)
        header = RATE_HEADER
        rows = [[p.eta1, p.eta2, p.i_ab, p.i_ae, p.delta_i, p.fidelity] for p in points]

    table = [dict(zip(header, row)) for row in rows]
    if config.format == OutputFormat.json:
        write_output(render_json(table), config.output_path)
    else:
        write_output(render_csv(header, rows), config.output_path)
    logger.info(f"✓ Figure {config.fig} table with {len(rows)} rows")
    return table


def cmd_simulate(config: RunConfig) -> Dict[str, Any]:
    """
    Seeded Monte Carlo session.

    An abort (estimated fidelity below --f-critical) is reported in the
    summary; the command still succeeds.
    """
    if config.n_runs < MIN_SIMULATION_RUNS:
        raise UsageError(f"simulate needs at least {MIN_SIMULATION_RUNS} runs, got {config.n_runs}")
    params = ProtocolParams(
        r=config.r,
        sigma_prime2=config.sigma_prime2,
        n_runs=config.n_runs,
        disclosure_fraction=config.disclosure_fraction,
    )
    attack = attack_from_config(config)
    result = run_session(params, attack, config.seed)
    eta1, eta2 = attack.transmittances()

    abort = bool(result.empirical_fidelity < config.f_critical)
    if abort:
        logger.warning(f"✗ Eavesdropping detected: F={result.empirical_fidelity:.6g} < {config.f_critical}")
    summary = {
        "empirical_snr": result.empirical_snr,
        "empirical_mutual_info_bits": result.empirical_mutual_info_bits,
        "empirical_fidelity": result.empirical_fidelity,
        "analytic_snr": snr_ab(config.r, config.sigma_prime2, eta1, eta2),
        "analytic_fidelity": fidelity_at(config.r, config.sigma_prime2, eta1, eta2),
        "n_runs": config.n_runs,
        "seed": config.seed,
        "abort": abort,
        "fidelity_stderr": result.fidelity_stderr,
        "n_disclosed": result.n_disclosed,
        "key_length": result.key_length,
    }
    if config.runs_out:
        rows = [
            [rec.basis.value, rec.alpha, rec.x, rec.bob_measurement, rec.disclosed]
            for rec in result.records
        ]
        write_output(render_csv(RUNS_HEADER, rows), config.runs_out)
    write_output(render_json(summary), config.output_path)
    return summary


def cmd_thresholds(config: RunConfig) -> Dict[str, Any]:
    result = thresholds(config.r, config.sigma_prime2, config.tol, config.grid_n, config.bins)
    report = {
        "eta_star": result.eta_star,
        "f_critical": result.f_critical,
        "tolerance": result.tolerance,
        "grid_n": result.grid_n,
        "grid_resolution": result.grid_resolution,
        "bins": result.bins,
        "bin_width": result.bin_width,
    }
    write_output(render_json(report), config.output_path)
    return report


COMMANDS = {
    Command.analyze: cmd_analyze,
    Command.sweep: cmd_sweep,
    Command.simulate: cmd_simulate,
    Command.thresholds: cmd_thresholds,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument('--r', type=float, help='Squeezing factor (default 3)')
    shared.add_argument('--sigma-prime2', dest='sigma_prime2', type=float, help="Alice's modulation variance (default 100)")
    shared.add_argument('--eta1', type=float, help='Forward transmittance (default 1)')
    shared.add_argument('--eta2', type=float, help='Backward transmittance (default 1)')
    shared.add_argument('--eta', type=float, help='Lossy-line transmittance, sets eta1 = eta2')
    shared.add_argument('--k', type=float, help="Fixed combining weight for Eve (default: optimal)")
    shared.add_argument('--grid-n', dest='grid_n', type=int, help='Grid points per axis (default 200)')
    shared.add_argument('--bins', type=int, help='Fidelity bins for --fig 4 (default 50)')
    shared.add_argument('--n-runs', dest='n_runs', type=int, help='Rounds per session (default 100000)')
    shared.add_argument('--disclosure-fraction', dest='disclosure_fraction', type=float,
                        help='Fraction of runs disclosed (default 0.1)')
    shared.add_argument('--seed', type=int, help='Simulation seed (default 0)')
    shared.add_argument('--out', dest='output_path', help='Output file (default stdout)')
    shared.add_argument('--format', choices=[f.value for f in OutputFormat], help='Sweep table format (default csv)')
    shared.add_argument('--config', help='key=value config file; flags override it')
    shared.add_argument('--fig', type=int, choices=[2, 3, 4], help='Figure table to sweep (default 2)')
    shared.add_argument('--tol', type=float, help='Bisection tolerance (default 1e-4)')
    shared.add_argument('--f-critical', dest='f_critical', type=float, help='Abort threshold (default 0.02)')
    shared.add_argument('--runs-out', dest='runs_out', help='Per-run CSV dump for simulate')
    verbosity = shared.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('--quiet', action='store_true', help='Warnings and errors only')

    parser = argparse.ArgumentParser(
        prog='pingpong_qkd',
        description='Continuous-variable ping-pong QKD: rates, detection fidelity and Monte Carlo sessions',
        epilog=EXIT_CODE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    for command, help_text in (
        (Command.analyze, 'Closed-form rates and fidelity at one point'),
        (Command.sweep, 'Figure data over the transmittance grid'),
        (Command.simulate, 'Seeded Monte Carlo session'),
        (Command.thresholds, 'Loss threshold and critical fidelity'),
    ):
        subparsers.add_parser(
            command.value,
            parents=[shared],
            help=help_text,
            epilog=EXIT_CODE_HELP,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        config = load_config(args)
        logger.info(f"Running {config.command.value} (r={config.r}, sigma_prime2={config.sigma_prime2})")
        COMMANDS[config.command](config)
        return EXIT_CODES["ok"]
    except ValidationError as e:
        logger.error(f"✗ Invalid configuration: {e}")
        return EXIT_CODES["domain"]
    except PingPongError as e:
        logger.error(f"✗ {type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"✗ I/O failure: {e}")
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
