"""
Command-line entry point for lepspec.

Parses the verb and its options, loads the model, dispatches to the verb
handler and maps failures onto exit codes: 0 on success, 2 on invalid
input, 3 on numerical or artifact failures (with diagnostics.json).

    python -m src.app <verb> [--model PATH | --preset bimodal-ep] [--out DIR] ...
"""

import argparse
import math
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from .core.config import DEFAULT_CUTOFF, LOG_LEVEL, validate_config
from .core.errors import (
    ArtifactWriteError,
    ConfigSchemaError,
    ModelValidationError,
    NumericalError,
)
from .core.model import PRESET_ALIASES, PRESETS, load_model
from .core.runtime import get_logger, set_log_level
from .handlers.cli_handlers import HANDLERS, format_summary
from .services.sensitivity import GENERATORS, PARAMETERS
from .services.spectra import CANONICAL, CLOSED_FORM, CONVENTION_ALIASES, INTENSITY, POWER
from .utils.artifacts import emit_json, write_manifest

logger = get_logger()

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    source = p.add_mutually_exclusive_group()
    source.add_argument("--model", help="JSON model config (full form or {\"bimodal\": {...}}).")
    source.add_argument("--preset", choices=sorted([*PRESETS, *PRESET_ALIASES]),
                        help="Built-in model (default: bimodal-ep; fig1 is an alias).")
    p.add_argument("--out", default="lepspec-out", help="Output directory (default: lepspec-out).")
    p.add_argument("--tol", type=_positive_float, default=None,
                   help="Relative eigenvalue clustering tolerance (default: LEPSPEC_CLUSTER_TOL).")
    p.add_argument("--cutoff", type=_positive_int, default=DEFAULT_CUTOFF,
                   help=f"Fock cutoff per mode (default: {DEFAULT_CUTOFF}).")
    p.add_argument("--n-th", type=float, default=None, help="Override the thermal occupation.")
    p.add_argument("--convention", choices=[CANONICAL, CLOSED_FORM, *CONVENTION_ALIASES], default=CANONICAL,
                   help="Spectrum normalization (default: canonical; paper is an alias of closed-form).")
    p.add_argument("--log-level", default=None, help="Override LEPSPEC_LOG_LEVEL for this run.")
    return p


def build_arg_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="lepspec",
                                     description="Spectral analysis of dissipative linear bosonic systems.")
    parser.add_argument("--version", action="version", version=f"lepspec {__version__}")
    verbs = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    verbs.add_parser("validate", parents=[common], help="Validate a model and write its canonical form.")
    verbs.add_parser("nhh-spectrum", parents=[common], help="Eigenstructure of H_eff and the moment generators.")

    sweep = verbs.add_parser("sweep", parents=[common], help="Eigenvalue branches across a parameter range.")
    sweep.add_argument("--param", choices=PARAMETERS, default="gamma12")
    sweep.add_argument("--from", dest="start", type=float, default=0.0)
    sweep.add_argument("--to", dest="stop", type=float, default=2.0)
    sweep.add_argument("--steps", type=_positive_int, default=201)
    sweep.add_argument("--generator", choices=GENERATORS, default="nhh")

    verbs.add_parser("ep-find", parents=[common], help="Locate the exceptional point in gamma12.")

    corr = verbs.add_parser("correlations", parents=[common], help="g1 or g2k series of one mode.")
    corr.add_argument("--mode", default="a1", help="a1…aN, c1 or c2 (default: a1).")
    corr.add_argument("--order", type=_positive_int, default=1, help="1 or an even coherence order.")
    corr.add_argument("--tau-max", type=_positive_float, default=10.0)
    corr.add_argument("--tau-steps", type=_positive_int, default=201)

    spectra = verbs.add_parser("spectra", parents=[common], help="Power or intensity-fluctuation spectrum.")
    spectra.add_argument("--mode", default="a1", help="a1…aN, c1 or c2 (default: a1).")
    spectra.add_argument("--kind", choices=[POWER, INTENSITY], default=POWER)
    spectra.add_argument("--omega-max", type=_positive_float, default=10.0)
    spectra.add_argument("--omega-steps", type=_positive_int, default=401)
    spectra.add_argument("--analyze", action="store_true", help="Also decompose the lineshape.")

    oracle = verbs.add_parser("oracle-check", parents=[common], help="Compare against the Fock-space Liouvillian.")
    oracle.add_argument("--tau-max", type=_positive_float, default=5.0)
    oracle.add_argument("--tau-steps", type=_positive_int, default=51)

    sens = verbs.add_parser("sensitivity", parents=[common], help="Fit the splitting exponent at the EP.")
    sens.add_argument("--param", choices=PARAMETERS, default="gamma12")
    sens.add_argument("--generator", choices=("nhh", "moments"), default="moments")
    sens.add_argument("--eps-min", type=_positive_float, default=1e-6)
    sens.add_argument("--eps-max", type=_positive_float, default=1e-2)
    sens.add_argument("--eps-count", type=_positive_int, default=17)
    sens.add_argument("--direction", type=int, choices=(1, -1), default=1)

    sym = verbs.add_parser("symmetry", parents=[common], help="PT diagnostics and supermode coefficients.")
    sym.add_argument("--theta", type=float, default=math.pi / 4)

    return parser


def _write_diagnostics(out_dir: Path, error: Exception):
    payload = {
        "error": str(error),
        "error_type": type(error).__name__,
        "diagnostics": getattr(error, "diagnostics", {}),
    }
    try:
        emit_json(payload, out_dir / "diagnostics.json")
    except ArtifactWriteError as e:
        logger.error("diagnostics_write_failed", error=str(e), error_type=type(e).__name__)


def run(argv: Optional[List[str]] = None) -> int:
    """Execute one command and return its exit code."""
    args = build_arg_parser().parse_args(argv)
    args.convention = CONVENTION_ALIASES.get(args.convention, args.convention)
    if args.preset:
        args.preset = PRESET_ALIASES.get(args.preset, args.preset)
    try:
        validate_config()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    set_log_level(args.log_level or LOG_LEVEL)

    out_dir = Path(args.out)
    start_time = time.time()
    options = {key: value for key, value in sorted(vars(args).items()) if key not in ("log_level", "out")}
    try:
        model = load_model(args.model, args.preset, args.n_th)
        result = HANDLERS[args.verb](args, model, out_dir)
        write_manifest(out_dir, args.verb, options, model, result.outputs)
    except ModelValidationError as e:
        print("error: invalid model", file=sys.stderr)
        for violation in e.violations:
            print(f"  - {violation}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigSchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        logger.error("command_rejected", verb=args.verb, error=str(e), error_type=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArtifactWriteError) as e:
        logger.error("command_failed", verb=args.verb, error=str(e), error_type=type(e).__name__)
        _write_diagnostics(out_dir, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    logger.info("command_completed", verb=args.verb, duration_ms=int((time.time() - start_time) * 1000))
    print(format_summary(args.verb, result))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
