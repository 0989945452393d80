import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from src.config import RunConfig, load_config_file, parse_floats, parse_range, resolve_config
from src.errors import AnalysisError, CertificateError, ConfigError, SquashingFailure
from src.exporter import CSVExporter, JSONExporter

logger = logging.getLogger("src.main")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3
EXIT_CERTIFICATION = 4

SINGLE_COLUMNS = ["p", "p_pass", "e_bit", "f_upper", "f_lower", "key_rate", "failed"]
COHERENT_COLUMNS = ["distance_km", "eta", "mu1", "mu2", "mu3", "p_pass_L", "e_bit_U",
                    "o1_bounds_width_max", "f_lower", "key_rate", "failed"]
SQUASH_COLUMNS = ["N", "method", "witness", "min_eig_or_bound", "positive", "version"]
DECOY_COLUMNS = ["j", "k", "o_L", "o_U"]


def setup_logging(output_dir: Path, verbose: bool = False) -> logging.Logger:
    """Configure logging to output to both console and a file in the output directory."""
    output_dir.mkdir(parents=True, exist_ok=True)
    run_log = output_dir / "run.log"

    logger = logging.getLogger("src")
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s")

    file_handler = logging.FileHandler(run_log)
    file_handler.setFormatter(formatter)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)

    if logger.hasHandlers():
        logger.handlers.clear()

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    return logger


# --- ARGUMENTS ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Security analysis of the three-state QKD protocol")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML or JSON run configuration")
    common.add_argument("--output", type=str, default=None, help="Output directory (default: output)")
    common.add_argument("--format", choices=["csv", "json"], default=None, help="Output format (default: csv)")
    common.add_argument("--verbose", action="store_true", default=None, help="DEBUG logging")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--jobs", type=int, default=None, help="Worker processes (default: number of CPUs)")
    solving.add_argument("--sdp-solver", type=str, default=None, help="cvxpy backend (default: CLARABEL)")
    solving.add_argument("--max-iterations", type=int, default=None, help="Frank-Wolfe iteration budget")
    solving.add_argument("--ec-efficiency", type=float, default=None, help="Error-correction inefficiency f >= 1")

    detector = argparse.ArgumentParser(add_help=False)
    detector.add_argument("--dark-count", type=float, default=None, help="Dark-count probability per detector")
    detector.add_argument("--loss", type=float, default=None, help="Fibre loss in dB/km (default: 0.2)")
    detector.add_argument("--cutoff", type=int, default=None, help="Photon-number cutoff of the decoy LP")

    single = sub.add_parser("keyrate-single", parents=[common, solving],
                            help="Key rate of the single-photon protocol under depolarizing noise")
    single.add_argument("--p", type=str, default=None, help="Noise range start:stop:step (default 0:0.25:0.01)")

    coherent = sub.add_parser("keyrate-coherent", parents=[common, solving, detector],
                              help="Decoy-state key rate against distance")
    coherent.add_argument("--distance", type=str, default=None, help="Distance range in km start:stop:step")
    coherent.add_argument("--intensity-points", type=int, default=None, help="Log-spaced grid points per intensity")
    coherent.add_argument("--mu-min", type=float, default=None)
    coherent.add_argument("--mu-max", type=float, default=None)

    squash = sub.add_parser("squash-verify", parents=[common], help="Certify the squashing map for N = 1..n-max")
    squash.add_argument("--n-max", type=int, default=None, help="Largest photon number to certify")

    decoy = sub.add_parser("decoy-bounds", parents=[common, detector], help="Single-photon yield bounds")
    decoy.add_argument("--distance", type=float, default=None, help="Simulated distance in km (default 50)")
    decoy.add_argument("--intensities", type=str, default=None, help="Comma separated intensities")
    decoy.add_argument("--observations", type=str, default=None, help="YAML/JSON file of observed o_{j,k,mu}")
    return parser


def _set(tree: Dict[str, Any], path: str, value: Any) -> None:
    if value is None:
        return
    *sections, key = path.split(".")
    for section in sections:
        tree = tree.setdefault(section, {})
    tree[key] = value


def cli_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Non-default command-line values as a config tree."""
    tree: Dict[str, Any] = {}

    def get(name: str) -> Any:
        return getattr(args, name, None)

    _set(tree, "output", get("output"))
    _set(tree, "format", get("format"))
    _set(tree, "verbose", get("verbose"))
    _set(tree, "jobs", get("jobs"))
    _set(tree, "solver.sdp_solver", get("sdp_solver"))
    _set(tree, "solver.max_iterations", get("max_iterations"))
    _set(tree, "sweep.ec_efficiency", get("ec_efficiency"))
    _set(tree, "sweep.detector.dark_count", get("dark_count"))
    _set(tree, "sweep.detector.loss_db_per_km", get("loss"))
    _set(tree, "sweep.cutoff", get("cutoff"))
    _set(tree, "sweep.intensity_points", get("intensity_points"))
    _set(tree, "sweep.mu_min", get("mu_min"))
    _set(tree, "sweep.mu_max", get("mu_max"))
    _set(tree, "n_max", get("n_max"))
    _set(tree, "observations", get("observations"))

    for flag, name in (("--p", "p"), ("--distance", "distance")):
        value = get(name)
        if isinstance(value, str):
            start, stop, step = parse_range(value, flag)
            _set(tree, "sweep.start", start)
            _set(tree, "sweep.stop", stop)
            _set(tree, "sweep.step", step)
        elif isinstance(value, float):
            _set(tree, "distance_km", value)
    if get("intensities") is not None:
        _set(tree, "intensities", parse_floats(get("intensities"), "--intensities"))
    return tree


# --- COMMANDS ---

def _export(cfg: RunConfig, columns: List[str], rows: List[Dict[str, Any]], records: List[Dict[str, Any]]) -> Path:
    if cfg.format == "json":
        return JSONExporter(cfg.output_file).export(cfg.header(), records)
    return CSVExporter(cfg.output_file).export(cfg.header(), columns, rows)


def _sweep_exit_code(points: List[Any]) -> int:
    """Certification failures outrank other failed points."""
    if any(pt.failure_kind == "certification" for pt in points):
        return EXIT_CERTIFICATION
    return EXIT_COMPUTATION if any(pt.failed for pt in points) else EXIT_OK


def run_keyrate_single(cfg: RunConfig) -> int:
    from src.keyrate import find_threshold, sweep
    spec = cfg.sweep.model_copy(update={"source_model": "single-photon"})
    points = sweep(spec, jobs=cfg.jobs, cfg=cfg.solver)
    rows = [
        {"p": pt.parameter, "p_pass": pt.p_pass, "e_bit": pt.e_bit, "f_upper": pt.f_upper,
         "f_lower": pt.f_min_lower, "key_rate": pt.key_rate, "failed": pt.failed}
        for pt in points
    ]
    _export(cfg, SINGLE_COLUMNS, rows, [pt.model_dump() for pt in points])
    threshold = find_threshold(points)
    if threshold is not None:
        logger.info(f"Key rate reaches zero at p = {threshold:.4f}")
    return _sweep_exit_code(points)


def run_keyrate_coherent(cfg: RunConfig) -> int:
    from src.keyrate import find_threshold, sweep
    spec = cfg.sweep.model_copy(update={"source_model": "squashed-coherent"})
    points = sweep(spec, jobs=cfg.jobs, cfg=cfg.solver)
    rows = [
        {"distance_km": pt.parameter, "eta": pt.eta, "mu1": pt.mu1, "mu2": pt.mu2, "mu3": pt.mu3,
         "p_pass_L": pt.p_pass, "e_bit_U": pt.e_bit, "o1_bounds_width_max": pt.yield_width_max,
         "f_lower": pt.f_min_lower, "key_rate": pt.key_rate, "failed": pt.failed}
        for pt in points
    ]
    _export(cfg, COHERENT_COLUMNS, rows, [pt.model_dump() for pt in points])
    threshold = find_threshold(points)
    if threshold is not None:
        logger.info(f"Key rate reaches zero at {threshold:.1f} km")
    return _sweep_exit_code(points)


def run_squash_verify(cfg: RunConfig) -> int:
    from src.squashing import certificate_record, verify_range

    records = [certificate_record(v) for v in verify_range(cfg.n_max)]
    _export(cfg, SQUASH_COLUMNS, records, records)
    return EXIT_OK


def _observed_scenario(cfg: RunConfig):
    from src.models import DecoyScenario

    data = load_config_file(Path(cfg.observations))
    try:
        observed = {(int(o["j"]), int(o["k"]), float(o["mu"])): float(o["value"]) for o in data["observed"]}
        intensities = [float(mu) for mu in data.get("intensities", cfg.intensities)]
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed observation file: {e}", {"flag": "--observations"}) from e
    try:
        return DecoyScenario(intensities=intensities, cutoff=cfg.sweep.cutoff, observed=observed)
    except ValidationError as e:
        raise ConfigError(f"invalid observation file: {e.errors()[0]['msg']}", {"flag": "--observations"}) from e


def run_decoy_bounds(cfg: RunConfig) -> int:
    from src.decoy import decoy_bounds, simulated_decoy_scenario
    from src.keyrate import scenario_at_distance

    if cfg.observations:
        scenario = _observed_scenario(cfg)
    else:
        detector = scenario_at_distance(cfg.distance_km, cfg.sweep.detector)
        scenario = simulated_decoy_scenario(detector, cfg.intensities, cfg.sweep.cutoff)
    bounds = decoy_bounds(scenario)
    rows = [{"j": j, "k": k, "o_L": bounds.lower[(j, k)], "o_U": bounds.upper[(j, k)]}
            for j, k in sorted(bounds.lower)]
    _export(cfg, DECOY_COLUMNS, rows, rows)
    return EXIT_OK


COMMANDS = {
    "keyrate-single": run_keyrate_single,
    "keyrate-coherent": run_keyrate_coherent,
    "squash-verify": run_squash_verify,
    "decoy-bounds": run_decoy_bounds,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        overrides = cli_overrides(args)
        cfg = resolve_config(args.command, overrides, Path(args.config) if args.config else None)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logger = setup_logging(cfg.output_dir, cfg.verbose)
    logger.info(f"Starting {cfg.command}")
    logger.info(f"Output: {cfg.output_file}")

    try:
        code = COMMANDS[cfg.command](cfg)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (SquashingFailure, CertificateError) as e:
        logger.error(f"Certification failed: {e}")
        return EXIT_CERTIFICATION
    except (AnalysisError, ValueError) as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_COMPUTATION

    logger.info(f"{cfg.command} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
