import argparse
import json
import logging
import sys
from typing import Any, Iterable, List, Optional, Sequence, Tuple

from environments.generators import list_generators
from environments.instance import BanditInstance, instance_from_dict, validate_instance
from services.bounds_service import build_bound_report
from services.config_service import ConfigError, build_instance, parse_experiment_config
from services.experiment_service import run_experiment
from services.heatmap_service import DEFAULT_BUCKETS, build_heatmaps
from services.oracle_service import oracle_super_arm

logger = logging.getLogger(__name__)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, tuple):
        return "-".join(str(i) for i in value)
    return str(value)


def emit(pairs: Iterable[Tuple[str, Any]], porcelain: bool) -> None:
    for key, value in pairs:
        if porcelain:
            print(f"{key}={_format(value)}")
        else:
            print(f"{key.replace('_', ' ').capitalize()}: {_format(value)}")


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object")
    return data


def load_any_instance(path: str, validate: bool = True) -> BanditInstance:
    """A file is either a bare instance (it has 'arms') or an experiment config."""
    data = _read_json(path)
    if "arms" in data:
        return instance_from_dict(data)
    return build_instance(parse_experiment_config(data), validate=validate)


def cmd_validate(args: argparse.Namespace) -> int:
    report = validate_instance(load_any_instance(args.config, validate=False))
    emit([("valid", report.valid), ("concave", report.concave), ("violations", len(report.violations))], args.porcelain)
    for violation in report.violations:
        print(f"{violation.kind}: {violation.detail}", file=sys.stderr)
    return 0 if report.valid else 1


def cmd_run(args: argparse.Namespace) -> int:
    config = parse_experiment_config(_read_json(args.config))
    updates = {}
    if args.output_dir:
        updates["output_dir"] = args.output_dir
    if args.threads:
        updates["max_concurrent_runs"] = args.threads
    config = config.model_copy(update=updates)

    manifest = run_experiment(config)
    for run in manifest.runs:
        status = _format(run.final_regret) if run.error is None else f"failed ({run.error})"
        if args.porcelain:
            print(f"{run.policy}.seed{run.seed}.final_regret={status}")
        else:
            print(f"{run.policy} seed {run.seed}: final regret {status}")
    emit([("config_hash", manifest.config_hash), ("output_dir", config.output_dir)], args.porcelain)
    return 1 if manifest.failures else 0


def cmd_oracle(args: argparse.Namespace) -> int:
    instance = load_any_instance(args.config)
    result = oracle_super_arm(instance, args.t or instance.horizon)
    emit([("t", result.t), ("super_arm", result.super_arm), ("value", result.value), ("method", result.method)], args.porcelain)
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    report = build_bound_report(T=args.T, K=args.K, L=args.L, epsilon=args.eps, sigma=args.sigma, c=args.c, q=args.q)
    pairs: List[Tuple[str, Any]] = [
        ("q", report.upper.q),
        ("term_constant", report.upper.constant),
        ("term_rising", report.upper.rising),
        ("term_noise", report.upper.noise),
        ("upper_total", report.upper.total),
        ("lower_unconstrained", report.lower_unconstrained),
    ]
    if report.lower_constrained is not None:
        pairs.append(("lower_constrained", report.lower_constrained))
    for row in report.exponents:
        pairs += [("lower_exponent", row.lower_exponent), ("upper_exponent", row.upper_exponent)]
    emit(pairs, args.porcelain)
    if args.json:
        report.to_json(args.json)
    if args.csv:
        report.to_csv(args.csv)
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    written = build_heatmaps(args.trace_dir, buckets=args.buckets, num_arms=args.arms, out_dir=args.out)
    emit([(policy, str(path)) for policy, path in written.items()], args.porcelain)
    return 0


def cmd_list_instances(args: argparse.Namespace) -> int:
    for info in list_generators():
        params = ", ".join(f"{k}={v}" for k, v in info.parameters.items())
        if args.porcelain:
            print(f"{info.name}={params}")
        else:
            print(f"{info.name}: {info.description} ({params})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--porcelain", action="store_true", help="Machine-readable key=value output")
    common.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level")

    parser = argparse.ArgumentParser(description="Combinatorial rising bandit simulation lab")
    subparsers = parser.add_subparsers(dest="command", required=True)

    validate_parser = subparsers.add_parser("validate", parents=[common], help="Check an instance or experiment config")
    validate_parser.add_argument("--config", required=True, help="Instance JSON or experiment config JSON")
    validate_parser.set_defaults(handler=cmd_validate)

    run_parser = subparsers.add_parser("run", parents=[common], help="Run an experiment")
    run_parser.add_argument("--config", required=True, help="Experiment config JSON")
    run_parser.add_argument("--output-dir", help="Override the configured output directory")
    run_parser.add_argument("--threads", type=int, help="Maximum number of concurrent runs")
    run_parser.set_defaults(handler=cmd_run)

    oracle_parser = subparsers.add_parser("oracle", parents=[common], help="Best constant super arm for a horizon")
    oracle_parser.add_argument("--config", required=True, help="Instance JSON or experiment config JSON")
    oracle_parser.add_argument("--t", type=int, help="Horizon (defaults to the instance horizon)")
    oracle_parser.set_defaults(handler=cmd_oracle)

    bounds_parser = subparsers.add_parser("bounds", parents=[common], help="Regret upper and lower bounds")
    bounds_parser.add_argument("--c", type=float, required=True, help="Envelope exponent of the increments")
    bounds_parser.add_argument("--T", type=int, required=True, help="Horizon")
    bounds_parser.add_argument("--K", type=int, default=1, help="Number of base arms")
    bounds_parser.add_argument("--L", type=int, default=1, help="Largest super-arm size")
    bounds_parser.add_argument("--eps", type=float, default=0.25, help="Estimation window fraction")
    bounds_parser.add_argument("--sigma", type=float, default=0.01, help="Noise standard deviation")
    bounds_parser.add_argument("--q", type=float, help="Fix q instead of sweeping it")
    bounds_parser.add_argument("--json", help="Write the report as JSON")
    bounds_parser.add_argument("--csv", help="Write the report as parameter,value CSV")
    bounds_parser.set_defaults(handler=cmd_bounds)

    heatmap_parser = subparsers.add_parser("heatmap", parents=[common], help="Exploration heatmaps from run traces")
    heatmap_parser.add_argument("--trace-dir", required=True, help="Directory holding *.trace.csv files")
    heatmap_parser.add_argument("--buckets", type=int, default=DEFAULT_BUCKETS, help="Number of time buckets")
    heatmap_parser.add_argument("--arms", type=int, help="Number of base arms (inferred when omitted)")
    heatmap_parser.add_argument("--out", help="Output directory (defaults to the trace directory)")
    heatmap_parser.set_defaults(handler=cmd_heatmap)

    list_parser = subparsers.add_parser("list-instances", parents=[common], help="List instance generators")
    list_parser.set_defaults(handler=cmd_list_instances)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
