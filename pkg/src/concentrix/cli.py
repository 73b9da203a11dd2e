"""Batch front door: declarative configs in, reports out.

A single JSON config names the system, the pipeline, its parameters, and
the master seed; flags only override the seed, the worker count, and the
output directory.  Reports are canonical JSON (sorted keys, no timestamps)
plus plot-ready CSV, so identical configs always produce identical bytes.

Exit codes: 0 all checks passed, 1 a verification failed, 2 bad config or
inadmissible system.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .dynamics import (
    SystemSpec,
    derive_seed,
    system_digest,
    system_from_dict,
)
from .lyapunov import (
    drift_from_exp_lyapunov,
    empirical_drift_check,
    slds_exp_lyapunov,
    slds_geometric_drift,
    te_constant,
)
from .montecarlo import (
    NoSignalError,
    PrecisionError,
    _code_version,
    burn_in_sampler,
    contraction_rate_fit,
    deviation_probability_experiment,
    iid_deviation_experiment,
)
from .transport import (
    lds_certificate,
    tensorized_constant,
    trajectory_deviation_bound,
    ConcentrationCertificate,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "cmd_certify",
    "cmd_verify",
    "cmd_sweep",
    "main",
]

_PIPELINES = ("certify", "verify-deviation", "verify-lyapunov", "contraction", "sweep")
_VERIFY_PIPELINES = ("verify-deviation", "verify-lyapunov", "contraction")

# substream label for CLI-owned reference batches, distinct from the
# experiment-internal labels
_STREAM_CLI_REFERENCE = 101


class ConfigError(ValueError):
    """Missing or contradictory experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run.

    Only (pipeline, system, params, seed) identify the experiment; worker
    count and output paths are execution detail and stay out of the hash.
    """

    pipeline: str
    system: SystemSpec | None
    params: dict
    seed: int
    out: Path | None = None

    def canonical_dict(self) -> dict:
        from .dynamics import system_to_dict

        return {
            "pipeline": self.pipeline,
            "system": system_to_dict(self.system) if self.system else None,
            "params": self.params,
            "seed": self.seed,
        }

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def require_system(self) -> SystemSpec:
        if self.system is None:
            raise ConfigError(f"pipeline {self.pipeline!r} needs a system")
        return self.system

    def param(self, key, default=None, required=False):
        if required and key not in self.params:
            raise ConfigError(f"pipeline {self.pipeline!r} needs params.{key}")
        return self.params.get(key, default)


def load_config(path, seed_override=None) -> ExperimentConfig:
    """Read and validate an experiment config document."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    pipeline = raw.get("pipeline")
    if pipeline not in _PIPELINES:
        raise ConfigError(f"pipeline must be one of {_PIPELINES}, got {pipeline!r}")

    system_field = raw.get("system")
    if system_field is None:
        system = None
    elif isinstance(system_field, str):
        system_path = (path.parent / system_field).resolve()
        try:
            system = system_from_dict(json.loads(system_path.read_text()))
        except FileNotFoundError:
            raise ConfigError(f"system file not found: {system_path}")
    elif isinstance(system_field, dict):
        system = system_from_dict(system_field)
    else:
        raise ConfigError("system must be an inline object or a file path")

    seed = seed_override if seed_override is not None else raw.get("seed")
    if seed is None:
        raise ConfigError("a master seed is mandatory (config seed or --seed)")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")

    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")

    out = Path(raw["out"]) if "out" in raw else None
    return ExperimentConfig(
        pipeline=pipeline, system=system, params=params, seed=seed, out=out
    )


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _envelope(config: ExperimentConfig, result: dict) -> dict:
    return {
        "config": config.canonical_dict(),
        "config_hash": config.config_hash,
        "code_version": _code_version(),
        "result": result,
    }


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ----------------------------------------------------------------- pipelines


def cmd_certify(config: ExperimentConfig) -> dict:
    """Derive the certificate bundle for the configured system."""
    spec = config.require_system()
    if spec.kind == "lds":
        t1, contraction = lds_certificate(spec)
        n_samples = int(config.param("n_samples", 100))
        lipschitz = float(config.param("lipschitz", 1.0))
        tensorized = tensorized_constant(t1.constant, contraction.rate, n_samples)
        cert = ConcentrationCertificate(
            constant=t1.constant,
            rate=contraction.rate,
            n_samples=n_samples,
            lipschitz=lipschitz,
            bias=0.0,
        )
        curve = [
            {"epsilon": float(eps), "bound": trajectory_deviation_bound(cert, float(eps))}
            for eps in config.param("epsilons", [])
        ]
        result = {
            "kind": "lds_certificates",
            "transport": t1.to_dict(),
            "contraction": contraction.to_dict(),
            "n_samples": n_samples,
            "tensorized_constant": tensorized,
            "bound_curve": curve,
        }
    else:
        radius = float(config.param("radius", required=True))
        contraction = float(config.param("contraction", required=True))
        lipschitz = float(config.param("lipschitz", required=True))
        alpha = float(config.param("alpha", required=True))
        moment = slds_exp_lyapunov(spec, radius, contraction, lipschitz, alpha)
        drift = drift_from_exp_lyapunov(moment)
        geometric = slds_geometric_drift(spec, radius, contraction, lipschitz)
        result = {
            "kind": "slds_certificates",
            "exponential_moment": moment.to_dict(),
            "drift": drift.to_dict(),
            "stationary_moment_bound": drift.moment_bound,
            "te_constant": te_constant(drift),
            "geometric_drift": geometric.to_dict(),
        }
    result["system_digest"] = system_digest(spec)
    return result


def _resolve_te_constant(config: ExperimentConfig, spec: SystemSpec) -> float:
    explicit = config.param("te_constant")
    if explicit is not None:
        return float(explicit)
    moment = slds_exp_lyapunov(
        spec,
        float(config.param("radius", required=True)),
        float(config.param("contraction", required=True)),
        float(config.param("lipschitz", required=True)),
        float(config.param("alpha", required=True)),
    )
    return te_constant(drift_from_exp_lyapunov(moment))


def _run_deviation(config: ExperimentConfig, workers: int):
    spec = config.require_system()
    mode = config.param("mode", "trajectory")
    reward = config.param("reward", "norm")
    if reward not in ("norm", "coordinate"):
        raise ConfigError("config rewards are limited to 'norm' and 'coordinate'")
    epsilons = config.param("epsilons", required=True)
    replications = int(config.param("replications", required=True))
    n_samples = int(config.param("n_samples", required=True))
    target_mean = config.param("target_mean")
    target_provenance = config.param("target_provenance")

    if mode == "trajectory":
        report = deviation_probability_experiment(
            spec,
            reward,
            config.param("x0", required=True),
            n_samples,
            epsilons,
            replications,
            config.seed,
            target_mean=target_mean,
            target_provenance=target_provenance,
            workers=workers,
            bias_samples=int(config.param("bias_samples", 512)),
            bias_burn_in=int(config.param("bias_burn_in", 200)),
            target_samples=int(config.param("target_samples", 100_000)),
        )
    elif mode == "iid":
        report = iid_deviation_experiment(
            spec,
            reward,
            n_samples,
            replications,
            int(config.param("burn_in", required=True)),
            epsilons,
            _resolve_te_constant(config, spec),
            config.seed,
            target_mean=target_mean,
            target_provenance=target_provenance,
            workers=workers,
            diagnostic_samples=int(config.param("diagnostic_samples", 512)),
            target_samples=int(config.param("target_samples", 100_000)),
        )
    else:
        raise ConfigError(f"unknown deviation mode: {mode!r}")
    return report


def _run_drift_check(config: ExperimentConfig, workers: int):
    spec = config.require_system()
    x_grid = config.param("x_grid", required=True)
    samples = int(config.param("samples_per_point", 2000))
    certificate = None
    if config.param("radius") is not None:
        certificate = slds_geometric_drift(
            spec,
            float(config.param("radius", required=True)),
            float(config.param("contraction", required=True)),
            float(config.param("lipschitz", required=True)),
        )
    report = empirical_drift_check(
        spec, x_grid, samples, config.seed, certificate=certificate
    )
    violations = report.certificate_violations or ()
    return report, len(violations) == 0


def _run_contraction(config: ExperimentConfig, workers: int):
    spec = config.require_system()
    per_step = int(config.param("per_step", 512))
    reference = burn_in_sampler(
        spec,
        int(config.param("reference_count", 2 * per_step)),
        int(config.param("reference_burn_in", 100)),
        derive_seed(config.seed, _STREAM_CLI_REFERENCE),
        workers=workers,
    )
    fit = contraction_rate_fit(
        spec,
        config.param("x0", required=True),
        int(config.param("n_max", required=True)),
        per_step,
        reference,
        seed=config.seed,
    )
    expected = config.param("expected_rate")
    if expected is None:
        passed = True
    else:
        passed = abs(fit.rate - float(expected)) <= float(config.param("tolerance", 0.1))
    return fit, passed


def cmd_verify(config: ExperimentConfig, workers: int = 1):
    """Run the configured verification experiment.

    Returns (result dict, passed flag); the caller maps the flag to the
    exit code and writes the files.
    """
    if config.pipeline not in _VERIFY_PIPELINES:
        raise ConfigError(
            f"verify expects one of {_VERIFY_PIPELINES}, got {config.pipeline!r}"
        )
    if config.pipeline == "verify-deviation":
        report = _run_deviation(config, workers)
        return report.to_dict(), report.all_pass
    if config.pipeline == "verify-lyapunov":
        report, passed = _run_drift_check(config, workers)
        return report.to_dict(), passed
    fit, passed = _run_contraction(config, workers)
    return fit.to_dict(), passed


def _sweep_rows(config: ExperimentConfig):
    variable = config.param("variable", required=True)
    grid = config.param("grid", required=True)
    if not isinstance(grid, (list, tuple)) or len(grid) == 0:
        raise ConfigError("sweep grid must be a nonempty list")

    if variable == "n_samples":
        spec = config.require_system()
        t1, contraction = lds_certificate(spec)
        lipschitz = float(config.param("lipschitz", 1.0))
        epsilon = float(config.param("epsilon", required=True))
        header = ["n_samples", "tensorized_constant", "bound"]
        rows = []
        for n in grid:
            cert = ConcentrationCertificate(
                constant=t1.constant,
                rate=contraction.rate,
                n_samples=int(n),
                lipschitz=lipschitz,
                bias=0.0,
            )
            rows.append(
                [
                    int(n),
                    tensorized_constant(t1.constant, contraction.rate, int(n)),
                    trajectory_deviation_bound(cert, epsilon),
                ]
            )
        return variable, header, rows

    if variable == "epsilon":
        spec = config.require_system()
        t1, contraction = lds_certificate(spec)
        cert = ConcentrationCertificate(
            constant=t1.constant,
            rate=contraction.rate,
            n_samples=int(config.param("n_samples", required=True)),
            lipschitz=float(config.param("lipschitz", 1.0)),
            bias=0.0,
        )
        header = ["epsilon", "bound"]
        rows = [[float(e), trajectory_deviation_bound(cert, float(e))] for e in grid]
        return variable, header, rows

    if variable == "rate":
        constant = float(config.param("constant", 1.0))
        lipschitz = float(config.param("lipschitz", 1.0))
        n_samples = int(config.param("n_samples", required=True))
        epsilon = float(config.param("epsilon", required=True))
        header = ["rate", "tensorized_constant", "bound"]
        rows = []
        for r in grid:
            cert = ConcentrationCertificate(
                constant=constant,
                rate=float(r),
                n_samples=n_samples,
                lipschitz=lipschitz,
                bias=0.0,
            )
            rows.append(
                [
                    float(r),
                    tensorized_constant(constant, float(r), n_samples),
                    trajectory_deviation_bound(cert, epsilon),
                ]
            )
        return variable, header, rows

    if variable == "alpha":
        spec = config.require_system()
        radius = float(config.param("radius", required=True))
        contraction = float(config.param("contraction", required=True))
        lipschitz = float(config.param("lipschitz", required=True))
        header = [
            "alpha",
            "beta",
            "scale",
            "drift_contraction",
            "drift_offset",
            "moment_bound",
            "te_constant",
        ]
        rows = []
        for a in grid:
            moment = slds_exp_lyapunov(spec, radius, contraction, lipschitz, float(a))
            drift = drift_from_exp_lyapunov(moment)
            rows.append(
                [
                    float(a),
                    moment.beta,
                    moment.scale,
                    drift.contraction,
                    drift.offset,
                    drift.moment_bound,
                    te_constant(drift),
                ]
            )
        return variable, header, rows

    raise ConfigError(f"unknown sweep variable: {variable!r}")


def cmd_sweep(config: ExperimentConfig):
    """Evaluate certificate values over a parameter grid, row per point."""
    if config.pipeline != "sweep":
        raise ConfigError(f"sweep expects pipeline 'sweep', got {config.pipeline!r}")
    variable, header, rows = _sweep_rows(config)
    return {
        "kind": "sweep",
        "variable": variable,
        "columns": header,
        "rows": rows,
    }


# ----------------------------------------------------------------- front end


def _resolve_workers(flag_value) -> int:
    if flag_value is not None:
        workers = flag_value
    else:
        env = os.environ.get("CONCENTRIX_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ConfigError("worker count must be at least 1")
    return workers


def _emit(out_dir: Path, stem: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.json"
    path.write_text(canonical_json(payload))
    return path


def _emit_verify_csv(config: ExperimentConfig, result: dict, out_dir: Path) -> None:
    path = out_dir / "report.csv"
    if config.pipeline == "verify-deviation":
        rows = [
            [
                repr(float(result["epsilons"][i])),
                repr(float(result["frequencies"][i])),
                repr(float(result["ci_low"][i])),
                repr(float(result["ci_high"][i])),
                repr(float(result["bounds"][i])),
                "true" if result["passes"][i] else "false",
            ]
            for i in range(len(result["epsilons"]))
        ]
        _write_csv(path, ["epsilon", "empirical", "ci_low", "ci_high", "bound", "pass"], rows)
    elif config.pipeline == "verify-lyapunov":
        rows = [
            [repr(p["v"]), repr(p["estimate"]), repr(p["stderr"])]
            for p in result["points"]
        ]
        _write_csv(path, ["lyapunov", "estimate", "stderr"], rows)
    else:
        rows = [
            [step, repr(result["distances"][i]), "true" if result["used"][i] else "false"]
            for i, step in enumerate(result["steps"])
        ]
        _write_csv(path, ["step", "distance", "used"], rows)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concentrix",
        description="Concentration certificates and their Monte Carlo verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("certify", "derive certificates for a system"),
        ("verify", "run a Monte Carlo verification experiment"),
        ("sweep", "evaluate certificates over a parameter grid"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument(
            "--workers",
            type=int,
            default=None,
            help="worker pool size (default: CONCENTRIX_WORKERS or 1)",
        )
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed)
        workers = _resolve_workers(args.workers)
        out_dir = Path(args.out) if args.out else (config.out or Path.cwd())

        if args.command == "certify":
            if config.pipeline != "certify":
                raise ConfigError(
                    f"certify expects pipeline 'certify', got {config.pipeline!r}"
                )
            payload = _envelope(config, cmd_certify(config))
            path = _emit(out_dir, "certificate", payload)
            print(f"certificates written to {path}")
            return 0

        if args.command == "verify":
            result, passed = cmd_verify(config, workers=workers)
            payload = _envelope(config, result)
            path = _emit(out_dir, "report", payload)
            _emit_verify_csv(config, result, out_dir)
            print(f"report written to {path}")
            print("verification passed" if passed else "verification FAILED")
            return 0 if passed else 1

        result = cmd_sweep(config)
        payload = _envelope(config, result)
        path = _emit(out_dir, "sweep", payload)
        _write_csv(out_dir / "sweep.csv", result["columns"], result["rows"])
        print(f"sweep written to {path}")
        return 0
    except (NoSignalError, PrecisionError) as exc:
        print(canonical_json({"error": {"type": type(exc).__name__, "message": str(exc)}}), end="")
        return 1
    except ValueError as exc:
        # covers ConfigError plus every domain rejection (bad spec,
        # non-contractive system, inadmissible exponent)
        print(canonical_json({"error": {"type": type(exc).__name__, "message": str(exc)}}), end="")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
