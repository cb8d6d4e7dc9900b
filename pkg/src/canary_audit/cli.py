"""Command-line front end.

Subcommands:
  gauss-audit          one-shot audit of the Gaussian vector-sum mechanism
  fl-audit             simulate DP-FedAvg from a JSON config and audit it
  epsilon              exact two-Gaussian epsilon/delta conversion
  lower-bound          epsilon lower bound from a cosine CSV
  validate-normality   Anderson-Darling diagnostic on a cosine CSV
  plot                 density figure from a cosine CSV

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or validation
failure. The environment variable CANARY_AUDIT_THREADS overrides --threads
wherever independent repeats or runs may execute concurrently; each
individual run stays single-threaded, so per-run results are bitwise
reproducible regardless of the pool size.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import estimators, report, simulator
from .errors import AuditError
from .estimators import EmpiricalNull, ExactNull
from .mechanism import GaussianSumInstance, fit_gaussian_moments, run_gaussian_mechanism_audit
from .report import AuditReport, encode_float
from .simulator import FederatedConfig
from .tradeoff import GaussianHypothesis, delta_for_epsilon, epsilon_for_delta

THREADS_ENV_VAR = "CANARY_AUDIT_THREADS"


def _resolve_threads(flag_value: int) -> int:
    env = os.environ.get(THREADS_ENV_VAR)
    value = int(env) if env else flag_value
    if value < 1:
        raise ValueError(f"thread count must be positive, got {value}")
    return value


def _run_indexed(worker, count: int, threads: int) -> list:
    """Runs worker(i) for i in range(count); results ordered by index."""
    if threads <= 1 or count <= 1:
        return [worker(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(count)))


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _normality_or_none(values: np.ndarray):
    if values.size < 8:
        return None
    return estimators.anderson_darling(values)


def _cmd_gauss_audit(args: argparse.Namespace) -> int:
    threads = _resolve_threads(args.threads)
    out_dir = Path(args.out_dir)
    confidence = args.confidence

    def one_run(i: int):
        start = time.perf_counter()
        instance = GaussianSumInstance(
            dim=args.dim,
            noise_std=args.sigma,
            canary_count=args.canaries,
            delta=args.delta,
            seed=args.seed + i,
        )
        result = run_gaussian_mechanism_audit(instance)
        lower = estimators.epsilon_lower_bound(
            result.samples, ExactNull(args.dim), args.delta, confidence
        )
        rep = AuditReport(
            config_echo={
                "dim": instance.dim,
                "noise_std": instance.noise_std,
                "canary_count": instance.canary_count,
                "delta": instance.delta,
                "seed": instance.seed,
            },
            epsilon_estimate=result.epsilon_estimate,
            epsilon_lower_bound=lower,
            fitted_observed=result.fitted,
            null_model=ExactNull(args.dim).describe(),
            normality=_normality_or_none(result.samples.values),
            observed_samples=len(result.samples),
            runtime_seconds=time.perf_counter() - start,
        )
        path = out_dir / f"report-run{i:03d}.json"
        report.write_report(path, rep)
        return result.epsilon_estimate, path

    results = _run_indexed(one_run, args.repeats, threads)
    epsilons = np.array([r[0] for r in results])
    mean = float(np.mean(epsilons))
    std = float(np.std(epsilons, ddof=1)) if len(epsilons) > 1 else 0.0
    _print_json(
        {
            "command": "gauss-audit",
            "repeats": args.repeats,
            "epsilon_mean": encode_float(mean),
            "epsilon_std": encode_float(std) if not math.isnan(std) else None,
            "saturated_runs": int(np.sum(np.isinf(epsilons))),
            "reports": [str(r[1]) for r in results],
        }
    )
    return 0


def load_federated_config(path: str | Path) -> FederatedConfig:
    """Parses and validates a JSON config whose keys mirror FederatedConfig.

    Unknown keys are rejected rather than ignored, listing the offenders.
    """
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    known = set(FederatedConfig.field_names())
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    optional = {"delta", "task"}
    missing = sorted(known - set(data) - optional)
    if missing:
        raise ValueError(f"missing config keys: {', '.join(missing)}")
    return FederatedConfig(**data)


def _cmd_fl_audit(args: argparse.Namespace) -> int:
    threads = _resolve_threads(args.threads)
    start = time.perf_counter()
    config = load_federated_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    delta = config.resolved_delta
    out_dir = Path(args.out_dir)

    def one_run(i: int):
        # Run i is reproducible on its own by setting seed = base + i.
        run_config = replace(config, seed=config.seed + i)
        outcome = simulator.run_training(run_config, trace_all_rounds=args.trace_all)
        final_unobserved = simulator.final_cosines(
            run_config, outcome.final_model.params, observed=False
        )
        csv_path = out_dir / f"cosines-run{i:03d}.csv"
        report.write_cosine_csv(
            csv_path,
            simulator.trace_rows(
                outcome.round_traces,
                final_observed=outcome.observed_final_cosines,
                final_unobserved=final_unobserved,
            ),
        )
        return outcome, final_unobserved, csv_path

    outcomes = _run_indexed(one_run, args.runs, threads)

    pooled_observed = estimators.pool_runs(
        [outcome.observed_final_cosines for outcome, _, _ in outcomes]
    )
    pooled_unobserved = estimators.pool_runs([fu for _, fu, _ in outcomes])
    epsilon = estimators.estimate_epsilon_final(pooled_observed, config.dim, delta)
    lower = estimators.epsilon_lower_bound(
        pooled_observed, ExactNull(config.dim), delta, args.confidence
    )

    epsilon_all = None
    lower_all = None
    fitted_unobserved = None
    unobserved_count = len(pooled_unobserved)
    if args.trace_all:
        per_run_max = [simulator.max_over_rounds(o.round_traces) for o, _, _ in outcomes]
        observed_max = estimators.pool_runs([m[0] for m in per_run_max])
        unobserved_max = estimators.pool_runs([m[1] for m in per_run_max])
        epsilon_all = estimators.estimate_epsilon_all_iterates(
            observed_max, unobserved_max, delta
        )
        lower_all = estimators.epsilon_lower_bound(
            observed_max, EmpiricalNull(unobserved_max.values), delta, args.confidence
        )
        fitted_unobserved = (
            None if len(unobserved_max) < 2 else fit_gaussian_moments(unobserved_max)
        )
        unobserved_count = len(unobserved_max)

    rep = AuditReport(
        config_echo=config.resolved().to_dict(),
        epsilon_estimate=epsilon,
        epsilon_lower_bound=lower,
        fitted_observed=fit_gaussian_moments(pooled_observed),
        null_model=ExactNull(config.dim).describe(),
        normality=_normality_or_none(pooled_observed.values),
        observed_samples=len(pooled_observed),
        runtime_seconds=time.perf_counter() - start,
        epsilon_all_iterates=epsilon_all,
        epsilon_lower_bound_all_iterates=lower_all,
        fitted_unobserved=fitted_unobserved,
        unobserved_samples=unobserved_count,
        extra={"runs": args.runs, "trace_all_rounds": bool(args.trace_all)},
    )
    report_path = out_dir / "report.json"
    report.write_report(report_path, rep)

    if args.figures:
        from .figures import plot_cosine_densities

        plot_cosine_densities(
            {
                "observed": pooled_observed.values,
                "unobserved": pooled_unobserved.values,
            },
            out_dir / "cosine-densities.png",
            dim=config.dim,
            title="final-model canary cosines",
        )

    summary = {
        "command": "fl-audit",
        "epsilon_estimate": encode_float(epsilon),
        "epsilon_lower_bound": lower.value,
        "report": str(report_path),
        "runs": args.runs,
    }
    if epsilon_all is not None:
        summary["epsilon_all_iterates"] = encode_float(epsilon_all)
    _print_json(summary)
    return 0


def _cmd_epsilon(args: argparse.Namespace) -> int:
    p1 = GaussianHypothesis(args.mu1, args.sigma1)
    p2 = GaussianHypothesis(args.mu2, args.sigma2)
    if (args.delta is None) == (args.epsilon is None):
        raise ValueError("provide exactly one of --delta or --epsilon")
    if args.delta is not None:
        value = epsilon_for_delta(p1, p2, args.delta)
        print("inf" if math.isinf(value) else f"{value:.9g}")
    else:
        print(f"{delta_for_epsilon(p1, p2, args.epsilon):.9g}")
    return 0


def _select_cosines(
    rows: list[tuple[int, int, str, float]], label: str, max_over_rounds: bool
) -> np.ndarray:
    if max_over_rounds:
        best: dict[int, float] = {}
        for rnd, canary_id, row_label, cosine in rows:
            if row_label == label and rnd >= 0:
                if canary_id not in best or cosine > best[canary_id]:
                    best[canary_id] = cosine
        values = [best[k] for k in sorted(best)]
    else:
        values = [
            cosine
            for rnd, _, row_label, cosine in rows
            if row_label == label and rnd == report.FINAL_MODEL_ROUND
        ]
    if not values:
        raise ValueError(
            f"no cosines with label {label!r} "
            f"({'per-round' if max_over_rounds else 'final-model'} rows) in the CSV"
        )
    return np.asarray(values)


def _cmd_lower_bound(args: argparse.Namespace) -> int:
    rows = report.read_cosine_csv(args.csv)
    observed = _select_cosines(rows, args.label, args.max_over_rounds)
    if (args.dim is None) == (args.null_csv is None):
        raise ValueError("provide exactly one of --dim or --null-csv")
    if args.dim is not None:
        null_model = ExactNull(args.dim)
    else:
        null_rows = report.read_cosine_csv(args.null_csv)
        null_model = EmpiricalNull(
            _select_cosines(null_rows, "unobserved", args.max_over_rounds)
        )
    bound = estimators.epsilon_lower_bound(observed, null_model, args.delta, args.confidence)
    _print_json(
        {
            "command": "lower-bound",
            "value": bound.value,
            "confidence": bound.confidence,
            "threshold_used": encode_float(bound.threshold_used),
            "null_model": null_model.describe(),
            "observed_samples": int(observed.size),
        }
    )
    return 0


def _cmd_validate_normality(args: argparse.Namespace) -> int:
    rows = report.read_cosine_csv(args.csv)
    values = _select_cosines(rows, args.label, args.max_over_rounds)
    diagnostic = estimators.anderson_darling(values)
    _print_json(
        {
            "command": "validate-normality",
            "ad_statistic": diagnostic.ad_statistic,
            "reject_1pct": diagnostic.reject_1pct,
            "reject_15pct": diagnostic.reject_15pct,
            "samples": int(values.size),
        }
    )
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    from .figures import plot_cosine_densities

    rows = report.read_cosine_csv(args.csv)
    values_by_label = {}
    for label in ("observed", "unobserved"):
        try:
            values_by_label[label] = _select_cosines(rows, label, args.max_over_rounds)
        except ValueError:
            continue
    if not values_by_label:
        raise ValueError("CSV contains no selectable cosine rows")
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".png")
    path = plot_cosine_densities(values_by_label, out, dim=args.dim)
    _print_json({"command": "plot", "figure": str(path)})
    return 0


def _add_selection_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--label", default="observed", choices=["observed", "unobserved"])
    parser.add_argument(
        "--max-over-rounds",
        action="store_true",
        help="use the per-canary max over per-round rows instead of final-model rows",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canary-audit",
        description="One-shot empirical privacy estimation with random sphere canaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gauss = sub.add_parser("gauss-audit", help="audit one Gaussian vector-sum release")
    gauss.add_argument("--dim", type=int, required=True)
    gauss.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    gauss.add_argument("--canaries", type=int, required=True)
    gauss.add_argument("--delta", type=float, required=True)
    gauss.add_argument("--seed", type=int, default=0)
    gauss.add_argument(
        "--repeats", type=int, default=1, help="independent repeats; run i uses seed + i"
    )
    gauss.add_argument("--confidence", type=float, default=0.95)
    gauss.add_argument("--out-dir", default=".")
    gauss.add_argument("--threads", type=int, default=1)
    gauss.set_defaults(func=_cmd_gauss_audit)

    fl = sub.add_parser("fl-audit", help="simulate and audit DP-FedAvg")
    fl.add_argument("config", help="path to a JSON FederatedConfig document")
    fl.add_argument(
        "--runs", type=int, default=1, help="independent runs pooled; run i uses seed + i"
    )
    fl.add_argument("--trace-all", action="store_true", help="record every round's cosines")
    fl.add_argument("--seed", type=int, default=None, help="override the config seed")
    fl.add_argument("--confidence", type=float, default=0.95)
    fl.add_argument("--figures", action="store_true", help="render a density figure")
    fl.add_argument("--out-dir", default=".")
    fl.add_argument("--threads", type=int, default=1)
    fl.set_defaults(func=_cmd_fl_audit)

    eps = sub.add_parser("epsilon", help="exact two-Gaussian epsilon/delta conversion")
    eps.add_argument("--mu1", type=float, required=True)
    eps.add_argument("--sigma1", type=float, required=True)
    eps.add_argument("--mu2", type=float, required=True)
    eps.add_argument("--sigma2", type=float, required=True)
    eps.add_argument("--delta", type=float, default=None, help="report epsilon at this delta")
    eps.add_argument("--epsilon", type=float, default=None, help="report delta at this epsilon")
    eps.set_defaults(func=_cmd_epsilon)

    lower = sub.add_parser("lower-bound", help="epsilon lower bound from a cosine CSV")
    lower.add_argument("--csv", required=True)
    lower.add_argument("--dim", type=int, default=None, help="exact null dimension")
    lower.add_argument("--null-csv", default=None, help="CSV of unobserved cosines")
    lower.add_argument("--delta", type=float, required=True)
    lower.add_argument("--confidence", type=float, default=0.95)
    _add_selection_flags(lower)
    lower.set_defaults(func=_cmd_lower_bound)

    normality = sub.add_parser(
        "validate-normality", help="Anderson-Darling diagnostic on a cosine CSV"
    )
    normality.add_argument("--csv", required=True)
    _add_selection_flags(normality)
    normality.set_defaults(func=_cmd_validate_normality)

    plot = sub.add_parser("plot", help="density figure from a cosine CSV")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", default=None, help="output image path (default: CSV with .png)")
    plot.add_argument("--dim", type=int, default=None, help="overlay the null density")
    _add_selection_flags(plot)
    plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
