"""
Command-line entry point: ``spde-limits {simulate,study,renorm,check}``.

Data goes to files in the output directory (and the renorm table and check
results to stdout); diagnostics go to stderr. Failures end with a single
line ``error: <kind>: <message>`` and exit code 2 for configuration
problems, 1 for everything else.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence

from . import __version__
from .checks import CheckHooks, raise_on_failure, run_fast_checks
from .config import RenormBlock, RunConfig, SimulateBlock, load_config
from .errors import ConfigurationError, GridMismatchError, SpdeLimitsError
from .io import (
    CSV_MAX_N,
    ResultSink,
    dump_field,
    dumps_record,
    prepare_output_dir,
    utc_now,
    with_extension,
    write_field_csv,
    write_manifest,
    write_summary_csv,
)
from .models import Model, ModelSpec
from .noise import NoiseSeed
from .parallel import resolve_workers
from .renorm import (
    c_eps,
    c_eps_grid,
    c_zero_estimate,
    cutoff_for,
    series_asymptotics,
    wick_convergence_study,
    wick_series_bound,
)
from .solver import SolveConfig, solve_coupled, solve_limit
from .spectral import FourierGrid, inverse
from .studies import (
    c_zero_for,
    error_rate,
    regime_scan,
    resolve_c_zero,
    run_convergence_study,
    theorem_inequality_check,
)
from .timing import configure_logging, timed_operation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


@dataclass
class RunOutputs:
    """Files and manifest extras collected while a command runs."""

    out_dir: Path
    files: list[Path] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def path(self, name: str) -> Path:
        target = self.out_dir / name
        self.files.append(target)
        return target


@contextmanager
def tracked_run(
    command: str, config: RunConfig, out_dir: Path, workers: tuple[int, str]
) -> Iterator[RunOutputs]:
    """Write the manifest on the way out, marked incomplete on any failure."""
    started = utc_now()
    outputs = RunOutputs(out_dir)
    outputs.extra.update({"workers": workers[0], "workers_source": workers[1]})
    complete = False
    with timed_operation(f"{command} into {out_dir}") as watch:
        try:
            yield outputs
            complete = True
        finally:
            outputs.extra["elapsed_seconds"] = round(watch.elapsed, 3)
            write_manifest(
                out_dir,
                command=command,
                config=config.to_dict(),
                version=__version__,
                started=started,
                outputs=outputs.files,
                complete=complete,
                extra=outputs.extra,
            )


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def simulate(config: RunConfig, outputs: RunOutputs, workers: int) -> None:
    """One coupled solve with norm rows and optional field dumps."""
    block: SimulateBlock = config.block("simulate")
    grid = FourierGrid(config.n)
    c_zero = c_zero_for(block.model, block.sigma_schedule, block.c_zero, workers)
    spec = ModelSpec.from_schedule(
        block.model,
        block.eps,
        block.sigma_schedule,
        mollifier=block.mollifier,
        c_zero=c_zero,
        include_zero_mode=block.include_zero_mode,
    )
    initial = block.initial.build(grid)
    solve = SolveConfig(config.dt, config.T, initial, config.scheme, block.save_every)
    limit = solve_limit(spec, solve)
    seed = NoiseSeed(config.master_seed, block.sample)
    result = solve_coupled(spec, solve, seed, limit)
    trajectories = {
        "z": result.z,
        "v": result.v,
        "u_eps": result.u_eps,
        "limit": limit,
        "error": result.error,
    }
    tags = {
        "model": spec.model.value,
        "eps": spec.eps,
        "sigma": spec.sigma,
        "c_zero": c_zero,
        "seed": config.master_seed,
        "sample": block.sample,
    }
    rows = []
    with ResultSink(outputs.path("norms.ndjson")) as sink:
        for name, traj in trajectories.items():
            assert traj is not None
            for row in traj.norm_rows():
                record = {"trajectory": name, **row, **tags}
                sink.write(record)
                rows.append(record)
    write_summary_csv(outputs.path("norms.csv"), rows)
    for t in block.snapshots:
        for name in block.dump_fields:
            traj = trajectories[name]
            assert traj is not None
            j = traj.index_of_time(t)
            physical = inverse(traj.snapshot(j))
            stem = outputs.out_dir / "fields" / f"{name}_t{traj.times[j]:.6g}"
            meta = {**tags, "field": name, "time": float(traj.times[j])}
            data_path, meta_path = dump_field(stem, physical, meta)
            outputs.files.extend([data_path, meta_path])
            if grid.n <= CSV_MAX_N:
                outputs.files.append(
                    write_field_csv(with_extension(stem, ".csv"), physical)
                )
    outputs.extra["c_zero"] = c_zero


def study(config: RunConfig, outputs: RunOutputs, workers: int) -> None:
    """Run the study selected by ``study.mode``."""
    study_config = config.study_config()
    mode = config.block("study").mode
    outputs.extra["mode"] = mode
    with ResultSink(outputs.path("records.ndjson")) as sink:

        def stream(record: Any) -> None:
            sink.write(record.to_dict())

        if mode == "convergence":
            result = run_convergence_study(study_config, workers, stream)
            summary = list(result.summary)
            report: dict[str, Any] = {
                "c_zero": result.c_zero,
                "summary": summary,
                "reduction": _finite_or_none(result.reduction),
                "error_rate": error_rate(summary),
            }
        elif mode == "theorem":
            theorem = theorem_inequality_check(study_config, workers, stream)
            report = theorem.to_dict()
            summary = [
                {
                    "eps": v.eps,
                    "verdict": v.verdict,
                    "lhs": None if v.lhs is None else v.lhs.p_hat,
                    "rhs_total": v.rhs_total,
                    "joint_width": v.joint_width,
                    "implication_rate": v.implication_rate,
                    "skipped": v.skipped,
                }
                for v in theorem.per_eps
            ]
            outputs.extra.update(
                {"big_k": theorem.big_k, "big_k_source": theorem.big_k_source}
            )
        elif mode == "regimes":
            blocks = regime_scan(study_config, workers, stream)
            report = {"regimes": [b.to_dict() for b in blocks]}
            summary = [
                {
                    "schedule": b.schedule.kind.value,
                    "tag": b.tag,
                    "eps": eps,
                    "sigma": b.sigma[j],
                    "exact_l2": b.exact_l2[j],
                    "mc_l2": b.mc_l2[j].mean,
                    "exact_h_minus1": b.exact_h_minus1[j],
                    "mc_h_minus1": b.mc_h_minus1[j].mean,
                    "median_sup_error": (
                        None if b.error_medians is None else b.error_medians[j]
                    ),
                }
                for b in blocks
                for j, eps in enumerate(b.eps)
            ]
        else:
            c_zero = resolve_c_zero(study_config, workers=workers)
            specs = [study_config.spec(eps, c_zero) for eps in study_config.eps_grid]
            stats = wick_convergence_study(
                specs,
                study_config.n,
                study_config.T,
                study_config.steps,
                study_config.samples,
                study_config.master_seed,
                c_zero=c_zero,
                save_every=study_config.save_every,
                workers=workers,
            )
            summary = [s.to_dict() for s in stats]
            sink.write_all(summary)
            report = {"c_zero": c_zero, "statistics": summary}
    write_summary_csv(outputs.path("summary.csv"), summary)
    _write_json(outputs.path("report.json"), report)


def _write_json(path: Path, data: Any) -> None:
    path.write_text(dumps_record(data) + "\n", encoding="utf-8")


def renorm(config: RunConfig, outputs: RunOutputs, workers: int) -> None:
    """C_ε tables, the C₀ estimate, series laws and the Wick series bound."""
    block: RenormBlock = config.block("renorm")
    grid = FourierGrid(config.n)
    schedule = block.sigma_schedule
    table = []
    with ResultSink(outputs.path("renorm.ndjson")) as sink:
        for eps in block.eps_grid:
            spec = ModelSpec.from_schedule(
                block.model, eps, schedule, mollifier=block.mollifier
            )
            base = {"statistic": "c_eps", "eps": eps, "sigma": spec.sigma}
            rows = [
                {**base, "cutoff": k, "c_eps": c_eps(spec, k, workers)}
                for k in block.cutoffs
            ]
            tight = cutoff_for(spec, block.rel_tol)
            rows.append(
                {
                    **base,
                    "cutoff": tight,
                    "tail_tight": True,
                    "c_eps": c_eps(spec, tight, workers),
                }
            )
            grid_value = c_eps_grid(spec, grid)
            rows.append({**base, "cutoff": "grid", "n": grid.n, "c_eps": grid_value})
            if block.wick_cutoff:
                sink.write(
                    {
                        "statistic": "wick_bound",
                        "eps": eps,
                        "cutoff": block.wick_cutoff,
                        "value": wick_series_bound(spec, block.wick_cutoff),
                        "limit_value": wick_series_bound(
                            spec, block.wick_cutoff, limit=True
                        ),
                    }
                )
            sink.write_all(rows)
            table.extend(rows)
        estimate = _c_zero_row(block, workers)
        sink.write(estimate)
        outputs.extra["c_zero"] = estimate
        if block.model is not Model.AC_MOLLIFIED_NOISE and len(block.eps_grid) >= 2:
            for delta in block.delta:
                law = series_asymptotics(
                    block.model, block.eps_grid, delta, block.rel_tol, workers
                )
                sink.write({"statistic": "series", **law.to_dict()})
    write_summary_csv(outputs.path("c_eps.csv"), table)
    print(f"{'eps':>10} {'cutoff':>8} {'c_eps':>20}")
    for row in table:
        print(f"{row['eps']:>10g} {str(row['cutoff']):>8} {row['c_eps']:>20.12g}")
    value = estimate["value"]
    print(f"C0: {estimate['label']}" + ("" if value is None else f" = {value:.12g}"))


def _c_zero_row(block: RenormBlock, workers: int) -> dict[str, Any]:
    try:
        estimate = c_zero_estimate(
            block.sigma_schedule, block.eps_grid, block.model, block.rel_tol, workers
        )
    except ConfigurationError as exc:
        logger.warning(f"No C0 estimate: {exc}")
        return {"statistic": "c_zero", "label": "unavailable", "value": None}
    row = estimate.to_dict()
    row["value"] = _finite_or_none(estimate.value)
    row["divergent"] = estimate.regime == "divergent"
    return {"statistic": "c_zero", **row}


def check(hooks: CheckHooks) -> int:
    results = run_fast_checks(hooks)
    for result in results:
        print(result.line())
    raise_on_failure(results)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, RunOutputs, int], None]] = {
    "simulate": simulate,
    "study": study,
    "renorm": renorm,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spde-limits",
        description="Simulate and study renormalized SPDE limits on the torus",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "One coupled solve with norms and field dumps"),
        ("study", "Monte Carlo study selected by study.mode"),
        ("renorm", "Renormalization constants and lattice series"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, required=True, help="Run config")
        sub.add_argument("--out", type=Path, help="Output directory")
        sub.add_argument("--workers", type=int, help="Worker processes")
        sub.add_argument(
            "--force", action="store_true", help="Overwrite a non-empty --out"
        )
        sub.add_argument("--verbose", "-v", action="store_true", help="Debug logs")
    sub = subparsers.add_parser("check", help="Fast invariant suite")
    sub.add_argument("--verbose", "-v", action="store_true", help="Debug logs")
    sub.add_argument(
        "--corrupt-lambda-sign", action="store_true", help=argparse.SUPPRESS
    )
    return parser


def run_command(args: argparse.Namespace) -> int:
    if args.command == "check":
        return check(CheckHooks(corrupt_lambda_sign=args.corrupt_lambda_sign))
    config = load_config(args.config)
    out = args.out or (Path(config.output_dir) if config.output_dir else None)
    if out is None:
        raise ConfigurationError("no output directory: set output_dir or --out")
    workers = resolve_workers(args.workers, config.workers)
    logger.info(f"Using {workers[0]} workers ({workers[1]})")
    out_dir = prepare_output_dir(out, args.force)
    with tracked_run(args.command, config, out_dir, workers) as outputs:
        COMMANDS[args.command](config, outputs, workers[0])
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return run_command(args)
    except (ConfigurationError, GridMismatchError) as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpdeLimitsError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print("error: interrupted: run stopped by user", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
