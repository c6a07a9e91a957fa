"""Command-line surface: synth / analyze / verify / hadamard.

Exit codes are a stable contract: 0 success, 1 validation or configuration
error (including failed verify checks), 2 computation failure during
analysis (with one diagnostic line per failing record on stderr).
"""

from __future__ import annotations

import csv
import fnmatch
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .actd import read_actd, write_actd
from .exceptions import OrthogonalityError, UnsupportedSizeError
from .hadamard import (
    BASE_SIZES,
    hadamard,
    load_base_matrix,
    orthogonality_residual,
    plan_for_size,
)
from .linalg import channel_magnitudes
from .metrics import DifficultyReport, measure_transformed, pair_records, pearson
from .outliers import (
    OutlierTokenSpec,
    cluster_check,
    predict_centroids,
    predict_rot_max,
    predict_smooth_rot_max,
    normal_stream,
    synth_massive_token,
)
from .quant import QuantConfig, quantize_rtn
from .suites import SUITES, build_suite, suite_names
from .transforms import (
    TRANSFORM_KINDS,
    TransformSpec,
    apply_transform,
    verify_equivalence,
)
from .charts import render_channel_chart, safe_filename

__all__ = ["RunConfig", "run_analyze", "run_verify", "main", "cli"]

_CSV_COLUMNS = (
    "record",
    "transform",
    "bits",
    "layer_error",
    "act_difficulty",
    "wt_difficulty",
    "act_kurtosis",
    "wt_kurtosis",
    "act_max_abs",
    "effective_bins_min",
)


class ComputationFailure(Exception):
    """Analysis failed on at least one record; diagnostics already printed."""


@dataclass
class RunConfig:
    """Everything one analyze run needs.

    ``input_source`` is an ACTD file path or a built-in suite name (the
    suite is then generated on the fly with ``seed``). Alpha overrides are
    ``(pattern, alpha)`` pairs matched against record names with shell
    glob semantics (first match wins); ``exclude`` patterns drop records
    from the correlation summary only — CSV rows are never filtered.
    """

    input_source: str
    report_path: str
    bits_act: int = 4
    bits_wt: int = 4
    transforms: tuple[str, ...] = TRANSFORM_KINDS
    alpha: float = 0.5
    alpha_overrides: tuple[tuple[str, float], ...] = ()
    exclude: tuple[str, ...] = ()
    charts_dir: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.transforms:
            raise ValueError("at least one transform must be listed")
        for kind in self.transforms:
            if kind not in TRANSFORM_KINDS:
                raise ValueError(
                    f"unknown transform {kind!r}; valid kinds: {', '.join(TRANSFORM_KINDS)}"
                )
        # Validate bit widths and alphas eagerly so misconfiguration is a
        # config error (exit 1), not a mid-run computation error.
        QuantConfig(bits=self.bits_act)
        QuantConfig(bits=self.bits_wt)
        TransformSpec(kind="smooth", alpha=self.alpha)
        for pattern, alpha in self.alpha_overrides:
            if not pattern:
                raise ValueError("alpha override pattern must be nonempty")
            TransformSpec(kind="smooth", alpha=alpha)

    def resolve_alpha(self, record_name: str) -> float:
        for pattern, alpha in self.alpha_overrides:
            if fnmatch.fnmatchcase(record_name, pattern):
                return alpha
        return self.alpha


def _load_records(cfg: RunConfig):
    path = Path(cfg.input_source)
    if path.exists():
        return read_actd(path)
    if cfg.input_source in SUITES:
        return build_suite(cfg.input_source, cfg.seed)
    raise ValueError(
        f"input {cfg.input_source!r} is neither a readable file nor a known suite "
        f"({', '.join(suite_names())})"
    )


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def run_analyze(cfg: RunConfig, out=None, err=None) -> list[DifficultyReport]:
    """Execute an analyze run: CSV report, correlation summary, charts.

    Raises:
        ComputationFailure: If any (record, transform) cell failed;
            per-record diagnostics go to ``err`` first.
    """
    # Resolve the streams late so callers that redirect sys.stdout/stderr
    # (tests, capture wrappers) see the diagnostics.
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    records = _load_records(cfg)
    pairs = pair_records(records)
    cfg_act = QuantConfig(bits=cfg.bits_act, granularity="per-token")
    cfg_wt = QuantConfig(bits=cfg.bits_wt, granularity="per-channel")

    rows: list[DifficultyReport] = []
    failures: list[str] = []
    charts: dict[str, list[tuple[str, np.ndarray]]] = {}
    for name, x, w in pairs:
        alpha = cfg.resolve_alpha(name)
        for kind in cfg.transforms:
            spec = TransformSpec(kind=kind, alpha=alpha)
            try:
                xt, wt = apply_transform(x, w, spec)
                rows.append(measure_transformed(name, kind, xt, wt, cfg_act, cfg_wt))
                if cfg.charts_dir is not None:
                    charts.setdefault(name, []).append((kind, channel_magnitudes(xt)))
            except Exception as exc:  # noqa: BLE001 — per-record diagnostics
                failures.append(f"record {name!r}, transform {kind}: {exc}")
    if failures:
        for line in failures:
            print(f"error: {line}", file=err)
        raise ComputationFailure(f"{len(failures)} record/transform cells failed")

    rows.sort(key=lambda r: (r.record_name, r.transform))
    bits_label = f"a{cfg.bits_act}w{cfg.bits_wt}"
    report_path = Path(cfg.report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.record_name,
                    row.transform,
                    bits_label,
                    _format_value(row.layer_error),
                    _format_value(row.act_difficulty),
                    _format_value(row.wt_difficulty),
                    _format_value(row.act_kurtosis),
                    _format_value(row.wt_kurtosis),
                    _format_value(row.act_max_abs),
                    row.effective_bins_min,
                ]
            )

    _print_correlation_summary(rows, cfg, out)

    if cfg.charts_dir is not None:
        charts_dir = Path(cfg.charts_dir)
        charts_dir.mkdir(parents=True, exist_ok=True)
        for name, series in charts.items():
            svg = render_channel_chart(name, series)
            (charts_dir / f"{safe_filename(name)}.svg").write_text(svg)
    return rows


def _print_correlation_summary(rows, cfg: RunConfig, out) -> None:
    """Per-transform pearson(layer_error, act_difficulty²) across records."""
    excluded = {
        row.record_name
        for row in rows
        if any(fnmatch.fnmatchcase(row.record_name, pat) for pat in cfg.exclude)
    }
    print(
        "correlation summary: pearson(layer_error, act_difficulty^2) across records",
        file=out,
    )
    for kind in cfg.transforms:
        kept = [
            row for row in rows if row.transform == kind and row.record_name not in excluded
        ]
        label = f"  {kind:<14s} "
        if len(kept) < 2:
            print(f"{label}undefined (needs >= 2 records, have {len(kept)})", file=out)
            continue
        errors = [row.layer_error for row in kept]
        difficulties = [row.act_difficulty**2 for row in kept]
        try:
            value = pearson(errors, difficulties)
        except ValueError as exc:
            print(f"{label}undefined ({exc})", file=out)
            continue
        print(
            f"{label}{value:+.6f} (records={len(kept)}, excluded={len(excluded)})",
            file=out,
        )


# ---------------------------------------------------------------------------
# verify checks


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _check_assets(data_dir) -> list[CheckResult]:
    results = []
    for size in BASE_SIZES:
        name = f"asset hadamard_{size}.txt"
        try:
            load_base_matrix(size, data_dir)
            results.append(CheckResult(name, True, "exact H Hᵀ = n·I"))
        except (OrthogonalityError, UnsupportedSizeError) as exc:
            results.append(CheckResult(name, False, str(exc)))
    return results


def _check_hadamard_family(data_dir) -> list[CheckResult]:
    results = []
    for size in (2, 4, 8, 64, 128, 344):
        name = f"hadamard d={size}"
        try:
            h = hadamard(size, data_dir)
            residual = orthogonality_residual(h)
            entry_target = 1.0 / np.sqrt(size)
            entries_exact = bool(np.all(np.abs(np.abs(h) - entry_target) == 0.0))
            signs = np.rint(h * np.sqrt(size)).astype(np.int64)
            nonzero_columns = int(np.count_nonzero(signs.sum(axis=0)))
            ok = residual <= 1e-10 and entries_exact and nonzero_columns <= 1
            results.append(
                CheckResult(
                    name,
                    ok,
                    f"residual={residual:.2e}, |entries|=1/√d: {entries_exact}, "
                    f"unbalanced columns={nonzero_columns}",
                )
            )
        except (OrthogonalityError, UnsupportedSizeError) as exc:
            results.append(CheckResult(name, False, str(exc)))
    try:
        hadamard(6, data_dir)
        results.append(CheckResult("hadamard size 6 rejected", False, "no error raised"))
    except UnsupportedSizeError as exc:
        results.append(CheckResult("hadamard size 6 rejected", True, str(exc)))
    return results


def _bruteforce_grid(x: np.ndarray, steps: np.ndarray, max_level: int, rounding: str):
    """Nearest-grid-point search over all integer levels, with the tie rule."""
    levels = np.arange(-max_level, max_level + 1)
    grid = np.empty(x.shape, dtype=np.int64)
    for i in range(x.shape[0]):
        step = steps[i]
        if step == 0:
            grid[i] = 0
            continue
        distances = np.abs(x[i][:, None] - levels[None, :] * step)
        best = distances.min(axis=1)
        for j in range(x.shape[1]):
            tied = levels[distances[j] == best[j]]
            if tied.size == 1:
                grid[i, j] = tied[0]
            elif rounding == "half-even":
                grid[i, j] = tied[np.abs(tied) % 2 == 0][0]
            else:
                grid[i, j] = tied[np.argmax(np.abs(tied))]
    return grid


def _check_quantizer() -> list[CheckResult]:
    results = []
    mismatches = 0
    worst_ratio = 0.0
    trials = 0
    for bits in (2, 3, 4, 8):
        for rounding in ("half-even", "half-away"):
            cfg = QuantConfig(bits=bits, rounding=rounding)
            for index in range(15):
                trials += 1
                seed = bits * 1000 + index * 2 + (rounding == "half-away")
                shape_draws = splitmix_pair(seed)
                rows, cols = shape_draws
                x = normal_stream(seed + 99991, rows * cols).reshape(rows, cols) * 3.0
                result = quantize_rtn(x, cfg)
                oracle = _bruteforce_grid(x, result.steps, cfg.max_level, rounding)
                if not np.array_equal(result.integer_grid, oracle):
                    mismatches += 1
                gap = np.abs(x - result.dequantized)
                bound = result.steps[:, None] / 2 * (1 + 1e-12) + 1e-300
                worst_ratio = max(worst_ratio, float((gap / np.maximum(bound, 1e-300)).max()))
    results.append(
        CheckResult(
            "quantizer brute-force match",
            mismatches == 0 and worst_ratio <= 1.0,
            f"{trials} matrices, mismatches={mismatches}, worst |x−Q(x)|/(Δ/2)={worst_ratio:.3f}",
        )
    )
    deltas = 0
    for granularity in ("per-token", "per-channel"):
        cfg = QuantConfig(bits=4, granularity=granularity)
        x = normal_stream(1234, 48).reshape(6, 8) * 5.0
        once = quantize_rtn(x, cfg).dequantized
        twice = quantize_rtn(once, cfg).dequantized
        if not np.array_equal(once, twice):
            deltas += 1
    results.append(
        CheckResult("quantizer idempotence", deltas == 0, f"granularities with drift: {deltas}")
    )
    return results


def splitmix_pair(seed: int) -> tuple[int, int]:
    """Two small matrix dimensions in [1, 8] derived from a seed."""
    draws = normal_stream(seed, 2)
    return (int(abs(draws[0]) * 3) % 8 + 1, int(abs(draws[1]) * 3) % 8 + 1)


def _check_equivalence() -> list[CheckResult]:
    worst = 0.0
    for c_in in (2, 4, 8, 64):
        x = normal_stream(c_in, 16 * c_in).reshape(16, c_in)
        w = normal_stream(c_in + 7, c_in * 12).reshape(c_in, 12)
        for kind in TRANSFORM_KINDS:
            xt, wt = apply_transform(x, w, TransformSpec(kind=kind, alpha=0.5))
            worst = max(worst, verify_equivalence(x, w, xt, wt))
    return [
        CheckResult(
            "transform equivalence",
            worst < 1e-10,
            f"worst relative residual {worst:.2e} over kinds × c_in ∈ {{2,4,8,64}}",
        )
    ]


def _centroid_check(dim: int, outliers: dict[int, float], sigma: float, seed: int) -> CheckResult:
    spec = OutlierTokenSpec(
        dim=dim,
        outlier_dims=tuple(outliers),
        outlier_values=outliers,
        noise_sigma=sigma,
        seed=seed,
    )
    token = synth_massive_token(spec)
    rotated = token @ hadamard(dim)
    centroids = predict_centroids(spec)
    check = cluster_check(rotated, centroids, sigma)
    expected = dim // 2 ** (len(outliers) - 1)
    sizes = sorted(check.counts.values())
    ok = check.fraction == 1.0 and all(size == expected for size in sizes)
    return CheckResult(
        f"centroid clustering d={dim}",
        ok,
        f"fraction={check.fraction:.6f}, clusters={len(check.counts)}, "
        f"sizes={sizes}, expected size={expected}",
    )


def _check_max_formulas(full: bool) -> list[CheckResult]:
    results = []
    worst_rel = 0.0
    dims = (4, 64, 1024)
    cases = ({0: 8.0}, {0: 8.0, 1: 4.0}, {0: 9.0, 1: 5.0, 2: 3.0})
    for dim in dims:
        for outliers in cases:
            spec = OutlierTokenSpec(
                dim=dim, outlier_dims=tuple(outliers), outlier_values=outliers
            )
            token = synth_massive_token(spec)
            empirical = float(np.abs(token @ hadamard(dim)).max())
            predicted = predict_rot_max(spec)
            worst_rel = max(worst_rel, abs(empirical - predicted) / predicted)
    results.append(
        CheckResult(
            "rotated max formula (σ=0)",
            worst_rel <= 1e-9,
            f"worst relative gap {worst_rel:.2e} over d ∈ {dims}, |O| ∈ {{1,2,3}}",
        )
    )

    # Keep the max-carrying centroid thinly populated (2·d/2^|O| = 16
    # entries) so the empirical max stays well inside the ±3σ band.
    sigma = 0.05
    spec = OutlierTokenSpec(
        dim=64,
        outlier_dims=(3, 17, 40),
        outlier_values={3: 50.0, 17: 30.0, 40: 20.0},
        noise_sigma=sigma,
        seed=0,
    )
    token = synth_massive_token(spec)
    empirical = float(np.abs(token @ hadamard(spec.dim)).max())
    predicted = predict_rot_max(spec)
    gap = abs(empirical - predicted)
    results.append(
        CheckResult(
            "rotated max noise band (σ>0)",
            gap <= 3 * sigma,
            f"|empirical − predicted| = {gap:.4f} <= 3σ = {3 * sigma:.4f}",
        )
    )

    dim = 1024
    spec = OutlierTokenSpec(
        dim=dim, outlier_dims=(1, 2), outlier_values={1: 900.0, 2: 500.0}
    )
    token = synth_massive_token(spec)
    w = np.abs(normal_stream(77, dim * 8)).reshape(dim, 8) * 0.1 + 0.05
    x = token[None, :]
    xt, wt = apply_transform(x, w, TransformSpec(kind="smooth-rotate", alpha=0.5))
    empirical = float(np.abs(xt).max())
    w_max = {j: float(np.abs(w[j]).max()) for j in spec.outlier_dims}
    predicted = predict_smooth_rot_max(spec, w_max)
    rel = abs(empirical - predicted) / predicted
    results.append(
        CheckResult(
            "smooth-rotate max formula",
            rel <= 0.10,
            f"relative gap {rel:.4f} at d={dim} (tolerance 0.10)",
        )
    )
    return results


def _check_suite_inequalities() -> list[CheckResult]:
    records = build_suite("massive-basic", 0)
    cfg_act = QuantConfig(bits=4, granularity="per-token")
    cfg_wt = QuantConfig(bits=4, granularity="per-channel")
    errors: dict[str, dict[str, float]] = {}
    for name, x, w in pair_records(records):
        errors[name] = {}
        for kind in TRANSFORM_KINDS:
            xt, wt = apply_transform(x, w, TransformSpec(kind=kind, alpha=0.5))
            errors[name][kind] = measure_transformed(
                name, kind, xt, wt, cfg_act, cfg_wt
            ).layer_error
    first = errors["layer.0.down_proj"]
    pathology = CheckResult(
        "massive pathology: rotate worse than none",
        first["rotate"] > first["none"],
        f"rotate={first['rotate']:.3e} vs none={first['none']:.3e}",
    )
    margins = []
    hybrid_ok = True
    for name, by_kind in errors.items():
        rest = min(by_kind["none"], by_kind["smooth"], by_kind["rotate"])
        hybrid_ok &= by_kind["smooth-rotate"] < rest
        margins.append(rest / by_kind["smooth-rotate"])
    hybrid = CheckResult(
        "massive hybrid: smooth-rotate wins every record",
        hybrid_ok,
        f"min advantage ×{min(margins):.2f}",
    )
    return [pathology, hybrid]


def run_verify(level: str = "fast", data_dir=None, out=None) -> int:
    """Run the invariant suite; print one line per check; 0 iff all pass."""
    out = sys.stdout if out is None else out
    results: list[CheckResult] = []
    results.extend(_check_assets(data_dir))
    results.extend(_check_hadamard_family(data_dir))
    results.extend(_check_quantizer())
    results.extend(_check_equivalence())
    results.append(_centroid_check(256, {1: 300.0, 2: 150.0}, 0.01, seed=3))
    results.extend(_check_max_formulas(full=level == "full"))
    if level == "full":
        results.append(_centroid_check(4096, {1: 900.0, 2: 500.0, 4: 300.0}, 0.01, seed=1))
        results.extend(_check_suite_inequalities())
    failed = 0
    for result in results:
        status = "PASS" if result.ok else "FAIL"
        failed += 0 if result.ok else 1
        print(f"{status}  {result.name}  ({result.detail})", file=out)
    print(
        f"{len(results)} checks: {len(results) - failed} passed, {failed} failed",
        file=out,
    )
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# click wiring


@click.group(name="smoothrot")
@click.version_option(version=__version__, prog_name="smoothrot")
def cli() -> None:
    """Quantization workbench: synthetic outliers, equivalent transforms,
    difficulty metrics, and layer-error reports."""


@cli.command("synth")
@click.option("--suite", required=True, help="Suite name (see error message for choices).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_synth(suite: str, seed: int, out_path: str) -> None:
    """Generate a synthetic suite and write it as an ACTD file."""
    records = build_suite(suite, seed)  # ValueError lists suites on unknown name
    count = write_actd(records, out_path)
    click.echo(f"wrote {len(records)} records ({count} bytes) to {out_path}")


@cli.command("analyze")
@click.option("--input", "input_source", required=True,
              help="ACTD file path, or a built-in suite name to generate on the fly.")
@click.option("--bits-act", default=4, show_default=True, type=int)
@click.option("--bits-wt", default=4, show_default=True, type=int)
@click.option("--transform", "transforms", default=",".join(TRANSFORM_KINDS),
              show_default=True, help="Comma-separated transform kinds.")
@click.option("--alpha", default=0.5, show_default=True, type=float,
              help="Global migration strength for smoothing kinds.")
@click.option("--alpha-for", "alpha_for", multiple=True, metavar="PATTERN=ALPHA",
              help="Per-record alpha override; glob-matched on record names, "
                   "first match wins (e.g. '*.down_proj=0.65'). Repeatable.")
@click.option("--exclude", multiple=True, metavar="PATTERN",
              help="Exclude matching records from the correlation summary. Repeatable.")
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--charts", "charts_dir", default=None, type=click.Path(file_okay=False),
              help="Directory for per-record channel-magnitude SVG charts.")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed when --input names a suite.")
def cmd_analyze(
    input_source: str,
    bits_act: int,
    bits_wt: int,
    transforms: str,
    alpha: float,
    alpha_for: tuple[str, ...],
    exclude: tuple[str, ...],
    report_path: str,
    charts_dir: str | None,
    seed: int,
) -> None:
    """Quantize records under each transform and write the CSV report."""
    overrides = []
    for item in alpha_for:
        pattern, separator, value = item.partition("=")
        if not separator:
            raise ValueError(f"--alpha-for expects PATTERN=ALPHA, got {item!r}")
        try:
            overrides.append((pattern, float(value)))
        except ValueError:
            raise ValueError(f"--alpha-for alpha must be a number, got {value!r}") from None
    kinds = tuple(k.strip() for k in transforms.split(",") if k.strip())
    cfg = RunConfig(
        input_source=input_source,
        report_path=report_path,
        bits_act=bits_act,
        bits_wt=bits_wt,
        transforms=kinds,
        alpha=alpha,
        alpha_overrides=tuple(overrides),
        exclude=tuple(exclude),
        charts_dir=charts_dir,
        seed=seed,
    )
    rows = run_analyze(cfg)
    click.echo(f"wrote {len(rows)} report rows to {report_path}")


@cli.command("verify")
@click.option("--level", default="fast", show_default=True,
              type=click.Choice(["fast", "full"]))
@click.option("--data-dir", default=None, type=click.Path(file_okay=False, exists=True),
              help="Override directory for Hadamard assets (testing hook).")
def cmd_verify(level: str, data_dir: str | None) -> int:
    """Run the built-in invariant checks and report pass/fail per check."""
    return run_verify(level, data_dir)


@cli.command("hadamard")
@click.option("--size", required=True, type=int)
@click.option("--check", "do_check", is_flag=True, help="Also verify orthogonality.")
@click.option("--data-dir", default=None, type=click.Path(file_okay=False, exists=True),
              help="Override directory for Hadamard assets (testing hook).")
def cmd_hadamard(size: int, do_check: bool, data_dir: str | None) -> None:
    """Show the construction plan for a size (optionally verifying it)."""
    plan = plan_for_size(size)  # UnsupportedSizeError → exit 1 via main()
    factors = " × ".join(str(f) for f in plan.factors) if plan.factors else "1"
    click.echo(f"size {plan.size} = {factors}")
    if do_check:
        h = hadamard(size, data_dir)
        residual = orthogonality_residual(h)
        signs = np.rint(h * np.sqrt(size)).astype(np.int64)
        nonzero_columns = int(np.count_nonzero(signs.sum(axis=0)))
        click.echo(
            f"orthogonality residual ‖RRᵀ−I‖_F = {residual:.3e}; "
            f"columns with nonzero sum: {nonzero_columns}"
        )


def main(argv=None) -> None:
    """Console entry point with the stable exit-code contract."""
    try:
        result = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(130)
    except ComputationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    sys.exit(result if isinstance(result, int) else 0)


if __name__ == "__main__":
    main()
