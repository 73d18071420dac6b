"""Command-line front end: ingestion -> test -> backtest -> reports.

Every run writes a manifest (effective config plus content hashes of the
inputs) next to its outputs. Exit codes: 2 for IO problems, 3 for validation
problems, 4 for solver failures.
"""
from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from .backtest import run_backtest, track_to_csv, weight_stats
from .eumax import PortfolioSet, SolverError
from .inference import DEFAULT_B_EXPONENTS, spanning_test
from .mc import DgpSpec, simulate_rejection_rate
from .panel import PanelError, ReturnPanel, align, load_panel
from .perf import DEFAULT_TRC, perf_report, perf_report_to_csv
from .spanning import GridParams

EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _require_files(*paths):
    for p in paths:
        if p is None:
            continue
        if not Path(p).is_file():
            _fail(EXIT_IO, f"input file not found: {p}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: Path, command: str, config: dict, inputs: dict):
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs.values() if p is not None},
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _merge_config(config_path, cli_values: dict, defaults: dict) -> dict:
    """Overlay precedence: explicit flag > config file > built-in default."""
    from_file = {}
    if config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(from_file)
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    return merged


def _parse_exponents(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(","))


def _grid(cfg: dict) -> GridParams:
    return GridParams(int(cfg["n1"]), int(cfg["n2"]), int(cfg["p1"]), int(cfg["p2"]))


def _load_universe(cfg: dict) -> tuple[ReturnPanel, ReturnPanel]:
    factors = load_panel(cfg["factors"], scale=cfg["scale"])
    anomaly = load_panel(cfg["anomaly"], scale=cfg["scale"])
    return factors, anomaly


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _csv_write(path: Path, header: list[str], rows: list[list]):
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _rep(x) -> str:
    return repr(float(x))


@click.group()
def main():
    """Prospect-spanning tests, backtests and simulations."""


_COMMON_DEFAULTS = {
    "alpha": 0.05,
    "n1": 10,
    "n2": 5,
    "p1": 10,
    "p2": 5,
    "b_exponents": list(DEFAULT_B_EXPONENTS),
    "mode": "paper",
    "scale": 1.0,
    "seed": 0,
}


def _common_options(fn):
    opts = [
        click.option("--alpha", type=float, default=None, help="Significance level."),
        click.option("--n1", type=int, default=None, help="Loss-side knot count."),
        click.option("--n2", type=int, default=None, help="Loss-side weight levels."),
        click.option("--p1", type=int, default=None, help="Gain-side knot count."),
        click.option("--p2", type=int, default=None, help="Gain-side weight levels."),
        click.option(
            "--b-exponents",
            default=None,
            help="Comma-separated block-length exponents.",
        ),
        click.option(
            "--mode", type=click.Choice(["paper", "clamped"]), default=None
        ),
        click.option("--scale", type=float, default=None, help="Input value scale."),
        click.option("--seed", type=int, default=None),
        click.option("--config", "config_path", default=None, help="JSON config file."),
        click.option("--out", "outdir", default=".", help="Output directory."),
        click.option("--jobs", type=int, default=1, help="Worker cap."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _validate_common(cfg: dict):
    if not 0.0 < cfg["alpha"] < 0.5:
        raise ValueError("alpha must be in (0, 0.5)")
    if min(cfg["n1"], cfg["n2"], cfg["p1"], cfg["p2"]) < 2:
        raise ValueError("grid parameters must be >= 2")


def _run_guarded(fn):
    try:
        fn()
    except SolverError as exc:
        _fail(EXIT_SOLVER, str(exc))
    except (PanelError, ValueError) as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))


@main.command("span-test")
@click.option("--factors", required=True, help="CSV of benchmark factor returns.")
@click.option("--anomaly", required=True, help="CSV of candidate anomaly returns.")
@_common_options
def cmd_span_test(factors, anomaly, config_path, outdir, jobs, **cli_values):
    """Test whether the factor set spans the set enlarged with each anomaly."""

    def run():
        cfg = _merge_config(config_path, cli_values, _COMMON_DEFAULTS)
        cfg["b_exponents"] = _parse_exponents(cfg["b_exponents"])
        _validate_common(cfg)
        cfg.update({"factors": factors, "anomaly": anomaly})
        _require_files(factors, anomaly, config_path)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        fac, anom = _load_universe(cfg)
        grid = _grid(cfg)
        rows = []
        quantile_rows = []
        for label in anom.assets:
            single = ReturnPanel(
                anom.dates, (label,), anom.values[:, [anom.assets.index(label)]]
            )
            joined = align(fac, single)
            bench = PortfolioSet(joined.assets, tuple(range(fac.n_assets)))
            enlarged = PortfolioSet.full(joined.assets)
            dec = spanning_test(
                joined,
                bench,
                enlarged,
                alpha=cfg["alpha"],
                b_exponents=cfg["b_exponents"],
                grid=grid,
                mode=cfg["mode"],
                jobs=jobs,
            )
            result = "Reject Spanning" if dec.decision == "RejectSpanning" else "Spanning"
            rows.append(
                [
                    label,
                    _rep(dec.rho),
                    _rep(dec.gammas[0]),
                    _rep(dec.gammas[1]),
                    _rep(dec.q_bc),
                    result,
                ]
            )
            for b, q in sorted(dec.quantiles_per_b.items()):
                quantile_rows.append([label, b, _rep(q)])
            click.echo(
                f"{label}: statistic {_fmt(dec.rho)}, critical {_fmt(dec.q_bc)} -> {result}"
            )
        _csv_write(
            out / "span_test.csv",
            ["variable", "statistic", "gamma0", "gamma1", "critical_value", "result"],
            rows,
        )
        _csv_write(
            out / "subsample_quantiles.csv",
            ["variable", "b", "quantile"],
            quantile_rows,
        )
        _write_manifest(
            out,
            "span-test",
            {k: v for k, v in cfg.items() if k not in ("factors", "anomaly")},
            {"factors": factors, "anomaly": anomaly},
        )

    _run_guarded(run)


@main.command("backtest")
@click.option("--factors", required=True, help="CSV of benchmark factor returns.")
@click.option("--anomaly", required=True, help="CSV of candidate anomaly returns.")
@click.option("--rf", default=None, help="CSV with a single risk-free column.")
@click.option("--window", type=int, default=None, help="Calibration window length.")
@click.option("--trc", type=float, default=None, help="Proportional transaction cost.")
@_common_options
def cmd_backtest(factors, anomaly, rf, window, trc, config_path, outdir, jobs, **cli_values):
    """Rolling-window out-of-sample comparison of both optimal portfolios."""

    def run():
        defaults = dict(_COMMON_DEFAULTS, window=300, trc=DEFAULT_TRC)
        cli_values.update({"window": window, "trc": trc})
        cfg = _merge_config(config_path, cli_values, defaults)
        cfg["b_exponents"] = _parse_exponents(cfg["b_exponents"])
        _validate_common(cfg)
        if cfg["window"] < 2:
            raise ValueError("window must be >= 2")
        if cfg["trc"] < 0:
            raise ValueError("trc must be nonnegative")
        _require_files(factors, anomaly, rf, config_path)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        fac, anom = _load_universe(dict(cfg, factors=factors, anomaly=anomaly))
        joined = align(fac, anom)
        bench = PortfolioSet(joined.assets, tuple(range(fac.n_assets)))
        enlarged = PortfolioSet.full(joined.assets)
        track = run_backtest(
            joined,
            bench,
            enlarged,
            window=int(cfg["window"]),
            grid=_grid(cfg),
            mode=cfg["mode"],
            jobs=jobs,
        )
        rf_series = None
        if rf is not None:
            rf_panel = load_panel(rf, scale=cfg["scale"])
            idx = {d: i for i, d in enumerate(rf_panel.dates)}
            missing = [d for d in track.dates if d not in idx]
            if missing:
                raise ValueError(f"risk-free series missing dates: {missing[:5]}")
            rf_series = rf_panel.values[[idx[d] for d in track.dates], 0]
        report = perf_report(track, rf=rf_series, trc=cfg["trc"])
        track_to_csv(track, out / "backtest_track.csv")
        perf_report_to_csv(report, out / "perf_report.csv")
        stat_rows = []
        for which in ("factor", "aug"):
            for asset, stats in weight_stats(track, which).items():
                stat_rows.append(
                    [
                        which,
                        asset,
                        _rep(stats.mean),
                        _rep(stats.sd),
                        "" if np.isnan(stats.skewness) else _rep(stats.skewness),
                        "" if np.isnan(stats.kurtosis) else _rep(stats.kurtosis),
                    ]
                )
        _csv_write(
            out / "weight_stats.csv",
            ["portfolio", "asset", "mean", "sd", "skewness", "kurtosis"],
            stat_rows,
        )
        _write_manifest(
            out,
            "backtest",
            {k: v for k, v in cfg.items()},
            {"factors": factors, "anomaly": anomaly, "rf": rf},
        )
        click.echo(
            f"backtest: {len(track)} out-of-sample months, "
            f"mean factor {_fmt(float(track.r_factor.mean()))}, "
            f"mean augmented {_fmt(float(track.r_aug.mean()))}"
        )

    _run_guarded(run)


@main.command("mc")
@click.option(
    "--dgp",
    type=click.Choice(["iid-normal", "ar1", "garch-like"]),
    default="iid-normal",
)
@click.option("--n-assets", type=int, default=1, help="Benchmark universe size.")
@click.option("--t", "t_len", type=int, default=200, help="Sample length.")
@click.option("--reps", type=int, default=200)
@click.option("--mean", type=float, default=0.005)
@click.option("--sd", type=float, default=0.04)
@click.option("--corr", type=float, default=0.3)
@click.option("--persistence", type=float, default=0.0)
@click.option(
    "--null",
    "null_mode",
    type=click.Choice(["spanning-true", "spanning-false"]),
    default="spanning-true",
)
@click.option("--shift", type=float, default=0.01, help="Alternative's monthly premium.")
@_common_options
def cmd_mc(
    dgp,
    n_assets,
    t_len,
    reps,
    mean,
    sd,
    corr,
    persistence,
    null_mode,
    shift,
    config_path,
    outdir,
    jobs,
    **cli_values,
):
    """Size/power simulation of the spanning test under a configurable DGP."""

    def run():
        defaults = dict(_COMMON_DEFAULTS)
        defaults.update({"n1": 6, "n2": 3, "p1": 6, "p2": 3})
        cfg = _merge_config(config_path, cli_values, defaults)
        cfg["b_exponents"] = _parse_exponents(cfg["b_exponents"])
        _validate_common(cfg)
        _require_files(config_path)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        spec = DgpSpec.simple(
            kind=dgp,
            n_assets=n_assets,
            mean=mean,
            sd=sd,
            corr=corr,
            persistence=persistence,
            null_mode=null_mode,
            shift=shift,
        )
        summary = simulate_rejection_rate(
            spec,
            t=t_len,
            reps=reps,
            alpha=cfg["alpha"],
            seed=int(cfg["seed"]),
            grid=_grid(cfg),
            b_exponents=cfg["b_exponents"],
            mode=cfg["mode"],
            jobs=jobs,
        )
        _csv_write(
            out / "mc_reps.csv",
            ["rep", "rho", "q_bc", "reject"],
            [
                [i, _rep(summary.rho[i]), _rep(summary.q_bc[i]), int(summary.reject[i])]
                for i in range(reps)
            ],
        )
        _csv_write(
            out / "mc_summary.csv",
            ["dgp", "null_mode", "t", "reps", "alpha", "rate"],
            [[dgp, null_mode, t_len, reps, _rep(cfg["alpha"]), _rep(summary.rate)]],
        )
        _write_manifest(
            out,
            "mc",
            dict(
                cfg,
                dgp=dgp,
                n_assets=n_assets,
                t=t_len,
                reps=reps,
                mean=mean,
                sd=sd,
                corr=corr,
                persistence=persistence,
                null=null_mode,
                shift=shift,
            ),
            {},
        )
        click.echo(f"rejection rate: {_fmt(summary.rate)} over {reps} reps")

    _run_guarded(run)


@main.command("report")
@click.option(
    "--fixtures",
    required=True,
    help="CSV with variable,statistic,critical_value columns (optional model column).",
)
@click.option("--out", "outdir", default=".", help="Output directory.")
def cmd_report(fixtures, outdir):
    """Replay stored (statistic, critical value) pairs through the decision rule."""

    def run():
        import csv as _csv

        _require_files(fixtures)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        with open(fixtures, newline="", encoding="utf-8") as fh:
            reader = _csv.DictReader(fh)
            required = {"variable", "statistic", "critical_value"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise ValueError(
                    "fixtures need columns variable, statistic, critical_value"
                )
            has_model = "model" in reader.fieldnames
            for rec in reader:
                rho = float(rec["statistic"])
                q = float(rec["critical_value"])
                result = "Reject Spanning" if rho > q else "Spanning"
                row = ([rec["model"]] if has_model else []) + [
                    rec["variable"],
                    _rep(rho),
                    _rep(q),
                    result,
                ]
                rows.append(row)
                prefix = f"{rec['model']}/" if has_model else ""
                click.echo(
                    f"{prefix}{rec['variable']}: statistic {_fmt(rho)}, "
                    f"critical {_fmt(q)} -> {result}"
                )
        header = (["model"] if rows and len(rows[0]) == 5 else []) + [
            "variable",
            "statistic",
            "critical_value",
            "result",
        ]
        _csv_write(out / "span_test.csv", header, rows)
        _write_manifest(out, "report", {}, {"fixtures": fixtures})

    _run_guarded(run)


if __name__ == "__main__":
    main()
