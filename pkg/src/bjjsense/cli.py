"""Command-line interface: scans, scaling studies, and the estimation pipeline.

Subcommands read an optional JSON config, compute, and emit CSV tables into
``--out``.  Every output carries ``#`` comment lines with the resolved
config and seed, so a rerun with the same inputs is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, io
from .criticality import (
    METHODS,
    ModelParams,
    ScanConfig,
    default_lambda_grid,
    locate_critical_gap,
    scaling_study,
    scan_lambda,
    temperature_sweep,
)
from .estimation import (
    DoubleGaussianFit,
    HistogramSpec,
    bootstrap,
    fit_series,
    series_estimates,
    synth_samples,
)
from .io import read_series_csv, write_columns, write_table


class CliError(Exception):
    """User-facing error with a machine-parsable category and exit code."""

    def __init__(self, category: str, message: str, exit_code: int = 2):
        super().__init__(f"{category}: {message}")
        self.exit_code = exit_code


# Config keys per subcommand: name -> (default, description).  Defaults of
# None mark required or conditionally required keys.
SCAN_KEYS = {
    "n_particles": (1000, "boson number N"),
    "sweep": ("lambda", "'lambda' or 'temperature'"),
    "lambda_min": (-1.6, "scan start (lambda sweep)"),
    "lambda_max": (-0.4, "scan end (lambda sweep)"),
    "lambda_step": (2e-3, "scan step (lambda sweep)"),
    "refine": (False, "add a fine pass (step/10) around the peak"),
    "temperature": (0.0, "temperature in units of Omega (lambda sweep)"),
    "temperatures": (None, "temperature list (temperature sweep)"),
    "lambda_value": ("critical", "'critical' or a number (temperature sweep)"),
    "delta": (2e-3, "symmetry-breaking tilt delta/Omega"),
    "tunneling": (1.0, "Rabi coupling Omega"),
    "methods": (list(METHODS), "subset of moment/classical/quantum"),
    "epsilon0": (1e-4, "fidelity displacement scale"),
    "seed": (0, "unused by scan; recorded for provenance"),
    "threads": (None, "worker cap (default: all cores)"),
}

SCALING_KEYS = {
    "n_values": ([200, 300, 500, 700, 1000], "system sizes"),
    "temperature": (0.0, "temperature in units of Omega"),
    "delta_points": (25, "log-spaced tilt grid size over [1e-6, 1e-1]"),
    "window_points": (41, "lambda window points per tilt"),
    "epsilon0": (1e-4, "fidelity displacement scale"),
    "tunneling": (1.0, "Rabi coupling Omega"),
    "seed": (0, "unused by scaling; recorded for provenance"),
    "threads": (None, "worker cap (default: all cores)"),
}

CRITICAL_KEYS = {
    "n_values": ([200, 300, 500, 700, 1000], "system sizes"),
    "bracket": ([-1.5, -0.85], "lambda bracket for the gap minimum"),
    "levels": ([0, 2], "gap levels (lower, upper)"),
    "tunneling": (1.0, "Rabi coupling Omega"),
    "seed": (0, "unused; recorded for provenance"),
    "threads": (None, "unused; recorded for provenance"),
}

SERIES_KEYS = {
    "input_csv": (None, "measurement CSV (scattering_length_a0, z)"),
    "scattering_lengths": (None, "synthetic grid (units a0)"),
    "zbar": (None, "synthetic separations per point"),
    "sigma": (None, "synthetic width(s), scalar or list"),
    "amplitude_plus": (1.0, "synthetic +zbar weight(s)"),
    "amplitude_minus": (1.0, "synthetic -zbar weight(s)"),
    "n_samples": (500, "samples per point, scalar or list"),
    "bin_width": (0.05, "histogram bin width"),
}

PIPELINE_KEYS = {
    **SERIES_KEYS,
    "n_replicas": (3000, "bootstrap replicas (>= 100)"),
    "write_replicas": (False, "emit replica values per estimator"),
    "seed": (0, "master seed for synthesis and bootstrap"),
    "threads": (None, "unused; recorded for provenance"),
}

BOOTSTRAP_KEYS = {
    **SERIES_KEYS,
    "estimator": ("chi_cl", "'chi_mom' or 'chi_cl'"),
    "n_replicas": (3000, "bootstrap replicas (>= 100)"),
    "background": (None, "'none' or 'exponential' (default per estimator)"),
    "write_replicas": (False, "emit replica values"),
    "seed": (0, "master seed"),
    "threads": (None, "unused; recorded for provenance"),
}

KEYS_BY_COMMAND = {
    "scan": SCAN_KEYS,
    "scaling": SCALING_KEYS,
    "critical-point": CRITICAL_KEYS,
    "pipeline": PIPELINE_KEYS,
    "bootstrap": BOOTSTRAP_KEYS,
}


def _load_config(args, keys) -> dict:
    config = {name: default for name, (default, _) in keys.items()}
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as err:
            raise CliError("config", f"cannot read {args.config}: {err}")
        except json.JSONDecodeError as err:
            raise CliError("config", f"{args.config} is not valid JSON: {err}")
        if not isinstance(user, dict):
            raise CliError("config", f"{args.config} must hold a JSON object")
        unknown = sorted(set(user) - set(keys))
        if unknown:
            raise CliError("config", f"unknown keys: {', '.join(unknown)}")
        config.update(user)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    if config.get("threads") is None:
        config["threads"] = os.cpu_count() or 1
    return config


def _check_outdir(path: str) -> None:
    if not os.path.isdir(path):
        raise CliError("output", f"output directory does not exist: {path}")


def _provenance(command: str, config: dict) -> list[str]:
    resolved = json.dumps(config, sort_keys=True)
    return [
        f"bjjsense {__version__} {command}",
        f"config: {resolved}",
        f"seed: {config.get('seed', 0)}",
    ]


def _out(args, name: str) -> str:
    return os.path.join(args.out, name)


# ---------------------------------------------------------------------------
# subcommands


def cmd_scan(args) -> int:
    config = _load_config(args, SCAN_KEYS)
    _check_outdir(args.out)
    methods = tuple(config["methods"])
    if config["sweep"] == "temperature":
        temps = config["temperatures"]
        if temps is None:
            raise CliError("config", "temperature sweep needs 'temperatures'")
        lam = config["lambda_value"]
        if lam == "critical":
            lam = locate_critical_gap(
                int(config["n_particles"]), tunneling=config["tunneling"]
            ).lambda_c
        table = temperature_sweep(
            int(config["n_particles"]),
            [float(t) for t in temps],
            float(lam),
            imbalance=float(config["delta"]),
            tunneling=float(config["tunneling"]),
            which=methods,
            epsilon0=float(config["epsilon0"]),
        )
        columns = {"T": table["temperature"]}
        for m, col in (("moment", "chi_mom"), ("classical", "chi_cl"),
                       ("quantum", "chi_q")):
            if m in methods:
                columns[col] = table[m]
        write_columns(
            _out(args, "scan.csv"), columns, _provenance("scan", config)
        )
        return 0
    if config["sweep"] != "lambda":
        raise CliError("config", f"unknown sweep {config['sweep']!r}")
    if args.quick:
        config["lambda_step"] = max(float(config["lambda_step"]), 1e-2)
    grid = default_lambda_grid(
        float(config["lambda_min"]), float(config["lambda_max"]),
        float(config["lambda_step"]),
    )
    template = ModelParams(
        n_particles=int(config["n_particles"]),
        tunneling=float(config["tunneling"]),
        imbalance=float(config["delta"]),
    )
    scan_cfg = ScanConfig(
        params_template=template,
        lambda_grid=grid,
        temperature=float(config["temperature"]),
        which=methods,
        epsilon0=float(config["epsilon0"]),
        threads=int(config["threads"]),
    )
    curve = scan_lambda(scan_cfg)
    if config["refine"]:
        ref = "quantum" if "quantum" in methods else methods[0]
        peak = curve.peak(ref)
        step = float(config["lambda_step"]) / 10.0
        half = 25 * step
        fine = default_lambda_grid(
            peak.lambda_peak - half, peak.lambda_peak + half, step
        )
        merged = np.unique(np.concatenate([grid, fine]))
        curve = scan_lambda(
            ScanConfig(
                params_template=template,
                lambda_grid=merged,
                temperature=float(config["temperature"]),
                which=methods,
                epsilon0=float(config["epsilon0"]),
                threads=int(config["threads"]),
            )
        )
    columns = {
        "lambda": curve.lambda_grid,
        "mean_jz": curve.mean_jz,
        "var_jz": curve.var_jz,
    }
    if curve.chi_mom is not None:
        columns["chi_mom"] = curve.chi_mom
    if curve.chi_cl is not None:
        columns["chi_cl"] = curve.chi_cl
    if curve.chi_q is not None:
        columns["chi_q"] = curve.chi_q
    write_columns(_out(args, "scan.csv"), columns, _provenance("scan", config))
    return 0


def cmd_scaling(args) -> int:
    config = _load_config(args, SCALING_KEYS)
    _check_outdir(args.out)
    n_values = [int(n) for n in config["n_values"]]
    delta_points = int(config["delta_points"])
    window_points = int(config["window_points"])
    if args.quick:
        n_values = [n for n in n_values if n <= 300] or [80, 120, 200]
        if len(n_values) < 3:
            n_values = [80, 120, 200]
        delta_points = min(delta_points, 13)
        window_points = min(window_points, 21)
    delta_grid = np.logspace(-6.0, -1.0, delta_points)
    comments = _provenance("scaling", config)
    if len(n_values) < 3:
        # Emit the per-N table anyway; the power-law fits need >= 3 sizes.
        rows = []
        for n in n_values:
            crit = locate_critical_gap(n, tunneling=float(config["tunneling"]))
            rows.append((n, crit.lambda_c, crit.shift))
        write_table(
            _out(args, "scaling.csv"),
            ["N", "lambda_c_n", "shift"],
            rows,
            comments,
        )
        raise CliError(
            "scaling", f"power-law fits need >= 3 sizes, got {len(n_values)}",
            exit_code=1,
        )
    result = scaling_study(
        n_values,
        float(config["temperature"]),
        delta_grid=delta_grid,
        window_points=window_points,
        epsilon0=float(config["epsilon0"]),
        tunneling=float(config["tunneling"]),
        threads=int(config["threads"]),
    )
    write_columns(
        _out(args, "scaling.csv"),
        {
            "N": result.n_values,
            "lambda_c_n": result.lambda_c,
            "shift": -1.0 - result.lambda_c,
            "delta_star_mom": result.delta_star["moment"],
            "delta_star_cl": result.delta_star["classical"],
            "delta_star_q": result.delta_star["quantum"],
            "chi_mom": result.chi["moment"],
            "chi_cl": result.chi["classical"],
            "chi_q": result.chi["quantum"],
        },
        comments,
    )
    fit_rows = []
    for m, col in (("moment", "chi_mom"), ("classical", "chi_cl"),
                   ("quantum", "chi_q")):
        fit = result.fits[m]
        fit_rows.append(
            (f"{col}_over_N", fit.prefactor, fit.exponent, fit.r_squared)
        )
    fit_rows.append(
        ("critical_shift", result.shift_fit.prefactor,
         result.shift_fit.exponent, result.shift_fit.r_squared)
    )
    write_table(
        _out(args, "scaling_fits.csv"),
        ["quantity", "prefactor", "exponent", "r_squared"],
        fit_rows,
        comments,
    )
    return 0


def cmd_critical_point(args) -> int:
    config = _load_config(args, CRITICAL_KEYS)
    _check_outdir(args.out)
    bracket = tuple(float(b) for b in config["bracket"])
    levels = tuple(int(l) for l in config["levels"])
    rows = []
    for n in config["n_values"]:
        crit = locate_critical_gap(
            int(n), bracket, tunneling=float(config["tunneling"]),
            levels=levels,
        )
        rows.append((crit.n_particles, crit.lambda_c, crit.gap, crit.shift))
    write_table(
        _out(args, "critical_point.csv"),
        ["N", "lambda_c_n", "gap", "shift"],
        rows,
        _provenance("critical-point", config),
    )
    return 0


def _resolve_series(config):
    if config["input_csv"] is not None:
        try:
            return read_series_csv(config["input_csv"])
        except (OSError, ValueError) as err:
            raise CliError("series", str(err))
    a = config["scattering_lengths"]
    zbar = config["zbar"]
    if a is None or zbar is None:
        raise CliError(
            "config",
            "need either 'input_csv' or 'scattering_lengths' plus 'zbar'",
        )
    n_pts = len(a)

    def per_point(value, name):
        if np.isscalar(value):
            return [float(value)] * n_pts
        if len(value) != n_pts:
            raise CliError(
                "config", f"{name} has {len(value)} entries for {n_pts} points"
            )
        return [float(v) for v in value]

    sigma = per_point(config["sigma"] if config["sigma"] is not None else 0.1,
                      "sigma")
    ap = per_point(config["amplitude_plus"], "amplitude_plus")
    am = per_point(config["amplitude_minus"], "amplitude_minus")
    gens = [
        DoubleGaussianFit(
            separation=float(z), width=s, amplitude_plus=p, amplitude_minus=q
        )
        for z, s, p, q in zip(zbar, sigma, ap, am)
    ]
    n_samples = config["n_samples"]
    if not np.isscalar(n_samples):
        n_samples = [int(n) for n in n_samples]
    else:
        n_samples = int(n_samples)
    try:
        return synth_samples(
            [float(v) for v in a], gens, n_samples, int(config["seed"])
        )
    except ValueError as err:
        raise CliError("series", str(err))


def _replica_table(result):
    rows = []
    for a, col in zip(result.scattering_lengths, result.replica_values):
        for v in col:
            rows.append((a, v))
    return rows


def cmd_pipeline(args) -> int:
    config = _load_config(args, PIPELINE_KEYS)
    _check_outdir(args.out)
    n_replicas = int(config["n_replicas"])
    if args.quick:
        n_replicas = min(n_replicas, 100)
    series = _resolve_series(config)
    spec = HistogramSpec(bin_width=float(config["bin_width"]))
    fits = fit_series(series, spec)
    estimates = series_estimates(series, spec, fits)
    comments = _provenance("pipeline", config)
    boots = {}
    for estimator in ("chi_mom", "chi_cl"):
        boots[estimator] = bootstrap(
            series, estimator, n_replicas=n_replicas,
            seed=int(config["seed"]), spec=spec,
        )
    write_columns(
        _out(args, "pipeline_results.csv"),
        {
            "a_s": series.scattering_lengths,
            "zbar": estimates["zbar"],
            "sigma_z": estimates["sigma"],
            "chi_mom": estimates["chi_mom"],
            "chi_mom_err": boots["chi_mom"].widths,
            "chi_cl": estimates["chi_cl"],
            "chi_cl_err": boots["chi_cl"].widths,
        },
        comments,
    )
    if config["write_replicas"]:
        for estimator, result in boots.items():
            write_table(
                _out(args, f"replicas_{estimator}.csv"),
                ["a_s", "chi"],
                _replica_table(result),
                comments,
            )
    return 0


def cmd_bootstrap(args) -> int:
    config = _load_config(args, BOOTSTRAP_KEYS)
    _check_outdir(args.out)
    estimator = config["estimator"]
    if estimator not in ("chi_mom", "chi_cl"):
        raise CliError(
            "config", f"estimator must be 'chi_mom' or 'chi_cl', got {estimator!r}"
        )
    n_replicas = int(config["n_replicas"])
    if args.quick:
        n_replicas = min(n_replicas, 100)
    series = _resolve_series(config)
    spec = HistogramSpec(bin_width=float(config["bin_width"]))
    try:
        result = bootstrap(
            series, estimator, n_replicas=n_replicas,
            seed=int(config["seed"]), spec=spec,
            background_kind=config["background"],
        )
    except (ValueError, RuntimeError) as err:
        raise CliError("bootstrap", str(err), exit_code=1)
    comments = _provenance("bootstrap", config)
    write_columns(
        _out(args, "bootstrap.csv"),
        {
            "a_s": result.scattering_lengths,
            "center": result.centers,
            "width": result.widths,
        },
        comments,
    )
    if config["write_replicas"]:
        write_table(
            _out(args, f"replicas_{estimator}.csv"),
            ["a_s", "chi"],
            _replica_table(result),
            comments,
        )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _key_help(keys) -> str:
    lines = ["config keys:"]
    for name, (default, description) in keys.items():
        lines.append(f"  {name:<20} {description} (default: {default!r})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bjjsense",
        description="Fidelity susceptibilities of the two-mode boson model.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "scan": (cmd_scan, "susceptibility scan over lambda or temperature"),
        "scaling": (cmd_scaling, "finite-size scaling study with fits"),
        "critical-point": (cmd_critical_point, "gap-minimum critical points"),
        "pipeline": (cmd_pipeline, "synth/fit/estimate/bootstrap chain"),
        "bootstrap": (cmd_bootstrap, "bootstrap one estimator"),
    }
    for name, (handler, help_text) in handlers.items():
        p = sub.add_parser(
            name,
            help=help_text,
            epilog=_key_help(KEYS_BY_COMMAND[name]),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", required=True, help="output directory (must exist)")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--threads", type=int, help="cap worker threads")
        p.add_argument(
            "--quick", action="store_true",
            help="reduced grids and replica counts for CI",
        )
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except (ValueError, RuntimeError) as err:
        print(f"error: runtime: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
