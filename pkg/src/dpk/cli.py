"""Command-line interface.

Verbs: ``fit``, ``forecast``, ``eval``, ``synth``, ``suggest-freqs``.

Exit codes:

    0  success
    2  configuration or usage error
    3  data error (missing file, bad values, nothing to align)
    4  training diverged
    5  no periodic structure found

Set ``DPK_LOG_LEVEL`` (``DEBUG``, ``INFO``, ``WARNING``...) to control the
diagnostics written to stderr.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__, evaluation, synth
from .exceptions import (
    BracketError,
    ConstantSeriesError,
    ConvergenceError,
    DivergenceError,
    NonUniformSamplingError,
    ParameterError,
    SupportError,
)
from .model import DPKForecaster
from .series import format_float, pca_first_component, read_csv, suggest_frequencies, write_csv

log = logging.getLogger("dpk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_NO_PERIODICITY = 5

LOG_ENV = "DPK_LOG_LEVEL"
DEFAULT_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def config_error(msg):
    return CliError(msg, EXIT_CONFIG)


def data_error(msg):
    return CliError(msg, EXIT_DATA)


# --------------------------------------------------------------------- config

_NUM = (int, float)
_OPT_NUM = (int, float, type(None))

# section -> key -> accepted types
SCHEMA = {
    "seed": int,
    "output_dir": str,
    "data": {
        "path": str,
        "generator": str,
        "n_steps": int,
        "time_column": str,
        "value_column": str,
        "value_columns": list,
        "pca": bool,
        "unit_label": str,
    },
    "split": {
        "train_start": _OPT_NUM,
        "train_end": _OPT_NUM,
        "gap": _NUM,
        "test_end": _OPT_NUM,
        "step": _NUM,
    },
    "model": {
        "family": str,
        "n_categories": (int, type(None)),
        "periods": (list, type(None)),
        "omegas": (list, type(None)),
        "include_trend": bool,
        "trend_scale": _OPT_NUM,
        "hidden": list,
        "head_hidden": (dict, type(None)),
        "output_scale": (int, float, dict),
        "normalize": (bool, str),
        "log_cdf": str,
    },
    "training": {
        "learning_rate": _NUM,
        "weight_decay": _NUM,
        "batch_size": int,
        "epochs": (int, str),
        "confidence_mode": str,
        "partition_fraction": _NUM,
        "weighting": (dict, type(None)),
    },
    "weighting": {
        "period": _NUM,
        "test_mid": _NUM,
        "recency_center": _NUM,
        "recency_scale": _NUM,
        "toy_amp": _NUM,
        "recency_shift": _NUM,
    },
    "forecast": {"levels": list},
    "synth": {"generator": str, "n_steps": int, "seed": int, "duffing": dict},
}


def _check_section(name, block, schema):
    if not isinstance(block, dict):
        raise config_error(f"config section {name!r} must be a mapping")
    unknown = sorted(set(block) - set(schema))
    if unknown:
        raise config_error(f"unknown key(s) in {name!r}: {', '.join(unknown)} (allowed: {', '.join(sorted(schema))})")
    for key, value in block.items():
        types = schema[key]
        if isinstance(value, bool) and types in (_NUM, _OPT_NUM, int) or not isinstance(value, types):
            raise config_error(f"{name}.{key}: unexpected value {value!r}")


def validate_config(cfg):
    """Reject unknown keys and obviously invalid values; returns ``cfg``."""
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise config_error("config must be a mapping at the top level")
    top = {k: v for k, v in SCHEMA.items() if not isinstance(v, dict)}
    sections = {k: v for k, v in SCHEMA.items() if isinstance(v, dict) and k != "weighting"}
    unknown = sorted(set(cfg) - set(top) - set(sections))
    if unknown:
        raise config_error(f"unknown top-level key(s): {', '.join(unknown)}")
    _check_section("<top>", {k: cfg[k] for k in top if k in cfg}, top)
    for name, schema in sections.items():
        if name in cfg:
            _check_section(name, cfg[name], schema)
    weighting = cfg.get("training", {}).get("weighting")
    if weighting is not None:
        _check_section("training.weighting", weighting, SCHEMA["weighting"])
    model = cfg.get("model", {})
    for key in ("periods", "omegas"):
        vals = model.get(key)
        if vals is not None and any(isinstance(v, bool) or not isinstance(v, _NUM) or not v > 0 for v in vals):
            raise config_error(f"model.{key} must be positive numbers")
    if model.get("periods") is not None and model.get("omegas") is not None:
        raise config_error("give model.periods or model.omegas, not both")
    data = cfg.get("data", {})
    if "path" in data and "generator" in data:
        raise config_error("give data.path or data.generator, not both")
    if "generator" in data and data["generator"] not in synth.GENERATORS:
        raise config_error(f"unknown generator {data['generator']!r}; available: {', '.join(synth.GENERATORS)}")
    levels = cfg.get("forecast", {}).get("levels")
    if levels is not None:
        _parse_levels(levels)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise config_error(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = yaml.safe_load(raw.decode("utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise config_error(f"cannot parse config {path}: {exc}") from None
    return validate_config(cfg), hashlib.sha256(raw).hexdigest()


def _parse_levels(levels):
    if isinstance(levels, str):
        levels = [s for s in levels.replace(",", " ").split() if s]
    try:
        out = tuple(float(v) for v in levels)
    except (TypeError, ValueError):
        raise config_error(f"quantile levels must be numbers, got {levels!r}") from None
    bad = [v for v in out if not 0 < v < 1]
    if bad:
        raise config_error(f"quantile levels must lie strictly inside (0, 1): {bad}")
    return out


def build_estimator(cfg, seed):
    model = dict(cfg.get("model", {}))
    training = dict(cfg.get("training", {}))
    params = {
        "family": model.pop("family", "normal"),
        "hidden": tuple(model.pop("hidden", (256, 64))),
        "random_state": seed,
    }
    params.update(model)
    params.update(training)
    try:
        est = DPKForecaster(**params)
        est.train_config()
        est._make_family()
        est._make_omegas()
    except (TypeError, ValueError) as exc:
        raise config_error(f"invalid model/training settings: {exc}") from None
    return est


def _resolve(base, path):
    p = Path(path)
    return p if p.is_absolute() else base / p


def load_training_series(cfg, base_dir, seed):
    """Training series (univariate) described by the ``data`` and ``split`` blocks."""
    data = cfg.get("data", {})
    if "generator" in data:
        n = int(data.get("n_steps", 20_000))
        name = data["generator"]
        if name == "duffing":
            dcfg = synth.DuffingConfig(**{**cfg.get("synth", {}).get("duffing", {}), "n_steps": n})
            series = synth.duffing_series(dcfg)[1]
        else:
            series = synth.GENERATORS[name](n, seed)[0]
    elif "path" in data:
        path = _resolve(base_dir, data["path"])
        if not path.is_file():
            raise data_error(f"data file not found: {path}")
        cols = data.get("value_columns")
        if cols is None and "value_column" in data:
            cols = [data["value_column"]]
        try:
            series = read_csv(path, cols, data.get("time_column", "t"), data.get("unit_label", ""))
        except ValueError as exc:
            raise data_error(f"{path}: {exc}") from None
        if series.n_dropped:
            log.warning("dropped %d rows with missing values from %s", series.n_dropped, path)
        if series.dim > 1:
            if not data.get("pca", False):
                raise config_error(f"{path} has {series.dim} value columns; set data.value_column or data.pca")
            try:
                series, loading = pca_first_component(series)
            except (ValueError, ConvergenceError) as exc:
                raise data_error(f"principal component projection failed: {exc}") from None
            log.info("projected onto first principal component, loading %s", np.round(loading, 6).tolist())
    else:
        raise config_error("config needs data.path or data.generator")
    split = cfg.get("split", {})
    series = series.window(split.get("train_start"), split.get("train_end"))
    if len(series) == 0:
        raise data_error("no observations fall inside the training window")
    return series


# ------------------------------------------------------------------- commands


def _output_dir(args, cfg=None):
    out = args.output_dir or (cfg or {}).get("output_dir") or "."
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(args):
    if not args.config:
        raise config_error("fit requires --config")
    cfg, digest = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    base_dir = Path(args.config).resolve().parent
    est = build_estimator(cfg, seed)
    series = load_training_series(cfg, base_dir, seed)
    out = _output_dir(args, cfg)
    try:
        est.fit(series)
    except DivergenceError as exc:
        raise CliError(str(exc), EXIT_DIVERGENCE) from None
    except (SupportError, ConstantSeriesError) as exc:
        raise data_error(str(exc)) from None
    except (ValueError, ParameterError) as exc:
        raise config_error(str(exc)) from None
    est.save(out / "model.json")
    history = est.loss_history_
    split_at = getattr(est, "confidence_phase_start_", None)
    phase = ["joint" if split_at is None else ("location" if i < split_at else "scale")
             for i in range(len(history))]
    with open(out / "training_log.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,phase\n")
        for i, (v, p) in enumerate(zip(history, phase)):
            fh.write(f"{i},{format_float(v)},{p}\n")
    manifest = {
        "dpk_version": __version__,
        "seed": seed,
        "config_path": str(Path(args.config)),
        "config_sha256": digest,
        "n_train": int(series.times.size),
        "train_t_min": float(series.times.min()),
        "train_t_max": float(series.times.max()),
        "n_epochs": int(est.n_epochs_),
        "family": est.family_.name,
        "model_sha256": hashlib.sha256((out / "model.json").read_bytes()).hexdigest(),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("trained %d epochs on %d points; final loss %s", est.n_epochs_, series.times.size,
             format_float(history[-1]) if history else "n/a")
    return EXIT_OK


def _forecast_times(args, cfg):
    if args.times:
        path = Path(args.times)
        if not path.is_file():
            raise data_error(f"times file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        if "t" not in header:
            raise data_error(f"{path}: missing time column 't'")
        try:
            rows = np.loadtxt(path, delimiter=",", skiprows=1, usecols=header.index("t"), ndmin=1)
        except ValueError as exc:
            raise data_error(f"{path}: {exc}") from None
        return np.asarray(rows, dtype=float)
    split = (cfg or {}).get("split", {})
    start, stop, step = args.start, args.stop, args.step
    if start is None and split.get("train_end") is not None:
        start = split["train_end"] + split.get("gap", 0)
    if stop is None:
        stop = split.get("test_end")
    if step is None:
        step = split.get("step", 1.0)
    if start is None or stop is None:
        raise config_error("forecast needs --times, or --start and --stop (or a config with a split block)")
    if not step > 0:
        raise config_error("--step must be positive")
    n = max(0, int(math.ceil((stop - start) / step - 1e-9)))
    return start + step * np.arange(n, dtype=float)


def cmd_forecast(args):
    cfg = load_config(args.config)[0] if args.config else {}
    if args.levels is not None:
        levels = _parse_levels(args.levels)
    else:
        levels = _parse_levels(cfg.get("forecast", {}).get("levels", DEFAULT_LEVELS))
    path = Path(args.model)
    if not path.is_file():
        raise data_error(f"model file not found: {path}")
    try:
        model = DPKForecaster.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise data_error(f"cannot load model {path}: {exc}") from None
    times = _forecast_times(args, cfg)
    try:
        fc = model.forecast(times, levels)
    except BracketError as exc:
        raise data_error(f"quantile computation failed: {exc}") from None
    cols = fc.to_columns()
    if args.output == "-":
        _write_columns(sys.stdout, cols)
    else:
        target = Path(args.output) if args.output else _output_dir(args, cfg) / "forecast.csv"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_csv(target, cols)
        log.info("wrote %d forecast rows to %s", times.size, target)
    return EXIT_OK


def _write_columns(fh, cols):
    names = list(cols)
    fh.write(",".join(names) + "\n")
    for row in zip(*(np.asarray(cols[n]).ravel() for n in names)):
        fh.write(",".join(format_float(v) for v in row) + "\n")


def _read_table(path):
    """Header-first numeric CSV as a dict of columns."""
    path = Path(path)
    if not path.is_file():
        raise data_error(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
    if header == [""]:
        raise data_error(f"{path}: empty file")
    try:
        body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise data_error(f"{path}: {exc}") from None
    if body.size == 0:
        body = np.zeros((0, len(header)))
    if body.shape[1] != len(header):
        raise data_error(f"{path}: {body.shape[1]} values per row but {len(header)} header fields")
    return {h: body[:, i] for i, h in enumerate(header)}


_FAMILY_COLUMNS = (
    ("skewnormal", ("xi", "k", "alpha")),
    ("normal", ("mu", "sigma")),
    ("gamma", ("shape", "scale")),
)


def _residuals(table, x, idx):
    for family, names in _FAMILY_COLUMNS:
        if all(n in table for n in names):
            params = {n: table[n][idx] for n in names}
            if family == "skewnormal":
                return evaluation.deskewed_residuals(x, params)
            return evaluation.standardized_residuals(x, params, family)
    return None


def _safe(fn, label):
    try:
        return fn()
    except ValueError as exc:
        log.warning("%s undefined: %s", label, exc)
        return None


def evaluate_window(name, table, obs_t, obs_x, baseline_e=None):
    """Score one forecast table against observations aligned by exact time."""
    if "t" not in table:
        raise data_error(f"{name}: forecast has no 't' column")
    lookup = {float(t): i for i, t in enumerate(obs_t)}
    pairs = [(i, lookup[float(t)]) for i, t in enumerate(table["t"]) if float(t) in lookup]
    n_unmatched = int(table["t"].size - len(pairs))
    if not pairs:
        raise data_error(f"{name}: no forecast time matches an observation time")
    if n_unmatched:
        log.warning("%s: %d forecast rows have no matching observation and were excluded", name, n_unmatched)
    fi = np.array([p[0] for p in pairs])
    x = obs_x[np.array([p[1] for p in pairs])]
    qcols = [c for c in table if c.startswith("q") and _is_number(c[1:])]
    row = {"window": name, "n_aligned": len(pairs), "n_unmatched": n_unmatched}
    if qcols:
        levels = tuple(100.0 * float(c[1:]) for c in qcols)
        qt = evaluation.QuantileForecastTable(table["t"][fi], levels, np.column_stack([table[c][fi] for c in qcols]))
        row["E"] = evaluation.pinball_score(qt, x)
    else:
        row["E"] = None
    row["R_VB"] = evaluation.relative_score(row["E"], baseline_e) if baseline_e is not None and row["E"] is not None \
        else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = _safe(lambda: _residuals(table, x, fi), "residuals")
    for w in caught:
        log.warning("%s: %s", name, w.message)
    row["bias"] = rep.mean_bias if rep is not None else None
    row["RMS"] = rep.rms if rep is not None else None
    point = table.get("mean", table.get("q0.5"))
    skill = _safe(lambda: evaluation.skill_scores(point[fi], x), "skill scores") if point is not None else None
    row["NMB"], row["NRMSE"], row["Pearson"] = skill if skill is not None else (None, None, None)
    return row


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


REPORT_COLUMNS = ("window", "n_aligned", "n_unmatched", "E", "R_VB", "bias", "RMS", "NMB", "NRMSE", "Pearson")


def cmd_eval(args):
    obs = _read_table(args.observations)
    if "t" not in obs:
        raise data_error(f"{args.observations}: missing time column 't'")
    value_col = args.column or next((c for c in obs if c != "t"), None)
    if value_col not in obs:
        raise data_error(f"{args.observations}: missing value column {value_col!r}")
    baselines = args.baseline_e or []
    if len(baselines) not in (0, 1, len(args.forecast)):
        raise config_error("give one --baseline-e, or one per forecast file")
    if len(baselines) == 1:
        baselines = baselines * len(args.forecast)
    if any(not b > 0 for b in baselines):
        raise config_error("--baseline-e must be positive")
    tables = [(_read_table(f), f) for f in args.forecast]
    stems = [Path(f).stem for f in args.forecast]
    names = [s if stems.count(s) == 1 else str(f) for s, f in zip(stems, args.forecast)]

    def job(i):
        table = tables[i][0]
        return evaluate_window(names[i], table, obs["t"], obs[value_col],
                               baselines[i] if baselines else None)

    with ThreadPoolExecutor(max_workers=max(1, int(args.jobs))) as pool:
        rows = list(pool.map(job, range(len(tables))))
    out = _output_dir(args)
    with open(out / "eval_report.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_fmt_cell(r[c]) for c in REPORT_COLUMNS) + "\n")
    with open(out / "eval_summary.json", "w", encoding="utf-8") as fh:
        json.dump({"windows": rows, "observations": str(args.observations), "value_column": value_col},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in rows:
        log.info("%s: E=%s R_VB=%s", r["window"], _fmt_cell(r["E"]), _fmt_cell(r["R_VB"]))
    return EXIT_OK


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format_float(v)


def cmd_synth(args):
    cfg = load_config(args.config)[0] if args.config else {}
    block = cfg.get("synth", {})
    name = args.generator or block.get("generator")
    if name not in synth.GENERATORS:
        raise config_error(f"unknown generator {name!r}; available: {', '.join(synth.GENERATORS)}")
    seed = args.seed if args.seed is not None else int(block.get("seed", cfg.get("seed", 0)))
    out = _output_dir(args, cfg)
    if name == "duffing":
        params = dict(block.get("duffing", {}))
        n = args.n if args.n is not None else block.get("n_steps")
        if n is not None:
            params["n_steps"] = int(n)
        try:
            dcfg = synth.DuffingConfig(**params)
        except (TypeError, ValueError) as exc:
            raise config_error(f"invalid duffing settings: {exc}") from None
        try:
            continuous, binned, edges = synth.duffing_series(dcfg)
        except DivergenceError as exc:
            raise CliError(str(exc), EXIT_DIVERGENCE) from None
        write_csv(out / "duffing.csv", binned)
        write_csv(out / "duffing_continuous.csv", continuous)
        write_csv(out / "duffing_edges.csv", {"edge": edges})
        log.info("wrote %d duffing samples (forcing omega %s rad/sample)", binned.times.size,
                 format_float(dcfg.omega_per_sample))
        return EXIT_OK
    n = args.n if args.n is not None else int(block.get("n_steps", 20_000))
    if n < 1:
        raise config_error("--n must be >= 1")
    series, truth = synth.GENERATORS[name](n, seed)
    write_csv(out / f"{name}.csv", {"t": series.times, "x": series.x})
    write_csv(out / f"{name}_truth.csv", {"t": series.times, **truth})
    log.info("wrote %d %s samples", n, name)
    return EXIT_OK


def cmd_suggest_freqs(args):
    path = Path(args.data)
    if not path.is_file():
        raise data_error(f"data file not found: {path}")
    try:
        series = read_csv(path, [args.column] if args.column else None)
    except ValueError as exc:
        raise data_error(str(exc)) from None
    if series.dim > 1:
        raise config_error(f"{path} has {series.dim} value columns; choose one with --column")
    if args.k < 1:
        raise config_error("--k must be >= 1")
    try:
        peaks = suggest_frequencies(series, args.k)
    except NonUniformSamplingError as exc:
        raise config_error(f"{exc} (for example via model.periods in the config)") from None
    if not peaks:
        raise CliError("no periodic structure found", EXIT_NO_PERIODICITY)
    top = peaks[0][1]
    sys.stdout.write("period,omega,relative_power\n")
    for omega, power in peaks:
        sys.stdout.write(f"{format_float(2 * math.pi / omega)},{format_float(omega)},{format_float(power / top)}\n")
    return EXIT_OK


# ---------------------------------------------------------------------- entry


def build_parser():
    parser = argparse.ArgumentParser(prog="dpk", description="Sinusoid-driven probabilistic forecasting.")
    parser.add_argument("--version", action="version", version=f"dpk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="write quantile forecasts from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", help="take levels and the test window from this config")
    p.add_argument("--times", help="CSV with a 't' column")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float, help="exclusive end of the time range")
    p.add_argument("--step", type=float)
    p.add_argument("--levels", help="comma-separated quantile levels in (0, 1)")
    p.add_argument("--output", help="output CSV path, or '-' for stdout")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("eval", help="score forecasts against observations")
    p.add_argument("--forecast", nargs="+", required=True, help="one forecast CSV per evaluation window")
    p.add_argument("--observations", required=True)
    p.add_argument("--column", help="observation value column (default: first non-time column)")
    p.add_argument("--baseline-e", type=float, nargs="+", help="baseline pinball score(s) for R_VB")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic series")
    p.add_argument("generator", nargs="?", help=f"one of: {', '.join(synth.GENERATORS)}")
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("suggest-freqs", help="list dominant periodogram peaks")
    p.add_argument("data")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--column")
    p.set_defaults(func=cmd_suggest_freqs)
    return parser


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="dpk: %(levelname)s: %(message)s", force=True)


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"dpk: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
