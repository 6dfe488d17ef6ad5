# src/cli.py
"""Command line front end.

Usage examples:
  python -m src.cli eval --metric berwald --point 0.5,0 --vector 1,0
  python -m src.cli scan --metric randers_k0 --a1 0.9718 --res 400 --out data/output/scans/split.json
  python -m src.cli curvature --metric berwald --samples 100
  python -m src.cli distance --metric hilbert_ball --from 0,0 --to 0.5,0
  python -m src.cli growth --config data/descriptors/berwald_k0.json --fractions 0.9,0.99,0.999
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from src import config
from src.analysis import growth_check
from src.errors import FinslerError, ParseError
from src.geometry import distance, flag_curvature, geodesic, projective_value
from src.metrics import CLOSED_CURVATURE, classify, initial_data, metric_from_descriptor
from src.numerics import random_directions
from src.sphere import antipodal_deviation, equator_extension_check, great_circle_length, pullback
from src.tensor import scan_domain_2d

logger = logging.getLogger(__name__)

COMMANDS = ("eval", "distance", "curvature", "scan", "classify", "sphere-check", "growth", "geodesic")
FORMATS = ("json", "csv")
METRIC_FLAGS = ("a1", "c", "alpha", "lam", "n")


@dataclass
class RunConfig:
    command: str
    metric: dict
    params: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ParseError(f"unknown command '{self.command}'", field="command")
        if self.format not in FORMATS:
            raise ParseError(f"format must be one of {FORMATS}", field="format")
        if not isinstance(self.metric, dict) or "family" not in self.metric:
            raise ParseError("metric must be a descriptor with a 'family'", field="metric")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ParseError("run config must be a JSON object")
        missing = [key for key in ("command", "metric") if key not in data]
        if missing:
            raise ParseError("missing field", field=missing[0])
        unknown = set(data) - {"command", "metric", "params", "output", "format"}
        if unknown:
            raise ParseError("unknown field", field=sorted(unknown)[0])
        return cls(**data)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=4)

    @classmethod
    def load(cls, path):
        return cls.from_dict(_read_json(path))


# --- Parsing helpers ---
def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise ParseError(f"no such file {path}", field="--config")
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", field=str(path))


def parse_vector(text, name):
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ParseError(f"expected comma-separated numbers, got '{text}'", field=name)
    if len(values) < 2:
        raise ParseError("expected at least two coordinates", field=name)
    return values


def named_descriptor(name, flags):
    """Descriptor of a closed form selected by name plus its parameter flags."""
    if name not in CLOSED_CURVATURE and name != "riemann":
        raise ParseError(f"unknown metric '{name}'", field="--metric")
    desc = {"family": "closed", "kind": name}
    desc.update({key: value for key, value in flags.items() if value is not None})
    return desc


class _Parser(argparse.ArgumentParser):
    """Raises ParseError on usage errors."""

    def error(self, message):
        raise ParseError(message)


def _build_parser():
    common = _Parser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--metric", help="closed-form name (berwald, bryant, ...) or a descriptor JSON path")
    source.add_argument("--config", help="descriptor or saved run-config JSON")
    common.add_argument("--out", help="output file; stdout when omitted")
    common.add_argument("--format", choices=FORMATS, default=None)
    common.add_argument("--res", type=int, help="scan resolution per axis")
    common.add_argument("--dirs", type=int, help="sampled directions per point")
    common.add_argument("--samples", type=int, help="number of random samples")
    common.add_argument("--seed", type=int, default=config.SEED)
    common.add_argument("--threads", type=int, default=None)
    for flag in ("a1", "c", "alpha", "lam"):
        common.add_argument(f"--{flag}", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--K", type=float, dest="curvature", help="override the flag curvature")

    parser = _Parser(prog="python -m src.cli", description="Projectively flat Finsler metrics")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    for name in ("eval", "geodesic"):
        p = sub.choices[name]
        p.add_argument("--point")
        p.add_argument("--vector")
    sub.choices["geodesic"].add_argument("--t-end", type=float, default=1.0)
    sub.choices["distance"].add_argument("--from", dest="start", required=False)
    sub.choices["distance"].add_argument("--to", dest="end", required=False)
    sub.choices["growth"].add_argument("--fractions", default=None)
    sub.choices["growth"].add_argument("--ray", default=None)
    sub.choices["curvature"].add_argument("--profile", action="store_true")
    sub.choices["sphere-check"].add_argument("--circles", type=int, default=8)
    return parser


def config_from_args(args):
    """Turns parsed arguments into a RunConfig; a saved run config supplies defaults."""
    params, metric, output, fmt = {}, None, args.out, args.format
    if args.config:
        data = _read_json(args.config)
        if "command" in data:
            saved = RunConfig.from_dict(data)
            metric, params = saved.metric, dict(saved.params)
            output = output or saved.output
            fmt = fmt or saved.format
        else:
            metric = data
    elif args.metric:
        if args.metric.endswith(".json"):
            path = Path(args.metric)
            if not path.exists() and (config.DESCRIPTOR_DIR / path.name).exists():
                path = config.DESCRIPTOR_DIR / path.name
            metric = _read_json(path)
        else:
            metric = named_descriptor(args.metric, {k: getattr(args, k) for k in METRIC_FLAGS})
    elif args.command != "sphere-check":
        raise ParseError("a metric is required", field="--metric")
    else:
        metric = named_descriptor("bryant", {"alpha": args.alpha or 0.3, "n": args.n})

    for key in ("res", "dirs", "samples", "seed", "threads", "curvature", "alpha", "n"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    for key, name in (("point", "--point"), ("vector", "--vector"), ("start", "--from"), ("end", "--to"),
                      ("ray", "--ray")):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = parse_vector(value, name)
    if getattr(args, "fractions", None):
        try:
            params["fractions"] = [float(v) for v in args.fractions.split(",")]
        except ValueError:
            raise ParseError(f"expected comma-separated numbers, got '{args.fractions}'", field="--fractions")
    if getattr(args, "t_end", None) is not None:
        params["t_end"] = args.t_end
    if getattr(args, "profile", False):
        params["profile"] = True
    if getattr(args, "circles", None) is not None:
        params["circles"] = args.circles
    return RunConfig(command=args.command, metric=metric, params=params, output=output, format=fmt or "json")


# --- Commands ---
def _require(params, key, flag):
    if key not in params:
        raise ParseError("required for this command", field=flag)
    return np.asarray(params[key], dtype=float)


def _curvature(metric, params):
    value = params.get("curvature", metric.curvature)
    if value is None:
        raise ParseError(f"flag curvature of {metric.name} is unknown; pass --K", field="--K")
    return float(value)


def _rng(params):
    return np.random.default_rng(params.get("seed", config.SEED))


def _eval(metric, params):
    if "point" in params:
        x = _require(params, "point", "--point")
        y = _require(params, "vector", "--vector")
        return {"F": float(metric(x, y)), "P": float(projective_value(metric, x, y))}, None
    rng = _rng(params)
    count = params.get("samples", 100)
    x = metric.sample_points(rng, count)
    y = random_directions(rng, count, metric.dim)
    frame = pd.DataFrame({f"x{i + 1}": x[:, i] for i in range(metric.dim)})
    for i in range(metric.dim):
        frame[f"y{i + 1}"] = y[:, i]
    frame["F"] = metric.evaluate(x, y)
    frame["P"] = projective_value(metric, x, y)
    return {"samples": count, "F_min": float(frame["F"].min()), "F_max": float(frame["F"].max())}, frame


def _distance(metric, params):
    result = distance(metric, _curvature(metric, params), _require(params, "start", "--from"),
                      _require(params, "end", "--to"))
    return {"formula": result.formula, "integral": result.integral, "rel_err": result.rel_err}, None


def _curvature_command(metric, params):
    rng = _rng(params)
    count = params.get("samples", 100)
    x = metric.sample_points(rng, count)
    y = random_directions(rng, count, metric.dim)
    report = flag_curvature(metric, x, y, profile=params.get("profile", False))
    frame = pd.DataFrame({f"x{i + 1}": x[:, i] for i in range(metric.dim)})
    for i in range(metric.dim):
        frame[f"y{i + 1}"] = y[:, i]
    frame["K_formula"] = report.K_formula
    if report.K_profile is not None:
        frame["K_profile"] = report.K_profile
    summary = {"samples": count, "K_mean": float(frame["K_formula"].mean())}
    expected = params.get("curvature", metric.curvature)
    if expected is not None:
        summary["expected"] = float(expected)
        summary["max_abs_deviation"] = float(np.max(np.abs(frame["K_formula"] - expected)))
    return summary, frame


def _scan(metric, params):
    scan = scan_domain_2d(
        metric,
        resolution=params.get("res", 200),
        directions=params.get("dirs", config.SCAN_DIRECTIONS),
        threads=params.get("threads"),
    )
    return scan.to_dict(), scan.to_frame()


def _classify(metric, params):
    psi, phi = initial_data(metric)
    result = classify(psi, phi, int(_curvature(metric, params)))
    return asdict(result), None


def _sphere_check(metric, params):
    alpha = params.get("alpha", metric.params.get("alpha"))
    if alpha is None:
        raise ParseError("sphere checks need the Bryant angle", field="--alpha")
    n = int(params.get("n", metric.dim))
    check = equator_extension_check(alpha, n=n, directions=params.get("dirs", config.SCAN_DIRECTIONS))
    chart = pullback(metric)
    rng = _rng(params)
    circles = []
    for _ in range(params.get("circles", 8)):
        w = np.zeros(n + 1)
        w[:-1] = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        V = rng.standard_normal(n + 1)
        V -= (V @ w) * w
        circles.append((w, V))
    with ThreadPoolExecutor(max_workers=params.get("threads") or config.THREADS) as pool:
        lengths = list(pool.map(lambda wV: great_circle_length(chart.metric, *wV), circles))
    summary = {
        "alpha": float(alpha),
        "max_deviation": check.max_deviation,
        "min_eig": check.min_eig,
        "degenerate_direction": check.degenerate_direction.tolist(),
        "antipodal_deviation": antipodal_deviation(metric, seed=params.get("seed")),
        "great_circle_lengths": lengths,
    }
    return summary, check.limit_values


def _growth(metric, params):
    psi, phi = initial_data(metric)
    family = "k0" if _curvature(metric, params) == 0 else "km1"
    fractions = params.get("fractions", config.BOUNDARY_FRACTIONS[:3])
    frame = growth_check(family, psi, phi, ray=params.get("ray"), fractions=fractions, threads=params.get("threads"))
    return {"family": family, "min_ratio": float(frame["ratio"].min()), "rows": frame.to_dict("records")}, frame


def _geodesic(metric, params):
    x = _require(params, "point", "--point")
    y = _require(params, "vector", "--vector")
    curvature = params.get("curvature", metric.curvature)
    result = geodesic(metric, x, y, params.get("t_end", 1.0), curvature=curvature)
    frame = pd.DataFrame({"t": result.t, "f": result.f, "fprime": result.fprime})
    for i in range(metric.dim):
        frame[f"x{i + 1}"] = result.points[:, i]
    summary = {
        "family": result.profile.family,
        "c": float(result.profile.c),
        "max_domain": [float(v) for v in result.profile.max_domain],
        "fit_residual": result.fit_residual,
        "escape_time": result.escape_time,
    }
    return summary, frame


HANDLERS = {
    "eval": _eval,
    "distance": _distance,
    "curvature": _curvature_command,
    "scan": _scan,
    "classify": _classify,
    "sphere-check": _sphere_check,
    "growth": _growth,
    "geodesic": _geodesic,
}


def _write(run_config, summary, frame):
    if run_config.output is None:
        json.dump(summary, sys.stdout, indent=4)
        sys.stdout.write("\n")
        return
    path = Path(run_config.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    if run_config.format == "csv":
        if frame is None:
            frame = pd.DataFrame([summary])
        frame.to_csv(path, index=False)
    else:
        with open(path, "w") as f:
            json.dump(summary, f, indent=4)
    run_config.save(path.with_suffix(".run.json"))
    logger.info("wrote %s", path)


def run(run_config):
    """
    Executes one command and writes its artifact.

    Returns:
        (summary dict, frame or None)
    """
    metric = metric_from_descriptor(run_config.metric)
    summary, frame = HANDLERS[run_config.command](metric, run_config.params)
    _write(run_config, summary, frame)
    return summary, frame


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level="DEBUG" if args.verbose else config.LOG_LEVEL, format=config.LOG_FORMAT)
        run(config_from_args(args))
    except FinslerError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
