"""Command-line surface: `python -m fracsem <command> --config <file> [--out <dir>]`.

Every command writes its table (<command>.csv or <command>.json) and summary.json into the output
directory; each artifact embeds the config that produced it.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import extension, operator, regularity, selftest
from .config import COMMANDS, RunConfig
from .errors import ConfigError, FracsemError, ZeroMeanViolation
from .fields import AnalyticField, GridField, sample
from .numerics import cs_neumann
from .utils import atomic_write, env, format_float, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _grid_of(field, config):
    if isinstance(field, GridField):
        return field
    return sample(field, *config.grid.as_tuple())


def _require_analytic(field, command):
    if not isinstance(field, AnalyticField):
        raise ConfigError(f"{command} needs a builtin fixture, not a field file", "fixture")
    return field


def _point_columns(point):
    return {f"x{i + 1}": float(c) for i, c in enumerate(np.atleast_1d(point))}


def command_apply(config):
    field = config.fixture.build(config.n)
    if isinstance(field, GridField):
        spectral = operator.frac_apply_spectral(field, config.s)
        semigroup = operator.frac_apply_semigroup(field, config.s, spec=config.quadrature)
        rows = [
            dict(_point_columns(p), spectral=spectral.at(p), semigroup=semigroup.at(p)) for p in config.probes
        ]
        delta = float(np.max(np.abs(spectral.values - semigroup.values)))
        return rows, {"deltas": {"semigroup-spectral": delta}}
    table = operator.compare_routes(
        field, config.s, config.probes, config.grid.as_tuple(), config.routes, config.quadrature
    )
    rows = []
    for i, probe in enumerate(table.probes):
        row = _point_columns(probe)
        row.update({route: values[i] for route, values in table.values.items()})
        rows.append(row)
    return rows, {"deltas": table.deltas, "fixture": table.fixture}


def command_invert(config):
    g = _grid_of(config.fixture.build(config.n), config)
    s = config.s
    scale = max(g.sup, 1e-300)
    if s >= g.n / 2 and abs(g.mean) > operator.ZERO_MEAN_TOLERANCE * scale and not config.project_mean:
        raise ZeroMeanViolation(
            f"zero-mean violation: mean {g.mean:.6g} is not zero and s={s:g} >= n/2; "
            "set project_mean to invert the zero-mean part"
        )
    inverse = operator.frac_inverse_semigroup(g, s, spec=config.quadrature)
    back = inverse.apply_multiplier(operator.frac_multiplier(inverse, s))
    residual = float(np.max(np.abs(back.values - (g.values - g.mean))))
    rows = [
        dict(_point_columns(p), f=float(f), inverse=float(v))
        for p, f, v in zip(g.points().reshape(-1, g.n), g.values.ravel(), inverse.values.ravel())
    ]
    return rows, {"round_trip_residual": residual, "projected_mean": inverse.meta.get("projected_mean", 0.0)}


def command_extend(config, out_dir):
    g = _grid_of(config.fixture.build(config.n), config)
    ext = extension.extend(g, config.s, config.y_nodes, config.extension_route, config.quadrature)
    path = extension.save_extension(ext, os.path.join(out_dir, "extension.bin"))
    limit = extension.neumann_limit(ext)
    rows = [
        dict(_point_columns(p), measured=float(m), target=float(t))
        for p, m, t in zip(g.points().reshape(-1, g.n), limit.measured.values.ravel(), limit.target.values.ravel())
    ]
    summary = {
        "constant_ratio": limit.constant_ratio,
        "cs_neumann": cs_neumann(config.s),
        "energy": extension.extension_energy(ext),
        "hs_seminorm": extension.hs_seminorm(g, config.s, footing="torus").spectral,
        "extension_file": os.path.basename(path),
    }
    return rows, summary


def command_limits(config):
    u = _require_analytic(config.fixture.build(config.n), "limits")
    route = next((r for r in config.routes if r in operator.LIMIT_ROUTES), "semigroup")
    table = operator.limit_diagnostics(
        u, config.probes[0], config.direction, config.s_sequence, config.quadrature, route=route
    )
    rows = [row.model_dump() for row in table.rows]
    return rows, {"fixture": table.fixture, "direction": table.direction, "monotone": table.monotone}


def command_regularity(config):
    g = _grid_of(config.fixture.build(config.n), config)
    report = regularity.estimate_alpha(g, config.k)
    row = report.model_dump(exclude={"probe_t", "probe_x", "t_window"})
    return [row], report.model_dump()


def command_verify(config):
    specs = config.fixtures or [config.fixture]
    fields = [spec.build(config.n) for spec in specs]
    table = regularity.verify_mapping(fields, config.s, config.alpha, config.mode, config.grid.as_tuple())
    rows = [row.model_dump() for row in table.rows]
    summary = table.model_dump(exclude={"rows"})
    summary["stable"] = table.stable
    return rows, summary


def command_selftest(config):
    results = selftest.run_checks(config.quadrature, config.seed)
    rows = [result.model_dump() for result in results]
    return rows, {"passed": all(r.passed for r in results), "checks": len(results)}


def _cell(value):
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def render_csv(rows, config):
    buffer = io.StringIO()
    buffer.write("# config: " + json.dumps(config.to_document(), sort_keys=True) + "\n")
    columns = list(rows[0]) if rows else []
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def _json_ready(value):
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_json(payload, config):
    document = dict(_json_ready(payload), config=config.to_document())
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def run(config: RunConfig, out_dir="."):
    """Runs one command and writes its artifacts; returns the exit status"""
    os.makedirs(out_dir, exist_ok=True)
    logger.info("running %s on %s (s=%g)", config.command, config.fixture.label, config.s)
    if config.command == "extend":
        rows, summary = command_extend(config, out_dir)
    else:
        rows, summary = COMMAND_HANDLERS[config.command](config)
    if config.output_format == "csv":
        atomic_write(os.path.join(out_dir, f"{config.command}.csv"), render_csv(rows, config))
    else:
        atomic_write(os.path.join(out_dir, f"{config.command}.json"), render_json({"rows": rows}, config))
    atomic_write(os.path.join(out_dir, "summary.json"), render_json(summary, config))
    if config.command == "selftest" and not summary["passed"]:
        failed = [row["name"] for row in rows if not row["passed"]]
        logger.error("selftest failures: %s", ", ".join(failed))
        return EXIT_FAILURE
    return EXIT_OK


COMMAND_HANDLERS = {
    "apply": command_apply,
    "invert": command_invert,
    "limits": command_limits,
    "regularity": command_regularity,
    "verify": command_verify,
    "selftest": command_selftest,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fracsem", description="Fractional Laplacian numerical toolkit")
    parser.add_argument("--log-level", default=None, help="Overrides FRACSEM_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = commands.add_parser(name)
        sub.add_argument("--config", default=None, help="JSON or YAML run config (default: FRACSEM_CONFIG)")
        sub.add_argument("--out", default=".", help="Output directory (default: current directory)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        if args.config is None and args.command == "selftest" and env.str("FRACSEM_CONFIG", None) is None:
            config = RunConfig(command="selftest")
        else:
            config = RunConfig.load(args.config, args.command)
        return run(config, args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FracsemError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
