"""Command-line entry point.

    brunnian solve     --config system.json [--out DIR]
    brunnian classify  --config system.json
    brunnian classify2 --config a3b3c3.json
    brunnian scan      --config scan.json --workers 4
    brunnian thresholds "18C -> 3*6He" "36Ar -> 9*4He"

Every flag can also be set through an environment variable with the
``BRUNNIAN_`` prefix (``BRUNNIAN_SEED``, ``BRUNNIAN_MAX_BASIS``, ...); flags
win over the environment, which wins over the config file.

Exit status: 0 success, 2 configuration error, 3 solver error, 4 indeterminate
classification.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import logging
import os
import platform
import sys
import time
from pathlib import Path

from . import __version__
from .classify import classify, classify_second_order
from .config import ConfigError, dumps, load_json, settings_from_dict, system_from_dict
from .model import InvalidSystemError
from .nuclear import NuclearError, evaluate_query, load_table
from .potentials import PotentialError
from .scan import ScanError, ScanSpec, bisect_critical, scan_grid
from .solver import EnergyCache, SolverError

ENV_PREFIX = "BRUNNIAN_"
EXIT_CONFIG, EXIT_SOLVER, EXIT_INDETERMINATE = 2, 3, 4

log = logging.getLogger("brunnian")


def _env(name, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"cli: environment variable {ENV_PREFIX}{name}={raw!r} is not a valid {cast.__name__}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brunnian", description="Few-body binding and Brunnian classification")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory for reports (nothing written when omitted)")
    common.add_argument("--seed", type=int, help="solver random seed")
    common.add_argument("--max-basis", type=int, help="maximum basis size")
    common.add_argument("--workers", type=int, help="worker processes for scans (default: available cores)")
    common.add_argument("--tolerance", type=float, help="binding tolerance epsilon_bind")
    common.add_argument("-v", "--verbose", action="count", default=None, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="variational ground state and threshold")
    sub.add_parser("classify", parents=[common], help="Borromean / Brunnian / B(n,k) classification")
    sub.add_parser("classify2", parents=[common], help="second-order Brunnian test (a3b3c3)")
    sub.add_parser("scan", parents=[common], help="critical couplings and binding windows")
    th = sub.add_parser("thresholds", parents=[common], help="nuclear breakup thresholds")
    th.add_argument("queries", nargs="*", help='queries such as "18C -> 3*6He"')
    th.add_argument("--table", help="extra mass table file merged over the embedded one")
    return parser


def _resolve(args):
    """Merge flags, environment and config into (config dict, settings, workers, out)."""
    path = args.config or _env("CONFIG")
    config = load_json(path) if path else {}
    if path and not isinstance(config, dict):
        raise ConfigError("cli: config root must be a JSON object")
    pick = lambda flag, env, cast: flag if flag is not None else _env(env, cast)  # noqa: E731
    overrides = {
        "random_seed": pick(args.seed, "SEED", int),
        "max_basis": pick(args.max_basis, "MAX_BASIS", int),
        "binding_tolerance": pick(args.tolerance, "TOLERANCE", float),
    }
    settings = settings_from_dict(config.get("settings"), **overrides)
    workers = pick(args.workers, "WORKERS", int) or os.cpu_count() or 1
    out = args.out or _env("OUT")
    verbose = pick(args.verbose, "VERBOSE", int) or 0
    return config, settings, workers, out, verbose


def _system(config):
    if "system" not in config:
        raise ConfigError("cli: config has no 'system' block")
    return system_from_dict(config["system"])


def cmd_solve(config, settings, workers):
    from .radial import bound_state_energy

    spec = _system(config)
    cache = EnergyCache(settings)
    res = cache.result(spec)
    report = {"system": spec.to_dict(), "settings": settings.to_dict(), "result": res.to_dict()}
    lines = [f"E = {res.energy:.10g}, threshold = {res.threshold_used:.10g}: {res.verdict} ({res.basis_size} functions)"]
    if spec.n == 2:
        a, b = spec.particles
        mu = a.mass * b.mass / (a.mass + b.mass)
        oracle = bound_state_energy(spec.potential(a.species, b.species), mu, spec.dimension)
        report["radial_oracle_energy"] = oracle
        if oracle is not None:
            lines.append(f"radial oracle E = {oracle:.10g} (relative difference {abs(res.energy / oracle - 1):.2e})")
        else:
            lines.append("radial oracle: no bound state")
    tables = {"trace.csv": (["basis_size", "energy"], [list(t) for t in res.convergence_trace])}
    return report, "\n".join(lines), tables


def cmd_classify(config, settings, workers):
    rep = classify(_system(config), settings)
    report = {"settings": settings.to_dict(), "classification": rep.to_dict()}
    return report, rep.summary(), {}, rep


def cmd_classify2(config, settings, workers):
    rep = classify_second_order(_system(config), settings, exact_check=bool(config.get("exact_check", False)))
    report = {"settings": settings.to_dict(), "classification": rep.to_dict()}
    lines = [rep.summary()]
    if rep.decomposition is not None:
        d = rep.decomposition
        lines.append(f"E_A,E_B,E_C = {', '.join(f'{e:.6g}' for e in d.cluster_energies)}; E_ABC = {d.relative_energy:.6g}")
        lines.append(f"total energy estimate {d.total_energy_estimate:.6g}")
    lines.extend(rep.notes)
    return report, "\n".join(lines), {}, rep


def cmd_scan(config, settings, workers):
    block = config.get("system")
    if block is None:
        raise ConfigError("cli: config has no 'system' block")
    system_from_dict(block)
    report, lines, tables = {"settings": settings.to_dict()}, [], {}
    cache = EnergyCache(settings)
    bisections = []
    for entry in config.get("bisections", []):
        local = settings_from_dict({**settings.to_dict(), **entry.get("settings", {})})
        try:
            cp = bisect_critical(
                block,
                entry["parameter"],
                tuple(entry["bracket"]),
                entry["target"],
                local,
                float(entry.get("tolerance", 1e-4)),
                cache=cache if local == settings else None,
            )
        except KeyError as exc:
            raise ConfigError(f"cli: bisection entry missing {exc}") from exc
        bisections.append({"name": entry.get("name", entry["target"]), "settings": local.to_dict(), **cp.to_dict()})
        lines.append(f"{bisections[-1]['name']}: critical {entry['parameter']} = {cp.value:.8g} ({cp.label})")
    report["bisections"] = bisections
    if "scan" in config:
        scan = ScanSpec.from_dict(config["scan"])
        wr = scan_grid(block, scan, settings, workers=workers, cache=cache)
        report["scan"] = {"spec": scan.to_dict(), **wr.to_dict()}
        tables["grid.csv"] = wr.csv_rows()
        held = sum(bool(r.holds) for r in wr.records)
        lines.append(f"{scan.target}: holds at {held}/{len(wr.records)} grid points, {len(wr.windows)} window(s)")
        for w in wr.windows:
            where = ", ".join(f"{k}={v:g}" for k, v in w.fixed)
            lines.append(f"  window [{w.lower:.6g}, {w.upper:.6g}] ({w.lower_kind}/{w.upper_kind}){' at ' + where if where else ''}")
        if wr.reverifications:
            lines.append(f"  midpoint re-verified at double basis: {'yes' if wr.reverified else 'no'}")
        if wr.empty:
            lines.append(f"  empty region; all grid verdicts definite: {'yes' if wr.all_definite else 'no'}")
    return report, "\n".join(lines), tables


def cmd_thresholds(config, settings, workers, args):
    table_path = args.table or config.get("mass_table")
    table = load_table(table_path)
    queries = list(args.queries) or list(config.get("queries", []))
    if not queries:
        raise ConfigError("cli: no threshold queries given")
    results = [evaluate_query(q, table) for q in queries]
    report = {"thresholds": [r.to_dict() for r in results]}
    return report, "\n".join(str(r) for r in results), {}


def _write(out, command, report, summary, tables, started, argv):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report))
    (out / "summary.txt").write_text(summary + "\n")
    for name, (header, rows) in tables.items():
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])
    meta = {
        "command": command,
        "argv": argv,
        "version": __version__,
        "python": platform.python_version(),
        "started": started.isoformat(),
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
        "elapsed_seconds": time.time() - started.timestamp(),
    }
    (out / "metadata.json").write_text(dumps(meta))


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    started = dt.datetime.now(dt.timezone.utc)
    try:
        config, settings, workers, out, verbose = _resolve(args)
        level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        indeterminate = False
        if args.command == "thresholds":
            report, summary, tables = cmd_thresholds(config, settings, workers, args)
        elif args.command == "solve":
            report, summary, tables = cmd_solve(config, settings, workers)
        elif args.command in ("classify", "classify2"):
            fn = cmd_classify if args.command == "classify" else cmd_classify2
            report, summary, tables, rep = fn(config, settings, workers)
            indeterminate = "indeterminate" in rep.labels
        else:
            report, summary, tables = cmd_scan(config, settings, workers)
        print(summary)
        if out:
            _write(out, args.command, report, summary, tables, started, argv)
        return EXIT_INDETERMINATE if indeterminate else 0
    except (ConfigError, InvalidSystemError, PotentialError, ScanError, NuclearError, ValueError) as exc:
        print(f"brunnian {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ArithmeticError, RuntimeError) as exc:
        print(f"brunnian {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
