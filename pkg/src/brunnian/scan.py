"""Coupling scans: critical couplings by bisection and binding windows on grids.

Parameters are addressed by dotted paths into a system block, e.g.
``potentials.Vaa.depth``. An axis may drive several paths at once (for
example the same depth in all intra-species potentials).

Points whose verdict is marginal count as "target does not hold" during
bisection (binding is not certified there) and as undecided on grids.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .classify import classify, classify_second_order
from .config import ConfigError, assign, system_from_dict
from .model import InvalidSystemError
from .potentials import PotentialError
from .solver import EnergyCache, SolverError, SolverSettings

log = logging.getLogger(__name__)

TARGET_ALIASES = {
    "bound": "bound",
    "two_body_bound": "bound",
    "three_body_bound": "bound",
    "borromean": "borromean",
    "brunnian": "brunnian",
    "second_order_brunnian": "second-order-brunnian",
    "second-order-brunnian": "second-order-brunnian",
}


class ScanError(ValueError):
    pass


def _target(name: str) -> str:
    try:
        return TARGET_ALIASES[name]
    except KeyError:
        raise ScanError(f"scan: unknown target {name!r}; choose from {sorted(TARGET_ALIASES)}") from None


@dataclass(frozen=True)
class Axis:
    paths: tuple[str, ...]
    values: tuple[float, ...]

    @property
    def name(self) -> str:
        return "+".join(self.paths)

    @classmethod
    def from_dict(cls, block: Mapping[str, Any]) -> "Axis":
        paths = block.get("path", block.get("paths"))
        if paths is None:
            raise ScanError("scan: axis needs 'path'")
        paths = (paths,) if isinstance(paths, str) else tuple(paths)
        if "values" in block:
            values = tuple(float(v) for v in block["values"])
        else:
            lo, hi = map(float, block["range"])
            if not lo < hi:
                raise ScanError(f"scan: axis range must be ordered, got {block['range']}")
            values = tuple(float(v) for v in np.linspace(lo, hi, int(block.get("points", 11))))
        if list(values) != sorted(values):
            raise ScanError("scan: axis values must be increasing")
        return cls(paths, values)

    def to_dict(self) -> dict:
        return {"paths": list(self.paths), "values": list(self.values)}


@dataclass(frozen=True)
class ScanSpec:
    """What to track and where. Windows are assembled along the first axis."""

    target: str
    axes: tuple[Axis, ...] = ()
    bisection_tolerance: float = 1e-4
    refine_edges: bool = True
    reverify: bool = True

    def __post_init__(self):
        _target(self.target)
        if not 0.0 < self.bisection_tolerance < 0.1:
            raise ScanError("scan: bisection_tolerance must lie in (0, 0.1)")

    @classmethod
    def from_dict(cls, block: Mapping[str, Any]) -> "ScanSpec":
        try:
            return cls(
                target=block["target"],
                axes=tuple(Axis.from_dict(a) for a in block.get("axes", [])),
                bisection_tolerance=float(block.get("bisection_tolerance", 1e-4)),
                refine_edges=bool(block.get("refine_edges", True)),
                reverify=bool(block.get("reverify", True)),
            )
        except KeyError as exc:
            raise ScanError(f"scan: missing field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "axes": [a.to_dict() for a in self.axes],
            "bisection_tolerance": self.bisection_tolerance,
            "refine_edges": self.refine_edges,
            "reverify": self.reverify,
        }


@dataclass(frozen=True)
class PointRecord:
    values: tuple[tuple[str, float], ...]
    holds: bool | None
    energy: float = math.nan
    threshold: float = math.nan
    verdict: str = "error"
    labels: tuple[str, ...] = ()
    summary: str = ""
    error: str | None = None

    @property
    def definite(self) -> bool:
        return self.holds is not None

    def to_dict(self) -> dict:
        return {
            "values": dict(self.values),
            "holds": self.holds,
            "energy": self.energy,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "labels": list(self.labels),
            "summary": self.summary,
            "error": self.error,
        }


def evaluate(
    system_block: Mapping[str, Any],
    values: Mapping[str, float],
    target: str,
    settings: SolverSettings | None = None,
    cache: EnergyCache | None = None,
) -> PointRecord:
    """Evaluate the target property at one parameter point; failures are recorded, not raised."""
    target = _target(target)
    cache = cache if cache is not None else EnergyCache(settings)
    key = tuple(sorted(values.items()))
    try:
        spec = system_from_dict(assign(system_block, values))
        if target == "bound":
            res = cache.result(spec)
            v = res.verdict
            holds = None if v == "marginal" else v == "bound"
            labels = ("bound",) if v == "bound" else ()
            return PointRecord(key, holds, res.energy, res.threshold_used, v, labels, v)
        if target == "second-order-brunnian":
            rep = classify_second_order(spec, cache=cache)
        else:
            rep = classify(spec, cache=cache)
    except (ConfigError, InvalidSystemError, PotentialError, SolverError, ValueError) as exc:
        log.warning("point %s failed: %s", dict(key), exc)
        return PointRecord(key, None, error=f"{type(exc).__name__}: {exc}")
    holds = None if "indeterminate" in rep.labels else target in rep.labels
    return PointRecord(key, holds, rep.energy, rep.threshold, rep.verdict, tuple(sorted(rep.labels)), rep.summary())


@dataclass(frozen=True)
class CriticalPoint:
    value: float
    label: str
    lower: float
    upper: float
    lower_record: PointRecord
    upper_record: PointRecord
    fixed: tuple[tuple[str, float], ...] = ()
    evaluations: int = 0
    marginal_evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "label": self.label,
            "bracket": [self.lower, self.upper],
            "lower": self.lower_record.to_dict(),
            "upper": self.upper_record.to_dict(),
            "fixed": dict(self.fixed),
            "evaluations": self.evaluations,
            "marginal_evaluations": self.marginal_evaluations,
        }


def bisect_critical(
    system_block: Mapping[str, Any],
    parameter: str | Sequence[str],
    bracket: tuple[float, float],
    target: str,
    settings: SolverSettings | None = None,
    tolerance: float = 1e-4,
    fixed: Mapping[str, float] | None = None,
    cache: EnergyCache | None = None,
    strict: bool = False,
    ends: tuple[PointRecord, PointRecord] | None = None,
) -> CriticalPoint:
    """Bisect ``parameter`` on ``bracket`` until the transition is pinned to ``tolerance`` (relative).

    Marginal evaluations count as "does not hold"; with ``strict`` they raise
    instead.
    """
    paths = (parameter,) if isinstance(parameter, str) else tuple(parameter)
    fixed = dict(fixed or {})
    cache = cache if cache is not None else EnergyCache(settings)
    counts = {"n": 0, "marginal": 0}

    def run(x):
        counts["n"] += 1
        rec = evaluate(system_block, {**fixed, **{p: x for p in paths}}, target, cache=cache)
        if rec.error is not None:
            raise ScanError(f"scan.bisect_critical: evaluation failed at {x}: {rec.error}")
        if rec.holds is None:
            counts["marginal"] += 1
            if strict:
                raise ScanError(f"scan.bisect_critical: marginal verdict at {x} persists below tolerance")
        return rec

    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ScanError("scan.bisect_critical: bracket must be ordered")
    rec_lo, rec_hi = ends if ends is not None else (run(lo), run(hi))
    if bool(rec_lo.holds) == bool(rec_hi.holds):
        raise ScanError(f"scan.bisect_critical: no transition in bracket [{lo}, {hi}]")
    while hi - lo > tolerance * max(abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        rec = run(mid)
        if bool(rec.holds) == bool(rec_lo.holds):
            lo, rec_lo = mid, rec
        else:
            hi, rec_hi = mid, rec
    name = _target(target)
    label = f"{name} on" if rec_hi.holds else f"{name} off"
    return CriticalPoint(
        0.5 * (lo + hi), label, lo, hi, rec_lo, rec_hi, tuple(sorted(fixed.items())), counts["n"], counts["marginal"]
    )


@dataclass(frozen=True)
class Window:
    """Interval along the first axis where the target holds, at fixed values of the other axes."""

    fixed: tuple[tuple[str, float], ...]
    lower: float
    upper: float
    lower_kind: str  # "critical", "grid-edge" or "gap"
    upper_kind: str
    grid_points: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "fixed": dict(self.fixed),
            "lower": self.lower,
            "upper": self.upper,
            "lower_kind": self.lower_kind,
            "upper_kind": self.upper_kind,
            "grid_points": list(self.grid_points),
        }


@dataclass(frozen=True)
class WindowReport:
    target: str
    axes: tuple[Axis, ...]
    records: tuple[PointRecord, ...]
    windows: tuple[Window, ...] = ()
    critical_points: tuple[CriticalPoint, ...] = ()
    reverifications: tuple[PointRecord, ...] = ()
    region_midpoint: tuple[tuple[str, float], ...] | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def empty(self) -> bool:
        return not any(r.holds for r in self.records)

    @property
    def all_definite(self) -> bool:
        return all(r.definite and r.error is None for r in self.records)

    @property
    def reverified(self) -> bool:
        return bool(self.reverifications) and all(r.holds for r in self.reverifications)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "axes": [a.to_dict() for a in self.axes],
            "records": [r.to_dict() for r in self.records],
            "windows": [w.to_dict() for w in self.windows],
            "critical_points": [c.to_dict() for c in self.critical_points],
            "region_midpoint": dict(self.region_midpoint) if self.region_midpoint else None,
            "reverifications": [r.to_dict() for r in self.reverifications],
            "empty": self.empty,
            "all_definite": self.all_definite,
            "notes": list(self.notes),
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        """Header and rows: parameters..., energy, threshold, verdict, labels, holds, error."""
        header = [a.name for a in self.axes] + ["energy", "threshold", "verdict", "labels", "holds", "error"]
        rows = []
        for r in self.records:
            vals = dict(r.values)
            holds = "" if r.holds is None else str(r.holds).lower()
            row = [vals[a.paths[0]] for a in self.axes]
            rows.append(row + [r.energy, r.threshold, r.verdict, ";".join(r.labels), holds, r.error or ""])
        return header, rows

    def write_csv(self, path) -> None:
        header, rows = self.csv_rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])


def _point_values(axes, index):
    out = {}
    for axis, i in zip(axes, index):
        for p in axis.paths:
            out[p] = axis.values[i]
    return out


def _evaluate_task(args):
    system_block, values, target, settings = args
    return evaluate(system_block, values, target, settings)


def scan_grid(
    system_block: Mapping[str, Any],
    scan: ScanSpec,
    settings: SolverSettings | None = None,
    workers: int = 1,
    cache: EnergyCache | None = None,
) -> WindowReport:
    """Evaluate the target on the full grid, assemble windows, refine their edges, re-verify."""
    settings = settings or SolverSettings()
    axes = scan.axes
    if not axes or any(len(a.values) == 0 for a in axes):
        return WindowReport(scan.target, axes, ())
    shape = tuple(len(a.values) for a in axes)
    indices = list(itertools.product(*(range(n) for n in shape)))
    points = [_point_values(axes, idx) for idx in indices]
    cache = cache if cache is not None else EnergyCache(settings)
    if workers > 1:
        tasks = [(system_block, p, scan.target, settings) for p in points]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_evaluate_task, tasks))
    else:
        records = [evaluate(system_block, p, scan.target, cache=cache) for p in points]
    by_index = dict(zip(indices, records))

    windows, criticals, notes = [], [], []
    first = axes[0]
    for rest in itertools.product(*(range(n) for n in shape[1:])):
        fixed = _point_values(axes[1:], rest)
        column = [by_index[(i,) + rest] for i in range(shape[0])]
        i = 0
        while i < shape[0]:
            if not column[i].holds:
                i += 1
                continue
            j = i
            while j + 1 < shape[0] and column[j + 1].holds:
                j += 1
            lower, lower_kind = first.values[i], "grid-edge"
            upper, upper_kind = first.values[j], "grid-edge"
            if i > 0:
                lower, lower_kind = _edge(system_block, first, column, i - 1, i, scan, fixed, cache, criticals)
            if j + 1 < shape[0]:
                upper, upper_kind = _edge(system_block, first, column, j, j + 1, scan, fixed, cache, criticals)
            windows.append(
                Window(tuple(sorted(fixed.items())), lower, upper, lower_kind, upper_kind, tuple(range(i, j + 1)))
            )
            i = j + 1
    if not all(r.definite for r in records):
        notes.append(f"{sum(not r.definite for r in records)} grid points without a definite verdict")

    midpoint, reverifications = None, []
    holding = [idx for idx, r in by_index.items() if r.holds]
    if holding and scan.reverify:
        centre = np.mean(np.array(holding, dtype=float), axis=0)
        best = min(holding, key=lambda idx: (float(np.sum((np.array(idx) - centre) ** 2)), idx))
        mid_values = _point_values(axes, best)
        midpoint = tuple(sorted(mid_values.items()))
        doubled = settings.replace(max_basis=2 * settings.max_basis)
        reverifications.append(evaluate(system_block, mid_values, scan.target, doubled))
    return WindowReport(
        scan.target, axes, tuple(records), tuple(windows), tuple(criticals), tuple(reverifications), midpoint, tuple(notes)
    )


def _edge(system_block, axis, column, i_lo, i_hi, scan, fixed, cache, criticals):
    """Refine a window edge between grid points i_lo and i_hi of the first axis."""
    a, b = column[i_lo], column[i_hi]
    if a.holds is None or b.holds is None:
        return (axis.values[i_hi] if b.holds else axis.values[i_lo]), "gap"
    if not scan.refine_edges:
        return (axis.values[i_hi] if b.holds else axis.values[i_lo]), "grid-edge"
    cp = bisect_critical(
        system_block,
        axis.paths,
        (axis.values[i_lo], axis.values[i_hi]),
        scan.target,
        tolerance=scan.bisection_tolerance,
        fixed=fixed,
        cache=cache,
        ends=(a, b),
    )
    criticals.append(cp)
    return cp.value, "critical"
