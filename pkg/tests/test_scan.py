import csv

import pytest
from conftest import GAUSSIAN_CRITICAL, gaussian_block

from brunnian.scan import Axis, ScanError, ScanSpec, bisect_critical, evaluate, scan_grid
from brunnian.solver import SolverSettings

CRITICAL = SolverSettings(max_basis=60, binding_tolerance=1e-8, width_window=(1e-2, 1e4))
DEPTH = "potentials.V.depth"


def test_bisection_matches_critical_depth():
    cp = bisect_critical(gaussian_block({"a": 2}), DEPTH, (-10.0, -0.5), "two_body_bound", CRITICAL, 1e-4)
    assert -cp.value == pytest.approx(GAUSSIAN_CRITICAL, rel=1e-3)
    assert cp.label == "bound off"
    assert cp.lower_record.holds and not cp.upper_record.holds
    assert cp.upper - cp.lower <= 1e-4 * abs(cp.lower)


def test_bisection_without_transition():
    with pytest.raises(ScanError, match="no transition in bracket"):
        bisect_critical(gaussian_block({"a": 2}), DEPTH, (-2.0, -0.5), "bound", CRITICAL)


def test_bisection_bracket_order():
    with pytest.raises(ScanError, match="ordered"):
        bisect_critical(gaussian_block({"a": 2}), DEPTH, (-0.5, -10.0), "bound", CRITICAL)


def test_strict_bisection_refuses_marginal_points():
    # with epsilon_bind = 0.1 the shallow end is marginal rather than unbound
    coarse = SolverSettings(max_basis=30, binding_tolerance=0.1)
    cp = bisect_critical(gaussian_block({"a": 2}), DEPTH, (-10.0, -0.5), "bound", coarse, 1e-3)
    assert cp.marginal_evaluations > 0
    with pytest.raises(ScanError, match="marginal"):
        bisect_critical(gaussian_block({"a": 2}), DEPTH, (-10.0, -0.5), "bound", coarse, 1e-3, strict=True)


def test_three_body_window_1d():
    scan = ScanSpec.from_dict(
        {
            "target": "borromean",
            "bisection_tolerance": 1e-2,
            "axes": [{"path": DEPTH, "values": [-3.0, -2.4, -1.8]}],
        }
    )
    report = scan_grid(gaussian_block({"a": 3}), scan, SolverSettings(max_basis=100))
    assert [r.holds for r in report.records] == [False, True, False]
    (w,) = report.windows
    assert w.lower_kind == w.upper_kind == "critical"
    # three-body critical depth near -2.13, pair critical depth -2.684
    assert -2.75 < w.lower < -2.6 and -2.2 < w.upper < -2.1
    assert report.reverified


def test_empty_region_with_definite_verdicts():
    scan = ScanSpec.from_dict({"target": "borromean", "axes": [{"path": DEPTH, "range": [-1.5, -1.0], "points": 3}]})
    report = scan_grid(gaussian_block({"a": 3}), scan, SolverSettings(max_basis=40))
    assert report.empty and report.all_definite
    assert not report.windows and not report.reverifications


def test_empty_axis_grid():
    report = scan_grid(gaussian_block({"a": 3}), ScanSpec("bound", (Axis((DEPTH,), ()),)), SolverSettings())
    assert report.records == () and report.empty


def test_csv_output(tmp_path):
    scan = ScanSpec.from_dict(
        {"target": "bound", "refine_edges": False, "axes": [{"path": DEPTH, "values": [-5.0, -1.0]}]}
    )
    report = scan_grid(gaussian_block({"a": 2}), scan, SolverSettings(max_basis=30))
    header, rows = report.csv_rows()
    assert header[0] == DEPTH and "holds" in header
    assert len(rows) == 2
    path = tmp_path / "grid.csv"
    report.write_csv(path)
    with open(path) as fh:
        table = list(csv.reader(fh))
    assert table[0] == header and len(table) == 3


def test_parallel_matches_serial():
    scan = ScanSpec.from_dict({"target": "bound", "reverify": False, "axes": [{"path": DEPTH, "values": [-4.0, -2.0, -1.0]}]})
    block = gaussian_block({"a": 3})
    settings = SolverSettings(max_basis=40)
    serial = scan_grid(block, scan, settings, workers=1)
    parallel = scan_grid(block, scan, settings, workers=2)
    assert serial.records == parallel.records
    assert serial.windows == parallel.windows


def test_critical_depth_monotone_in_basis_size():
    values = []
    for mb in (30, 60, 120):
        cp = bisect_critical(gaussian_block({"a": 3}), DEPTH, (-2.6, -1.5), "bound", SolverSettings(max_basis=mb), 1e-3)
        values.append(abs(cp.value))
    # a larger basis can only lower energies, so binding sets in no later
    assert values[0] + 1e-3 * values[0] >= values[1] >= values[2] - 1e-3 * values[2]


def test_evaluate_records_errors():
    rec = evaluate(gaussian_block({"a": 2}), {"potentials.missing.depth": -1.0}, "bound", SolverSettings())
    assert rec.holds is None and "not found" in rec.error
    assert rec.to_dict()["error"]


def test_scan_spec_validation():
    with pytest.raises(ScanError):
        ScanSpec.from_dict({"target": "glued", "axes": []})
    with pytest.raises(ScanError):
        ScanSpec.from_dict({"target": "bound", "bisection_tolerance": 0.5, "axes": []})
    with pytest.raises(ScanError):
        Axis.from_dict({"path": DEPTH, "values": [-1.0, -2.0]})
    with pytest.raises(ScanError):
        Axis.from_dict({"values": [1.0]})
    axis = Axis.from_dict({"paths": [DEPTH, "potentials.V.range"], "range": [0.5, 1.5], "points": 3})
    assert axis.values == (0.5, 1.0, 1.5) and axis.name == f"{DEPTH}+potentials.V.range"
    spec = ScanSpec.from_dict({"target": "second_order_brunnian", "axes": [{"path": DEPTH, "values": [1.0]}]})
    assert ScanSpec.from_dict(spec.to_dict()) == spec


def test_bisection_insensitive_to_seed():
    tol = 1e-4
    values = [
        bisect_critical(gaussian_block({"a": 2}), DEPTH, (-10.0, -0.5), "bound", CRITICAL.replace(random_seed=s), tol).value
        for s in (0, 1)
    ]
    assert abs(values[0] - values[1]) <= 2 * tol * abs(values[0])
