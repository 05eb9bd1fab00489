"""Energetic Borromean / Brunnian classification.

Two subsystems are *linked* when they are bound. An N-body system is of type
B(N, k) when it is bound while every subsystem with m <= k members is
unbound. ``k_max`` is the largest such k; the system is Borromean when
k_max >= 2 and Brunnian when k_max = N - 1 (the two coincide for N = 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import ClusterDecomposition, ClusterError, decompose, cluster_specs
from .model import SystemSpec, subsystems, validate_system, verdict
from .solver import EmptyChannelError, EnergyCache, SolverSettings


def _name(composition) -> str:
    return "".join(f"{sp}{n}" if n > 1 else sp for sp, n in composition)


@dataclass(frozen=True)
class SubsystemRecord:
    composition: tuple[tuple[str, int], ...]
    multiplicity: int
    energy: float
    threshold: float
    verdict: str

    @property
    def size(self) -> int:
        return sum(n for _, n in self.composition)

    def to_dict(self) -> dict:
        return {
            "subsystem": _name(self.composition),
            "size": self.size,
            "multiplicity": self.multiplicity,
            "energy": self.energy,
            "threshold": self.threshold,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class ClassificationReport:
    """Verdicts for a system and all its proper subsystems.

    ``labels`` holds only the qualitative tags (bound, borromean, brunnian,
    second-order-brunnian, indeterminate); the B(n,k) type is kept in
    ``b_nk`` so label sets can be compared directly.
    """

    n: int
    level: str
    energy: float
    threshold: float
    verdict: str
    per_subsystem: tuple[SubsystemRecord, ...]
    k_max: int
    labels: frozenset
    b_nk: str | None
    indeterminate: tuple[str, ...] = ()
    conditions: dict = field(default_factory=dict)
    cluster_reports: tuple = ()
    decomposition: ClusterDecomposition | None = None
    notes: tuple[str, ...] = ()

    @property
    def bound(self) -> bool:
        return self.verdict == "bound"

    @property
    def binding_energy(self) -> float:
        return self.threshold - self.energy

    def summary(self) -> str:
        if "indeterminate" in self.labels:
            return f"indeterminate: marginal {', '.join(self.indeterminate)}"
        if self.level == "second-order":
            ok = "second-order-brunnian" in self.labels
            cond = ", ".join(f"({k}) {'holds' if v else 'fails'}" for k, v in sorted(self.conditions.items()))
            return f"{'second-order brunnian' if ok else 'not second-order brunnian'}: condition {cond}"
        if not self.bound:
            return f"unbound (E={self.energy:.6g}, threshold {self.threshold:.6g})"
        tags = [t for t in ("borromean", "brunnian") if t in self.labels]
        head = self.b_nk + (" " + "=".join(tags) if tags else "")
        return f"{head}, bound by {self.binding_energy:.4g}"

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "level": self.level,
            "energy": self.energy,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "k_max": self.k_max,
            "labels": sorted(self.labels),
            "b_nk": self.b_nk,
            "indeterminate": list(self.indeterminate),
            "subsystems": [s.to_dict() for s in self.per_subsystem],
            "summary": self.summary(),
        }
        if self.level == "second-order":
            out["conditions"] = dict(self.conditions)
            out["cluster_reports"] = [r.to_dict() for r in self.cluster_reports]
            out["decomposition"] = self.decomposition.to_dict() if self.decomposition else None
            out["notes"] = list(self.notes)
        return out


def k_max_from(n: int, records) -> int:
    """Largest k such that every subsystem with 2..k members is unbound (1 if a pair binds)."""
    k = 1
    for m in range(2, n):
        sized = [r for r in records if r.size == m]
        if sized and all(r.verdict == "unbound" for r in sized):
            k = m
        else:
            break
    return k


def _labels(n, full_verdict, k, marginal):
    if marginal or full_verdict == "marginal":
        return frozenset({"indeterminate"})
    labels = set()
    if full_verdict == "bound":
        labels.add("bound")
        if k >= 2:
            labels.add("borromean")
        if k == n - 1:
            labels.add("brunnian")
    return frozenset(labels)


def classify(
    spec: SystemSpec,
    settings: SolverSettings | None = None,
    cache: EnergyCache | None = None,
    level: str = "first-order",
) -> ClassificationReport:
    """Solve the system and every sub-multiset of size 2..N-1 and label it."""
    validate_system(spec)
    if spec.n < 3:
        raise ValueError("classification needs at least three particles")
    cache = cache if cache is not None else EnergyCache(settings)
    tol = cache.settings.binding_tolerance
    records = []
    for sub, mult in subsystems(spec, spec.n - 1):
        try:
            res = cache.result(sub)
        except EmptyChannelError as exc:
            raise EmptyChannelError(
                f"subsystem {_name(sub.composition)} has no state in the s-wave channel; "
                "its binding cannot be decided, so the system cannot be classified"
            ) from exc
        records.append(SubsystemRecord(sub.composition, mult, res.energy, res.threshold_used, res.verdict))
    full = cache.result(spec)
    marginal = tuple(_name(r.composition) for r in records if r.verdict == "marginal")
    if full.verdict == "marginal":
        marginal = marginal + (_name(spec.composition),)
    k = k_max_from(spec.n, records)
    return ClassificationReport(
        n=spec.n,
        level=level,
        energy=full.energy,
        threshold=full.threshold_used,
        verdict=verdict(full.energy, full.threshold_used, tol),
        per_subsystem=tuple(records),
        k_max=k,
        labels=_labels(spec.n, full.verdict, k, marginal),
        b_nk=f"B({spec.n},{k})" if full.verdict == "bound" else None,
        indeterminate=marginal,
    )


def classify_second_order(
    spec: SystemSpec,
    settings: SolverSettings | None = None,
    cache: EnergyCache | None = None,
    exact_check: bool = False,
) -> ClassificationReport:
    """Second-order Brunnian test for an a^3 b^3 c^3 system.

    Condition (ii): each same-species triple is Borromean. Condition (i): in
    the cluster ansatz the three clusters form a bound Borromean state. With
    ``exact_check`` the full nine-body system is also classified directly
    (expensive; result stored under ``notes``).
    """
    validate_system(spec)
    cache = cache if cache is not None else EnergyCache(settings)
    clusters = cluster_specs(spec)
    cluster_reports = tuple(classify(spec.with_composition({c.species: 3}), cache=cache) for c in clusters)
    cond_ii = all("borromean" in r.labels for r in cluster_reports)
    notes = []
    decomposition = None
    rel_report = None
    try:
        decomposition = decompose(spec, cache=cache)
    except ClusterError as exc:
        notes.append(str(exc))
    if decomposition is not None:
        rel_report = classify(decomposition.relative_spec, cache=cache, level="second-order")
        notes.append(f"cluster size ratio {decomposition.size_ratio():.4g} (no validity cutoff applied)")
    cond_i = rel_report is not None and "borromean" in rel_report.labels
    marginal = tuple(f"{c.label}:{m}" for c, r in zip(clusters, cluster_reports) for m in r.indeterminate)
    if rel_report is not None:
        marginal += tuple(f"clusters:{m}" for m in rel_report.indeterminate)
    if marginal:
        labels = frozenset({"indeterminate"})
    elif cond_i and cond_ii:
        labels = frozenset({"bound", "borromean", "brunnian", "second-order-brunnian"})
    else:
        labels = rel_report.labels if rel_report is not None else frozenset()
    if exact_check:
        exact = classify(spec, cache=cache)
        notes.append(f"exact nine-body check: {exact.summary()}")
    if rel_report is None:
        return ClassificationReport(
            n=3,
            level="second-order",
            energy=float("nan"),
            threshold=float("nan"),
            verdict="invalid",
            per_subsystem=(),
            k_max=0,
            labels=labels,
            b_nk=None,
            indeterminate=marginal,
            conditions={"i": False, "ii": cond_ii},
            cluster_reports=cluster_reports,
            notes=tuple(notes),
        )
    return ClassificationReport(
        n=3,
        level="second-order",
        energy=rel_report.energy,
        threshold=rel_report.threshold,
        verdict=rel_report.verdict,
        per_subsystem=rel_report.per_subsystem,
        k_max=rel_report.k_max,
        labels=labels,
        b_nk=rel_report.b_nk,
        indeterminate=marginal,
        conditions={"i": cond_i, "ii": cond_ii},
        cluster_reports=cluster_reports,
        decomposition=decomposition,
        notes=tuple(notes),
    )
