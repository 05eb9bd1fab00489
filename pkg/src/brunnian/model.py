"""Shared data model: particles, systems, solve results.

Units are reduced throughout: hbar = 1, reference mass m0 = 1 and reference
length b0 = 1, so energies come out in hbar**2 / (m0 b0**2).
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple

from .potentials import PotentialModel

STATISTICS = ("boson", "fermion", "distinguishable")
MAX_PARTICLES = 9
BINDING_TOLERANCE = 1e-6


class InvalidSystemError(ValueError):
    """Raised by :func:`validate_system`; ``errors`` lists every violated invariant."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ParticleSpec:
    species: str
    mass: float = 1.0
    statistics: str = "boson"


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SystemSpec:
    """An N-particle problem: particles, spatial dimension, pair potentials.

    ``potentials`` maps a potential name to its model and ``pairs`` maps an
    unordered species pair to a potential name. Both are stored as sorted
    tuples so the spec is hashable; use :meth:`build` to construct from dicts.
    """

    particles: tuple[ParticleSpec, ...]
    dimension: int = 3
    potentials: tuple[tuple[str, PotentialModel], ...] = ()
    pairs: tuple[tuple[tuple[str, str], str], ...] = ()

    @classmethod
    def build(
        cls,
        particles: Iterable[ParticleSpec],
        dimension: int,
        potentials: Mapping[str, PotentialModel],
        pairs: Mapping[tuple[str, str], str],
    ) -> "SystemSpec":
        return cls(
            tuple(particles),
            int(dimension),
            tuple(sorted(potentials.items())),
            tuple(sorted((pair_key(*k), v) for k, v in pairs.items())),
        )

    @property
    def n(self) -> int:
        return len(self.particles)

    @property
    def potential_map(self) -> dict[str, PotentialModel]:
        return dict(self.potentials)

    @property
    def pair_map(self) -> dict[tuple[str, str], str]:
        return dict(self.pairs)

    @property
    def species(self) -> tuple[str, ...]:
        return tuple(sorted({p.species for p in self.particles}))

    @property
    def composition(self) -> tuple[tuple[str, int], ...]:
        counts = Counter(p.species for p in self.particles)
        return tuple(sorted(counts.items()))

    def representative(self, species: str) -> ParticleSpec:
        for p in self.particles:
            if p.species == species:
                return p
        raise KeyError(species)

    def potential(self, a: str, b: str) -> PotentialModel:
        return self.potential_map[self.pair_map[pair_key(a, b)]]

    def length_scale(self) -> float:
        """Largest Gaussian range among the potentials acting in this system (1 if none)."""
        ranges = [b for pot in self.active_potentials().values() for _, b in pot.terms]
        return max(ranges) if ranges else 1.0

    def active_potentials(self) -> dict[tuple[str, str], PotentialModel]:
        present = self.species
        counts = dict(self.composition)
        out = {}
        for a, b in itertools.combinations_with_replacement(present, 2):
            if a == b and counts[a] < 2:
                continue
            out[(a, b)] = self.potential(a, b)
        return out

    def canonical(self) -> "SystemSpec":
        """Particles sorted by species label (stable)."""
        return SystemSpec(
            tuple(sorted(self.particles, key=lambda p: p.species)), self.dimension, self.potentials, self.pairs
        )

    def with_composition(self, composition: Mapping[str, int] | Iterable[tuple[str, int]]) -> "SystemSpec":
        """Sub-system with the given species counts, inheriting dimension and potentials."""
        comp = dict(composition)
        particles = []
        for sp, count in sorted(comp.items()):
            if count:
                particles.extend([self.representative(sp)] * count)
        present = {sp for sp, c in comp.items() if c}
        pairs = tuple((k, v) for k, v in self.pairs if k[0] in present and k[1] in present)
        used = {v for _, v in pairs}
        pots = tuple((k, v) for k, v in self.potentials if k in used)
        return SystemSpec(tuple(particles), self.dimension, pots, pairs)

    def with_potentials(self, **updates: PotentialModel) -> "SystemSpec":
        pots = self.potential_map
        pots.update(updates)
        return SystemSpec(self.particles, self.dimension, tuple(sorted(pots.items())), self.pairs)

    def scaled(self, length: float) -> "SystemSpec":
        """Ranges times ``length``, strengths divided by ``length**2``; masses unchanged."""
        pots = {k: v.scaled(length) for k, v in self.potentials}
        return SystemSpec(self.particles, self.dimension, tuple(sorted(pots.items())), self.pairs)

    def cache_key(self) -> tuple:
        """Hashable identity of the physics: composition, masses, statistics, acting potentials."""
        spec = self.canonical()
        species = tuple(
            (sp, cnt, spec.representative(sp).mass, spec.representative(sp).statistics) for sp, cnt in spec.composition
        )
        pots = tuple((k, v.terms) for k, v in sorted(spec.active_potentials().items()))
        return (spec.dimension, species, pots)

    def structure_seed(self) -> int:
        """Deterministic integer from composition, masses and statistics only.

        Species labels and potentials are left out so relabelled or rescaled
        systems draw the same random basis.
        """
        spec = self.canonical()
        parts = [str(spec.dimension)]
        for sp, cnt in spec.composition:
            rep = spec.representative(sp)
            parts.append(f"{cnt}:{rep.mass!r}:{rep.statistics}")
        digest = hashlib.sha256("|".join(parts).encode()).digest()
        return int.from_bytes(digest[:8], "little")

    def to_dict(self) -> dict:
        particles = []
        for sp, count in self.composition:
            rep = self.representative(sp)
            particles.append({"species": sp, "mass": rep.mass, "statistics": rep.statistics, "count": count})
        return {
            "dimension": self.dimension,
            "particles": particles,
            "potentials": {k: v.to_dict() for k, v in self.potentials},
            "pairs": {f"{a}-{b}": v for (a, b), v in self.pairs},
        }


def validate_system(spec: SystemSpec) -> SystemSpec:
    """Return ``spec`` unchanged if every invariant holds, else raise :class:`InvalidSystemError`."""
    errors = []
    if not 2 <= spec.n <= MAX_PARTICLES:
        errors.append(f"particle count {spec.n} outside [2, {MAX_PARTICLES}]")
    if spec.dimension not in (2, 3):
        errors.append(f"unsupported dimension {spec.dimension} (must be 2 or 3)")
    seen: dict[str, ParticleSpec] = {}
    for p in spec.particles:
        if not p.species:
            errors.append("species label must be nonempty")
        if not (isinstance(p.mass, (int, float)) and p.mass > 0 and math.isfinite(p.mass)):
            errors.append(f"mass must be positive (species {p.species!r}, mass {p.mass})")
        if p.statistics not in STATISTICS:
            errors.append(f"unknown statistics {p.statistics!r} for species {p.species!r}")
        other = seen.setdefault(p.species, p)
        if other != p:
            errors.append(f"species {p.species!r} has inconsistent mass or statistics")
    pair_map = spec.pair_map
    pot_map = spec.potential_map
    counts = dict(spec.composition)
    for a, b in itertools.combinations_with_replacement(sorted(counts), 2):
        if a == b and counts[a] < 2:
            continue
        name = pair_map.get((a, b))
        if name is None:
            errors.append(f"missing pair potential ({a},{b})")
        elif name not in pot_map:
            errors.append(f"pair ({a},{b}) refers to undefined potential {name!r}")
    if errors:
        raise InvalidSystemError(errors)
    return spec


class Subsystem(NamedTuple):
    spec: SystemSpec
    multiplicity: int


def sub_compositions(composition: Iterable[tuple[str, int]], min_size: int, max_size: int):
    """Distinct sub-multisets (as sorted (species, count) tuples) with sizes in [min_size, max_size]."""
    comp = list(composition)
    ranges = [range(c + 1) for _, c in comp]
    out = []
    for counts in itertools.product(*ranges):
        size = sum(counts)
        if min_size <= size <= max_size:
            out.append(tuple((sp, k) for (sp, _), k in zip(comp, counts) if k))
    out.sort(key=lambda c: (sum(k for _, k in c), c))
    return out


def subsystems(spec: SystemSpec, max_size: int) -> list[Subsystem]:
    """Every distinct sub-multiset of size 2..max_size, with its multiplicity."""
    if not 1 <= max_size < spec.n:
        raise ValueError(f"max_size must satisfy 1 <= max_size < N={spec.n}, got {max_size}")
    full = dict(spec.composition)
    out = []
    for comp in sub_compositions(spec.composition, 2, max_size):
        mult = 1
        for sp, k in comp:
            mult *= math.comb(full[sp], k)
        out.append(Subsystem(spec.with_composition(comp), mult))
    return out


def verdict(energy: float, threshold: float, tolerance: float = BINDING_TOLERANCE) -> str:
    if energy < threshold - tolerance:
        return "bound"
    if energy > threshold + tolerance:
        return "unbound"
    return "marginal"


@dataclass(frozen=True)
class SolveResult:
    energy: float
    basis_size: int
    convergence_trace: tuple[tuple[int, float], ...]
    threshold_used: float
    tolerance: float = BINDING_TOLERANCE
    state: Any = field(default=None, compare=False, repr=False)

    @property
    def verdict(self) -> str:
        return verdict(self.energy, self.threshold_used, self.tolerance)

    @property
    def bound(self) -> bool:
        return self.verdict == "bound"

    @property
    def binding_energy(self) -> float:
        """Threshold minus energy (positive when bound)."""
        return self.threshold_used - self.energy

    @property
    def physical_energy(self) -> float:
        """Energy of the lowest state, with continuum solutions pinned to the threshold."""
        return min(self.energy, self.threshold_used)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "threshold": self.threshold_used,
            "verdict": self.verdict,
            "bound": self.bound,
            "basis_size": self.basis_size,
            "convergence_trace": [list(t) for t in self.convergence_trace],
        }
