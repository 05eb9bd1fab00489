"""Three-cluster ansatz for a^3 b^3 c^3 systems.

The nine-body wave function is approximated as phi_A phi_B phi_C Phi_ABC.
Each phi_i is the ground state of one same-species triple with only its own
pair potential acting. Each cluster density is replaced by an isotropic
Gaussian whose width matches the particle-to-centre RMS distance. The
cluster-cluster potentials then follow by double folding the inter-species
pair potentials, and Phi_ABC is solved as a three-point-particle problem with
masses M_i = 3 m_i. Exchange between clusters is neglected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ParticleSpec, SolveResult, SystemSpec, validate_system
from .potentials import PotentialModel
from .solver import EnergyCache, SolverSettings, mean_square_pair_distance, mean_square_radius

CLUSTER_LABELS = ("A", "B", "C")
PAIRS_PER_CLUSTER_PAIR = 9


class ClusterError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterSpec:
    label: str
    species: str
    members: tuple[ParticleSpec, ...]
    intra_potential: PotentialModel

    def __post_init__(self):
        if len(self.members) != 3:
            raise ClusterError(f"cluster {self.label} must have exactly 3 members, got {len(self.members)}")

    @property
    def total_mass(self) -> float:
        return float(sum(p.mass for p in self.members))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "species": self.species,
            "members": len(self.members),
            "total_mass": self.total_mass,
            "intra_potential": self.intra_potential.to_dict(),
        }


@dataclass(frozen=True)
class ClusterDecomposition:
    clusters: tuple[ClusterSpec, ...]
    cluster_solutions: tuple[SolveResult, ...]
    density_widths: tuple[float, ...]
    effective_potentials: dict
    relative_spec: SystemSpec
    relative_solution: SolveResult

    @property
    def cluster_energies(self) -> tuple[float, ...]:
        return tuple(r.energy for r in self.cluster_solutions)

    @property
    def relative_energy(self) -> float:
        """E_ABC, pinned to the cluster-level threshold when the clusters do not bind."""
        return self.relative_solution.physical_energy

    @property
    def total_energy_estimate(self) -> float:
        return sum(self.cluster_energies) + self.relative_energy

    def size_ratio(self) -> float:
        """Cluster RMS radius over RMS inter-cluster distance (validity diagnostic, no cutoff)."""
        d = self.relative_spec.dimension
        r_cluster = math.sqrt(d * sum(s * s for s in self.density_widths) / 3.0)
        r_rel = math.sqrt(mean_square_pair_distance(self.relative_spec, self.relative_solution))
        return r_cluster / r_rel

    def to_dict(self) -> dict:
        return {
            "clusters": [c.to_dict() for c in self.clusters],
            "cluster_energies": list(self.cluster_energies),
            "density_widths": list(self.density_widths),
            "effective_potentials": {f"{a}-{b}": v.to_dict() for (a, b), v in sorted(self.effective_potentials.items())},
            "relative_solution": self.relative_solution.to_dict(),
            "relative_energy": self.relative_energy,
            "total_energy_estimate": self.total_energy_estimate,
            "size_ratio": self.size_ratio(),
        }


def cluster_specs(spec: SystemSpec) -> tuple[ClusterSpec, ...]:
    """Split an a^3 b^3 c^3 system into its three same-species clusters."""
    comp = spec.composition
    if len(comp) != 3 or any(c != 3 for _, c in comp):
        raise ClusterError(f"cluster ansatz needs three species with three particles each, got {dict(comp)}")
    out = []
    for label, (sp, _) in zip(CLUSTER_LABELS, comp):
        rep = spec.representative(sp)
        out.append(ClusterSpec(label, sp, (rep,) * 3, spec.potential(sp, sp)))
    return tuple(out)


def solve_clusters(spec: SystemSpec, settings: SolverSettings | None = None, cache: EnergyCache | None = None):
    """Solve each intra-cluster problem; return (clusters, results, density widths).

    The density width sigma is the per-component standard deviation of an
    isotropic Gaussian with the same mean-square particle-centre distance,
    sigma**2 = <r**2> / d.
    """
    validate_system(spec)
    cache = cache if cache is not None else EnergyCache(settings)
    clusters = cluster_specs(spec)
    results, widths = [], []
    for c in clusters:
        sub = spec.with_composition({c.species: 3})
        res = cache.result(sub)
        if not res.bound:
            raise ClusterError(f"cluster {c.label} not bound; condition (ii) fails")
        results.append(res)
        widths.append(math.sqrt(mean_square_radius(sub, res) / spec.dimension))
    return clusters, tuple(results), tuple(widths)


def fold_effective_potential(
    pair: PotentialModel,
    sigma_1: float,
    sigma_2: float,
    pairs_count: int = PAIRS_PER_CLUSTER_PAIR,
    dim: int = 3,
) -> PotentialModel:
    """Double-fold a Gaussian-sum pair potential over two Gaussian cluster densities.

    Each term (s, b) becomes (n s (b/b')**d, b') with b'**2 = b**2 + 2 sigma_1**2 + 2 sigma_2**2.
    """
    if sigma_1 < 0 or sigma_2 < 0:
        raise ValueError("density widths must be non-negative")
    spread = 2.0 * (sigma_1**2 + sigma_2**2)
    terms = []
    for s, b in pair.terms:
        b2 = b * b + spread
        terms.append((pairs_count * s * (b * b / b2) ** (dim / 2), math.sqrt(b2)))
    return PotentialModel(
        tuple(terms),
        form="folded",
        params=(("sigma_1", float(sigma_1)), ("sigma_2", float(sigma_2)), ("pairs_count", int(pairs_count))),
    )


def relative_system(clusters, effective_potentials: dict, dimension: int) -> SystemSpec:
    """Three distinguishable point particles of masses M_i with the folded potentials."""
    particles = [ParticleSpec(c.label, c.total_mass, "distinguishable") for c in clusters]
    pots, pairs = {}, {}
    for (a, b), pot in effective_potentials.items():
        name = f"V{a}{b}"
        pots[name] = pot
        pairs[(a, b)] = name
    return SystemSpec.build(particles, dimension, pots, pairs)


def solve_relative(relative_spec: SystemSpec, settings: SolverSettings | None = None, cache: EnergyCache | None = None):
    """E_ABC with its verdict against the lowest cluster-level breakup threshold."""
    cache = cache if cache is not None else EnergyCache(settings)
    return cache.result(relative_spec)


def decompose(spec: SystemSpec, settings: SolverSettings | None = None, cache: EnergyCache | None = None) -> ClusterDecomposition:
    cache = cache if cache is not None else EnergyCache(settings)
    clusters, results, widths = solve_clusters(spec, cache=cache)
    effective = {}
    for i in range(3):
        for j in range(i + 1, 3):
            pair = spec.potential(clusters[i].species, clusters[j].species)
            effective[(clusters[i].label, clusters[j].label)] = fold_effective_potential(
                pair, widths[i], widths[j], PAIRS_PER_CLUSTER_PAIR, spec.dimension
            )
    rel_spec = relative_system(clusters, effective, spec.dimension)
    rel = solve_relative(rel_spec, cache=cache)
    return ClusterDecomposition(clusters, results, widths, effective, rel_spec, rel)
