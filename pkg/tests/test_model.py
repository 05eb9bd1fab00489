import itertools
import math

import pytest
from hypothesis import given, strategies as st

from brunnian.model import (
    InvalidSystemError,
    ParticleSpec,
    SolveResult,
    SystemSpec,
    sub_compositions,
    subsystems,
    validate_system,
    verdict,
)
from brunnian.potentials import make_gaussian

V = make_gaussian(-1.0, 1.0)


def three_species(counts=(3, 3, 3), dim=3):
    particles = []
    for sp, c in zip("abc", counts):
        particles += [ParticleSpec(sp)] * c
    pairs = {pair: "V" for pair in itertools.combinations_with_replacement("abc", 2)}
    return SystemSpec.build(particles, dim, {"V": V}, pairs)


def test_identical_bosons_valid():
    spec = SystemSpec.build([ParticleSpec("a")] * 3, 3, {"V": V}, {("a", "a"): "V"})
    assert validate_system(spec) is spec


def test_missing_pair_potential():
    spec = SystemSpec.build([ParticleSpec("a"), ParticleSpec("a"), ParticleSpec("b")], 3, {"V": V}, {("a", "a"): "V"})
    with pytest.raises(InvalidSystemError, match=r"missing pair potential \(a,b\)"):
        validate_system(spec)


def test_zero_mass_rejected():
    spec = SystemSpec.build([ParticleSpec("a", 0.0)] * 2, 3, {"V": V}, {("a", "a"): "V"})
    with pytest.raises(InvalidSystemError, match="mass must be positive"):
        validate_system(spec)


def test_all_violations_reported_together():
    spec = SystemSpec.build([ParticleSpec("a", -1.0), ParticleSpec("b", -1.0)], 4, {}, {})
    with pytest.raises(InvalidSystemError) as info:
        validate_system(spec)
    errors = info.value.errors
    assert any("dimension" in e for e in errors)
    assert any("mass must be positive" in e for e in errors)
    assert any("missing pair potential" in e for e in errors)


def test_particle_count_limits():
    with pytest.raises(InvalidSystemError, match="outside"):
        validate_system(SystemSpec.build([ParticleSpec("a")] * 10, 3, {"V": V}, {("a", "a"): "V"}))
    with pytest.raises(InvalidSystemError, match="outside"):
        validate_system(SystemSpec.build([ParticleSpec("a")], 3, {"V": V}, {("a", "a"): "V"}))


def test_inconsistent_species():
    spec = SystemSpec.build([ParticleSpec("a", 1.0), ParticleSpec("a", 2.0)], 3, {"V": V}, {("a", "a"): "V"})
    with pytest.raises(InvalidSystemError, match="inconsistent"):
        validate_system(spec)


def test_identical_triple_has_one_pair_type():
    spec = SystemSpec.build([ParticleSpec("a")] * 3, 3, {"V": V}, {("a", "a"): "V"})
    subs = subsystems(spec, 2)
    assert len(subs) == 1
    assert subs[0].multiplicity == 3
    assert subs[0].spec.composition == (("a", 2),)


def test_nine_body_pair_types():
    subs = subsystems(three_species(), 2)
    assert sorted("".join(sp * c for sp, c in s.spec.composition) for s in subs) == ["aa", "ab", "ac", "bb", "bc", "cc"]


def test_nine_body_composition_count_matches_brute_force():
    brute = [(i, j, k) for i, j, k in itertools.product(range(4), repeat=3) if 2 <= i + j + k <= 8]
    subs = subsystems(three_species(), 8)
    # 4**3 triples, minus sizes 0 and 1 (4 of them) and the full system
    assert len(brute) == 59
    assert sorted(tuple(dict(s.spec.composition).get(sp, 0) for sp in "abc") for s in subs) == sorted(brute)
    for s in subs:
        validate_system(s.spec)


def test_multiplicities_sum_for_distinguishable():
    particles = [ParticleSpec(sp, 1.0, "distinguishable") for sp in "abcde"]
    pairs = {pair: "V" for pair in itertools.combinations_with_replacement("abcde", 2)}
    spec = SystemSpec.build(particles, 3, {"V": V}, pairs)
    total = sum(s.multiplicity for s in subsystems(spec, 4))
    assert total == sum(math.comb(5, m) for m in range(2, 5))


@given(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)).filter(lambda c: sum(c) >= 3))
def test_multiplicities_sum_to_binomials(counts):
    spec = three_species(counts)
    n = sum(counts)
    for k in range(2, n):
        subs = subsystems(spec, k)
        assert sum(s.multiplicity for s in subs) == sum(math.comb(n, m) for m in range(2, k + 1))


def test_subsystems_bad_max_size():
    spec = three_species()
    with pytest.raises(ValueError):
        subsystems(spec, 9)
    with pytest.raises(ValueError):
        subsystems(spec, 0)


def test_sub_compositions_sorted_by_size():
    comps = sub_compositions((("a", 2), ("b", 1)), 1, 3)
    sizes = [sum(k for _, k in c) for c in comps]
    assert sizes == sorted(sizes)
    assert (("a", 2), ("b", 1)) in comps


def test_subsystem_inherits_only_acting_potentials():
    particles = [ParticleSpec("a"), ParticleSpec("a"), ParticleSpec("b")]
    spec = SystemSpec.build(particles, 2, {"Vaa": V, "Vab": make_gaussian(-2.0, 1.0)}, {("a", "a"): "Vaa", ("a", "b"): "Vab"})
    sub = spec.with_composition({"a": 2})
    assert sub.dimension == 2
    assert sub.potential_map == {"Vaa": V}


def test_cache_key_ignores_particle_order():
    a, b = ParticleSpec("a"), ParticleSpec("b", 2.0)
    pairs = {("a", "a"): "V", ("a", "b"): "V"}
    s1 = SystemSpec.build([a, b, a], 3, {"V": V}, pairs)
    s2 = SystemSpec.build([b, a, a], 3, {"V": V}, pairs)
    assert s1.cache_key() == s2.cache_key()
    assert s1.structure_seed() == s2.structure_seed()


def test_verdict_convention():
    assert verdict(-1.0, 0.0) == "bound"
    assert verdict(1.0, 0.0) == "unbound"
    assert verdict(-5e-7, 0.0) == "marginal"
    assert verdict(-5e-7, 0.0, 1e-7) == "bound"
    r = SolveResult(-0.5, 3, ((1, -0.1), (2, -0.4), (3, -0.5)), -0.2)
    assert r.bound and r.binding_energy == pytest.approx(0.3)
    assert SolveResult(0.1, 1, ((1, 0.1),), 0.0).physical_energy == 0.0
