import pytest
from hypothesis import given, strategies as st

from brunnian.nuclear import (
    MassTable,
    NuclearError,
    Nuclide,
    ThresholdQuery,
    evaluate_query,
    load_table,
    parse_table,
    threshold_energy,
)

TABLE = load_table()


@pytest.mark.parametrize(
    "query, expected, tol",
    [
        ("18C -> 3*6He", 27.86, 0.05),
        ("36Ar -> 9*4He", 52.06, 0.05),
        ("12Be -> 2*6He", 10.1, 0.1),
        ("27Mg -> 3*9Be", 48.63, 0.05),
    ],
)
def test_quoted_thresholds(query, expected, tol):
    assert threshold_energy(query, TABLE) == pytest.approx(expected, abs=tol)


def test_identity_breakup_is_zero():
    assert threshold_energy("12C -> 12C", TABLE) == 0.0


def test_worked_examples():
    # Hoyle-state region: the 3 alpha threshold of 12C sits at 7.27 MeV
    assert threshold_energy("12C -> 3 alpha", TABLE) == pytest.approx(7.275, abs=0.005)
    # 8Be is unbound against two alphas; the table marks it
    res = evaluate_query("8Be -> 2*4He", TABLE)
    assert res.energy < 0
    assert any("unbound" in f for f in res.flags)
    assert threshold_energy("10C -> 2*4He + 2p", TABLE) == pytest.approx(3.73, abs=0.01)
    assert threshold_energy("123Xe -> 115Sn + 2*4He", TABLE) == pytest.approx(0.06, abs=0.05)


def test_sign_convention():
    # 6He is bound against alpha + 2n, 5He is not bound against alpha + n
    assert threshold_energy("6He -> 4He + 2n", TABLE) > 0
    assert threshold_energy("5He -> 4He + n", TABLE) < 0


def test_additivity_exact():
    a = threshold_energy("36Ar -> 12C + 6*4He", TABLE)
    b = threshold_energy("12C -> 3*4He", TABLE)
    assert a + b == pytest.approx(threshold_energy("36Ar -> 9*4He", TABLE), abs=1e-12)


@given(st.integers(1, 3))
def test_additivity_property(k):
    # break k of the three 9Be fragments further into 2 alpha + n
    parts = [f"{2 * k}*4He", f"{k}n"] + ([f"{3 - k}*9Be"] if k < 3 else [])
    base = threshold_energy("27Mg -> 3*9Be", TABLE)
    step = threshold_energy("9Be -> 2*4He + n", TABLE)
    total = threshold_energy("27Mg -> " + " + ".join(parts), TABLE)
    assert total == pytest.approx(base + k * step, abs=1e-9)


def test_parsing_forms():
    q = ThresholdQuery.parse("C-18 -> 3 6He")
    assert q.parent == Nuclide("C", 18)
    assert q.fragments == ((Nuclide("He", 6), 3),)
    q = ThresholdQuery.parse("10C -> 2alpha + 2p")
    assert dict(q.fragments) == {Nuclide("He", 4): 2, Nuclide("H", 1): 2}
    assert ThresholdQuery.parse("123Xe -> 115Sn + 2*4He").fragments[0] == (Nuclide("Sn", 115), 1)
    assert str(ThresholdQuery.parse("18C->3*6He")) == "18C -> 3*6He"


def test_unbalanced_query():
    with pytest.raises(NuclearError, match="unbalanced"):
        ThresholdQuery.parse("18C -> 2*6He")
    with pytest.raises(NuclearError, match="unbalanced"):
        # right mass number, wrong charge
        ThresholdQuery.parse("12C -> 2*6He")


def test_missing_nuclide():
    with pytest.raises(NuclearError, match="missing nuclide 20O"):
        threshold_energy("20O -> 16O + 4n", TABLE)


def test_bad_inputs():
    with pytest.raises(NuclearError):
        Nuclide.parse("??")
    with pytest.raises(NuclearError):
        Nuclide("Xx", 4)
    with pytest.raises(NuclearError):
        ThresholdQuery.parse("18C = 3*6He")
    with pytest.raises(NuclearError, match="positive"):
        ThresholdQuery.parse("18C -> 0*6He + 18C")


def test_table_validation():
    with pytest.raises(NuclearError, match="duplicate"):
        parse_table("He 4 2424.9\nHe 4 2424.9\n")
    with pytest.raises(NuclearError, match="line 1"):
        parse_table("He four 1.0\n")
    t = parse_table("# comment\n\nHe 4 2424.916\n")
    assert isinstance(t, MassTable) and len(t) == 1


def test_user_table_merged_with_flags(tmp_path):
    # made-up entry for the test: an extrapolated, unbound heavy fluorine
    path = tmp_path / "extra.txt"
    path.write_text("F 33 53000.0 #u\nLi 11 40728.0\n")
    table = load_table(path)
    assert table[Nuclide("Li", 11)].mass_excess == 40728.0
    res = evaluate_query("33F -> 3*11Li", table)
    assert "parent 33F: extrapolated mass" in res.flags
    assert "parent 33F: unbound nuclide" in res.flags
    assert "[" in str(res)
    assert res.to_dict()["flags"] == list(res.flags)


def test_result_string():
    assert str(evaluate_query("18C -> 3*6He", TABLE)) == "18C -> 3*6He: 27.85 MeV"
