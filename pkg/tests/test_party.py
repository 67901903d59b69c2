from __future__ import annotations

import pytest

from conftest import rec
from kinnet.party import (
    HoppingCell,
    assign_dynastic,
    bandwagon_rates,
    community_overlap,
    dynastic_share,
    dynasty_party_overlap,
    hopping_rates,
    paired_hopping_rates,
    party_membership_table,
)


def test_assign_dynastic():
    rows = [
        rec("CRUZ", "A", community_id=0), rec("CRUZ", "B", community_id=0), rec("CRUZ", "C", community_id=0),
        rec("LIM", "D", community_id=1),
        rec("TAN", "E", province="LEYTE", community_id=0),
        rec("TAN", "F", province="CEBU", community_id=0),
    ]
    assert [r.dynastic for r in assign_dynastic(rows)] == [True, True, True, False, False, False]


def test_assign_dynastic_requires_community():
    with pytest.raises(ValueError):
        assign_dynastic([rec("CRUZ", "A")])


def test_hopping_rates_counts():
    rows = [rec("D", str(i), dynastic=True, hopper=i < 3, year=2016) for i in range(10)]
    rows += [rec("N", str(i), dynastic=False, hopper=i < 1, year=2016) for i in range(4)]
    rows += [rec("X", "Y", dynastic=True, hopper=False, year=2013)]
    cells = hopping_rates(rows, first_year=2013)
    assert [(c.group, c.hoppers, c.eligible) for c in cells] == [("dynastic", 3, 10), ("non_dynastic", 1, 4)]
    assert cells[0].rate == pytest.approx(0.3)
    assert paired_hopping_rates(cells) == [("SAMAR", 2016, 0.3, 0.25)]


def test_undefined_rate_excluded_from_pairs():
    cells = [HoppingCell("A", 2016, "dynastic", 0, 0), HoppingCell("A", 2016, "non_dynastic", 1, 5)]
    assert cells[0].rate is None
    assert paired_hopping_rates(cells) == []


def test_eligible_sum_invariant():
    rows = [rec("D", str(i), dynastic=i % 2 == 0, hopper=i % 3 == 0, year=2016) for i in range(11)]
    cells = hopping_rates(rows, first_year=2013)
    assert sum(c.eligible for c in cells) == 11


def test_overlap_examples():
    assert community_overlap(["LP", "LP", "LP", "NPC"]) == 0.75
    assert community_overlap(["LP"] * 3) == 1.0
    assert community_overlap([None, None]) is None
    rows = [rec("A", str(i), party=p, community_id=0) for i, p in enumerate(["LP", "LP"])]
    rows += [rec("B", str(i), party=p, community_id=1) for i, p in enumerate(["LP", "NP", "NP", "LP"])]
    rows += [rec("C", "solo", party="NP", community_id=2)]
    assert dynasty_party_overlap(rows) == {("SAMAR", 2016): pytest.approx(0.75)}
    assert dynasty_party_overlap(rows, size_weighted=True)[("SAMAR", 2016)] == pytest.approx((2 * 1 + 4 * 0.5) / 6)


def test_overlap_without_dynasty_is_undefined():
    assert dynasty_party_overlap([rec("A", "x", community_id=0), rec("B", "y", community_id=1)]) == {("SAMAR", 2016): None}


def test_bandwagon():
    rows = [rec("D", str(i), party="LP" if i < 8 else "NP", dynastic=True, hopper=i < 8 or i == 50, year=2016)
            for i in range(100)]
    out = bandwagon_rates(rows, {2016: "LP"})
    assert out[(2016, "dynastic")] == {"bandwagoners": 8, "winners": 100, "rate": pytest.approx(0.08)}
    assert out[(2016, "non_dynastic")]["rate"] is None
    with pytest.raises(ValueError):
        bandwagon_rates(rows, {2013: "LP"})


def test_bandwagon_bounded_by_hoppers():
    rows = [rec("D", str(i), party="LP", dynastic=i % 2 == 0, hopper=i % 3 == 0, year=2016) for i in range(30)]
    out = bandwagon_rates(rows, {2016: "LP"})
    cells = {c.group: c.hoppers for c in hopping_rates(rows, first_year=2013)}
    for g in ("dynastic", "non_dynastic"):
        assert out[(2016, g)]["bandwagoners"] <= cells[g]


def test_membership_table():
    rows = [rec("A", "1", party="LP", dynastic=True, year=2013), rec("A", "2", party="LP", dynastic=True, year=2013),
            rec("B", "3", party="XYZ", dynastic=False, year=2013)]
    table = {(t["party"], t["year"], t["group"]): t["count"] for t in party_membership_table(rows, ["LP", "NP"])}
    assert table[("LP", 2013, "dynastic")] == 2
    assert table[("OTHER", 2013, "non_dynastic")] == 1
    assert table[("NP", 2013, "dynastic")] == 0
    empty = party_membership_table(rows, [])
    assert {(t["party"], t["group"]) for t in empty} == {("OTHER", "dynastic"), ("OTHER", "non_dynastic")}


def test_dynastic_share():
    rows = [rec("A", str(i), dynastic=i < 3, year=2016) for i in range(4)]
    assert dynastic_share(rows) == {2016: 0.75}
