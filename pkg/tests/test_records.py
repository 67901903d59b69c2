from __future__ import annotations

import logging

import pytest
from hypothesis import given, strategies as st

from conftest import rec
from oracles import jaro_winkler
from kinnet.records import (
    ElectionRecord,
    Position,
    SchemaError,
    assign_hopper,
    link_auxiliary,
    name_similarity,
    normalize_name,
    normalize_party,
    parse_position,
    parse_records,
    serialize_records,
)

HEADER = "last_name,first_name,middle_name,position,party,region,province,municipality,year\n"


@pytest.mark.parametrize(
    "raw, expected",
    [("Peña", "PENA"), ("", ""), (" uy-tan  jr. ", "UY-TAN JR"), ("ma. luisa", "MA LUISA"), (None, "")],
)
def test_normalize_name(raw, expected):
    assert normalize_name(raw) == expected


@given(st.text(max_size=30))
def test_normalize_name_idempotent(raw):
    once = normalize_name(raw)
    assert normalize_name(once) == once
    assert "." not in once and "  " not in once and once == once.strip()


def test_normalize_party():
    assert normalize_party("  ") is None
    assert normalize_party("independent") == "IND"
    assert normalize_party("pdp-laban") == "PDP-LABAN"


@pytest.mark.parametrize(
    "raw, pos",
    [
        ("GOVERNOR", Position.GOVERNOR),
        ("Member, House of Representatives", Position.HOUSE_REP),
        ("vice-mayor", Position.VICE_MAYOR),
        ("Provincial Board Member", Position.BOARD_MEMBER),
        ("Councilor", Position.COUNCILOR),
        ("ViceGovernor", Position.VICE_GOVERNOR),
    ],
)
def test_parse_position(raw, pos):
    assert parse_position(raw) is pos


def test_parse_position_unknown():
    assert parse_position("SENATOR") is None


def test_parse_records_basic(tmp_path):
    p = tmp_path / "in.csv"
    p.write_text(HEADER + "CRUZ,JUAN,SANTOS,GOVERNOR,LP,VIII,SAMAR,CATBALOGAN,2016\n"
                 '"REYES","ANA","","MEMBER, HOUSE OF REPRESENTATIVES","",VIII,SAMAR,CATBALOGAN,2016\n'
                 "DIAZ,PEDRO,,MAYOR,NP,VIII,SAMAR,X,20x4\n", encoding="utf-8")
    res = parse_records(p)
    assert len(res.records) == 2 and len(res.errors) == 1
    gov, rep = res.records
    assert gov.position is Position.GOVERNOR and gov.party == "LP" and gov.middle_name == "SANTOS"
    assert rep.position is Position.HOUSE_REP and rep.middle_name is None and rep.party is None
    assert res.errors[0].line == 4 and "year" in res.errors[0].message


def test_parse_records_missing_column(tmp_path):
    p = tmp_path / "in.csv"
    p.write_text("last_name,first_name,position,province\nCRUZ,JUAN,MAYOR,SAMAR\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="year"):
        parse_records(p)


def test_parse_records_schema_and_delimiter(tmp_path):
    p = tmp_path / "in.tsv"
    p.write_text("Apelyido\tPangalan\tPuwesto\tLalawigan\tTaon\nCRUZ\tJUAN\tMAYOR\tSAMAR\t2019\n", encoding="utf-8")
    schema = {"last_name": "Apelyido", "first_name": "Pangalan", "position": "Puwesto",
              "province": "Lalawigan", "year": "Taon"}
    res = parse_records(p, schema, delimiter="\t")
    assert res.records[0].last_name == "CRUZ" and res.records[0].year == 2019


def test_serialize_roundtrip(tmp_path):
    records = [
        rec("CRUZ", "JUAN", "SANTOS", Position.GOVERNOR, "LP", community_id=0, dynastic=True, hopper=False),
        rec("REYES", "ANA", None, Position.MAYOR, None),
    ]
    p = tmp_path / "out.csv"
    p.write_text(serialize_records(records, ["kinnet test"]), encoding="utf-8")
    assert p.read_text().startswith("# kinnet test\n")
    back = parse_records(p).records
    assert back == records


def test_similarity_matches_oracle():
    a, b = rec("SANTOS", "MA LUISA"), rec("SANTOS", "MARIA LUISA")
    sim = name_similarity(a, b)
    assert sim == pytest.approx(jaro_winkler("SANTOS MA LUISA", "SANTOS MARIA LUISA"), abs=1e-12)
    assert round(sim, 2) == 0.93


@given(st.text(alphabet="ABCDEFGHIJ ", min_size=1, max_size=12), st.text(alphabet="ABCDEFGHIJ ", min_size=1, max_size=12))
def test_similarity_property_vs_oracle(x, y):
    a, b = rec(x, "A"), rec(y, "B")
    assert name_similarity(a, b) == pytest.approx(jaro_winkler(f"{x} A", f"{y} B"), abs=1e-9)


def test_link_exact_unique():
    base = [rec("DELA CRUZ", "JOSE")]
    aux = [rec("DELA CRUZ", "JOSE", "RIZAL", party="LP")]
    out, report = link_auxiliary(base, aux, {"middle_name"})
    assert out[0].middle_name == "RIZAL" and out[0].party is None
    assert report.matched == 1 and report.rows[0]["status"] == "matched"


def test_link_fuzzy_match():
    out, report = link_auxiliary([rec("SANTOS", "MA LUISA")], [rec("SANTOS", "MARIA LUISA", "REYES")], {"middle_name"})
    assert out[0].middle_name == "REYES"


def test_link_ambiguous_leaves_field_absent():
    base = [rec("CRUZ", "JUAN")]
    aux = [rec("CRUZ", "JUAN", "SANTOS"), rec("CRUZ", "JUAN", "REYES")]
    out, report = link_auxiliary(base, aux, {"middle_name"})
    assert out[0].middle_name is None and report.ambiguous == 1


def test_link_respects_block_and_present_fields():
    base = [rec("CRUZ", "JUAN", "SANTOS", party=None)]
    other_block = [rec("CRUZ", "JUAN", "REYES", party="LP", year=2019)]
    out, report = link_auxiliary(base, other_block, {"middle_name", "party"})
    assert out[0].party is None and report.unmatched == 1
    same_block = [rec("CRUZ", "JUAN", "REYES", party="LP")]
    out, _ = link_auxiliary(base, same_block, {"middle_name", "party"})
    assert out[0].middle_name == "SANTOS" and out[0].party == "LP"


def test_link_below_threshold():
    out, report = link_auxiliary([rec("CRUZ", "JUAN")], [rec("GOMEZ", "PEDRO", "X")], {"middle_name"})
    assert out[0].middle_name is None and report.unmatched == 1


def test_link_rejects_unknown_field():
    with pytest.raises(ValueError):
        link_auxiliary([], [], {"province"})


def test_hopper_definition():
    rows = [
        rec("CRUZ", "JUAN", "S", party="LP", year=2013),
        rec("CRUZ", "JUAN", "S", party="PDPLBN", year=2016),
        rec("REYES", "ANA", "T", party="NP", year=2016),
        rec("DIAZ", "LEO", "U", party=None, year=2013),
        rec("DIAZ", "LEO", "U", party="LP", year=2016),
        rec("LIM", "KIM", "V", party="LP", year=2013),
        rec("LIM", "KIM", "V", party="LP", year=2016),
    ]
    flags = {(r.last_name, r.year): r.hopper for r in assign_hopper(rows, [2013, 2016])}
    assert flags == {("CRUZ", 2013): False, ("CRUZ", 2016): True, ("REYES", 2016): False,
                     ("DIAZ", 2013): False, ("DIAZ", 2016): False, ("LIM", 2013): False, ("LIM", 2016): False}


def test_hopper_skips_non_adjacent_cycle():
    rows = [rec("CRUZ", "JUAN", party="LP", year=2010), rec("CRUZ", "JUAN", party="NP", year=2016)]
    assert [r.hopper for r in assign_hopper(rows, [2010, 2013, 2016])] == [False, False]


def test_hopper_duplicates_excluded(caplog):
    rows = [
        rec("CRUZ", "JUAN", party="LP", year=2013),
        rec("CRUZ", "JUAN", party="LP", year=2016, position=Position.MAYOR),
        rec("CRUZ", "JUAN", party="NP", year=2016),
    ]
    with caplog.at_level(logging.WARNING):
        out = assign_hopper(rows)
    assert not any(r.hopper for r in out)
    assert "duplicate" in caplog.text


def test_record_label_and_key():
    r = ElectionRecord("CRUZ", "JUAN", Position.MAYOR, "SAMAR", 2016, middle_name="SANTOS")
    assert r.label == "JUAN SANTOS CRUZ"
    assert r.person_key == ("JUAN", "SANTOS", "CRUZ", "SAMAR")
