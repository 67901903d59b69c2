"""Dynastic flags and party-loyalty measures: hopping, dynasty-party overlap, bandwagoning."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Mapping, Sequence

from .records import ElectionRecord

DEFAULT_MAJOR_PARTY: dict[int, str] = {
    2004: "LKS-CMD",
    2007: "LKS-CMD",
    2010: "LKS-KAM",
    2013: "LP",
    2016: "LP",
    2019: "PDPLBN",
    2022: "PDPLBN",
}

GROUPS = ("dynastic", "non_dynastic")


def assign_dynastic(records: Sequence[ElectionRecord]) -> list[ElectionRecord]:
    """A record is dynastic when its (province, year, community) holds two or more records."""
    for r in records:
        if r.community_id is None:
            raise ValueError(f"record {r.label} ({r.province} {r.year}) has no community assigned")
    sizes = Counter((r.province, r.year, r.community_id) for r in records)
    return [replace(r, dynastic=sizes[(r.province, r.year, r.community_id)] >= 2) for r in records]


def _group(r: ElectionRecord) -> str:
    if r.dynastic is None:
        raise ValueError(f"record {r.label} ({r.province} {r.year}) has no dynastic flag")
    return "dynastic" if r.dynastic else "non_dynastic"


@dataclass(frozen=True)
class HoppingCell:
    province: str
    year: int
    group: str
    hoppers: int
    eligible: int

    @property
    def rate(self) -> float | None:
        return self.hoppers / self.eligible if self.eligible else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rate"] = self.rate
        return d


def hopping_rates(records: Iterable[ElectionRecord], first_year: int | None = None) -> list[HoppingCell]:
    """Hopping counts per (province, year, group), dynastic cell first in each pair.

    Years up to and including ``first_year`` (default: earliest year in the
    data) are skipped since nobody can hop in the first cycle. Records with
    no hopper flag are not eligible.
    """
    records = list(records)
    if not records:
        return []
    first = min(r.year for r in records) if first_year is None else first_year
    tallies: dict[tuple[str, int], dict[str, list[int]]] = defaultdict(lambda: {g: [0, 0] for g in GROUPS})
    for r in records:
        if r.year <= first:
            continue
        t = tallies[(r.province, r.year)]
        if r.hopper is None:
            continue
        g = t[_group(r)]
        g[1] += 1
        g[0] += int(r.hopper)
    cells = []
    for (province, year) in sorted(tallies):
        for g in GROUPS:
            hop, elig = tallies[(province, year)][g]
            cells.append(HoppingCell(province, year, g, hop, elig))
    return cells


def paired_hopping_rates(cells: Sequence[HoppingCell]) -> list[tuple[str, int, float, float]]:
    """(province, year, dynastic rate, non-dynastic rate) where both rates are defined."""
    by_key: dict[tuple[str, int], dict[str, HoppingCell]] = defaultdict(dict)
    for c in cells:
        by_key[(c.province, c.year)][c.group] = c
    out = []
    for key in sorted(by_key):
        pair = by_key[key]
        d, nd = pair.get("dynastic"), pair.get("non_dynastic")
        if d is not None and nd is not None and d.rate is not None and nd.rate is not None:
            out.append((key[0], key[1], d.rate, nd.rate))
    return out


def community_overlap(parties: Sequence[str | None]) -> float | None:
    """Share of the modal party among members with a known party."""
    known = [p for p in parties if p is not None]
    if not known:
        return None
    return max(Counter(known).values()) / len(known)


def dynasty_party_overlap(records: Iterable[ElectionRecord], size_weighted: bool = False) -> dict[tuple[str, int], float | None]:
    """Mean modal-party share over communities with two or more members, per province-year.

    Communities whose members all lack a party are skipped; a province-year
    with no such community maps to None.
    """
    comms: dict[tuple[str, int], dict[int, list[str | None]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        if r.community_id is None:
            raise ValueError(f"record {r.label} ({r.province} {r.year}) has no community assigned")
        comms[(r.province, r.year)][r.community_id].append(r.party)
    out: dict[tuple[str, int], float | None] = {}
    for key in sorted(comms):
        num = den = 0.0
        for members in comms[key].values():
            if len(members) < 2:
                continue
            share = community_overlap(members)
            if share is None:
                continue
            w = len(members) if size_weighted else 1
            num += w * share
            den += w
        out[key] = num / den if den else None
    return out


def bandwagon_rates(
    records: Iterable[ElectionRecord], major_party: Mapping[int, str] = DEFAULT_MAJOR_PARTY
) -> dict[tuple[int, str], dict]:
    """National bandwagon rate per (year, group).

    Numerator: hoppers whose current party is that year's major party.
    Denominator: every winner in the group that year.
    """
    tally: dict[tuple[int, str], list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        if r.year not in major_party:
            raise ValueError(f"year {r.year} missing from major-party map")
        t = tally[(r.year, _group(r))]
        t[1] += 1
        if r.hopper and r.party == major_party[r.year]:
            t[0] += 1
    out = {}
    for year in sorted({y for y, _ in tally}):
        for g in GROUPS:
            num, den = tally.get((year, g), (0, 0))
            out[(year, g)] = {"bandwagoners": num, "winners": den, "rate": num / den if den else None}
    return out


def party_membership_table(records: Iterable[ElectionRecord], parties: Sequence[str]) -> list[dict]:
    """Winner counts per (party, year, group); parties outside the list pool into OTHER."""
    keep = list(dict.fromkeys(parties))
    counts: Counter = Counter()
    years = set()
    for r in records:
        years.add(r.year)
        p = r.party if r.party in keep else "OTHER"
        counts[(p, r.year, _group(r))] += 1
    rows = []
    for p in keep + ["OTHER"]:
        for y in sorted(years):
            for g in GROUPS:
                rows.append({"party": p, "year": y, "group": g, "count": counts[(p, y, g)]})
    return rows


def dynastic_share(records: Iterable[ElectionRecord]) -> dict[int, float]:
    """Fraction of winners flagged dynastic, per year."""
    tally: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        t = tally[r.year]
        t[0] += int(_group(r) == "dynastic")
        t[1] += 1
    return {y: d / n for y, (d, n) in sorted(tally.items())}
