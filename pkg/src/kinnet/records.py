"""Election records: parsing, name normalization, auxiliary linkage, party hopping."""

from __future__ import annotations

import csv
import enum
import io
import logging
import unicodedata
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from rapidfuzz.distance import JaroWinkler

log = logging.getLogger(__name__)

ELECTION_YEARS: tuple[int, ...] = (2004, 2007, 2010, 2013, 2016, 2019, 2022)


class Position(str, enum.Enum):
    GOVERNOR = "Governor"
    VICE_GOVERNOR = "ViceGovernor"
    HOUSE_REP = "HouseRep"
    MAYOR = "Mayor"
    VICE_MAYOR = "ViceMayor"
    BOARD_MEMBER = "BoardMember"
    COUNCILOR = "Councilor"


# Keys are already passed through normalize_name.
POSITION_ALIASES: dict[str, Position] = {
    "GOVERNOR": Position.GOVERNOR,
    "PROVINCIAL GOVERNOR": Position.GOVERNOR,
    "VICE GOVERNOR": Position.VICE_GOVERNOR,
    "VICE-GOVERNOR": Position.VICE_GOVERNOR,
    "VICEGOVERNOR": Position.VICE_GOVERNOR,
    "PROVINCIAL VICE GOVERNOR": Position.VICE_GOVERNOR,
    "PROVINCIAL VICE-GOVERNOR": Position.VICE_GOVERNOR,
    "MEMBER, HOUSE OF REPRESENTATIVES": Position.HOUSE_REP,
    "MEMBER HOUSE OF REPRESENTATIVES": Position.HOUSE_REP,
    "HOUSE OF REPRESENTATIVES": Position.HOUSE_REP,
    "HOUSEREP": Position.HOUSE_REP,
    "HOUSE REP": Position.HOUSE_REP,
    "REPRESENTATIVE": Position.HOUSE_REP,
    "CONGRESSMAN": Position.HOUSE_REP,
    "CONGRESSWOMAN": Position.HOUSE_REP,
    "DISTRICT REPRESENTATIVE": Position.HOUSE_REP,
    "CONGRESSIONAL DISTRICT REPRESENTATIVE": Position.HOUSE_REP,
    "MAYOR": Position.MAYOR,
    "MUNICIPAL MAYOR": Position.MAYOR,
    "CITY MAYOR": Position.MAYOR,
    "VICE MAYOR": Position.VICE_MAYOR,
    "VICE-MAYOR": Position.VICE_MAYOR,
    "VICEMAYOR": Position.VICE_MAYOR,
    "MUNICIPAL VICE MAYOR": Position.VICE_MAYOR,
    "CITY VICE MAYOR": Position.VICE_MAYOR,
    "BOARD MEMBER": Position.BOARD_MEMBER,
    "BOARDMEMBER": Position.BOARD_MEMBER,
    "PROVINCIAL BOARD MEMBER": Position.BOARD_MEMBER,
    "SANGGUNIANG PANLALAWIGAN MEMBER": Position.BOARD_MEMBER,
    "MEMBER, SANGGUNIANG PANLALAWIGAN": Position.BOARD_MEMBER,
    "SP MEMBER": Position.BOARD_MEMBER,
    "COUNCILOR": Position.COUNCILOR,
    "COUNCILLOR": Position.COUNCILOR,
    "CITY COUNCILOR": Position.COUNCILOR,
    "MUNICIPAL COUNCILOR": Position.COUNCILOR,
    "MEMBER, SANGGUNIANG PANGLUNGSOD": Position.COUNCILOR,
    "MEMBER, SANGGUNIANG BAYAN": Position.COUNCILOR,
    "SANGGUNIANG BAYAN MEMBER": Position.COUNCILOR,
}

INDEPENDENT_ALIASES = {"IND", "INDEPENDENT", "INDEP"}


def normalize_name(raw: str | None) -> str:
    """Uppercase, fold Ñ to N, drop periods, collapse whitespace. Hyphens survive."""
    if not raw:
        return ""
    s = unicodedata.normalize("NFC", str(raw)).upper()
    s = s.replace("Ñ", "N").replace(".", "")
    return " ".join(s.split())


def normalize_party(raw: str | None) -> str | None:
    s = normalize_name(raw)
    if not s:
        return None
    return "IND" if s in INDEPENDENT_ALIASES else s


def parse_position(raw: str) -> Position | None:
    key = normalize_name(raw)
    if key in POSITION_ALIASES:
        return POSITION_ALIASES[key]
    for p in Position:
        if key == p.value.upper() or key == p.name.replace("_", " "):
            return p
    return None


@dataclass(frozen=True)
class ElectionRecord:
    last_name: str
    first_name: str
    position: Position
    province: str
    year: int
    middle_name: str | None = None
    party: str | None = None
    region: str = ""
    municipality: str = ""
    community_id: int | None = None
    dynastic: bool | None = None
    hopper: bool | None = None

    @property
    def person_key(self) -> PersonKey:
        return PersonKey(self.first_name, self.middle_name, self.last_name, self.province)

    @property
    def label(self) -> str:
        parts = [self.first_name, self.middle_name or "", self.last_name]
        return " ".join(p for p in parts if p)


class PersonKey(NamedTuple):
    first_name: str
    middle_name: str | None
    last_name: str
    province: str


# Canonical CSV layout; also the default schema (field -> header).
CANONICAL_COLUMNS: tuple[str, ...] = (
    "last_name",
    "first_name",
    "middle_name",
    "position",
    "party",
    "region",
    "province",
    "municipality",
    "year",
    "community_id",
    "dynastic",
    "hopper",
)
REQUIRED_FIELDS: tuple[str, ...] = ("last_name", "first_name", "position", "province", "year")
DEFAULT_SCHEMA: dict[str, str] = {c: c for c in CANONICAL_COLUMNS}


class SchemaError(ValueError):
    pass


@dataclass
class RowError:
    line: int
    message: str
    row: dict[str, str] = field(default_factory=dict)


@dataclass
class ParseResult:
    records: list[ElectionRecord]
    errors: list[RowError]

    def error_report(self) -> list[dict]:
        return [asdict(e) for e in self.errors]


def _parse_flag(raw: str) -> bool | None:
    s = raw.strip().lower()
    if s == "":
        return None
    if s in {"1", "true", "t", "yes", "y"}:
        return True
    if s in {"0", "false", "f", "no", "n"}:
        return False
    raise ValueError(f"bad boolean {raw!r}")


def _data_lines(handle: Iterable[str]) -> Iterable[str]:
    # metadata block written by the pipeline: leading '#' lines
    started = False
    for line in handle:
        if not started and line.startswith("#"):
            continue
        started = True
        yield line


def parse_records(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    *,
    delimiter: str = ",",
    years: Iterable[int] = ELECTION_YEARS,
) -> ParseResult:
    """Read a delimited file into normalized records.

    ``schema`` maps record field names to header names in the file; fields
    missing from the mapping fall back to the canonical column name. Bad rows
    are collected in ``ParseResult.errors`` and never abort the file.
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)
    year_set = set(years)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(_data_lines(fh), delimiter=delimiter)
        header = reader.fieldnames or []
        for name in REQUIRED_FIELDS:
            if mapping[name] not in header:
                raise SchemaError(f"missing required column {mapping[name]!r} (field {name})")
        present = {f: h for f, h in mapping.items() if h in header}

        records: list[ElectionRecord] = []
        errors: list[RowError] = []
        for lineno, row in enumerate(reader, start=2):
            get = lambda f: (row.get(present[f]) or "") if f in present else ""  # noqa: E731
            try:
                position = parse_position(get("position"))
                if position is None:
                    raise ValueError(f"unmappable position {get('position')!r}")
                try:
                    year = int(get("year").strip())
                except ValueError:
                    raise ValueError(f"malformed year {get('year')!r}") from None
                if year not in year_set:
                    raise ValueError(f"year {year} not in configured election years")
                last, first = normalize_name(get("last_name")), normalize_name(get("first_name"))
                if not last:
                    raise ValueError("empty last name")
                cid = get("community_id").strip()
                records.append(
                    ElectionRecord(
                        last_name=last,
                        first_name=first,
                        middle_name=normalize_name(get("middle_name")) or None,
                        position=position,
                        party=normalize_party(get("party")),
                        region=normalize_name(get("region")),
                        province=normalize_name(get("province")),
                        municipality=normalize_name(get("municipality")),
                        year=year,
                        community_id=int(cid) if cid else None,
                        dynastic=_parse_flag(get("dynastic")),
                        hopper=_parse_flag(get("hopper")),
                    )
                )
            except ValueError as exc:
                errors.append(RowError(lineno, str(exc), dict(row)))
    if errors:
        log.warning("%s: %d rejected rows", path, len(errors))
    return ParseResult(records, errors)


def _fmt_flag(v: bool | None) -> str:
    return "" if v is None else ("1" if v else "0")


def record_row(r: ElectionRecord) -> list[str]:
    return [
        r.last_name,
        r.first_name,
        r.middle_name or "",
        r.position.value,
        r.party or "",
        r.region,
        r.province,
        r.municipality,
        str(r.year),
        "" if r.community_id is None else str(r.community_id),
        _fmt_flag(r.dynastic),
        _fmt_flag(r.hopper),
    ]


def serialize_records(records: Iterable[ElectionRecord], header_lines: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CANONICAL_COLUMNS)
    for r in records:
        w.writerow(record_row(r))
    return buf.getvalue()


def write_records(records: Iterable[ElectionRecord], path: str | Path, header_lines: Iterable[str] = ()) -> None:
    Path(path).write_text(serialize_records(records, header_lines), encoding="utf-8")


# --- auxiliary linkage -------------------------------------------------------

LINKABLE_FIELDS = frozenset({"middle_name", "party"})


def name_similarity(a: ElectionRecord, b: ElectionRecord) -> float:
    """Jaro-Winkler similarity of "LAST FIRST" strings, in [0, 1]."""
    return JaroWinkler.normalized_similarity(f"{a.last_name} {a.first_name}", f"{b.last_name} {b.first_name}")


@dataclass
class LinkageReport:
    matched: int = 0
    ambiguous: int = 0
    unmatched: int = 0
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"matched": self.matched, "ambiguous": self.ambiguous, "unmatched": self.unmatched, "rows": self.rows}


def link_auxiliary(
    base: list[ElectionRecord],
    aux: list[ElectionRecord],
    fields: Iterable[str],
    threshold: float = 0.90,
) -> tuple[list[ElectionRecord], LinkageReport]:
    """Fill absent ``fields`` of base records from a unique similar aux record.

    Candidates come from the same (province, year, position) block and must
    carry at least one of the fields the base record is missing. Two or more
    candidates at or above ``threshold`` is ambiguous and nothing is copied.
    Present fields are never overwritten.
    """
    wanted = set(fields)
    if not wanted <= LINKABLE_FIELDS:
        raise ValueError(f"linkable fields are {sorted(LINKABLE_FIELDS)}, got {sorted(wanted)}")
    blocks: dict[tuple, list[ElectionRecord]] = defaultdict(list)
    for r in aux:
        blocks[(r.province, r.year, r.position)].append(r)

    report = LinkageReport()
    out: list[ElectionRecord] = []
    for idx, rec in enumerate(base):
        missing = [f for f in sorted(wanted) if getattr(rec, f) is None]
        if not missing:
            out.append(rec)
            continue
        scored = []
        for cand in blocks.get((rec.province, rec.year, rec.position), ()):
            if all(getattr(cand, f) is None for f in missing):
                continue
            sim = name_similarity(rec, cand)
            if sim >= threshold:
                scored.append((sim, cand))
        diag = {"index": idx, "label": rec.label, "province": rec.province, "year": rec.year,
                "candidates": len(scored), "best_similarity": round(max((s for s, _ in scored), default=0.0), 6)}
        if len(scored) == 1:
            cand = scored[0][1]
            updates = {f: getattr(cand, f) for f in missing if getattr(cand, f) is not None}
            out.append(replace(rec, **updates))
            report.matched += 1
            diag["status"] = "matched"
            diag["filled"] = sorted(updates)
        elif scored:
            log.info("ambiguous linkage for %s (%s %d): %d candidates", rec.label, rec.province, rec.year, len(scored))
            out.append(rec)
            report.ambiguous += 1
            diag["status"] = "ambiguous"
        else:
            out.append(rec)
            report.unmatched += 1
            diag["status"] = "unmatched"
        report.rows.append(diag)
    return out, report


# --- party hopping -----------------------------------------------------------

def assign_hopper(records: list[ElectionRecord], years: Iterable[int] | None = None) -> list[ElectionRecord]:
    """Flag incumbents whose known party differs from their previous-cycle party.

    The previous cycle is the preceding entry of ``years`` (defaults to the
    distinct years in the data). A PersonKey appearing twice in one
    (province, year) is excluded from matching on both sides.
    """
    cycle = sorted(set(years) if years is not None else {r.year for r in records})
    prev_year = {y: cycle[i - 1] for i, y in enumerate(cycle) if i > 0}

    counts = Counter((r.person_key, r.year) for r in records)
    dupes = {k for k, c in counts.items() if c > 1}
    for key, year in sorted(dupes, key=lambda k: (k[1], k[0].province, k[0].last_name, k[0].first_name)):
        log.warning("duplicate person %s in %s %d excluded from hopper matching", key, key.province, year)

    party_at = {(r.person_key, r.year): r.party for r in records if (r.person_key, r.year) not in dupes}
    out = []
    for r in records:
        hop = False
        py = prev_year.get(r.year)
        if py is not None and (r.person_key, r.year) not in dupes:
            prior = (r.person_key, py)
            if prior in party_at:
                before = party_at[prior]
                hop = before is not None and r.party is not None and before != r.party
        out.append(replace(r, hopper=hop))
    return out


def group_by_province_year(records: Iterable[ElectionRecord]) -> dict[tuple[str, int], list[ElectionRecord]]:
    groups: dict[tuple[str, int], list[ElectionRecord]] = defaultdict(list)
    for r in records:
        groups[(r.province, r.year)].append(r)
    return dict(sorted(groups.items()))
