"""Seeded synthetic election panels with planted clans, hops and socio outcomes."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .graph import build_graph
from .indicators import centrality_gini, connected_component_density
from .party import DEFAULT_MAJOR_PARTY
from .records import ELECTION_YEARS, ElectionRecord, Position

DEFAULT_SEATS: dict[str, int] = {
    Position.GOVERNOR.value: 1,
    Position.VICE_GOVERNOR.value: 1,
    Position.HOUSE_REP.value: 2,
    Position.MAYOR.value: 4,
    Position.VICE_MAYOR.value: 4,
    Position.BOARD_MEMBER.value: 6,
    Position.COUNCILOR.value: 12,
}
DEFAULT_PARTIES = ("LP", "NPC", "NP", "NUP", "PDPLBN", "LKS-KAM", "LKS-CMD", "IND")

_SYLLABLES = [c + v for c in "BDGKLMNPRST" for v in "AEIOU"]


def _token(i: int, width: int = 3) -> str:
    parts = []
    for _ in range(width):
        i, r = divmod(i, len(_SYLLABLES))
        parts.append(_SYLLABLES[r])
    return "".join(parts)


@dataclass
class SynthConfig:
    n_provinces: int = 12
    years: Sequence[int] = ELECTION_YEARS
    seats: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SEATS))
    clans_per_province: tuple[int, int] = (2, 6)
    clan_size: tuple[int, int] = (2, 5)
    intermarriage_prob: float = 0.15
    shared_middle_clans: int = 0
    reelect_prob: float = 0.6
    parties: Sequence[str] = DEFAULT_PARTIES
    clan_party_loyalty: float = 0.8
    hop_prob: dict[str, float] = field(default_factory=lambda: {"dynastic": 0.20, "non_dynastic": 0.10})
    bandwagon_prob: float = 0.5
    major_party: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_MAJOR_PARTY))
    hdi_model: dict[str, float] = field(
        default_factory=lambda: {"intercept": 0.80, "CGC": -0.30, "CCD": -0.20, "sigma_alpha": 0.05, "sigma_e": 0.02}
    )
    pov_model: dict[str, float] = field(
        default_factory=lambda: {"intercept": 20.0, "CGC": 15.0, "CCD": 10.0, "sigma_alpha": 5.0, "sigma_e": 2.0}
    )
    seed: int = 0

    def validate(self) -> None:
        probs = {
            "intermarriage_prob": self.intermarriage_prob,
            "reelect_prob": self.reelect_prob,
            "clan_party_loyalty": self.clan_party_loyalty,
            "bandwagon_prob": self.bandwagon_prob,
            **{f"hop_prob[{k}]": v for k, v in self.hop_prob.items()},
        }
        for name, p in probs.items():
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        lo, hi = self.clan_size
        clo, chi = self.clans_per_province
        if not (1 <= lo <= hi and 0 <= clo <= chi):
            raise ValueError("clan size and count ranges must be ordered and positive")
        total = sum(self.seats.values())
        if hi > total or chi * hi > total:
            raise ValueError(f"infeasible config: up to {chi} clans of size {hi} but only {total} seats")
        for y in self.years:
            if y not in self.major_party:
                raise ValueError(f"major party missing for year {y}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["years"] = list(self.years)
        d["parties"] = list(self.parties)
        d["major_party"] = {str(k): v for k, v in self.major_party.items()}
        return d


@dataclass
class _Person:
    first: str
    middle: str
    last: str
    clan: int | None
    party: str


class _Province:
    def __init__(self, idx: int, cfg: SynthConfig):
        self.cfg = cfg
        self.name = f"PROVINCE {_token(idx, 2)}"
        self.region = f"REGION {idx % 5 + 1}"
        self.rng = np.random.default_rng([cfg.seed, idx])
        self.n_tokens = 0
        self.n_first = 0
        n_clans = cfg.clans_per_province[1]
        self.clan_last = [self.new_token() for _ in range(n_clans)]
        self.clan_middle = [self.new_token() for _ in range(n_clans)]
        for c in range(min(cfg.shared_middle_clans, n_clans)):
            self.clan_middle[c] = self.clan_middle[0]
        self.clan_party = [str(self.rng.choice(list(cfg.parties))) for _ in range(n_clans)]
        self.incumbents: list[_Person] = []

    def new_token(self) -> str:
        self.n_tokens += 1
        return _token(self.n_tokens)

    def new_first(self) -> str:
        self.n_first += 1
        return "F" + _token(self.n_first)

    def new_person(self, clan: int | None, active: list[int]) -> tuple[_Person, int | None]:
        cfg, rng = self.cfg, self.rng
        if clan is None:
            return _Person(self.new_first(), self.new_token(), self.new_token(), None,
                           str(rng.choice(list(cfg.parties)))), None
        middle, spouse = self.clan_middle[clan], None
        others = [c for c in active if c != clan]
        if others and rng.random() < cfg.intermarriage_prob:
            spouse = int(rng.choice(others))
            middle = self.clan_last[spouse]
        party = self.clan_party[clan] if rng.random() < cfg.clan_party_loyalty else str(rng.choice(list(cfg.parties)))
        return _Person(self.new_first(), middle, self.clan_last[clan], clan, party), spouse

    def hop(self, person: _Person, group: str, year: int) -> bool:
        cfg, rng = self.cfg, self.rng
        if rng.random() >= cfg.hop_prob[group]:
            return False
        major = cfg.major_party[year]
        if person.party != major and rng.random() < cfg.bandwagon_prob:
            person.party = major
        else:
            person.party = str(rng.choice([p for p in cfg.parties if p != person.party]))
        return True

    def elect(self, year: int) -> tuple[list[ElectionRecord], dict]:
        cfg, rng = self.cfg, self.rng
        seats = [Position(p) for p, k in sorted(cfg.seats.items()) for _ in range(k)]
        n_clans = int(rng.integers(cfg.clans_per_province[0], cfg.clans_per_province[1] + 1))
        active = sorted(rng.choice(cfg.clans_per_province[1], size=n_clans, replace=False).tolist())
        sizes = {c: int(rng.integers(cfg.clan_size[0], cfg.clan_size[1] + 1)) for c in active}

        returning = [p for p in self.incumbents if rng.random() < cfg.reelect_prob]
        winners: list[_Person] = []
        links = []
        hops = []
        for c in active:
            kept = [p for p in returning if p.clan == c][: sizes[c]]
            winners += kept
            for _ in range(sizes[c] - len(kept)):
                person, spouse = self.new_person(c, active)
                winners.append(person)
                if spouse is not None:
                    links.append([c, spouse])
        free = len(seats) - len(winners)
        kept = [p for p in returning if p.clan is None][:free]
        winners += kept
        winners += [self.new_person(None, active)[0] for _ in range(free - len(kept))]

        returning_ids = {id(p) for p in returning}
        for p in winners:
            if id(p) in returning_ids:
                group = "dynastic" if p.clan is not None and sizes.get(p.clan, 0) >= 2 else "non_dynastic"
                if self.hop(p, group, year):
                    hops.append(f"{p.first} {p.middle} {p.last}")

        order = rng.permutation(len(seats))
        records = [
            ElectionRecord(
                last_name=p.last, first_name=p.first, middle_name=p.middle, position=seats[order[i]],
                party=p.party, region=self.region, province=self.name,
                municipality=f"TOWN {i % 4 + 1}", year=year,
            )
            for i, p in enumerate(winners)
        ]
        self.incumbents = winners
        truth = {
            "clans": {str(c): sorted(f"{p.first} {p.middle} {p.last}" for p in winners if p.clan == c) for c in active},
            "intermarriages": sorted(links),
            "hops": sorted(hops),
        }
        return records, truth


def generate(config: SynthConfig) -> tuple[list[ElectionRecord], dict]:
    """Records for every province and year plus a ground-truth dictionary.

    Socio outcomes (already aligned to election years) are linear in the
    province-year centrality Gini and component density, plus a province
    random intercept and noise; they are stored under ``ground_truth["socio"]``.
    """
    config.validate()
    records: list[ElectionRecord] = []
    truth: dict = {"config": config.to_dict(), "provinces": {}, "socio": []}
    years = sorted(config.years)
    for idx in range(config.n_provinces):
        prov = _Province(idx, config)
        srng = np.random.default_rng([config.seed, idx, 1])
        hdi_alpha = float(srng.normal(0, config.hdi_model["sigma_alpha"]))
        pov_alpha = float(srng.normal(0, config.pov_model["sigma_alpha"]))
        ptruth: dict = {"hdi_intercept": hdi_alpha, "pov_intercept": pov_alpha, "years": {}}
        for year in years:
            recs, ytruth = prov.elect(year)
            records += recs
            graph = build_graph(recs)
            cgc = centrality_gini(graph)
            cgc = 0.0 if cgc is None else cgc
            ccd = connected_component_density(graph)
            hm, pm = config.hdi_model, config.pov_model
            hdi = hm["intercept"] + hm["CGC"] * cgc + hm["CCD"] * ccd + hdi_alpha + srng.normal(0, hm["sigma_e"])
            pov = pm["intercept"] + pm["CGC"] * cgc + pm["CCD"] * ccd + pov_alpha + srng.normal(0, pm["sigma_e"])
            truth["socio"].append({"province": prov.name, "year": year, "POV": float(pov), "HDI": float(hdi)})
            ytruth.update({"cgc": cgc, "ccd": ccd})
            ptruth["years"][str(year)] = ytruth
        truth["provinces"][prov.name] = ptruth
    return records, truth


def socio_frame(ground_truth: dict) -> pd.DataFrame:
    return pd.DataFrame(ground_truth["socio"], columns=["province", "year", "POV", "HDI"])
