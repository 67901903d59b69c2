"""Pipeline stages. Each reads earlier stage files under the output directory and writes its own."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd

from . import indicators as ind
from .community import leiden, partition_from_labels
from .config import header_lines, major_party_map, metadata
from .graph import build_graph, graphml_string
from .party import (
    assign_dynastic,
    bandwagon_rates,
    dynastic_share,
    dynasty_party_overlap,
    hopping_rates,
    paired_hopping_rates,
    party_membership_table,
)
from .records import (
    ElectionRecord,
    assign_hopper,
    group_by_province_year,
    link_auxiliary,
    parse_records,
    serialize_records,
)
from .regress import build_panel, qq_residual_export, run_direction1, run_direction2, vif, DYNASTIC, align_socio
from .stats import DegenerateSampleError, linear_trend, shapiro_wilk, wilcoxon_signed_rank
from .synth import SynthConfig, generate, socio_frame

log = logging.getLogger(__name__)

WORKERS_ENV = "KINNET_WORKERS"


class MissingInputError(RuntimeError):
    pass


class Stage:
    """File helpers bound to one output directory and config."""

    def __init__(self, cfg: dict, out: str | Path | None = None):
        self.cfg = cfg
        self.out = Path(out or cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, *parts: str) -> Path:
        return self.out.joinpath(*parts)

    def require(self, *parts: str, hint: str) -> Path:
        p = self.path(*parts)
        if not p.exists():
            raise MissingInputError(f"missing prerequisite {p} (run `kinnet {hint}` first)")
        return p

    def workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        return max(1, int(env)) if env else max(1, int(self.cfg.get("workers", 1)))

    def map(self, fn: Callable, items: Sequence) -> list:
        # results come back in input order regardless of completion order
        n = self.workers()
        if n == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ProcessPoolExecutor(max_workers=n) as ex:
            return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * n))))

    def _write(self, rel: Path, text: str) -> Path:
        path = self.path(*rel.parts) if isinstance(rel, Path) else self.path(rel)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path

    def write_json(self, rel: str, payload: dict) -> Path:
        body = {"meta": metadata(self.cfg), **payload}
        return self._write(Path(rel), json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")

    def write_csv(self, rel: str, rows: Iterable[dict], columns: Sequence[str]) -> Path:
        buf = io.StringIO()
        for line in header_lines(self.cfg):
            buf.write(f"# {line}\n")
        w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in columns})
        return self._write(Path(rel), buf.getvalue())

    def write_records(self, rel: str, records: Sequence[ElectionRecord]) -> Path:
        return self._write(Path(rel), serialize_records(records, header_lines(self.cfg)))

    def read_records(self, rel: str, hint: str) -> list[ElectionRecord]:
        path = self.require(rel, hint=hint)
        res = parse_records(path, years=self.cfg["years"])
        if res.errors:
            raise ValueError(f"{path}: {len(res.errors)} invalid rows in a pipeline file")
        return res.records

    def read_json(self, rel: str, hint: str) -> dict:
        return json.loads(self.require(rel, hint=hint).read_text(encoding="utf-8"))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def slug(province: str, year: int) -> str:
    return f"{re.sub(r'[^A-Z0-9]+', '_', province.upper()).strip('_')}_{year}"


# --- simulate ----------------------------------------------------------------

def synth_config(cfg: dict, **overrides) -> SynthConfig:
    params = {**cfg.get("simulate", {}), **overrides}
    params.setdefault("years", cfg["years"])
    params.setdefault("seed", cfg["leiden"]["seed"])
    if "major_party" in params:
        params["major_party"] = {int(k): v for k, v in params["major_party"].items()}
    else:
        params["major_party"] = major_party_map(cfg)
    for key in ("clans_per_province", "clan_size"):
        if key in params:
            params[key] = tuple(params[key])
    return SynthConfig(**params)


def cmd_simulate(st: Stage, **overrides) -> dict:
    sc = synth_config(st.cfg, **overrides)
    records, truth = generate(sc)
    st.write_records("synthetic/records.csv", records)
    socio = socio_frame(truth)
    st.write_csv("synthetic/socio.csv", socio.to_dict("records"), ["province", "year", "POV", "HDI"])
    st.write_json("synthetic/ground_truth.json", truth)
    return {"records": len(records), "provinces": sc.n_provinces}


# --- ingest ------------------------------------------------------------------

def cmd_ingest(st: Stage) -> dict:
    inputs = st.cfg["inputs"]
    if not inputs["records"]:
        raise MissingInputError("no input record files configured (inputs.records)")
    records: list[ElectionRecord] = []
    errors = []
    for p in inputs["records"]:
        if not Path(p).exists():
            raise MissingInputError(f"missing input file {p}")
        res = parse_records(p, inputs["schema"], delimiter=inputs["delimiter"], years=st.cfg["years"])
        records += res.records
        errors += [{"file": str(p), **e} for e in res.error_report()]
    linkage = None
    if inputs["aux"]:
        aux: list[ElectionRecord] = []
        for p in inputs["aux"]:
            res = parse_records(p, inputs["schema"], delimiter=inputs["delimiter"], years=st.cfg["years"])
            aux += res.records
            errors += [{"file": str(p), **e} for e in res.error_report()]
        records, report = link_auxiliary(records, aux, st.cfg["linkage"]["fields"], st.cfg["linkage"]["threshold"])
        linkage = report.to_dict()
    records = assign_hopper(records, st.cfg["years"])
    st.write_records("records.csv", records)
    st.write_json("ingest_report.json", {"n_records": len(records), "rejected_rows": errors, "linkage": linkage})
    return {"records": len(records), "rejected": len(errors)}


# --- graph / detect ----------------------------------------------------------

def _graph_task(args: tuple) -> tuple:
    group, meta = args
    g = build_graph(group)
    summary = {"province": g.province, "year": g.year, "n_nodes": g.n_nodes, "n_edges": len(g.edges),
               "total_edge_weight": sum(e.weight for e in g.edges)}
    return slug(g.province, g.year), graphml_string(g, meta=meta), summary


def cmd_graph(st: Stage) -> dict:
    records = st.read_records("records.csv", hint="ingest")
    meta = " ".join(header_lines(st.cfg))
    groups = list(group_by_province_year(records).values())
    summaries = []
    for name, text, summary in st.map(_graph_task, [(g, meta) for g in groups]):
        st._write(Path("graphs") / f"{name}.graphml", text)
        summaries.append(summary)
    st.write_csv("graphs/summary.csv", summaries, ["province", "year", "n_nodes", "n_edges", "total_edge_weight"])
    return {"graphs": len(summaries)}


def _detect_task(args: tuple) -> dict:
    group, lcfg, meta = args
    province, year = group[0].province, group[0].year
    try:
        g = build_graph(group)
        part = leiden(g, gamma=lcfg["gamma"], seed=lcfg["seed"], weighted=lcfg["weighted"])
    except Exception as exc:  # noqa: BLE001 - reported per province-year
        return {"province": province, "year": year, "error": f"{type(exc).__name__}: {exc}"}
    labelled = [None] * len(group)
    for node, src in enumerate(g.source_index):
        labelled[src] = part.assignment[node]
    return {
        "province": province, "year": year, "communities": labelled,
        "modularity": part.modularity, "n_communities": part.num_communities,
        "graphml": graphml_string(g, part.assignment, meta),
        "nodes": [{"province": province, "year": year, "node": i, "label": r.label,
                   "position": r.position.value, "community_id": part.assignment[i]}
                  for i, r in enumerate(g.records)],
    }


def cmd_detect(st: Stage) -> dict:
    records = st.read_records("records.csv", hint="ingest")
    meta = " ".join(header_lines(st.cfg))
    groups = list(group_by_province_year(records).values())
    results = st.map(_detect_task, [(g, st.cfg["leiden"], meta) for g in groups])
    out_records: list[ElectionRecord] = []
    nodes, summary, failures = [], [], []
    for group, res in zip(groups, results):
        if "error" in res:
            failures.append({k: res[k] for k in ("province", "year", "error")})
            log.error("detect failed for %s %s: %s", res["province"], res["year"], res["error"])
            continue
        out_records += [replace(r, community_id=c) for r, c in zip(group, res["communities"])]
        nodes += res["nodes"]
        st._write(Path("networks") / f"{slug(res['province'], res['year'])}.graphml", res["graphml"])
        summary.append({k: res[k] for k in ("province", "year", "modularity", "n_communities")})
    out_records = assign_dynastic(out_records)
    st.write_records("dataset.csv", out_records)
    st.write_csv("partitions.csv", nodes, ["province", "year", "node", "label", "position", "community_id"])
    st.write_json("detect_summary.json", {"leiden": st.cfg["leiden"], "partitions": summary, "failures": failures})
    return {"partitions": len(summary), "failures": len(failures)}


# --- metrics -----------------------------------------------------------------

def _metrics_task(args: tuple) -> dict:
    group, normalized = args
    try:
        g, part = ind.graph_partition(group)
        return ind.indicator_row(g, part, normalized).to_dict()
    except Exception as exc:  # noqa: BLE001 - reported per province-year
        return {"province": group[0].province, "year": group[0].year, "error": f"{type(exc).__name__}: {exc}"}


INDICATOR_COLUMNS = ["province", "year", "hhi", "cgc", "ccd", "acc", "n_nodes", "n_edges", "n_communities", "n_components"]


def cmd_metrics(st: Stage) -> dict:
    st.require("partitions.csv", hint="detect")
    records = st.read_records("dataset.csv", hint="detect")
    groups = list(group_by_province_year(records).values())
    results = st.map(_metrics_task, [(g, st.cfg["indicators"]["normalized_acc"]) for g in groups])
    rows = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]
    st.write_csv("indicators.csv", rows, INDICATOR_COLUMNS)
    typed = [ind.IndicatorRow(**r) for r in rows]
    for metric in ind.METRICS:
        st.write_csv(f"ranks/{metric}.csv", ind.rank_table(typed, metric), ["year", "rank", "province", metric])
    st.write_json("metrics_summary.json", {"summary": indicator_summary(typed), "failures": failures})
    return {"rows": len(rows), "failures": len(failures)}


def indicator_summary(rows: Sequence[ind.IndicatorRow]) -> dict:
    """Per-year mean and sample SD of each metric."""
    out: dict = {}
    for metric in ind.METRICS:
        per_year = {}
        for year in sorted({r.year for r in rows}):
            vals = [getattr(r, metric) for r in rows if r.year == year and getattr(r, metric) is not None]
            arr = np.asarray(vals, dtype=float)
            per_year[str(year)] = {
                "n": len(vals),
                "mean": float(arr.mean()) if len(vals) else None,
                "sd": float(arr.std(ddof=1)) if len(vals) > 1 else None,
            }
        out[metric] = per_year
    return out


def read_indicators(st: Stage) -> list[ind.IndicatorRow]:
    path = st.require("indicators.csv", hint="metrics")
    df = pd.read_csv(path, comment="#", dtype={"province": str})
    rows = []
    for rec in df.to_dict("records"):
        cgc = rec["cgc"]
        rows.append(ind.IndicatorRow(
            province=rec["province"], year=int(rec["year"]), hhi=float(rec["hhi"]),
            cgc=None if pd.isna(cgc) else float(cgc), ccd=float(rec["ccd"]), acc=float(rec["acc"]),
            n_nodes=int(rec["n_nodes"]), n_edges=int(rec["n_edges"]),
            n_communities=int(rec["n_communities"]), n_components=int(rec["n_components"]),
        ))
    return rows


# --- party -------------------------------------------------------------------

def cmd_party(st: Stage) -> dict:
    records = st.read_records("dataset.csv", hint="detect")
    pcfg = st.cfg["party"]
    first_year = min(st.cfg["years"])
    cells = hopping_rates(records, first_year=first_year)
    st.write_csv("party/hopping_rates.csv", [c.to_dict() for c in cells],
                 ["province", "year", "group", "hoppers", "eligible", "rate"])
    overlap = dynasty_party_overlap(records, pcfg["overlap_size_weighted"])
    st.write_csv("party/overlap.csv", [{"province": p, "year": y, "overlap": v} for (p, y), v in overlap.items()],
                 ["province", "year", "overlap"])
    bw = bandwagon_rates(records, major_party_map(st.cfg))
    st.write_csv("party/bandwagon.csv", [{"year": y, "group": g, **v} for (y, g), v in bw.items()],
                 ["year", "group", "bandwagoners", "winners", "rate"])
    st.write_csv("party/membership.csv", party_membership_table(records, pcfg["parties"]),
                 ["party", "year", "group", "count"])

    pairs = paired_hopping_rates(cells)
    diffs = [d - nd for _, _, d, nd in pairs]
    tests: dict = {"n_pairs": len(pairs)}
    try:
        tests["wilcoxon"] = wilcoxon_signed_rank(
            diffs, alternative=pcfg["wilcoxon_alternative"],
            exact_cutoff=st.cfg["regression"]["exact_wilcoxon_cutoff"],
        ).to_dict()
    except DegenerateSampleError as exc:
        tests["wilcoxon"] = {"error": str(exc)}
    try:
        tests["shapiro_wilk_differences"] = shapiro_wilk(diffs).to_dict()
    except ValueError as exc:
        tests["shapiro_wilk_differences"] = {"error": str(exc)}
    share = dynastic_share(records)
    st.write_json("party/summary.json", {"dynastic_share": share, "tests": tests,
                                         "major_party": st.cfg["major_party"]})
    return {"cells": len(cells), "pairs": len(pairs)}


# --- trend -------------------------------------------------------------------

def cmd_trend(st: Stage) -> dict:
    rows = read_indicators(st)
    out = {}
    for metric in ind.METRICS:
        obs = [(r.year, getattr(r, metric)) for r in rows if getattr(r, metric) is not None]
        try:
            out[metric] = linear_trend(obs, yearly_means=st.cfg["trend"]["yearly_means"]).to_dict()
        except ValueError as exc:
            out[metric] = {"error": str(exc)}
    st.write_json("trend.json", {"pooled": not st.cfg["trend"]["yearly_means"], "trends": out})
    return {"metrics": len(out)}


# --- regress -----------------------------------------------------------------

def _socio_input(st: Stage) -> pd.DataFrame:
    src = st.cfg["inputs"]["socio"]
    if not src:
        raise MissingInputError("no socio table configured (inputs.socio)")
    if not Path(src).exists():
        raise MissingInputError(f"missing socio table {src}")
    socio = pd.read_csv(src, comment="#", dtype={"province": str})
    lag = st.cfg["inputs"]["socio_lag"]
    return align_socio(socio, lag) if lag else socio


def cmd_regress(st: Stage) -> dict:
    rows = read_indicators(st)
    socio = _socio_input(st)
    rcfg = st.cfg["regression"]
    panel = build_panel(rows, socio, log_base=rcfg["log_base"])
    cols = list(panel.columns)
    st.write_csv("regression/panel.csv", panel.to_dict("records"), cols)
    vifs = vif(panel, list(DYNASTIC))
    d1 = run_direction1(panel, reml=rcfg["reml"])
    d2 = run_direction2(panel, reml=rcfg["reml"])
    for name, res in (("direction1", d1), ("direction2", d2)):
        st.write_json(f"regression/{name}.json", res.to_dict())
        st.write_csv(f"regression/comparison_{name}.csv", res.comparison_table(),
                     ["regression", "model", "n_obs", "r2", "r2_marginal", "r2_conditional",
                      "log_likelihood", "aic", "degenerate", "error"])
        for (label, model), fit in res.fits.items():
            qq = [{"theoretical": t, "empirical": e} for t, e in qq_residual_export(fit)]
            st.write_csv(f"regression/qq/{name}_{re.sub(r'[^A-Za-z0-9]+', '_', label)}_{model}.csv",
                         qq, ["theoretical", "empirical"])
    st.write_json("regression/vif.json", {"predictors": vifs})
    return {"panel_rows": len(panel), "fits": len(d1.fits) + len(d2.fits)}


# --- report ------------------------------------------------------------------

def cmd_report(st: Stage) -> dict:
    def load(rel: str, hint: str) -> dict:
        d = st.read_json(rel, hint)
        d.pop("meta", None)
        return d

    metrics = load("metrics_summary.json", "metrics")
    detect = load("detect_summary.json", "detect")
    party = load("party/summary.json", "party")
    trend = load("trend.json", "trend")
    report = {
        "indicator_summary": metrics["summary"],
        "trend": trend["trends"],
        "wilcoxon": party["tests"].get("wilcoxon"),
        "shapiro_wilk": party["tests"].get("shapiro_wilk_differences"),
        "dynastic_share": party["dynastic_share"],
        "failures": {"detect": detect["failures"], "metrics": metrics["failures"]},
    }
    if st.path("regression", "direction1.json").exists():
        for name in ("direction1", "direction2"):
            report[f"regression_{name}"] = load(f"regression/{name}.json", "regress")["comparison"]
        report["vif"] = load("regression/vif.json", "regress")["predictors"]
    else:
        report["regression_direction1"] = report["regression_direction2"] = None
    st.write_json("report.json", report)
    return {"sections": sorted(report)}


STAGES = ("ingest", "graph", "detect", "metrics", "party", "trend", "regress", "report")
COMMANDS: dict[str, Callable[[Stage], dict]] = {
    "ingest": cmd_ingest,
    "graph": cmd_graph,
    "detect": cmd_detect,
    "metrics": cmd_metrics,
    "party": cmd_party,
    "trend": cmd_trend,
    "regress": cmd_regress,
    "report": cmd_report,
}


def run_all(st: Stage, synthetic: bool = False) -> dict:
    """Every stage in order; with ``synthetic`` the simulated files become the inputs."""
    results = {}
    if synthetic:
        results["simulate"] = cmd_simulate(st)
        st.cfg["inputs"]["records"] = [str(st.path("synthetic", "records.csv"))]
        st.cfg["inputs"]["socio"] = str(st.path("synthetic", "socio.csv"))
        st.cfg["inputs"]["aux"] = []
        st.cfg["inputs"]["schema"] = {}
    for name in STAGES:
        if name == "regress" and not st.cfg["inputs"]["socio"]:
            log.info("no socio table configured; skipping regress")
            continue
        results[name] = COMMANDS[name](st)
    return results
