"""Run configuration: one YAML/JSON file, every field defaulted."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any

import yaml

from . import __version__
from .party import DEFAULT_MAJOR_PARTY
from .records import ELECTION_YEARS

DEFAULTS: dict[str, Any] = {
    "inputs": {
        "records": [],
        "aux": [],
        "socio": None,
        "socio_lag": 0,
        "delimiter": ",",
        "schema": {},
    },
    "out": "out",
    "years": list(ELECTION_YEARS),
    "workers": 1,
    "leiden": {"gamma": 1.0, "seed": 0, "weighted": True},
    "linkage": {"threshold": 0.90, "fields": ["middle_name", "party"]},
    "major_party": {str(k): v for k, v in DEFAULT_MAJOR_PARTY.items()},
    "party": {
        "parties": ["LP", "NPC", "NP", "NUP", "PDPLBN", "LKS-KAM", "LKS-CMD"],
        "overlap_size_weighted": False,
        "wilcoxon_alternative": "greater",
    },
    "indicators": {"normalized_acc": False},
    "trend": {"yearly_means": False},
    "regression": {"log_base": None, "reml": False, "exact_wilcoxon_cutoff": 25},
    "simulate": {},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise KeyError(f"unknown config key {path}{key}")
        if isinstance(base[key], dict) and base[key] and isinstance(value, dict) and key != "major_party":
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the config file, then command-line overrides.

    Relative input paths are resolved against the config file's directory.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        cfg = _merge(cfg, loaded)
        base = path.parent
        inputs = cfg["inputs"]
        inputs["records"] = [str(base / p) for p in inputs["records"]]
        inputs["aux"] = [str(base / p) for p in inputs["aux"]]
        if inputs["socio"]:
            inputs["socio"] = str(base / inputs["socio"])
        if "out" in loaded:
            cfg["out"] = str(base / cfg["out"])
    if overrides:
        cfg = _merge(cfg, overrides)
    cfg["major_party"] = {str(k): v for k, v in cfg["major_party"].items()}
    return cfg


def major_party_map(cfg: dict) -> dict[int, str]:
    return {int(k): v for k, v in cfg["major_party"].items()}


def config_hash(cfg: dict) -> str:
    # out dir and worker count excluded so relocating or parallelising a run keeps the hash
    body = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
    text = json.dumps(body, sort_keys=True, default=str)
    out = str(Path(cfg.get("out", "out")))
    # inputs generated inside the output tree (synthetic runs) are hashed relative to it
    text = text.replace(json.dumps(out + "/")[:-1], '"$OUT/')
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def header_lines(cfg: dict) -> list[str]:
    return [f"kinnet {__version__}", f"config sha256:{config_hash(cfg)}"]


def metadata(cfg: dict) -> dict:
    return {"tool": "kinnet", "version": __version__, "config_hash": config_hash(cfg)}
