"""JSON documents for solutions, SPI-based profiles and certificates.

SPIs are written as their mixed-radix index at the cell's time, common
histories as lists of [joint observation, joint action] pairs. Every
document carries the hash of the game it belongs to.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .coordinator import SPIBStrategy, TeamStrategy, spi_from_index, spi_index
from .model import GameSpec
from .solver import CellRecord, CIBSolution, _ConstDict
from .spib import _as_dist, _uniform

FORMAT_VERSION = 1


class DocumentError(ValueError):
    """A solution or profile document that cannot be used with the given game."""


def dumps(doc: dict, indent: int | None = 2) -> str:
    return json.dumps(doc, sort_keys=True, indent=indent, default=_plain)


def _plain(v: Any):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _h0_out(h0: tuple) -> list:
    return [[list(y), list(u)] for y, u in h0]


def _h0_in(raw) -> tuple:
    return tuple((tuple(y), tuple(u)) for y, u in raw)


def _dist_out(dist) -> list:
    return [[int(g), float(p)] for g, p in dist]


def _dist_in(raw) -> tuple:
    return tuple((int(g), float(p)) for g, p in raw)


# ------------------------------------------------------------ CIB solutions


def solution_document(sol: CIBSolution) -> dict:
    spec = sol.spec
    order = sol.reachable()
    ids = {key: n for n, key in enumerate(order)}
    cells = []
    for key in order:
        rec = sol.cells[key]
        t = rec.t
        entry: dict = {"id": ids[key], "t": t}
        if rec.cci is not None:
            entry["cci"] = {
                "pis": [
                    [[spi_index(spec, k, t, s), round(p, 12)] for s, p in pk] for k, pk in enumerate(rec.cci.pis)
                ],
                "y_window": [list(y) for y in rec.cci.y_window],
                "u_window": [list(u) for u in rec.cci.u_window],
            }
        if getattr(rec, "beliefs", None) is not None:
            entry["filter_beliefs"] = rec.beliefs
        if rec.default is not None:
            entry["open_loop"] = [_dist_out(d) for d in rec.default]
        entry["policy"] = [
            sorted([spi_index(spec, k, t, s), _dist_out(rec.policy(k, s))] for s in rec.lam[k])
            for k in range(spec.n_teams)
        ]
        entry["values"] = _values_out(spec, rec)
        entry["successors"] = [
            {"y": list(y), "u": list(u), "cell": ids[nk], "off_path": list(rec.offpath.get((y, u), []))}
            for (y, u), nk in sorted(rec.successors.items())
        ]
        entry["residual"] = rec.residual
        cells.append(entry)
    by_time: dict = {}
    for c in cells:
        by_time.setdefault(str(c["t"]), []).append(c)
    return {
        "kind": "cib-solution",
        "format": FORMAT_VERSION,
        "spec_hash": spec.hash,
        "mode": sol.mode,
        "offpath_policy": sol.offpath_policy,
        "root": ids[sol.root],
        "cells": by_time,
        "residuals": sol.residuals,
        "verifier_report": sol.verifier_report,
        "meta": {k: v for k, v in sol.meta.items() if k != "trace"},
    }


def _values_out(spec: GameSpec, rec: CellRecord) -> list:
    meta_value = getattr(rec, "meta_value", None)
    if meta_value is not None:
        return [{"any": float(v)} for v in meta_value]
    out = []
    for k in range(spec.n_teams):
        row = {}
        for s in rec.lam[k]:
            row[str(spi_index(spec, k, rec.t, s))] = float(rec.value(k, s))
        out.append(row)
    return out


def load_solution(spec: GameSpec, doc: dict) -> CIBSolution:
    _check(spec, doc, "cib-solution")
    n = spec.n_teams
    cells: dict = {}
    for t_str, entries in doc["cells"].items():
        for entry in entries:
            t = int(entry["t"])
            lam = [
                {spi_from_index(spec, k, t, idx): _dist_in(dist) for idx, dist in entry["policy"][k]}
                for k in range(n)
            ]
            default = [_dist_in(d) for d in entry["open_loop"]] if entry.get("open_loop") else None
            succ = {(tuple(s["y"]), tuple(s["u"])): s["cell"] for s in entry["successors"]}
            values = []
            for k, row in enumerate(entry["values"]):
                if "any" in row:
                    values.append(_ConstDict(row["any"]))
                else:
                    values.append({spi_from_index(spec, k, t, int(i)): v for i, v in row.items()})
            cells[entry["id"]] = CellRecord(t, entry["id"], None, None, lam, succ, values=values, default=default,
                                            residual=entry.get("residual", 0.0))
    return CIBSolution(spec, doc["mode"], doc["root"], cells, doc.get("offpath_policy"),
                       doc.get("residuals", {}), doc.get("meta", {}), doc.get("verifier_report"))


# ------------------------------------------------------- SPI-based profiles


def profile_document(spec: GameSpec, tables, certificate=None, meta=None) -> dict:
    teams = []
    for k, tab in enumerate(tables):
        rows = []
        for (t, h0, s), arr in sorted(tab.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]), repr(kv[0][2]))):
            dist = arr if isinstance(arr, tuple) else tuple((g, float(p)) for g, p in enumerate(arr) if p > 0)
            rows.append({"t": t, "h0": _h0_out(h0), "spi": spi_index(spec, k, t, s), "dist": _dist_out(dist)})
        teams.append(rows)
    return {
        "kind": "spib-profile",
        "format": FORMAT_VERSION,
        "spec_hash": spec.hash,
        "mode": "spib",
        "tables": teams,
        "verifier_report": certificate.as_dict() if certificate is not None else None,
        "meta": meta or {},
    }


def load_profile_tables(spec: GameSpec, doc: dict) -> list[dict]:
    _check(spec, doc, "spib-profile")
    out = []
    for k, rows in enumerate(doc["tables"]):
        tab = {}
        for row in rows:
            t = int(row["t"])
            tab[(t, _h0_in(row["h0"]), spi_from_index(spec, k, t, int(row["spi"])))] = _dist_in(row["dist"])
        out.append(tab)
    return out


def load_strategies(spec: GameSpec, doc: dict) -> list[TeamStrategy]:
    """Strategies from either a solution or a profile document."""
    kind = doc.get("kind")
    if kind == "cib-solution":
        return load_solution(spec, doc).strategies()
    if kind == "spib-profile":
        tables = load_profile_tables(spec, doc)
        return [
            SPIBStrategy(tab, default=lambda t, h0, s, k=k: _as_dist(_uniform(spec, k, t)))
            for k, tab in enumerate(tables)
        ]
    raise DocumentError(f"unknown document kind {kind!r}")


def _check(spec: GameSpec, doc: dict, kind: str) -> None:
    if doc.get("kind") != kind:
        raise DocumentError(f"expected a {kind} document, got {doc.get('kind')!r}")
    if doc.get("spec_hash") != spec.hash:
        raise DocumentError(
            f"document belongs to game {str(doc.get('spec_hash'))[:12]}, not {spec.hash[:12]}"
        )
