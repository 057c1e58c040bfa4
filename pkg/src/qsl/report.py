"""Report assembly and deterministic CSV/JSON serialization.

CSV cells carry full double precision (17 significant digits, scientific
notation); invalid bound values and absent thresholds become empty cells in
CSV and explicit nulls in JSON.  Identical runs produce byte-identical CSV
and, apart from the timestamp field, identical JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from datetime import datetime, timezone

import numpy as np

from .bounds import BoundReport
from .dynamics import FidelitySeries, TimeGrid, Trajectory


def fmt(x: float | None) -> str:
    """One CSV cell: empty for absent/invalid, else %.16e."""
    if x is None:
        return ""
    v = float(x)
    if math.isnan(v):
        return ""
    return f"{v:.16e}"


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True))
        fh.write("\n")


def _none_if_nan(x: float | None) -> float | None:
    if x is None:
        return None
    v = float(x)
    return None if math.isnan(v) else v


def simulate_csv(path: str, grid: TimeGrid, fexact: np.ndarray,
                 reports: list[BoundReport]) -> None:
    header = ["t", "F_exact"]
    for rep in reports:
        header += [f"{rep.kind}_integrand", f"{rep.kind}_cumulative",
                   f"{rep.kind}_lower", f"{rep.kind}_upper"]
    lines = [",".join(header)]
    for k, t in enumerate(grid.nodes):
        cells = [fmt(t), fmt(fexact[k])]
        for rep in reports:
            upper = rep.upper[k] if rep.upper is not None else None
            cells += [fmt(rep.integrand[k]), fmt(rep.cumulative[k]),
                      fmt(rep.lower[k]), fmt(upper)]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def echo_csv(path: str, grid: TimeGrid, echo: np.ndarray, rep: BoundReport) -> None:
    header = ["t", "echo_exact", "echo_lower_bound", "integrand", "cumulative"]
    lines = [",".join(header)]
    for k, t in enumerate(grid.nodes):
        lines.append(",".join([
            fmt(t), fmt(echo[k]), fmt(rep.lower[k]),
            fmt(rep.integrand[k]), fmt(rep.cumulative[k]),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def bound_summary(rep: BoundReport, fexact: np.ndarray) -> dict:
    lv = rep.lower_valid()
    uv = rep.upper_valid()
    out = {
        "g0": rep.g0,
        "t_plus": _none_if_nan(rep.t_plus),
        "t_minus": _none_if_nan(rep.t_minus) if rep.upper is not None else None,
        "max_lower_violation": None,
        "min_lower_slack": None,
        "max_upper_violation": None,
        "min_upper_slack": None,
    }
    if lv.any():
        diff = rep.lower[lv] - fexact[lv]
        out["max_lower_violation"] = float(np.max(diff))
        out["min_lower_slack"] = float(np.min(-diff))
    if uv.any():
        diff = fexact[uv] - rep.upper[uv]
        out["max_upper_violation"] = float(np.max(diff))
        out["min_upper_slack"] = float(np.min(-diff))
    return out


def provenance(config: dict, seed: int | None, version: str) -> dict:
    return {
        "config_sha256": config_hash(config),
        "seed": seed,
        "version": version,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def simulate_report(
    config: dict,
    seed: int | None,
    version: str,
    scenario_name: str,
    grid: TimeGrid,
    fid: FidelitySeries,
    traj: Trajectory,
    reports: list[BoundReport],
) -> dict:
    bounds = {rep.kind: bound_summary(rep, fid.values) for rep in reports}
    by_kind = {rep.kind: rep for rep in reports}
    ratio = None
    if "general" in by_kind and "pfeifer" in by_kind:
        denom = float(by_kind["general"].cumulative[-1])
        if denom > 0.0:
            ratio = float(by_kind["pfeifer"].cumulative[-1]) / denom
    return {
        "scenario": scenario_name,
        "grid": {"t_start": grid.t_start, "t_end": grid.t_end, "steps": grid.steps},
        "bounds": bounds,
        "cumulative_ratio": ratio,
        "exact_fidelity": {
            "min": float(np.min(fid.values)),
            "max": float(np.max(fid.values)),
            "final": float(fid.values[-1]),
            "clamped_values": fid.clamped,
        },
        "diagnostics": {
            "unitarity_drift": traj.unitarity_drift(),
            "trace_drift": traj.trace_drift(),
        },
        "provenance": provenance(config, seed, version),
    }


def echo_report(
    config: dict,
    seed: int | None,
    version: str,
    name: str,
    grid: TimeGrid,
    echo: np.ndarray,
    rep: BoundReport,
    traj: Trajectory,
) -> dict:
    lv = rep.lower_valid()
    violation = float(np.max(rep.lower[lv] - echo[lv])) if lv.any() else None
    return {
        "pair": name,
        "grid": {"t_start": grid.t_start, "t_end": grid.t_end, "steps": grid.steps},
        "t_star": _none_if_nan(rep.t_plus),
        "g0": rep.g0,
        "max_bound_violation": violation,
        "echo": {
            "min": float(np.min(echo)),
            "max": float(np.max(echo)),
            "final": float(echo[-1]),
        },
        "diagnostics": {"unitarity_drift": traj.unitarity_drift()},
        "provenance": provenance(config, seed, version),
    }
