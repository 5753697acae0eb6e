"""Readers for the delimited artifacts a solver run directory contains.

The coupling surface is deliberately thin: only the documented CSV columns
are consumed, never solver internals.

    norms.csv         t,name,value
    decay_report.csv  series_name,predicted_exponent,fitted_exponent,r2,
                      t_min,t_max,tolerance,status
    profile.csv       (x,rho_bar,t) or (xi,rho_bar)
    correction.csv    t,x,rho_hat,m_hat,phi_hat
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["DecayRow", "load_decay_report", "load_norm_series", "load_table"]


@dataclass(frozen=True)
class DecayRow:
    series_name: str
    predicted_exponent: float
    fitted_exponent: float
    r2: float
    t_min: float
    t_max: float
    tolerance: float
    status: str


def _float(value: str) -> float:
    return float("nan") if value == "nan" else float(value)


def load_decay_report(path: Path) -> list[DecayRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                DecayRow(
                    series_name=rec["series_name"],
                    predicted_exponent=_float(rec["predicted_exponent"]),
                    fitted_exponent=_float(rec["fitted_exponent"]),
                    r2=_float(rec["r2"]),
                    t_min=_float(rec["t_min"]),
                    t_max=_float(rec["t_max"]),
                    tolerance=_float(rec["tolerance"]),
                    status=rec["status"],
                )
            )
    if not rows:
        raise ValueError(f"{path}: no decay-report rows")
    return rows


def load_norm_series(path: Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Series name -> (times, values), in file order."""
    data: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            data.setdefault(rec["name"], []).append((float(rec["t"]), float(rec["value"])))
    return {
        name: (np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))
        for name, pairs in data.items()
    }


def load_table(path: Path) -> dict[str, np.ndarray]:
    """Column-name -> array for plain (non-commented) numeric CSVs."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    cols = {h: [] for h in header}
    for rec in reader:
        for h, v in zip(header, rec):
            cols[h].append(float(v))
    return {h: np.array(v) for h, v in cols.items()}
