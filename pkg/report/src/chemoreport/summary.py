"""Exponent summary tables (markdown)."""

from __future__ import annotations

from .schemas import DecayRow

__all__ = ["render_summary_table"]

_HEADER = (
    "| series | predicted | fitted | r2 | window | status |\n"
    "|---|---|---|---|---|---|\n"
)


def _fmt(v: float) -> str:
    import math

    return "n/a" if math.isnan(v) else f"{v:+.3f}"


def render_summary_table(groups: dict[str, list[DecayRow]], r2_floor: float = 0.98) -> str:
    """Markdown table of predicted vs fitted exponents, one section per run.

    The status column reproduces the decay-report CSV verdicts verbatim;
    rows whose fit quality sits below ``r2_floor`` get a low-confidence mark.
    """
    out = []
    for label in sorted(groups):
        rows = groups[label]
        out.append(f"### {label}\n\n")
        out.append(_HEADER)
        for row in rows:
            note = ""
            if row.status != "at-floor" and not row.r2 >= r2_floor:
                note = " (low-confidence)"
            out.append(
                f"| {row.series_name} | {_fmt(row.predicted_exponent)} | "
                f"{_fmt(row.fitted_exponent)} | {_fmt(row.r2)} | "
                f"[{row.t_min:g}, {row.t_max:g}] | {row.status}{note} |\n"
            )
        out.append("\n")
    return "".join(out)
