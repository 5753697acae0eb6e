"""Command line entry: render figures and tables for solver run directories.

    chemowave-report <run-dir> [<run-dir> ...] --out <dir>

Each run directory must contain the documented CSV artifacts (norms.csv,
decay_report.csv, optionally profile.csv / correction.csv).  Inputs are
never modified; reruns overwrite the same outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import (
    BLOCKS,
    FigureSpec,
    MissingSeriesError,
    render_correction_figure,
    render_decay_figure,
    render_profile_figure,
)
from .schemas import load_decay_report
from .summary import render_summary_table

__all__ = ["main", "report_run_dir"]


def report_run_dir(run_dir: Path, out_dir: Path) -> dict[str, dict[str, float]]:
    """Render every figure for one run directory; returns drawn guide slopes
    keyed by theorem block."""
    rows = load_decay_report(run_dir / "decay_report.csv")
    by_name = {r.series_name: r for r in rows}
    slopes = {r.series_name: r.predicted_exponent for r in rows}
    windows = {r.series_name: (r.t_min, r.t_max) for r in rows}
    label = run_dir.name
    drawn: dict[str, dict[str, float]] = {}
    for block, series in BLOCKS.items():
        missing = [s for s in series if s not in by_name]
        if missing:
            raise MissingSeriesError(missing)
        spec = FigureSpec(
            norms_csv=run_dir / "norms.csv",
            series=series,
            reference_slopes={s: slopes[s] for s in series},
            fit_windows={s: windows[s] for s in series},
            outputs=[out_dir / f"{label}_{block}.png", out_dir / f"{label}_{block}.svg"],
        )
        drawn[block] = render_decay_figure(spec)
    if (run_dir / "profile.csv").exists():
        render_profile_figure(
            run_dir / "profile.csv",
            [out_dir / f"{label}_profile.png", out_dir / f"{label}_profile.svg"],
        )
    if (run_dir / "correction.csv").exists():
        render_correction_figure(
            run_dir / "correction.csv",
            [out_dir / f"{label}_correction.png", out_dir / f"{label}_correction.svg"],
        )
    return drawn


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="chemowave-report", description=__doc__)
    ap.add_argument("run_dirs", nargs="+", help="solver run directories")
    ap.add_argument("--out", required=True, help="output directory for figures/tables")
    args = ap.parse_args(argv)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    groups = {}
    failures = []
    for rd in args.run_dirs:
        run_dir = Path(rd)
        try:
            report_run_dir(run_dir, out_dir)
            groups[run_dir.name] = load_decay_report(run_dir / "decay_report.csv")
        except MissingSeriesError as exc:
            failures.append(f"{run_dir}: {exc}")
        except (OSError, ValueError) as exc:
            failures.append(f"{run_dir}: {exc}")
    if groups:
        (out_dir / "summary.md").write_text(render_summary_table(groups))
        print(f"wrote figures and summary for {len(groups)} run(s) to {out_dir}")
    for message in failures:
        print(f"error: {message}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
