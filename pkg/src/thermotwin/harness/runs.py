"""Run directories: ``<out>/runs/<timestamp>/{config.ini, telemetry/, report.*, timing.csv}``."""

from __future__ import annotations

import datetime as _dt
from pathlib import Path

from ..config import Config
from .report import ExperimentReport
from .suite import Timing

REPORT_FILES = ("report.txt", "report.csv", "report.json")


def make_run_dir(out: str | Path, stamp: str | None = None) -> Path:
    """Create a fresh run directory; a numeric suffix avoids collisions within one second."""
    stamp = stamp or _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
    base = Path(out) / "runs"
    path = base / stamp
    n = 1
    while path.exists():
        path = base / f"{stamp}-{n}"
        n += 1
    (path / "telemetry").mkdir(parents=True)
    return path


def write_run(run_dir: Path, cfg: Config, report: ExperimentReport, timing: Timing | None = None) -> None:
    (run_dir / "config.ini").write_text(cfg.to_text(), encoding="utf-8")
    write_report(run_dir, report)
    if timing is not None:
        (run_dir / "timing.csv").write_text(timing.to_csv(), encoding="utf-8")


def write_report(directory: Path, report: ExperimentReport) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (directory / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (directory / "report.json").write_text(report.to_json(), encoding="utf-8")


def latest_run(out: str | Path) -> Path:
    runs = sorted(p for p in (Path(out) / "runs").glob("*") if (p / "report.json").is_file())
    if not runs:
        raise FileNotFoundError(f"no completed runs under {Path(out) / 'runs'}")
    return runs[-1]
