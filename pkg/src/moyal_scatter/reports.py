"""Run orchestration and on-disk reports.

Everything that lands in ``report.json`` is a pure function of the config,
so two runs with the same config produce identical bytes. Wall-clock times
go to ``timing.json`` next to it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .checks import CRITERIA, RUNNERS, Section, _clean
from .config import RunConfig
from .io import sidecar_path

log = logging.getLogger(__name__)

SUBCOMMANDS = list(RUNNERS)  # `all` runs these in this order
REPORT_NAME = "report.json"
TIMING_NAME = "timing.json"


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def run_section(name: str, cfg: RunConfig, refine: int | None = None) -> tuple[Section, float]:
    start = time.perf_counter()
    runner = RUNNERS[name]
    sec = runner(cfg, refine) if name == "implementability" else runner(cfg)
    elapsed = time.perf_counter() - start
    log.info("%s finished in %.1f s", name, elapsed)
    return sec, elapsed


def run_sections(names: list[str], cfg: RunConfig, *, threads: int = 1, refine: int | None = None) -> list[tuple[Section, float]]:
    """Run the named sections, in parallel when ``threads > 1``.

    With several workers each one gets a single BLAS thread so that the
    total stays within ``threads``. Results come back in ``names`` order.
    """
    workers = max(1, min(threads, len(names)))
    if workers == 1:
        with threadpool_limits(limits=threads):
            return [run_section(n, cfg, refine) for n in names]
    with threadpool_limits(limits=1), ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_section, n, cfg, refine) for n in names]
        return [f.result() for f in futures]


def _write_csv(path: Path, rows: list[dict]) -> None:
    columns: list[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in _clean(row).items()})


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_artifacts(sec: Section, out_dir: Path) -> list[dict]:
    """Write tables, series and dumps of one section; returns index entries."""
    written: list[tuple[str, Path]] = []
    for name, rows in sorted(sec.tables.items()):
        path = out_dir / "tables" / sec.name / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_csv(path, rows)
        written.append(("table", path))
    for name, columns in sorted(sec.series.items()):
        path = out_dir / "series" / sec.name / f"{name}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_dumps(_clean(columns)))
        written.append(("series", path))
    for rel, writer in sorted(sec.dumps.items()):
        path = out_dir / "dumps" / sec.name / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(path)
        written.append(("dump", path))
        sidecar = sidecar_path(path)
        if sidecar.exists():
            written.append(("dump-sidecar", sidecar))
    return [
        {"path": p.relative_to(out_dir).as_posix(), "kind": kind, "section": sec.name, "bytes": p.stat().st_size, "sha256": _sha256(p)}
        for kind, p in written
    ]


def criteria_verdicts(sections: list[Section]) -> dict[str, dict]:
    out = {}
    for num, title in CRITERIA.items():
        checks = [c for s in sections for c in s.checks if c.criterion == num]
        applicable = [c for c in checks if c.passed is not None]
        if num == 8:
            verdict = "n/a"
            note = "established by comparing the reports of two identical runs"
        elif not applicable:
            verdict, note = "n/a", "no applicable checks in this run"
        else:
            verdict = "pass" if all(c.passed for c in applicable) else "fail"
            note = ""
        entry = {"title": title, "verdict": verdict, "checks": sorted(c.name for c in checks)}
        if note:
            entry["note"] = note
        out[str(num)] = entry
    return out


def build_report(subcommand: str, cfg: RunConfig, sections: list[Section], artifacts: list[dict], refine: int | None = None) -> dict:
    echo = {k: v for k, v in cfg.raw.items() if k != "out_dir"}
    failing = sorted(f"{s.name}/{c.name}" for s in sections for c in s.checks if c.passed is False)
    return {
        "version": __version__,
        "subcommand": subcommand,
        "refine": refine,
        "config": _clean(echo),
        "sections": {
            s.name: {"checks": [c.to_dict() for c in sorted(s.checks, key=lambda c: c.name)], "summary": _clean(s.summary)}
            for s in sections
        },
        "criteria": criteria_verdicts(sections),
        "failing": failing,
        "verdict": "fail" if failing else "pass",
        "artifacts": sorted(artifacts, key=lambda a: a["path"]),
    }


def run(subcommand: str, cfg: RunConfig, out_dir: Path, *, threads: int = 1, refine: int | None = None) -> dict:
    """Execute a subcommand and write its report; returns the report dict.

    Raises ``OSError`` when the output directory cannot be written.
    """
    names = SUBCOMMANDS if subcommand == "all" else [subcommand]
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    results = run_sections(names, cfg, threads=threads, refine=refine)
    sections = [sec for sec, _ in results]
    artifacts = [entry for sec in sections for entry in write_artifacts(sec, out_dir)]
    report = build_report(subcommand, cfg, sections, artifacts, refine)
    (out_dir / REPORT_NAME).write_text(_dumps(report))
    timing = {"sections": {sec.name: round(t, 3) for sec, t in results}, "total": round(time.perf_counter() - start, 3), "threads": threads}
    (out_dir / TIMING_NAME).write_text(_dumps(timing))
    return report
