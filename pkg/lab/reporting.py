import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

from parabolic import __version__
from parabolic.settings import Report_Dir
from parabolic.utils import generate_cache_key

# Excluded when comparing replays.
VOLATILE_KEYS = ("generated_at",)


def _jsonable(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def config_hash(canonical: dict) -> str:
    return generate_cache_key("config", canonical).split(":", 1)[1]


def build_report(state: dict) -> dict:
    config = state["config"]
    canonical = config.canonical()
    checks = state.get("checks") or []
    return {
        "command": config.command,
        "config": canonical,
        "config_hash": config_hash(canonical),
        "seed": config.seed,
        "version": __version__,
        "exit_reason": state.get("exit_reason"),
        "passed": state.get("exit_reason") == "COMPLETED",
        "partial": state.get("exit_reason") == "BUDGET_EXHAUSTED",
        "draws": state.get("draws", 0),
        "budget": config.budget,
        "error": state.get("error"),
        "checks": checks,
        "results": state.get("results") or {},
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def stable_view(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in VOLATILE_KEYS}


def report_path(report: dict, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    return Path(Report_Dir) / f"{report['command']}-{report['config_hash'][:12]}.json"


def write_report(report: dict, out: Optional[str]) -> Path:
    path = report_path(report, out)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent)
    path.write_text(dumps(report))
    return path


def format_table(report: dict) -> str:
    """Plain-text table of the checks for a terminal."""
    header = ("check", "value", "target", "tolerance", "ok")
    rows = [
        (c["name"], f"{c['value']:.6g}", f"{c['target']:.6g}", f"{c['tolerance']:.3g}", "yes" if c["passed"] else "NO")
        for c in report["checks"]
    ]
    widths = [max(len(str(row[i])) for row in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)) for row in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append(f"[exit_reason={report['exit_reason']}]")
    return "\n".join(lines)
