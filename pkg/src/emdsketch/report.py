"""Experiment configs and CSV/JSON reports.

Reports never contain wall-clock times or host details, so an identical
(config, seed) pair reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import subprocess
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

REPORT_VERSION = 1


@dataclass
class ExperimentConfig:
    command: str
    delta: int = 16
    dims: int = 2
    k: int = 2
    epsilon: float = 0.25
    lam: float | None = None
    m: int | None = None
    reps: int | None = None
    t_param: int = 1
    seed: int = 7
    trials: int | None = None
    suite: str | None = None
    criteria: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    calibration: str | None = None
    out: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})

    def run_doc(self) -> dict:
        """Everything that determines the run; the output directory is not part of it."""
        doc = asdict(self)
        doc.pop("out")
        return doc

    def digest(self) -> str:
        doc = self.run_doc()
        return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


@functools.lru_cache(maxsize=1)
def version_string() -> str:
    try:
        from importlib.metadata import version
        v = version("artifact")
    except Exception:
        v = "0.0.0"
    try:
        rev = subprocess.run(["git", "-C", str(Path(__file__).resolve().parent), "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5).stdout.strip()
    except Exception:
        rev = ""
    return f"{v}+g{rev}" if rev else v


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        vals = [r.get(h, "") for h in header] if isinstance(r, dict) else list(r)
        w.writerow([_cell(v) for v in vals])
    return buf.getvalue()


def summary_doc(cfg: ExperimentConfig, summary: dict) -> dict:
    return {"config": cfg.run_doc(), "config_hash": cfg.digest(), "seed": cfg.seed,
            "version": version_string(), "report_version": REPORT_VERSION, "summary": summary}


def write_report(out_dir, name: str, cfg: ExperimentConfig, header, rows, summary: dict | None = None):
    """<name>.csv (fixed header, one row per result) and <name>.json (config, hash, summary)."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{name}.csv").write_text(csv_text(header, rows))
    doc = summary_doc(cfg, summary or {})
    (d / f"{name}.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return d / f"{name}.csv", d / f"{name}.json"
