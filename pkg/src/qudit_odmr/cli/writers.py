"""CSV tables, gnuplot column files and the resolved-config sidecar for one run."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from qudit_odmr.models.experiment import ExperimentConfig
from qudit_odmr.workflows.experiments import RunResult, Table

log = logging.getLogger(__name__)

SIDECAR = "run.json"


def format_value(value: float) -> str:
    # 17 significant digits round-trip a double exactly
    return format(float(value), ".17g")


def write_csv(table: Table, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.data:
            writer.writerow([format_value(v) for v in row])
    return path


def emit_plot_data(table: Table, meta: Dict[str, Any] | None = None) -> str:
    """Whitespace-separated columns with ``#`` metadata.

    Map tables come out as x y z triples with a blank line whenever x
    changes, the layout gnuplot's ``splot`` expects.
    """
    lines = [f"# {key}: {value}" for key, value in (meta or {}).items()]
    lines.append("# " + " ".join(table.columns))
    previous = None
    for row in table.data:
        if table.kind == "map" and previous is not None and row[0] != previous:
            lines.append("")
        previous = row[0]
        lines.append(" ".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def sidecar_document(cfg: ExperimentConfig, result: RunResult, files: List[str]) -> Dict[str, Any]:
    """Resolved config at the top level so the file feeds straight back into ``--config``."""
    document = cfg.resolved()
    document["run"] = {
        "subcommand": result.subcommand,
        "seed": cfg.seed,
        "ok": result.ok,
        "files": files,
        "summary": result.summary,
    }
    return document


def write_result(result: RunResult, out_dir: Path, cfg: ExperimentConfig) -> List[Path]:
    """Write every table as CSV plus plot text, then the sidecar; returns the paths written."""
    target = Path(out_dir) / result.subcommand
    target.mkdir(parents=True, exist_ok=True)

    written: List[Path] = []
    meta = {"subcommand": result.subcommand, "seed": cfg.seed}
    for table in result.tables:
        written.append(write_csv(table, target / f"{table.name}.csv"))
        plot_path = target / f"{table.name}.dat"
        plot_path.write_text(emit_plot_data(table, {**meta, "table": table.name}), encoding="utf-8")
        written.append(plot_path)

    sidecar = target / SIDECAR
    document = sidecar_document(cfg, result, [p.name for p in written])
    sidecar.write_text(json.dumps(document, indent=2, sort_keys=True, default=_jsonable) + "\n",
                       encoding="utf-8")
    written.append(sidecar)
    log.info(f"Wrote {len(written)} files to {target}")
    return written
