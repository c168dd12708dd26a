"""
Result tables, run manifests and optional SVG plots.
"""

from dataclasses import dataclass, field, asdict, fields
from pathlib import Path
from typing import Sequence
import io
import json
import logging
import math

import aiofiles
import matplotlib
import pandas as pd

from .experiments import ResultRow

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

COLUMNS = [f.name for f in fields(ResultRow)]

# x axis per experiment; everything else is skipped by the plot
PLOT_AXES = {
    "ultimate-bound": "n",
    "ultimate-bound-analytic": "n",
    "scaling": "n",
    "readout-scan": "tau",
    "dephasing": "tau",
    "readout-optimum": "theta",
    "dephasing-optimum": "theta",
    "detection-noise": "sigma",
    "detection-noise-normalized": "sigma",
}


@dataclass
class RunManifest:
    command: str
    parameters: dict
    version: str
    duration_seconds: float = 0.0
    outputs: list[str] = field(default_factory=list)
    interpretation: dict = field(default_factory=dict)
    status: str = "ok"
    error: str | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def to_frame(rows: Sequence[ResultRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.as_record() for row in rows], columns=COLUMNS)
    return frame.astype({"n": "int64", "mu": "int64"})


def render_csv(rows: Sequence[ResultRow]) -> str:
    """Fixed header, 17 significant digits, '\\n' line endings, rows in the given order."""
    return to_frame(rows).to_csv(index=False, float_format="%.17g", lineterminator="\n", na_rep="nan")


def _json_number(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)  # 'inf', 'nan'
    return value


def render_json(rows: Sequence[ResultRow]) -> str:
    records = [{k: _json_number(v) for k, v in row.as_record().items()} for row in rows]
    return json.dumps({"columns": COLUMNS, "rows": records}, indent=2) + "\n"


def render_svg(rows: Sequence[ResultRow], title: str) -> str:
    """One polyline per (experiment, method, theta, gamma_ratio) series on log-scaled delta_phi."""
    fig, ax = plt.subplots(figsize=(7, 5))
    try:
        series: dict[tuple, list[tuple[float, float]]] = {}
        for row in rows:
            axis = PLOT_AXES.get(row.experiment)
            if axis is None:
                continue
            x = float(getattr(row, axis))
            if not (math.isfinite(x) and math.isfinite(row.delta_phi) and row.delta_phi > 0):
                continue
            key = (row.experiment, row.method, axis, row.theta, row.gamma_ratio)
            series.setdefault(key, []).append((x, row.delta_phi))
        for (experiment, method, axis, theta, gamma), points in series.items():
            points.sort()
            label = f"{experiment} {method} θ={theta:.4g}" + (f" g={gamma:g}" if gamma else "")
            ax.plot([p[0] for p in points], [p[1] for p in points], marker=".", label=label)
            ax.set_xlabel(axis)
            if axis == "n":
                ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_ylabel("delta_phi")
        ax.set_title(title)
        if series:
            ax.legend(fontsize="small")
        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue()
    finally:
        plt.close(fig)


async def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
        await f.write(text)


async def write_table(path: Path, rows: Sequence[ResultRow], output_format: str = "csv") -> Path:
    """
    Write result rows as CSV or JSON.

    Raises:
        ValueError: If the format is unknown.
    """
    if output_format == "csv":
        text = render_csv(rows)
    elif output_format == "json":
        text = render_json(rows)
    else:
        raise ValueError(f"unknown output format {output_format!r}")
    await _write_text(path, text)
    logger.info("Wrote %d rows to %s", len(rows), path)
    return path


async def write_svg(path: Path, rows: Sequence[ResultRow], title: str) -> Path:
    await _write_text(path, render_svg(rows, title))
    logger.info("Wrote plot to %s", path)
    return path


async def write_manifest(path: Path, manifest: RunManifest) -> Path:
    await _write_text(path, json.dumps(manifest.as_dict(), indent=2, default=str) + "\n")
    logger.info("Wrote manifest to %s", path)
    return path
