from pathlib import Path
from typing import Iterable, List, Mapping

import numpy as np
import pandas as pd

from core.utils.error_handling_standerizer import ValidationError
from core.utils.utility_files import get_logger, read_json, write_json
from metrics.models import EceSpec
from metrics.utils import reliability_bins
from protocols.models import CoverageCurve
from .models import ReportBundle
from .plots import coverage_figure, reliability_figure, save_svg

logger = get_logger(__name__)

BUNDLE_FILE = "bundle.json"
MARKDOWN_FILE = "report.md"
TABLES_DIR = "tables"
PLOTS_DIR = "plots"


# ============================================================================
# TABLES
# ============================================================================

def write_table_csv(frame: pd.DataFrame, path) -> Path:
    """Shortest round-trip float repr, LF line endings, no index"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_table_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def _cell(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def markdown_table(frame: pd.DataFrame) -> str:
    """GitHub pipe table; floats at four decimals"""
    lines = [
        "| " + " | ".join(str(c) for c in frame.columns) + " |",
        "|" + "|".join("---" for _ in frame.columns) + "|",
    ]
    for row in frame.itertuples(index=False):
        lines.append("| " + " | ".join(_cell(v) for v in row) + " |")
    return "\n".join(lines)


def render_markdown(bundle: ReportBundle) -> str:
    meta = bundle.metadata
    parts = [
        "# promptcal report",
        "",
        f"- version: {meta.get('version')}",
        f"- config hash: `{meta.get('config_hash')}`",
        f"- input hash: `{meta.get('input_hash')}`",
        f"- generator: {meta.get('generator')}",
        f"- pairs: {', '.join(meta.get('pairs', []))}",
    ]
    if bundle.gaps:
        parts += ["", "## Gaps", ""]
        parts += [f"- **{stage}**: {gap.get('error_type')}: {gap.get('error')}" for stage, gap in sorted(bundle.gaps.items())]
    for name in bundle.table_names:
        parts += ["", f"## {name}", ""]
        frame = bundle.table(name)
        parts.append(markdown_table(frame) if not frame.empty else "_empty_")
    return "\n".join(parts) + "\n"


# ============================================================================
# BUNDLE
# ============================================================================

def write_bundle(bundle: ReportBundle, out_dir, formats: Iterable[str] = ("csv", "json"),
                 svg: bool = False) -> List[Path]:
    """
    Write the bundle under `out_dir`. `bundle.json` is always written so that
    `report` can re-render in another format later. Per-table files follow
    `formats`: `csv` and `json` write `tables/<name>.csv|.json`, `md` writes
    `report.md`.
    """
    out_dir = Path(out_dir)
    formats = set(formats)
    written = [write_json(out_dir / BUNDLE_FILE, bundle.model_dump(mode="json"))]

    if "csv" in formats:
        for name in bundle.table_names:
            if not bundle.tables[name]:
                logger.debug(f"[REPORT] table {name} is empty, no csv")
                continue
            written.append(write_table_csv(bundle.table(name), out_dir / TABLES_DIR / f"{name}.csv"))
    if "json" in formats:
        for name in bundle.table_names:
            if not bundle.tables[name]:
                continue
            written.append(write_json(out_dir / TABLES_DIR / f"{name}.json", bundle.tables[name]))
    if "md" in formats:
        path = out_dir / MARKDOWN_FILE
        path.write_text(render_markdown(bundle), encoding="utf-8")
        written.append(path)
    if svg:
        written.extend(emit_bundle_plots(bundle, out_dir / PLOTS_DIR))
    logger.info(f"[REPORT] wrote {len(written)} files to {out_dir}")
    return written


def load_bundle(path) -> ReportBundle:
    """Read a stored bundle from its directory or from the bundle file itself."""
    path = Path(path)
    if path.is_dir():
        path = path / BUNDLE_FILE
    if not path.exists():
        raise ValidationError(f"no report bundle at '{path}'", path=str(path))
    return ReportBundle.model_validate(read_json(path))


# ============================================================================
# PLOTS
# ============================================================================

def emit_reliability_diagram(scores, labels, spec: EceSpec = EceSpec(), path=None,
                             title: str = "") -> pd.DataFrame:
    """Bin stats for the reliability diagram; with `path`, also the SVG."""
    bins = reliability_bins(scores, labels, spec)
    if path is not None:
        save_svg(reliability_figure(bins, title), path)
    return bins


def emit_risk_coverage_plot(curves: Mapping[str, CoverageCurve], path, metric: str = "error",
                            title: str = "") -> Path:
    if not curves:
        raise ValidationError("no coverage curves to plot")
    frames = {str(signal): curve.to_frame() for signal, curve in curves.items()}
    return save_svg(coverage_figure(frames, metric, title), path)


def _slug(*parts: str) -> str:
    return "__".join(str(p).replace("/", "_").replace(" ", "_") for p in parts)


def emit_bundle_plots(bundle: ReportBundle, plots_dir) -> List[Path]:
    """SVGs drawn from the stored plot tables, one per pair and method / pair."""
    plots_dir = Path(plots_dir)
    written = []
    if bundle.tables.get("reliability_bins"):
        frame = bundle.table("reliability_bins")
        for (dataset, model, method), group in frame.groupby(["dataset", "model", "method"], sort=True):
            path = plots_dir / f"reliability__{_slug(dataset, model, method)}.svg"
            written.append(save_svg(reliability_figure(group, f"{dataset}/{model} {method}"), path))
    if bundle.tables.get("coverage_curves"):
        frame = bundle.table("coverage_curves")
        for (dataset, model), group in frame.groupby(["dataset", "model"], sort=True):
            curves = {signal: g for signal, g in group.groupby("signal", sort=True)}
            path = plots_dir / f"coverage__{_slug(dataset, model)}.svg"
            written.append(save_svg(coverage_figure(curves, "error", f"{dataset}/{model}"), path))
    return written
