"""
promptcal command line.

    python cli.py --input scores.jsonl --out reports_out run
    python cli.py --seed 7 synth --n 2000 --k 15 > synth.jsonl
    python cli.py --out md_report --format md report reports_out
"""
from functools import wraps
from pathlib import Path
from typing import List, Optional, Sequence

import typer
from rich.console import Console
from rich.table import Table

from aggregation.utils import aggregate_rules, rule_from_id
from core.settings import DEFAULT_OUT_DIR, VERSION
from core.utils.error_handling_standerizer import ConfigError, PromptCalError
from core.utils.utility_files import get_logger
from reports.emitters import load_bundle, write_bundle
from reports.models import STAGE_ORDER, ReportBundle, RunConfig, load_run_config
from reports.pipeline import build_bundle, load_matrix, run_pipeline
from scores.serializers import serialize_scores_jsonl
from scores.utils import evaluation_pairs
from synth.models import SynthConfig
from synth.utils import generate

logger = get_logger(__name__)

app = typer.Typer(add_completion=False, no_args_is_help=True, help="Prompt-ensemble calibration and evaluation.")
out = Console()

FORMATS = ("csv", "json", "md")


class CliState:
    """Global options shared by every subcommand."""

    def __init__(self, config_path: Optional[Path], inputs: List[Path], out_dir: Optional[Path],
                 seed: Optional[int], formats: List[str]):
        self.config_path = config_path
        self.inputs = inputs
        self.out_dir = out_dir
        self.seed = seed
        self.formats = formats

    def run_config(self) -> RunConfig:
        config = load_run_config(self.config_path) if self.config_path else RunConfig()
        if self.seed is not None:
            config = config.with_seed(self.seed)
        if self.formats:
            unknown = sorted(set(self.formats) - set(FORMATS))
            if unknown:
                raise ConfigError(f"unknown format(s) {unknown}; choose from {list(FORMATS)}")
            config = config.model_copy(update={"formats": list(dict.fromkeys(self.formats))})
        return config


def handle_errors(func):
    """Map PromptCalError to its exit code (1 validation, 2 computation)."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PromptCalError as e:
            out.print(f"[red]{type(e).__name__}:[/red] {e.message}")
            raise typer.Exit(code=e.exit_code)
    return wrapper


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="RunConfig JSON file."),
    inputs: List[Path] = typer.Option([], "--input", "-i", help="JSONL score artifact(s)."),
    out_dir: Optional[Path] = typer.Option(None, "--out", help="Output directory (file for synth)."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Overrides bootstrap and random-prompt seeds."),
    formats: List[str] = typer.Option([], "--format", help="csv, json or md; repeatable."),
):
    ctx.obj = CliState(config, inputs, out_dir, seed, formats)


# ============================================================================
# OUTPUT HELPERS
# ============================================================================

def print_table(bundle: ReportBundle, name: str, limit: int = 20):
    if not bundle.tables.get(name):
        return
    frame = bundle.table(name)
    table = Table(title=name, show_lines=False)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.head(limit).itertuples(index=False):
        table.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    out.print(table)
    if len(frame) > limit:
        out.print(f"[dim]... {len(frame) - limit} more rows[/dim]")


def finish(state: CliState, bundle: ReportBundle, config: RunConfig, shown: Sequence[str]):
    """Print, write when --out is set, and exit with the first gap's code."""
    for name in shown:
        print_table(bundle, name)
    if state.out_dir is not None:
        write_bundle(bundle, state.out_dir, config.formats, svg=config.svg)
        out.print(f"[green]Report written to {state.out_dir}[/green]")
    for stage in STAGE_ORDER:
        gap = bundle.gaps.get(stage)
        if gap:
            out.print(f"[yellow]gap in {stage}:[/yellow] {gap['error_type']}: {gap['error']}")
    codes = [bundle.gaps[stage]["exit_code"] for stage in STAGE_ORDER if stage in bundle.gaps]
    if codes:
        raise typer.Exit(code=codes[0])


def run_stages(state: CliState, stages: Sequence[str], shown: Sequence[str]):
    config = state.run_config()
    matrix = load_matrix(state.inputs)
    bundle = build_bundle(run_pipeline(matrix, config, stages))
    finish(state, bundle, config, shown)


# ============================================================================
# COMMANDS
# ============================================================================

@app.command()
@handle_errors
def validate(ctx: typer.Context):
    """Parse the input artifacts and report their shape."""
    matrix = load_matrix(ctx.obj.inputs)
    pairs = evaluation_pairs(matrix)
    out.print(f"[green]OK[/green] {matrix.n_samples} samples x {matrix.n_prompts} prompts "
              f"(families {', '.join(matrix.families)})")
    for (dataset, model), pair in pairs.items():
        out.print(f"  {dataset}/{model}: {pair.n_samples} evaluation samples, {int(pair.y.sum())} unsafe")


@app.command("aggregate")
@handle_errors
def aggregate_cmd(
    ctx: typer.Context,
    rules: List[str] = typer.Option(["mean_prob"], "--rule", help="Rule id; repeatable."),
):
    """Per-sample ensemble scores for the given rules over all rows."""
    state: CliState = ctx.obj
    config = state.run_config()
    matrix = load_matrix(state.inputs)
    parsed = [rule_from_id(rule_id, config.protocol.trim_fraction) for rule_id in rules]
    scores = aggregate_rules(matrix, parsed, eps=config.protocol.epsilon)
    rows = []
    for i in range(matrix.n_samples):
        row = {
            "sample_id": matrix.sample_ids[i],
            "dataset": matrix.datasets[i],
            "model": matrix.models[i],
            "split": matrix.splits[i].value,
            "label": matrix.labels[i].value,
        }
        row.update({rule_id: float(values[i]) for rule_id, values in scores.items()})
        rows.append(row)
    bundle = ReportBundle(metadata={"tool": "promptcal", "version": VERSION, "rules": list(scores)},
                          tables={"aggregate_scores": rows})
    finish(state, bundle, config, ["aggregate_scores"])


@app.command("select")
@handle_errors
def select_cmd(ctx: typer.Context):
    """Lock the selected single prompt per model on its train rows."""
    run_stages(ctx.obj, ["select"], ["selection"])


@app.command()
@handle_errors
def calibrate(ctx: typer.Context):
    """Fit temperature, Platt and isotonic calibrators on train rows."""
    run_stages(ctx.obj, ["select", "aggregate", "calibrate"], ["calibrators"])


@app.command()
@handle_errors
def metrics(ctx: typer.Context):
    """Metric table per evaluation pair and method."""
    run_stages(ctx.obj, ["select", "aggregate", "calibrate", "metrics"],
               ["main_comparison", "calibration_head_to_head"])


@app.command()
@handle_errors
def sweep(ctx: typer.Context):
    """NLL win counts of every aggregation rule across evaluation pairs."""
    run_stages(ctx.obj, ["sweep"], ["rule_sweep"])


@app.command()
@handle_errors
def selective(ctx: typer.Context):
    """Risk-coverage analysis of the uncertainty signals."""
    run_stages(ctx.obj, ["select", "aggregate", "selective"], ["selective_wins"])


@app.command()
@handle_errors
def bootstrap(ctx: typer.Context):
    """Paired bootstrap of selected single prompt minus mean ensemble."""
    run_stages(ctx.obj, ["select", "aggregate", "bootstrap"], ["bootstrap"])


@app.command()
@handle_errors
def prevalence(ctx: typer.Context):
    """Bootstrap deltas under importance-reweighted class prevalence."""
    run_stages(ctx.obj, ["select", "aggregate", "prevalence"], ["prevalence_stress"])


@app.command()
@handle_errors
def run(ctx: typer.Context):
    """Run every enabled stage and emit the full report."""
    state: CliState = ctx.obj
    config = state.run_config()
    if state.out_dir is None:
        state.out_dir = DEFAULT_OUT_DIR
    matrix = load_matrix(state.inputs)
    bundle = build_bundle(run_pipeline(matrix, config))
    out.print(f"[bold]{len(bundle.table_names)} tables[/bold], gaps: {sorted(bundle.gaps) or 'none'}")
    finish(state, bundle, config, ["main_comparison"])


@app.command()
@handle_errors
def synth(
    ctx: typer.Context,
    n: int = typer.Option(1000, "--n", min=1, help="Samples."),
    k: int = typer.Option(15, "--k", min=1, help="Prompts."),
    train_fraction: float = typer.Option(0.5, "--train-fraction", min=0.0, max=1.0),
    noise_std: float = typer.Option(0.5, "--noise-std", min=0.0),
    dataset: str = typer.Option("synth", "--dataset"),
    model: str = typer.Option("synthetic", "--model"),
):
    """Write a synthetic JSONL score artifact to --out (or stdout)."""
    state: CliState = ctx.obj
    options = dict(n_samples=n, k_prompts=k, train_fraction=train_fraction, noise_std=noise_std,
                   dataset=dataset, model=model)
    if state.seed is not None:
        options["seed"] = state.seed
    matrix = generate(SynthConfig(**options))
    lines = serialize_scores_jsonl(matrix)
    if state.out_dir is None:
        for line in lines:
            typer.echo(line)
        return
    state.out_dir.parent.mkdir(parents=True, exist_ok=True)
    with open(state.out_dir, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")
    logger.info(f"[SYNTH] wrote {matrix.n_samples} records to {state.out_dir}")


@app.command()
@handle_errors
def report(
    ctx: typer.Context,
    bundle_path: Path = typer.Argument(..., help="Bundle directory or bundle.json."),
):
    """Re-render a stored bundle in the requested formats without recomputing."""
    state: CliState = ctx.obj
    bundle = load_bundle(bundle_path)
    formats = state.run_config().formats
    target = state.out_dir or Path(bundle_path if Path(bundle_path).is_dir() else Path(bundle_path).parent)
    write_bundle(bundle, target, formats, svg=False)
    out.print(f"[green]Re-rendered {len(bundle.table_names)} tables as {', '.join(formats)} in {target}[/green]")


if __name__ == "__main__":
    app()
