"""
End-to-end protocol run.

Stages execute in a fixed order on one immutable score matrix. Selection and
calibration only ever see train rows of the model being evaluated; everything
else runs on the non-train rows grouped into (dataset, model) evaluation pairs.
A stage that fails leaves a gap marker and the later stages carry on with
whatever they can still compute.
"""
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from aggregation.models import AggregationRule, RuleKind
from aggregation.utils import ENTROPY_BASE, aggregate, aggregate_rules, fit_logit_correction, rule_from_id
from calibration.calibrators import OPTIMIZER_SETTINGS, fit_calibrator, apply_calibrator
from calibration.selection import locked_random_prompt, rank_prompts, select_prompt
from core.settings import VERSION
from core.utils.decorators import is_gap, with_stage
from core.utils.error_handling_standerizer import EmptySplitError, UndefinedMetricError, ValidationError
from core.utils.rng import GENERATOR_ID
from core.utils.utility_files import content_hash, dumps_json, get_logger, iter_lines
from metrics.fragility import decile_gaps, fragility_profile
from metrics.models import StatKind, primary_ece
from metrics.utils import evaluate, reliability_bins
from protocols.bootstrap import bootstrap_delta, bootstrap_metrics
from protocols.comparisons import ece_robustness, family_ablation, head_to_head, single_prompt_distribution, top_k_frontier
from protocols.prevalence import prevalence_stress
from protocols.selective import risk_coverage, selective_summary, selective_targets, uncertainty
from protocols.sweep import pair_label, sweep_rules
from scores.models import PromptScoreMatrix
from scores.serializers import parse_scores_jsonl, serialize_scores_jsonl
from scores.utils import evaluation_pairs, train_view_for_model
from .models import ReportBundle, RunConfig

logger = get_logger(__name__)

MEAN_PROB = AggregationRule(kind=RuleKind.MEAN_PROB)
SELECTED = "selected_single"
RANDOM = "random_single"
MEAN = MEAN_PROB.rule_id

# Conventions recorded with every report
DESIGN_FLAGS = {
    "entropy_base": ENTROPY_BASE,
    "std_convention": "population",
    "retention_rounding": "half_up",
    "ece_bin_index": "min(floor(p*B), B-1)",
    "equal_mass_ties": "sample_index",
    "auprc": "average_precision_step",
    "bootstrap_percentile": "linear",
    "bootstrap_delta": "baseline_minus_candidate",
    "bootstrap_baseline": SELECTED,
    "bootstrap_candidate": MEAN,
    "selective_base_predictor": MEAN,
    "selection_ties": "exact_equality",
    "probability_clip": "epsilon",
}


class PipelineContext:
    """Mutable run state shared by the stages."""

    def __init__(self, matrix: PromptScoreMatrix, config: RunConfig):
        self.matrix = matrix
        self.config = config
        self.protocol = config.protocol
        self.pairs = evaluation_pairs(matrix)
        self.models = list(dict.fromkeys(matrix.models))
        self.selection: Dict[str, Dict] = {}
        self.stats: Dict[Hashable, object] = {}
        self.scores: Dict[Hashable, Dict[str, np.ndarray]] = {}
        self.tables: Dict[str, List[Dict]] = {}
        self.calibrated: List[str] = []
        self.gaps: Dict[str, Dict] = {}
        self.completed: List[str] = []

    def require(self, *stages: str):
        for stage in stages:
            if stage not in self.completed:
                raise ValidationError(f"needs the '{stage}' stage, which did not complete", requires=stage)

    def require_pairs(self):
        if not self.pairs:
            raise EmptySplitError("no test or external rows to evaluate", split="test")

    def rules(self) -> List[AggregationRule]:
        return [rule_from_id(rule_id, self.protocol.trim_fraction) for rule_id in self.config.rules]

    def train_stats(self, model: str):
        """Correction stats fitted on the model's train rows, when configured"""
        if self.config.correction_stats != "train":
            return None
        return fit_logit_correction(train_view_for_model(self.matrix, model), self.protocol.epsilon)


def _pair_fields(key) -> Dict[str, str]:
    dataset, model = key
    return {"dataset": dataset, "model": model}


# ============================================================================
# STAGES
# ============================================================================

@with_stage("select")
def stage_select(ctx: PipelineContext):
    """Lock the selected and random single prompts per model on its train rows."""
    rows = []
    for model in ctx.models:
        train = train_view_for_model(ctx.matrix, model)
        result = select_prompt(train, ctx.protocol)
        ctx.selection[model] = {
            "selected": result.selected_prompt_id,
            "random": locked_random_prompt(ctx.config.random_seed, train.n_prompts),
            "ranking": rank_prompts(train, ctx.protocol),
        }
        rows.append({
            "model": model,
            "n_train": train.n_samples,
            "selected_prompt": result.selected_prompt_id,
            "random_prompt": ctx.selection[model]["random"],
            "criteria_trail": " > ".join(f"{name}:{ids}" for name, ids in result.criteria_trail),
        })
    ctx.tables["selection"] = rows


@with_stage("aggregate")
def stage_aggregate(ctx: PipelineContext):
    ctx.require_pairs()
    rules = ctx.rules()
    if MEAN not in [rule.rule_id for rule in rules]:
        rules.insert(0, MEAN_PROB)
    for key, pair in ctx.pairs.items():
        needs_stats = any(rule.kind.needs_stats for rule in rules)
        ctx.stats[key] = ctx.train_stats(key[1]) if needs_stats else None
        ctx.scores[key] = aggregate_rules(pair, rules, ctx.stats[key], ctx.protocol.epsilon)


@with_stage("calibrate")
def stage_calibrate(ctx: PipelineContext):
    """Fit every calibrator on train rows, on the selected prompt and on the mean ensemble."""
    ctx.require("select", "aggregate")
    rows = []
    fitted = {}
    for model in ctx.models:
        train = train_view_for_model(ctx.matrix, model)
        bases = {
            "selected": train.column(ctx.selection[model]["selected"]),
            "mean": aggregate(train, MEAN_PROB),
        }
        for kind in ctx.config.calibrators:
            for base, scores in bases.items():
                cal = fit_calibrator(kind, scores, train.y)
                fitted[(model, base, kind)] = cal
                rows.append({
                    "model": model,
                    "base": base,
                    "kind": kind,
                    "parameters": dumps_json(cal.to_json()).decode("utf-8"),
                    "inverted": cal.inverted,
                })
    for key, pair in ctx.pairs.items():
        model = key[1]
        bases = {"selected": pair.column(ctx.selection[model]["selected"]), "mean": ctx.scores[key][MEAN]}
        for (cal_model, base, kind), cal in fitted.items():
            if cal_model == model:
                name = f"{kind}_{base}"
                ctx.scores[key][name] = apply_calibrator(cal, bases[base], ctx.protocol.epsilon)
                if name not in ctx.calibrated:
                    ctx.calibrated.append(name)
    ctx.tables["calibrators"] = rows


@with_stage("metrics")
def stage_metrics(ctx: PipelineContext):
    ctx.require("select", "aggregate")
    main, distribution, robustness, bins = [], [], [], []
    spec = primary_ece(ctx.protocol)
    for key, pair in ctx.pairs.items():
        y = pair.y
        chosen = ctx.selection[key[1]]
        methods = {
            SELECTED: pair.column(chosen["selected"]),
            RANDOM: pair.column(chosen["random"]),
            MEAN: ctx.scores[key][MEAN],
        }
        methods.update({name: ctx.scores[key][name] for name in ctx.calibrated if name in ctx.scores[key]})
        for method, scores in methods.items():
            report = evaluate(scores, y, config=ctx.protocol)
            main.append({**_pair_fields(key), "method": method, **report.as_row(), "n": report.n})
        for metric in ("nll", spec.metric_id, "auroc", "auprc"):
            try:
                distribution.append({**_pair_fields(key), **single_prompt_distribution(pair, metric, ctx.protocol)})
            except UndefinedMetricError as e:
                logger.warning(f"[METRICS] {pair_label(key)}: {metric} skipped ({e.message})")
        for row in ece_robustness(methods[SELECTED], methods[MEAN], y):
            robustness.append({**_pair_fields(key), **row})
        for method in (SELECTED, MEAN):
            frame = reliability_bins(methods[method], y, spec)
            bins.extend({**_pair_fields(key), "method": method, **row} for row in frame.to_dict("records"))

    ctx.tables["main_comparison"] = main
    ctx.tables["single_prompt_distribution"] = distribution
    ctx.tables["ece_robustness"] = robustness
    ctx.tables["reliability_bins"] = bins

    calibrated = sorted({row["method"] for row in main} - {SELECTED, RANDOM, MEAN})
    if calibrated:
        rows = []
        for metric in ("nll", spec.metric_id):
            values = _pivot(main, metric)
            rows.extend(head_to_head(values, MEAN, calibrated, metric).to_dict("records"))
        ctx.tables["calibration_head_to_head"] = rows


def _pivot(main: Sequence[Dict], metric: str):
    frame = pd.DataFrame.from_records(main)
    frame["pair"] = frame["dataset"] + "/" + frame["model"]
    return frame.pivot(index="pair", columns="method", values=metric)


@with_stage("sweep")
def stage_sweep(ctx: PipelineContext):
    ctx.require_pairs()
    rules = ctx.rules()
    stats = None
    if ctx.config.correction_stats == "train" and any(rule.kind.needs_stats for rule in rules):
        stats = {key: ctx.train_stats(key[1]) for key in ctx.pairs}
    result = sweep_rules(ctx.pairs, rules, stats, ctx.protocol)
    ctx.tables["rule_sweep"] = result.to_frame().to_dict("records")


@with_stage("ablation")
def stage_ablation(ctx: PipelineContext):
    """Top-k frontier and per-family analysis, prompts ranked on train rows."""
    ctx.require_pairs()
    frontier, families = [], []
    for key, pair in ctx.pairs.items():
        train = train_view_for_model(ctx.matrix, key[1])
        frontier.extend({**_pair_fields(key), **row}
                        for row in top_k_frontier(train, pair, "nll", ctx.protocol).to_dict("records"))
        families.extend({**_pair_fields(key), **row}
                        for row in family_ablation(train, pair, ctx.protocol).to_dict("records"))
    ctx.tables["top_k_frontier"] = frontier
    ctx.tables["family_ablation"] = families


@with_stage("fragility")
def stage_fragility(ctx: PipelineContext):
    ctx.require_pairs()
    deciles, gaps = [], []
    for key, pair in ctx.pairs.items():
        profile = fragility_profile(pair, ctx.protocol.threshold)
        if profile.decile_summary is None:
            logger.warning(f"[FRAGILITY] {pair_label(key)}: fewer than 10 samples, skipped")
            continue
        deciles.extend({**_pair_fields(key), **row} for row in profile.decile_summary.to_dict("records"))
        for stat in StatKind:
            gap = decile_gaps(profile, stat)
            gaps.append({**_pair_fields(key), "stat": stat.value, "d1": gap.d1, "d10": gap.d10, "gap": gap.gap})
    ctx.tables["fragility_deciles"] = deciles
    ctx.tables["fragility_gaps"] = gaps


@with_stage("selective")
def stage_selective(ctx: PipelineContext):
    """Risk-coverage curves of the mean score under each uncertainty signal."""
    ctx.require_pairs()
    ctx.require("aggregate")
    coverage, aurc_rows, all_curves = [], [], {}
    for key, pair in ctx.pairs.items():
        chosen = ctx.selection.get(key[1])
        curves = {}
        for signal in ctx.config.signals:
            if signal == "margin_single" and chosen is None:
                logger.warning(f"[SELECTIVE] {pair_label(key)}: margin_single needs a selected prompt, skipped")
                continue
            values = uncertainty(pair, chosen["selected"] if chosen else None, signal)
            curve = risk_coverage(ctx.scores[key][MEAN], pair.y, values, config=ctx.protocol)
            curves[signal] = curve
            coverage.extend({**_pair_fields(key), "signal": signal, **row} for row in curve.to_frame().to_dict("records"))
            aurc_rows.extend({**_pair_fields(key), "signal": signal, "target": target, "value": value}
                             for target, value in selective_targets(curve).items())
        all_curves[key] = curves
    ctx.tables["coverage_curves"] = coverage
    ctx.tables["selective_aurc"] = aurc_rows
    ctx.tables["selective_wins"] = [
        {"target": target, **row}
        for target, table in selective_summary(all_curves).items()
        for row in table.to_frame().drop(columns=["metric"]).to_dict("records")
    ]


@with_stage("bootstrap")
def stage_bootstrap(ctx: PipelineContext):
    ctx.require("select", "aggregate")
    rows = []
    for key, pair in ctx.pairs.items():
        baseline = pair.column(ctx.selection[key[1]]["selected"])
        for metric in bootstrap_metrics(ctx.protocol):
            result = bootstrap_delta(baseline, ctx.scores[key][MEAN], pair.y, metric,
                                     n_jobs=ctx.config.n_jobs, config=ctx.protocol)
            rows.append({**_pair_fields(key), "baseline": SELECTED, "candidate": MEAN, **result.as_row()})
        logger.info(f"[BOOTSTRAP] {pair_label(key)} done")
    ctx.tables["bootstrap"] = rows


@with_stage("prevalence")
def stage_prevalence(ctx: PipelineContext):
    ctx.require("select", "aggregate")
    rows = []
    for key, pair in ctx.pairs.items():
        baseline = pair.column(ctx.selection[key[1]]["selected"])
        results = prevalence_stress(
            baseline, ctx.scores[key][MEAN], pair.y,
            refit_weights=ctx.config.refit_prevalence_weights,
            n_jobs=ctx.config.n_jobs, config=ctx.protocol,
        )
        rows.extend({**_pair_fields(key), "baseline": SELECTED, "candidate": MEAN, **r.as_row()} for r in results)
    ctx.tables["prevalence_stress"] = rows


STAGES = {
    "select": stage_select,
    "aggregate": stage_aggregate,
    "calibrate": stage_calibrate,
    "metrics": stage_metrics,
    "sweep": stage_sweep,
    "ablation": stage_ablation,
    "fragility": stage_fragility,
    "selective": stage_selective,
    "bootstrap": stage_bootstrap,
    "prevalence": stage_prevalence,
}


# ============================================================================
# RUN
# ============================================================================

def run_pipeline(matrix: PromptScoreMatrix, config: RunConfig,
                 stages: Optional[Iterable[str]] = None) -> PipelineContext:
    """Run the enabled stages in order and collect tables and gap markers."""
    ctx = PipelineContext(matrix, config)
    enabled = config.stages.enabled() if stages is None else [s for s in STAGES if s in set(stages)]
    for name in enabled:
        result = STAGES[name](ctx)
        if is_gap(result):
            ctx.gaps[name] = result["gap"]
        else:
            ctx.completed.append(name)
    logger.info(f"[RUN] completed {ctx.completed}; gaps {sorted(ctx.gaps)}")
    return ctx


def build_bundle(ctx: PipelineContext) -> ReportBundle:
    config = ctx.config
    metadata = {
        "tool": "promptcal",
        "version": VERSION,
        "config_hash": config.config_hash(),
        "config": config.model_dump(mode="json"),
        "input_hash": content_hash(list(serialize_scores_jsonl(ctx.matrix))),
        "n_samples": ctx.matrix.n_samples,
        "n_prompts": ctx.matrix.n_prompts,
        "pairs": [pair_label(key) for key in ctx.pairs],
        "generator": GENERATOR_ID,
        "bootstrap_seed": config.protocol.bootstrap_seed,
        "random_prompt_seed": config.random_seed,
        "decisions": {
            **DESIGN_FLAGS,
            "correction_stats": config.correction_stats,
            "primary_ece": primary_ece(config.protocol).metric_id,
            "prevalence_weights": "refit" if config.refit_prevalence_weights else "fixed",
        },
        "optimizers": OPTIMIZER_SETTINGS,
        "stages_completed": ctx.completed,
    }
    return ReportBundle(metadata=metadata, tables=ctx.tables, gaps=ctx.gaps)


def load_matrix(inputs: Sequence[Path]) -> PromptScoreMatrix:
    """Parse one or more JSONL artifacts as a single matrix"""
    if not inputs:
        raise ValidationError("no input artifacts given")
    return parse_scores_jsonl(iter_lines(inputs))


def cmd_run(config: RunConfig, inputs: Sequence[Path], out_dir: Optional[Path] = None) -> ReportBundle:
    """Ingest, run every enabled stage, and (with `out_dir`) write the report files."""
    from .emitters import write_bundle

    matrix = load_matrix(inputs)
    logger.info(f"[RUN] {matrix.n_samples} samples x {matrix.n_prompts} prompts, config {config.config_hash()[:12]}")
    bundle = build_bundle(run_pipeline(matrix, config))
    if out_dir is not None:
        write_bundle(bundle, out_dir, config.formats, svg=config.svg)
    return bundle
