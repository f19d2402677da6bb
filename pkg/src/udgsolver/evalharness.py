"""Cross-validation evaluation harness.

Per fold: train the classifier suite on the training split minus its dev
slice, tune scaling parameters on dev, retrain on the full training split,
then solve the held-out test problems. Reports solve accuracy for the full
system and its lambda ablations, graph-prediction metrics against derived
(noisy) gold, and classifier accuracies under feature-family ablations.
Fixed seeds make the report byte-identical across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from . import annotate, corpus, infer, learn, udg
from .corpus import Problem
from .infer import JointCandidates, ScalingParams, build_score_tables, values_match
from .learn import NOT_RATE, RATE, ClassifierSuite, FeatureConfig

SOLVE_VARIANTS = ("full", "no_vertex", "no_edge", "base")
FEATURE_VARIANTS = ("all_features", "no_rule_features", "no_context_features")


@dataclass(frozen=True)
class RunConfig:
    """Defaults reproduce the standard protocol: 5 folds, 20% dev, beam 200."""

    seed: int = 0
    folds: int = 5
    dev_fraction: float = 0.2
    beam: int | None = 200
    epochs: int = 10
    context_features: bool = True
    rule_features: bool = True
    lambda_grid: Mapping[str, Sequence[float]] | None = None
    fixed_lambda_vertex: float | None = None
    fixed_lambda_edge: float | None = None

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            context_features=self.context_features, rule_features=self.rule_features
        )

    def tune_grid(self) -> dict[str, Sequence[float]]:
        grid = dict(self.lambda_grid or {})
        if self.fixed_lambda_vertex is not None:
            grid["lambda_vertex"] = (self.fixed_lambda_vertex,)
        if self.fixed_lambda_edge is not None:
            grid["lambda_edge"] = (self.fixed_lambda_edge,)
        return grid


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_size: int
    params: dict[str, float]
    solve_correct: dict[str, int]
    solve_accuracy: dict[str, float]
    udg_exact_accuracy: float
    vertex_accuracy: dict[str, float]
    edge_accuracy: dict[str, float]


@dataclass(frozen=True)
class EvalReport:
    config: dict
    folds: tuple[FoldResult, ...]
    aggregate: dict
    per_problem: dict[str, dict]

    def to_json(self) -> str:
        obj = {
            "config": self.config,
            "folds": [vars(f) | {"fold": f.fold} for f in self.folds],
            "aggregate": self.aggregate,
            "per_problem": self.per_problem,
        }
        return json.dumps(obj, sort_keys=True, indent=1)

    def to_text(self) -> str:
        lines = []
        fold_ids = [f"fold{f.fold}" for f in self.folds]
        header = ["system"] + fold_ids + ["mean"]
        rows = []
        for variant in SOLVE_VARIANTS:
            row = [variant]
            row += [f"{f.solve_accuracy[variant]:.3f}" for f in self.folds]
            row += [f"{self.aggregate['solve_accuracy'][variant]:.3f}"]
            rows.append(row)
        lines.append("solve accuracy")
        lines.extend(_table(header, rows))
        lines.append("")
        lines.append("graph prediction (vs derived gold)")
        rows = [
            ["udg_exact"]
            + [f"{f.udg_exact_accuracy:.3f}" for f in self.folds]
            + [f"{self.aggregate['udg_exact_accuracy']:.3f}"]
        ]
        lines.extend(_table(header, rows))
        lines.append("")
        for name, accessor in (("vertex", "vertex_accuracy"), ("edge", "edge_accuracy")):
            lines.append(f"{name} classifier accuracy")
            rows = []
            for variant in FEATURE_VARIANTS:
                row = [variant]
                row += [f"{getattr(f, accessor)[variant]:.3f}" for f in self.folds]
                row += [f"{self.aggregate[accessor][variant]:.3f}"]
                rows.append(row)
            lines.extend(_table(header, rows))
            lines.append("")
        return "\n".join(lines)

    def subset_accuracy(self, ids: Sequence[str], variant: str = "full") -> float:
        hits = [self.per_problem[i]["correct"][variant] for i in ids]
        if not hits:
            raise ValueError("empty subset")
        return sum(hits) / len(hits)


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(str(r[c])) for r in [header] + rows) for c in range(len(header))]
    out = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        out.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    return out


def _variant_params(tuned: ScalingParams) -> dict[str, ScalingParams]:
    return {
        "full": tuned,
        "no_vertex": replace(tuned, lambda_vertex=0.0),
        "no_edge": replace(tuned, lambda_edge=0.0),
        "base": replace(tuned, lambda_vertex=0.0, lambda_edge=0.0),
    }


def _classifier_metrics(
    suite: ClassifierSuite, test: Sequence[Problem]
) -> tuple[float, float]:
    """Raw per-vertex and per-pair classifier accuracy against derived gold."""
    v_hit = v_total = e_hit = e_total = 0
    for p in test:
        derived = annotate.derive_udg_gold(p)
        for v in range(p.n + 1):
            fv = learn.vertex_features(p, corpus.QUESTION if v == p.n else v, suite.config)
            gold = RATE if derived.vertex_labels[v] else NOT_RATE
            v_hit += suite.vertex.predict(fv) == gold
            v_total += 1
        for (i, j), gold_edge in zip(udg.vertex_pairs(p.n), derived.edges):
            fv = learn.edge_features(p, i, corpus.QUESTION if j == p.n else j, suite.config)
            e_hit += suite.edge.predict(fv) == gold_edge.value
            e_total += 1
    return v_hit / v_total, e_hit / e_total


def run_eval(problems: Sequence[Problem], config: RunConfig = RunConfig()) -> EvalReport:
    for p in problems:
        if p.gold is None or p.gold.tree is None:
            raise corpus.CorpusError(f"problem {p.id}: evaluation needs gold answers and trees")
    by_id = {p.id: p for p in problems}
    split = corpus.make_folds(problems, config.folds, config.seed, config.dev_fraction)
    feature_config = config.feature_config()

    fold_results = []
    per_problem: dict[str, dict] = {}
    for fold in range(config.folds):
        train_ids, dev_ids, test_ids = split.train_dev_test(fold)
        train = [by_id[i] for i in train_ids]
        dev = [by_id[i] for i in dev_ids]
        test = [by_id[i] for i in test_ids]

        tuning_suite = learn.train_suite(train, feature_config, config.epochs, config.seed)
        tuned = infer.tune_lambdas(
            train, dev, tuning_suite, grid=config.tune_grid(), beam=config.beam
        )
        suite = learn.train_suite(train + dev, feature_config, config.epochs, config.seed)
        variants = _variant_params(tuned)

        correct = {v: 0 for v in SOLVE_VARIANTS}
        udg_exact = 0
        for p in test:
            tables = build_score_tables(p, suite)
            candidates = JointCandidates(
                tables, p.values, lambda_rel=tuned.lambda_rel, beam=config.beam
            )
            record = {"fold": fold, "correct": {}}
            for name, params in variants.items():
                result = candidates.solve(params)
                hit = values_match(result.value, p.gold.answer)
                correct[name] += hit
                record["correct"][name] = bool(hit)
            per_problem[p.id] = record
            predicted = infer.predict_udg_from_tables(tables, ScalingParams(), beam=config.beam or 200)
            udg_exact += predicted == annotate.derive_udg_gold(p).to_graph()

        vertex_acc = {}
        edge_acc = {}
        for variant in FEATURE_VARIANTS:
            if variant == "all_features":
                variant_suite = suite
            else:
                variant_config = replace(
                    feature_config,
                    rule_features=variant != "no_rule_features",
                    context_features=variant != "no_context_features",
                )
                variant_suite = learn.train_suite(
                    train + dev, variant_config, config.epochs, config.seed
                )
            v_acc, e_acc = _classifier_metrics(variant_suite, test)
            vertex_acc[variant] = v_acc
            edge_acc[variant] = e_acc

        fold_results.append(
            FoldResult(
                fold=fold,
                test_size=len(test),
                params={
                    "lambda_rel": tuned.lambda_rel,
                    "lambda_vertex": tuned.lambda_vertex,
                    "lambda_edge": tuned.lambda_edge,
                },
                solve_correct=dict(correct),
                solve_accuracy={v: correct[v] / len(test) for v in SOLVE_VARIANTS},
                udg_exact_accuracy=udg_exact / len(test),
                vertex_accuracy=vertex_acc,
                edge_accuracy=edge_acc,
            )
        )

    n_folds = len(fold_results)
    aggregate = {
        "solve_accuracy": {
            v: sum(f.solve_accuracy[v] for f in fold_results) / n_folds for v in SOLVE_VARIANTS
        },
        "udg_exact_accuracy": sum(f.udg_exact_accuracy for f in fold_results) / n_folds,
        "vertex_accuracy": {
            v: sum(f.vertex_accuracy[v] for f in fold_results) / n_folds
            for v in FEATURE_VARIANTS
        },
        "edge_accuracy": {
            v: sum(f.edge_accuracy[v] for f in fold_results) / n_folds
            for v in FEATURE_VARIANTS
        },
        "test_total": sum(f.test_size for f in fold_results),
    }
    config_obj = {
        "seed": config.seed,
        "folds": config.folds,
        "dev_fraction": config.dev_fraction,
        "beam": config.beam,
        "epochs": config.epochs,
        "context_features": config.context_features,
        "rule_features": config.rule_features,
    }
    return EvalReport(
        config=config_obj,
        folds=tuple(fold_results),
        aggregate=aggregate,
        per_problem=per_problem,
    )
