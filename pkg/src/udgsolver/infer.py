"""Constrained inference over classifier scores.

Three entry points: standalone graph prediction (vertex scores of rate
vertices plus scaled edge scores), expression tree scoring (scaled relevance
of unused quantities plus LCA-operation scores over used pairs), and joint
two-stage beam search over (graph, tree) tuples where the graph must be
consistent with the tree.

All scoring runs off immutable ScoreTables, so tests can drive inference
from hand-set mock tables and candidate scoring is safe to parallelize.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from . import exprtree, learn, udg
from .corpus import QUESTION, Problem
from .exprtree import Expr
from .learn import IRRELEVANT, RATE, ClassifierSuite
from .udg import EdgeType, UnitDependencyGraph

LAMBDA_GRID = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)

ANSWER_TOLERANCE = Fraction(1, 10**9)


class InferenceError(RuntimeError):
    """No admissible candidate exists for a problem."""


@dataclass(frozen=True)
class ScalingParams:
    """Scale factors for the score terms; zeroing vertex and edge scales
    reduces joint inference to the base tree solver."""

    lambda_udg: float = 1.0
    lambda_rel: float = 1.0
    lambda_vertex: float = 1.0
    lambda_edge: float = 1.0

    def __post_init__(self):
        for name in ("lambda_udg", "lambda_rel", "lambda_vertex", "lambda_edge"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class ScoreTables:
    """Raw classifier scores for one problem, keyed by query."""

    n_quantities: int
    vertex: Mapping[tuple[int, str], float]
    edge: Mapping[tuple[int, int, EdgeType], float]
    relevance: Mapping[tuple[int, str], float]
    lca: Mapping[tuple[int, int, str], float]

    def vertex_score(self, v: int, label: str) -> float:
        return self.vertex.get((v, label), 0.0)

    def edge_score(self, i: int, j: int, label: EdgeType) -> float:
        return self.edge.get((i, j, label), 0.0)

    def relevance_score(self, q: int, label: str) -> float:
        return self.relevance.get((q, label), 0.0)

    def lca_score(self, i: int, j: int, op: str) -> float:
        return self.lca.get((i, j, op), 0.0)


def build_score_tables(problem: Problem, suite: ClassifierSuite) -> ScoreTables:
    """Score every inference query once.

    LCA scores are shifted per pair so the pair's best operation scores zero
    and every other operation is negative (the margin analogue of a log
    probability). A tree then pays for each pair whose operation disagrees
    with the classifier and gains nothing from merely covering more pairs.
    Vertex and relevance scores are raw (their two-label weight tables are
    exact mirrors, so shifts would not change decisions), and edge scores are
    raw (every graph labels every pair, so per-pair shifts cancel).
    """
    n = problem.n
    config = suite.config
    vertex = {}
    for v in range(n + 1):
        fv = learn.vertex_features(problem, QUESTION if v == n else v, config)
        for label in learn.VERTEX_LABELS:
            vertex[(v, label)] = suite.vertex.score(fv, label)
    edge = {}
    for i, j in udg.vertex_pairs(n):
        fv = learn.edge_features(problem, i, QUESTION if j == n else j, config)
        for label in EdgeType:
            edge[(i, j, label)] = suite.edge.score(fv, label.value)
    relevance = {}
    for q in range(n):
        fv = learn.relevance_features(problem, q, config)
        for label in learn.RELEVANCE_LABELS:
            relevance[(q, label)] = suite.relevance.score(fv, label)
    lca = {}
    for i in range(n):
        for j in range(i + 1, n):
            fv = learn.lca_features(problem, i, j, config)
            raw = {op: suite.lca.score(fv, op) for op in learn.OP_LABELS}
            top = max(raw.values())
            for op, s in raw.items():
                lca[(i, j, op)] = s - top
    return ScoreTables(n, vertex, edge, relevance, lca)


# ---------------------------------------------------------------------------
# term sums

def tree_term_sums(tree: Expr, tables: ScoreTables) -> tuple[float, float]:
    """(irrelevance sum over unused quantities, LCA sum over used pairs)."""
    used = exprtree.used_indices(tree)
    rel_sum = 0.0
    for q in range(tables.n_quantities):
        if q not in used:
            rel_sum += tables.relevance_score(q, IRRELEVANT)
    lca_sum = 0.0
    ordered = sorted(used)
    for a, i in enumerate(ordered):
        for j in ordered[a + 1 :]:
            lca_sum += tables.lca_score(i, j, exprtree.op_lca(tree, i, j))
    return rel_sum, lca_sum


def graph_term_sums(graph: UnitDependencyGraph, tables: ScoreTables) -> tuple[float, float]:
    """(vertex sum over rate-labeled vertices, edge sum over all pairs)."""
    vertex_sum = 0.0
    for v in range(graph.n_quantities + 1):
        if graph.is_rate(v):
            vertex_sum += tables.vertex_score(v, RATE)
    edge_sum = 0.0
    for (i, j), label in zip(udg.vertex_pairs(graph.n_quantities), graph.edges):
        edge_sum += tables.edge_score(i, j, label)
    return vertex_sum, edge_sum


def score_tree(tree: Expr, tables: ScoreTables, params: ScalingParams) -> float:
    rel_sum, lca_sum = tree_term_sums(tree, tables)
    return params.lambda_rel * rel_sum + lca_sum


def score_udg(graph: UnitDependencyGraph, tables: ScoreTables, params: ScalingParams) -> float:
    """Rate-vertex scores plus lambda-scaled edge scores; not-rate vertices
    contribute nothing."""
    vertex_sum, edge_sum = graph_term_sums(graph, tables)
    return vertex_sum + params.lambda_udg * edge_sum


def values_match(predicted: Fraction, gold: Fraction, tolerance: Fraction = ANSWER_TOLERANCE) -> bool:
    return abs(Fraction(predicted) - Fraction(gold)) <= tolerance


# ---------------------------------------------------------------------------
# standalone graph prediction

_VALID_EDGES: dict[tuple[bool, bool], tuple[EdgeType, ...]] = {
    (li, lj): tuple(e for e in EdgeType if udg.edge_structurally_valid(e, li, lj))
    for li in (False, True)
    for lj in (False, True)
}


def _best_labeling_edges(
    tables: ScoreTables, labeling: tuple[bool, ...], lambda_edge_positive: bool = True
) -> tuple[float, tuple[EdgeType, ...]]:
    """Per-pair argmax over structurally valid edges for a fixed labeling.

    With a zero edge scale every label ties, so the first valid EdgeType is
    taken to keep the encoding lexicographically minimal."""
    n = tables.n_quantities
    total = 0.0
    chosen = []
    for i, j in udg.vertex_pairs(n):
        options = _VALID_EDGES[(labeling[i], labeling[j])]
        if not lambda_edge_positive:
            best = options[0]
        else:
            best = options[0]
            best_score = tables.edge_score(i, j, best)
            for label in options[1:]:
                s = tables.edge_score(i, j, label)
                if s > best_score:
                    best, best_score = label, s
        chosen.append(best)
        total += tables.edge_score(i, j, best)
    return total, tuple(chosen)


def _labeling_vertex_sum(tables: ScoreTables, labeling: tuple[bool, ...]) -> float:
    return sum(
        tables.vertex_score(v, RATE) for v, flag in enumerate(labeling) if flag
    )


def predict_udg_from_tables(
    tables: ScoreTables, params: ScalingParams, beam: int = 200
) -> UnitDependencyGraph:
    """Argmax of score_udg over structurally valid graphs.

    Exhaustive over vertex labelings for up to 6 vertices, beam search over
    labeling prefixes beyond; ties break toward the lexicographically
    smallest encoding."""
    n = tables.n_quantities
    if n + 1 <= 6:
        labelings: Iterator[tuple[bool, ...]] = itertools.product((False, True), repeat=n + 1)
    else:
        labelings = iter(_beam_labelings(tables, params, beam))
    best = None
    for labeling in labelings:
        vsum = _labeling_vertex_sum(tables, labeling)
        esum, edges = _best_labeling_edges(tables, labeling, params.lambda_udg > 0)
        total = vsum + params.lambda_udg * esum
        if best is None or total > best[0]:
            best = (total, labeling, edges)
    total, labeling, edges = best
    rates = frozenset(v for v, flag in enumerate(labeling) if flag)
    return UnitDependencyGraph(n_quantities=n, rates=rates, edges=edges)


def _beam_labelings(
    tables: ScoreTables, params: ScalingParams, beam: int
) -> list[tuple[bool, ...]]:
    n = tables.n_quantities
    states: list[tuple[bool, ...]] = [()]
    for v in range(n + 1):
        extended = [prefix + (flag,) for prefix in states for flag in (False, True)]

        def partial_score(prefix: tuple[bool, ...]) -> float:
            vsum = _labeling_vertex_sum(tables, prefix)
            esum = 0.0
            for i in range(len(prefix)):
                for j in range(i + 1, len(prefix)):
                    options = _VALID_EDGES[(prefix[i], prefix[j])]
                    esum += max(tables.edge_score(i, j, e) for e in options)
            return vsum + params.lambda_udg * esum

        extended.sort(key=lambda p: (-partial_score(p), p))
        states = extended[: max(beam, 1)]
    return states


def predict_udg(
    problem: Problem, suite: ClassifierSuite, params: ScalingParams | None = None, beam: int = 200
) -> UnitDependencyGraph:
    return predict_udg_from_tables(
        build_score_tables(problem, suite), params or ScalingParams(), beam
    )


# ---------------------------------------------------------------------------
# joint inference

@dataclass(frozen=True)
class ScoredTuple:
    """A consistent (tree, graph) pair with its score and raw term sums.

    score == lambda_rel*rel_sum + lca_sum + lambda_vertex*vertex_sum
    + lambda_edge*edge_sum under the params used to produce it."""

    tree: Expr
    graph: UnitDependencyGraph
    value: Fraction
    score: float
    rel_sum: float
    lca_sum: float
    vertex_sum: float
    edge_sum: float
    params: ScalingParams

    def breakdown(self) -> dict[str, float]:
        return {
            "rel_term": self.params.lambda_rel * self.rel_sum,
            "lca_term": self.lca_sum,
            "vertex_term": self.params.lambda_vertex * self.vertex_sum,
            "edge_term": self.params.lambda_edge * self.edge_sum,
        }


@dataclass(frozen=True)
class _LabelingEntry:
    labeling: tuple[bool, ...]
    vertex_sum: float
    edge_sum_max: float
    edges_max: tuple[EdgeType, ...]
    edge_sum_lex: float
    edges_lex: tuple[EdgeType, ...]


@dataclass(frozen=True)
class _TreeEntry:
    tree: Expr
    serial: str
    nodes: int
    rel_sum: float
    lca_sum: float
    labelings: tuple[_LabelingEntry, ...]


def _tree_labeling_entries(tree: Expr, tables: ScoreTables) -> tuple[_LabelingEntry, ...]:
    n = tables.n_quantities
    used = exprtree.used_indices(tree)
    pairs = udg.vertex_pairs(n)
    entries = []
    for labeling in itertools.product((False, True), repeat=n + 1):
        if not udg._labeling_passes_path_conditions(tree, used, n, labeling):
            continue
        vsum = _labeling_vertex_sum(tables, labeling)
        e_max = e_lex = 0.0
        edges_max: list[EdgeType] = []
        edges_lex: list[EdgeType] = []
        for i, j in pairs:
            pair_defined = i in used and (j == n or j in used)
            if pair_defined:
                options = udg.permitted_edge_labels(tree, i, j, labeling)
            else:
                options = _VALID_EDGES[(labeling[i], labeling[j])]
            best = options[0]
            best_score = tables.edge_score(i, j, best)
            for label in options[1:]:
                s = tables.edge_score(i, j, label)
                if s > best_score:
                    best, best_score = label, s
            edges_max.append(best)
            e_max += best_score
            edges_lex.append(options[0])
            e_lex += tables.edge_score(i, j, options[0])
        entries.append(
            _LabelingEntry(labeling, vsum, e_max, tuple(edges_max), e_lex, tuple(edges_lex))
        )
    return tuple(entries)


class JointCandidates:
    """Beam-pruned candidate trees with precomputed per-labeling graph sums.

    Building this once per problem lets lambda tuning and ablations re-solve
    cheaply: only the scalar mix changes across calls to solve()."""

    def __init__(
        self,
        tables: ScoreTables,
        values: Sequence[Fraction],
        lambda_rel: float = 1.0,
        beam: int | None = 200,
        max_irrelevant: int | None = None,
    ):
        if len(values) != tables.n_quantities:
            raise InferenceError("value list does not match score tables")
        self.tables = tables
        self.values = [Fraction(v) for v in values]
        scored = []
        for tree in exprtree.enumerate_trees(self.values, max_irrelevant):
            rel_sum, lca_sum = tree_term_sums(tree, tables)
            base = lambda_rel * rel_sum + lca_sum
            scored.append((base, tree, rel_sum, lca_sum))
        if not scored:
            raise InferenceError("no candidate expression trees with a positive value")
        scored.sort(
            key=lambda item: (-item[0], exprtree.node_count(item[1]), exprtree.serialize(item[1]))
        )
        if beam is not None:
            scored = scored[: max(int(beam), 1)]
        self.entries = tuple(
            _TreeEntry(
                tree=tree,
                serial=exprtree.serialize(tree),
                nodes=exprtree.node_count(tree),
                rel_sum=rel_sum,
                lca_sum=lca_sum,
                labelings=_tree_labeling_entries(tree, tables),
            )
            for _, tree, rel_sum, lca_sum in scored
        )

    def _candidates(self, params: ScalingParams) -> Iterator[tuple[tuple, _TreeEntry, _LabelingEntry, float, tuple[EdgeType, ...]]]:
        use_max = params.lambda_edge > 0
        for entry in self.entries:
            base = params.lambda_rel * entry.rel_sum + entry.lca_sum
            for lab in entry.labelings:
                esum = lab.edge_sum_max if use_max else lab.edge_sum_lex
                edges = lab.edges_max if use_max else lab.edges_lex
                total = base + params.lambda_vertex * lab.vertex_sum + params.lambda_edge * esum
                key = (
                    -total,
                    entry.nodes,
                    entry.serial,
                    lab.labeling,
                    tuple(udg.EDGE_ORDER[e] for e in edges),
                )
                yield key, entry, lab, esum, edges

    def solve(self, params: ScalingParams) -> ScoredTuple:
        best = None
        for cand in self._candidates(params):
            if best is None or cand[0] < best[0]:
                best = cand
        if best is None:
            raise InferenceError("no consistent (graph, tree) tuple exists")
        return self._build(best, params)

    def top_k(self, params: ScalingParams, k: int) -> list[ScoredTuple]:
        ranked = sorted(self._candidates(params), key=lambda c: c[0])
        return [self._build(c, params) for c in ranked[:k]]

    def _build(self, cand, params: ScalingParams) -> ScoredTuple:
        key, entry, lab, esum, edges = cand
        rates = frozenset(v for v, flag in enumerate(lab.labeling) if flag)
        graph = UnitDependencyGraph(self.tables.n_quantities, rates, edges)
        return ScoredTuple(
            tree=entry.tree,
            graph=graph,
            value=exprtree.evaluate(entry.tree, self.values),
            score=-key[0],
            rel_sum=entry.rel_sum,
            lca_sum=entry.lca_sum,
            vertex_sum=lab.vertex_sum,
            edge_sum=esum,
            params=params,
        )


def solve_joint_from_tables(
    tables: ScoreTables,
    values: Sequence[Fraction],
    params: ScalingParams | None = None,
    beam: int | None = 200,
    max_irrelevant: int | None = None,
) -> ScoredTuple:
    params = params or ScalingParams()
    candidates = JointCandidates(
        tables, values, lambda_rel=params.lambda_rel, beam=beam, max_irrelevant=max_irrelevant
    )
    return candidates.solve(params)


def solve_joint(
    problem: Problem,
    suite: ClassifierSuite,
    params: ScalingParams | None = None,
    beam: int | None = 200,
    max_irrelevant: int | None = None,
) -> ScoredTuple:
    """Two-stage joint inference: beam over trees by tree score, then the
    best consistent graph per surviving tree; returns the top tuple."""
    if not problem.quantities:
        raise InferenceError(f"problem {problem.id}: no quantities to solve with")
    tables = build_score_tables(problem, suite)
    return solve_joint_from_tables(
        tables, problem.values, params, beam=beam, max_irrelevant=max_irrelevant
    )


# ---------------------------------------------------------------------------
# scaling-parameter tuning

DEFAULT_TUNE_GRID: dict[str, tuple[float, ...]] = {
    "lambda_rel": LAMBDA_GRID,
    "lambda_vertex": LAMBDA_GRID,
    "lambda_edge": LAMBDA_GRID,
}


def tune_lambdas(
    train_problems: Sequence[Problem],
    dev_problems: Sequence[Problem],
    suite: ClassifierSuite,
    grid: Mapping[str, Sequence[float]] | None = None,
    beam: int | None = 200,
) -> ScalingParams:
    """Grid search maximizing dev solve accuracy; ties go to smaller lambdas.

    The suite should have been trained without the dev problems; retraining
    on train+dev after tuning is the evaluation harness's job.
    """
    if not dev_problems:
        raise ValueError("empty development set")
    grid = dict(DEFAULT_TUNE_GRID) | dict(grid or {})
    rel_values = tuple(grid["lambda_rel"])
    vertex_values = tuple(grid["lambda_vertex"])
    edge_values = tuple(grid["lambda_edge"])

    golds = []
    for p in dev_problems:
        if p.gold is None:
            raise ValueError(f"dev problem {p.id} has no gold answer")
        golds.append(p.gold.answer)

    tables = [build_score_tables(p, suite) for p in dev_problems]
    best: tuple[int, ScalingParams] | None = None
    for lam_rel in sorted(rel_values):
        candidates = [
            JointCandidates(t, p.values, lambda_rel=lam_rel, beam=beam)
            for t, p in zip(tables, dev_problems)
        ]
        for lam_vertex in sorted(vertex_values):
            for lam_edge in sorted(edge_values):
                params = ScalingParams(
                    lambda_rel=lam_rel, lambda_vertex=lam_vertex, lambda_edge=lam_edge
                )
                correct = 0
                for cand, gold in zip(candidates, golds):
                    if values_match(cand.solve(params).value, gold):
                        correct += 1
                if best is None or correct > best[0]:
                    best = (correct, params)
    return best[1]
