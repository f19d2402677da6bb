"""Unit dependency graphs and their coupling to expression trees.

A graph over a problem with n quantities has n+1 vertices (the question is
vertex n). Vertices are labeled rate / not-rate; every unordered vertex pair
carries exactly one edge type, with NoRelation encoding absence. Directed
rate edges point from the rate vertex: in ``Rate->Num`` the lower-index
vertex is the rate and its numerator unit matches the other vertex's unit;
``Rate<-Num`` is the mirror image, and likewise for Den.

Edge labels are tied to a tree by unit algebra. Writing a rate as r[A per B],
the three multiplicative configurations all express r = y / x with y carrying
unit A and x carrying unit B:

    r * x = y      (x matches Den, the product matches Num)
    y / r = x      (the dividend matches Num, the quotient matches Den)
    y / x = r      (the dividend matches Num, the divisor matches Den)

``edge_label`` determines an edge exactly when the pair's vertex labels agree
and their tree path has no multiplicative node (SameUnit), or when the labels
differ and the path has exactly one multiplicative node sitting in one of the
three configurations above. Everything else is undetermined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

from . import exprtree
from .corpus import QUESTION
from .exprtree import DIV, MUL, Expr, base_op, is_reversed


class UdgError(ValueError):
    """Structurally invalid graph or graph/tree mismatch."""


class EdgeType(Enum):
    SAME_UNIT = "SameUnit"
    NO_RELATION = "NoRelation"
    NUM_FWD = "Rate->Num"
    NUM_REV = "Rate<-Num"
    DEN_FWD = "Rate->Den"
    DEN_REV = "Rate<-Den"


EDGE_ORDER = {e: i for i, e in enumerate(EdgeType)}

# directed rate edges and which endpoint must be the rate (0 = lower index)
_RATE_SOURCE_SIDE = {
    EdgeType.NUM_FWD: 0,
    EdgeType.DEN_FWD: 0,
    EdgeType.NUM_REV: 1,
    EdgeType.DEN_REV: 1,
}


def edge_structurally_valid(label: EdgeType, vi_rate: bool, vj_rate: bool) -> bool:
    """Directed rate edges need a rate-labeled source vertex."""
    if label in (EdgeType.NUM_FWD, EdgeType.DEN_FWD):
        return vi_rate
    if label in (EdgeType.NUM_REV, EdgeType.DEN_REV):
        return vj_rate
    return True


@lru_cache(maxsize=None)
def vertex_pairs(n_quantities: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(n_quantities + 1), 2))


@lru_cache(maxsize=None)
def _pair_index(n_quantities: int) -> dict[tuple[int, int], int]:
    return {p: i for i, p in enumerate(vertex_pairs(n_quantities))}


@dataclass(frozen=True)
class UnitDependencyGraph:
    """n+1 vertices with rate labels plus one EdgeType per vertex pair."""

    n_quantities: int
    rates: frozenset[int]
    edges: tuple[EdgeType, ...]  # aligned with vertex_pairs(n_quantities)

    def __post_init__(self):
        pairs = vertex_pairs(self.n_quantities)
        if len(self.edges) != len(pairs):
            raise UdgError(f"expected {len(pairs)} edges, got {len(self.edges)}")
        for v in self.rates:
            if not 0 <= v <= self.n_quantities:
                raise UdgError(f"rate vertex {v} out of range")
        rates = self.rates
        for (i, j), label in zip(pairs, self.edges):
            side = _RATE_SOURCE_SIDE.get(label)
            if side is not None and (j if side else i) not in rates:
                raise UdgError(f"edge {label.value} between {i} and {j} needs a rate source")

    @classmethod
    def from_edge_map(
        cls,
        n_quantities: int,
        rates: frozenset[int] | set[int],
        edge_map: Mapping[tuple[int, int], EdgeType],
    ) -> "UnitDependencyGraph":
        edges = tuple(
            edge_map.get(pair, EdgeType.NO_RELATION) for pair in vertex_pairs(n_quantities)
        )
        return cls(n_quantities, frozenset(rates), edges)

    def is_rate(self, v: int) -> bool:
        return v in self.rates

    def edge(self, i: int, j: int) -> EdgeType:
        if i > j:
            i, j = j, i
        return self.edges[_pair_index(self.n_quantities)[(i, j)]]

    @property
    def sort_key(self) -> tuple:
        labeling = tuple(v in self.rates for v in range(self.n_quantities + 1))
        return (labeling, tuple(EDGE_ORDER[e] for e in self.edges))

    def to_json_obj(self) -> dict:
        return {
            "rates": sorted(self.rates),
            "edges": [
                [i, j, label.value]
                for (i, j), label in zip(vertex_pairs(self.n_quantities), self.edges)
                if label is not EdgeType.NO_RELATION
            ],
        }

    @classmethod
    def from_json_obj(cls, n_quantities: int, obj: dict) -> "UnitDependencyGraph":
        edge_map = {(i, j): EdgeType(label) for i, j, label in obj.get("edges", [])}
        return cls.from_edge_map(n_quantities, frozenset(obj.get("rates", [])), edge_map)


# ---------------------------------------------------------------------------
# tree paths

_RESULT, _OPERAND, _DIVIDEND, _DIVISOR = "result", "operand", "dividend", "divisor"


def _port(node: exprtree.Op, walk: list[tuple[exprtree.Op, bool]]) -> str:
    """How an endpoint attaches to ``node``: through a child, or from above."""
    for n, went_left in walk:
        if n is node:
            if base_op(node.op) == MUL:
                return _OPERAND
            dividend_is_left = not is_reversed(node.op)
            return _DIVIDEND if went_left == dividend_is_left else _DIVISOR
    return _RESULT


@dataclass(frozen=True)
class _PathData:
    ops: tuple[str, ...]
    muldiv_count: int
    # (base op, port of vi, port of vj) when exactly one multiplicative node
    single: tuple[str, str, str] | None


@lru_cache(maxsize=None)
def _path_data(tree: Expr, vi: int, vj: int | str) -> _PathData:
    walk_i = exprtree.root_path(tree, vi)
    if vj == QUESTION:
        nodes = [n for n, _ in walk_i]
        walk_j: list[tuple[exprtree.Op, bool]] = []
    else:
        walk_j = exprtree.root_path(tree, vj)
        k = 0
        while k < len(walk_i) and k < len(walk_j) and walk_i[k][0] is walk_j[k][0]:
            k += 1
        nodes = [n for n, _ in walk_i[k - 1 :]] + [n for n, _ in walk_j[k:]]
    ops = tuple(n.op for n in nodes)
    muldivs = [n for n in nodes if base_op(n.op) in (MUL, DIV)]
    single = None
    if len(muldivs) == 1:
        m = muldivs[0]
        single = (base_op(m.op), _port(m, walk_i), _port(m, walk_j))
    return _PathData(ops=ops, muldiv_count=len(muldivs), single=single)


def path(tree: Expr, vi: int | str, vj: int | str) -> frozenset[str]:
    """Operations on the tree path between two vertices.

    For two quantities this is the leaf-to-leaf path; with the question it is
    the leaf-to-root path. Symmetric in its arguments; raises if a quantity
    vertex is unused in the tree.
    """
    if vi == QUESTION and vj == QUESTION:
        raise UdgError("path needs at least one quantity vertex")
    if vi == QUESTION:
        vi, vj = vj, vi
    try:
        return frozenset(_path_data(tree, vi, vj).ops)
    except exprtree.ExprError as exc:
        raise UdgError(str(exc)) from exc


# ---------------------------------------------------------------------------
# edge labeling (tree-determined edges)

# rate port -> {other port -> Num/Den}: the three unit-consistent placements
_RATE_RULES: dict[tuple[str, str], dict[str, str]] = {
    (MUL, _OPERAND): {_OPERAND: "den", _RESULT: "num"},
    (DIV, _DIVISOR): {_DIVIDEND: "num", _RESULT: "den"},
    (DIV, _RESULT): {_DIVIDEND: "num", _DIVISOR: "den"},
}

_EDGE_FOR = {
    ("num", True): EdgeType.NUM_FWD,
    ("num", False): EdgeType.NUM_REV,
    ("den", True): EdgeType.DEN_FWD,
    ("den", False): EdgeType.DEN_REV,
}


@lru_cache(maxsize=200_000)
def _edge_label_cached(tree: Expr, vi: int, vj: int, li: bool, lj: bool, n: int) -> EdgeType | None:
    try:
        data = _path_data(tree, vi, QUESTION if vj == n else vj)
    except exprtree.ExprError as exc:
        raise UdgError(str(exc)) from exc
    if li == lj:
        return EdgeType.SAME_UNIT if data.muldiv_count == 0 else None
    if data.muldiv_count != 1:
        return None
    op, port_i, port_j = data.single
    rate_is_vi = li
    rate_port, other_port = (port_i, port_j) if rate_is_vi else (port_j, port_i)
    kind = _RATE_RULES.get((op, rate_port), {}).get(other_port)
    if kind is None:
        return None
    return _EDGE_FOR[(kind, rate_is_vi)]


def edge_label(
    tree: Expr, vi: int, vj: int, vlabels: Sequence[bool]
) -> EdgeType | None:
    """Tree-determined edge between vertices vi < vj, or None when no label
    is forced.

    ``vlabels`` maps every vertex (index n = question) to its rate flag. Same
    labels across a purely additive path force SameUnit; one rate across a
    single multiplicative node forces the Num/Den edge given by the rate's
    placement (see module docstring). Anything else is undetermined.
    """
    n = len(vlabels) - 1
    if not 0 <= vi < vj <= n:
        raise UdgError(f"need vertex pair vi < vj within 0..{n}, got ({vi}, {vj})")
    return _edge_label_cached(tree, vi, vj, bool(vlabels[vi]), bool(vlabels[vj]), n)


@lru_cache(maxsize=200_000)
def _permitted_cached(tree: Expr, vi: int, vj: int, li: bool, lj: bool, n: int) -> tuple[EdgeType, ...]:
    determined = _edge_label_cached(tree, vi, vj, li, lj, n)
    if determined is not None:
        return (determined,)
    data = _path_data(tree, vi, QUESTION if vj == n else vj)
    return tuple(
        e for e in EdgeType
        if edge_structurally_valid(e, li, lj)
        and not (e is EdgeType.SAME_UNIT and data.muldiv_count == 1)
    )


def permitted_edge_labels(
    tree: Expr, vi: int, vj: int, vlabels: Sequence[bool]
) -> tuple[EdgeType, ...]:
    """Labels a tree-consistent graph may carry between defined vertices.

    A determined pair admits exactly its determined label. An undetermined
    pair admits every structurally valid label, except that SameUnit is
    excluded when the path crosses exactly one multiplicative node (a single
    multiplication or division always changes the unit).
    """
    n = len(vlabels) - 1
    if not 0 <= vi < vj <= n:
        raise UdgError(f"need vertex pair vi < vj within 0..{n}, got ({vi}, {vj})")
    return _permitted_cached(tree, vi, vj, bool(vlabels[vi]), bool(vlabels[vj]), n)


# ---------------------------------------------------------------------------
# consistency

@dataclass(frozen=True)
class ConsistencyResult:
    ok: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def _addsub_only_to_root(tree: Expr, leaf: int) -> bool:
    return _path_data(tree, leaf, QUESTION).muldiv_count == 0


def is_consistent(graph: UnitDependencyGraph, tree: Expr) -> ConsistencyResult:
    """Check the three graph/tree consistency conditions.

    1. If the question is a rate, every used leaf reaching the root through
       additions and subtractions alone must itself be a rate (a purely
       additive path hands the leaf's unit to the answer).
    2. Symmetrically, when the question is not a rate, no rate-labeled leaf
       may reach the root through additions and subtractions alone.
    3. Every pair with a tree-determined edge label must carry exactly that
       label. Pairs involving quantities absent from the tree (and pairs
       whose label is undetermined) are unconstrained.
    """
    n = graph.n_quantities
    used = exprtree.used_indices(tree)
    if used and max(used) >= n:
        raise UdgError(f"tree uses quantity {max(used)} but graph has {n} quantities")
    question = n
    violations = []

    question_rate = question in graph.rates
    for leaf in sorted(used):
        if (leaf in graph.rates) != question_rate and _addsub_only_to_root(tree, leaf):
            if question_rate:
                violations.append(
                    f"condition 1: non-rate leaf {leaf} reaches the rate question "
                    f"via only +/-"
                )
            else:
                violations.append(
                    f"condition 2: rate vertex {leaf} reaches the root via only +/-"
                )
    vlabels = [graph.is_rate(v) for v in range(n + 1)]
    for i, j in vertex_pairs(n):
        if i not in used or (j != question and j not in used):
            continue
        allowed = permitted_edge_labels(tree, i, j, vlabels)
        if graph.edge(i, j) not in allowed:
            if len(allowed) == 1:
                detail = f"must be {allowed[0].value}"
            else:
                detail = "cannot be SameUnit across one multiplicative node"
            violations.append(
                f"condition 3: edge ({i}, {j}) {detail}, "
                f"graph has {graph.edge(i, j).value}"
            )
    return ConsistencyResult(ok=not violations, violations=tuple(violations))


def _labeling_passes_path_conditions(
    tree: Expr, used: frozenset[int], n: int, vlabels: Sequence[bool]
) -> bool:
    question_rate = bool(vlabels[n])
    for leaf in used:
        if bool(vlabels[leaf]) != question_rate and _addsub_only_to_root(tree, leaf):
            return False
    return True


def enumerate_consistent_udgs(tree: Expr, n: int) -> Iterator[UnitDependencyGraph]:
    """Yield every graph over n quantities consistent with the tree.

    Determined edges are forced to their tree label; undetermined edges range
    over all six labels subject to structural validity. Deterministic order:
    vertex labelings lexicographically (not-rate first), then free edges in
    pair order by EdgeType declaration order.
    """
    used = exprtree.used_indices(tree)
    if used and max(used) >= n:
        raise UdgError(f"tree uses quantity {max(used)} but graph has {n} quantities")
    pairs = vertex_pairs(n)
    question = n
    for labeling in itertools.product((False, True), repeat=n + 1):
        if not _labeling_passes_path_conditions(tree, used, n, labeling):
            continue
        choices: list[tuple[EdgeType, ...]] = []
        for i, j in pairs:
            pair_defined = i in used and (j == question or j in used)
            if pair_defined:
                choices.append(permitted_edge_labels(tree, i, j, labeling))
            else:
                choices.append(
                    tuple(
                        e for e in EdgeType
                        if edge_structurally_valid(e, labeling[i], labeling[j])
                    )
                )
        rates = frozenset(v for v in range(n + 1) if labeling[v])
        for combo in itertools.product(*choices):
            yield UnitDependencyGraph(n_quantities=n, rates=rates, edges=combo)
