"""Rule-based unit and rate extraction.

A rate quantity measures one entity per unit of another ("40 miles per
hour", "Each student has 3 books"). Extraction finds the nearest noun phrase
as the surface unit and fills the numerator/denominator decomposition when a
lexical rate trigger ("per", "/", "each", "every", "a" in rate position)
fires. Everything operates on immutable problems and is thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import QUESTION, Problem

#: How far past a number we look for its unit noun and rate triggers.
SEARCH_WINDOW = 5

NOUN, VERB, ADJ, NUM, OTHER = "NOUN", "VERB", "ADJ", "NUM", "OTHER"

_FUNCTION_WORDS = {
    "a", "an", "the", "this", "that", "these", "those", "each", "every",
    "all", "some", "any", "no", "more", "most", "other", "another", "much",
    "many", "few", "several", "of", "in", "on", "at", "for", "with", "from",
    "to", "by", "as", "into", "onto", "among", "per", "and", "or", "but",
    "if", "then", "than", "so", "not", "now", "still", "up", "down", "out",
    "over", "under", "off", "away", "again", "also", "too", "very", "just",
    "only", "there", "here", "when", "where", "how", "what", "which", "who",
    "why", "she", "he", "they", "them", "her", "him", "his", "hers", "their",
    "theirs", "its", "it", "you", "your", "i", "we", "us", "my", "our",
    "me", "before", "after", "during", "about", "because", "while", "both",
    "evenly", "currently", "yesterday", "today", "tomorrow", "apiece",
}

_VERB_WORDS = {
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does",
    "did", "done", "has", "have", "had", "will", "would", "can", "could",
    "should", "shall", "may", "might", "must", "make", "makes", "made",
    "making", "pick", "picks", "picked", "give", "gives", "gave", "given",
    "get", "gets", "got", "buy", "buys", "bought", "sell", "sells", "sold",
    "hold", "holds", "held", "fill", "fills", "filled", "collect", "collects",
    "collected", "pack", "packs", "packed", "split", "splits", "lose",
    "loses", "lost", "find", "finds", "found", "earn", "earns", "earned",
    "need", "needs", "needed", "plant", "plants", "planted", "grow", "grows",
    "grew", "went", "go", "goes", "leave", "leaves", "left", "win", "wins",
    "won", "serve", "serves", "served", "store", "stores", "stored", "ask",
    "asks", "asked", "travel", "travels", "traveled", "drive", "drives",
    "drove", "say", "says", "said", "share", "shares", "shared", "put",
    "puts", "remain", "remains", "remained",
}

_ADJ_WORDS = {
    "red", "blue", "green", "yellow", "big", "small", "large", "little",
    "new", "old", "long", "short", "tall", "same", "different", "extra",
}


def lemma(word: str) -> str:
    """Suffix-stripping noun lemmatizer; involutive on its own outputs."""
    w = word.lower()
    if w.endswith("'s"):
        w = w[:-2]
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 4 and w.endswith(("ches", "shes", "sses", "xes", "zes")):
        return w[:-2]
    if len(w) > 3 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    return w


def pos_tag(token: str) -> str:
    """Coarse tag: NUM, OTHER (function words), VERB, ADJ, default NOUN."""
    if token[0].isdigit():
        return NUM
    if not token.isalpha() and "'" not in token:
        return OTHER
    w = token.lower()
    if w in _FUNCTION_WORDS:
        return OTHER
    if w in _VERB_WORDS:
        return VERB
    if w in _ADJ_WORDS or w.endswith(("ful", "ous", "ive")):
        return ADJ
    if w.endswith(("ing", "ed")) and len(w) > 4:
        return VERB
    return NOUN


@dataclass(frozen=True)
class QuantityUnit:
    """Unit tokens for one vertex; rates carry a Num/Den decomposition."""

    surface_unit: tuple[str, ...]
    num_unit: tuple[str, ...] | None = None
    den_unit: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.den_unit is not None and self.num_unit is None:
            raise ValueError("a rate unit needs a numerator unit")

    @property
    def rule_rate_flag(self) -> bool:
        return self.den_unit is not None


def _noun_at(tokens: list[str], i: int) -> bool:
    return pos_tag(tokens[i]) == NOUN


def _noun_run(tokens: list[str], start: int, limit: int) -> tuple[str, ...]:
    """Lemmas of the consecutive noun run starting at ``start`` (max 2)."""
    run = [lemma(tokens[start])]
    if start + 1 < limit and _noun_at(tokens, start + 1):
        run.append(lemma(tokens[start + 1]))
    return tuple(run)


def _nearest_noun_after(tokens: list[str], pos: int, limit: int) -> int | None:
    for i in range(pos + 1, min(limit, pos + 1 + SEARCH_WINDOW)):
        if _noun_at(tokens, i):
            return i
    return None


def _nearest_noun_before(tokens: list[str], pos: int, lo: int) -> int | None:
    for i in range(pos - 1, max(lo - 1, pos - 1 - SEARCH_WINDOW), -1):
        if _noun_at(tokens, i):
            return i
    return None


def _den_noun_after(tokens: list[str], pos: int, limit: int) -> int | None:
    # "each one" is anaphoric but still names the denominator entity
    for i in range(pos + 1, min(limit, pos + 1 + SEARCH_WINDOW)):
        if _noun_at(tokens, i) or tokens[i] == "one":
            return i
    return None


def _extract_in_window(tokens: list[str], anchor: int, lo: int, hi: int) -> QuantityUnit:
    """Shared unit/rate logic for a quantity at ``anchor`` or a question span."""
    noun_i = _nearest_noun_after(tokens, anchor, hi)
    if noun_i is None:
        noun_i = _nearest_noun_before(tokens, anchor, lo)
    surface = _noun_run(tokens, noun_i, hi) if noun_i is not None else ()

    window_end = min(hi, anchor + 1 + SEARCH_WINDOW)

    # explicit "per" / "/" beats "each"/"every"
    for i in range(anchor + 1, window_end):
        if tokens[i] in ("per", "/"):
            den_i = _den_noun_after(tokens, i, hi)
            if den_i is not None and surface:
                return QuantityUnit(surface, num_unit=surface, den_unit=_noun_run(tokens, den_i, hi))

    # "each"/"every" after the quantity: "8 flowers in each one"
    for i in range(anchor + 1, window_end):
        if tokens[i] in ("each", "every"):
            den_i = _den_noun_after(tokens, i, hi)
            if den_i is not None and surface:
                return QuantityUnit(surface, num_unit=surface, den_unit=_noun_run(tokens, den_i, hi))

    # "each"/"every" before the quantity binds the subject noun:
    # "Each student has 3 books"
    for i in range(lo, anchor):
        if tokens[i] in ("each", "every"):
            den_i = _den_noun_after(tokens, i, anchor)
            if den_i is not None and surface:
                return QuantityUnit(surface, num_unit=surface, den_unit=_noun_run(tokens, den_i, anchor))

    # "a"/"an" in rate position: "60 miles an hour"; the preceding token must
    # be the number or its unit noun, so "gave 3 plums to a friend" stays flat
    for i in range(anchor + 1, window_end):
        if tokens[i] in ("a", "an") and (i == anchor + 1 or _noun_at(tokens, i - 1)):
            den_i = _den_noun_after(tokens, i, hi)
            if den_i is not None and surface:
                return QuantityUnit(surface, num_unit=surface, den_unit=_noun_run(tokens, den_i, hi))

    return QuantityUnit(surface)


def extract_unit(problem: Problem, vertex: int | str) -> QuantityUnit:
    """Unit of a quantity (by index) or of the question (vertex=QUESTION).

    Never fails: an empty surface unit is returned when no noun is found.
    """
    tokens = problem.token_texts()
    if vertex == QUESTION:
        lo, hi = problem.question_span
        anchor = lo
        for i in range(lo, hi):
            if tokens[i] in ("many", "much"):
                anchor = i
                break
        return _extract_in_window(tokens, anchor, lo, hi)
    if not isinstance(vertex, int) or not 0 <= vertex < problem.n:
        raise ValueError(f"no quantity with index {vertex!r}")
    q = problem.quantities[vertex]
    sent = problem.tokens[q.token_index][1]
    sent_idx = [i for i, t in enumerate(problem.tokens) if t[1] == sent]
    return _extract_in_window(tokens, q.token_index, sent_idx[0], sent_idx[-1] + 1)


def units_share_tokens(u1: QuantityUnit, u2: QuantityUnit) -> bool:
    """Whether the surface lemma-token sets intersect."""
    return bool(set(u1.surface_unit) & set(u2.surface_unit))
