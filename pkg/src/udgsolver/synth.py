"""Template-generated evaluation corpus.

Covers same-unit addition/subtraction chains, rate-times-count and
total-divided-by-rate problems, rate questions, a two-step pattern, and
variants with an irrelevant distractor quantity. Every problem carries a
gold answer, gold tree, and rate annotations, and is validated end to end at
generation time. Vocabulary is split into two disjoint pools so that a
low-lexical-overlap subset of the corpus is constructible.
"""

from __future__ import annotations

import random
from typing import Callable

from .corpus import Problem, build_problem

_NAMES = (
    ("Isabel", "Melanie", "Joan", "Sara", "Tom", "Fred", "Sam", "Keith"),
    ("Nina", "Carlos", "Priya", "Dmitri", "Aisha", "Leo", "Maya", "Owen"),
)
_ITEMS = (
    ("flower", "plum", "marble", "book", "card", "shell", "pencil", "cookie"),
    ("stamp", "badge", "token", "sticker", "bead", "acorn", "button", "coin"),
)
_CONTAINERS = (
    ("bouquet", "basket", "box", "shelf"),
    ("jar", "crate", "album", "pouch"),
)
# Nesting chains for the order-ambiguous rate templates: adjacent nouns form
# an (inner, outer) pair, and the middle nouns occur in both roles, so role
# cannot be read off the noun identity.
_NESTED = (
    ("pencil", "box", "carton", "crate"),
    ("sticker", "album", "bundle", "chest"),
)

#: (family, weight, quantity count); weights sum to 1.
FAMILIES = (
    ("add", 0.19, 2),
    ("sub", 0.19, 2),
    ("add_three", 0.14, 3),
    ("sub_three", 0.14, 3),
    ("add_distractor", 0.03, 3),
    ("sub_distractor", 0.03, 3),
    ("rate_mult", 0.02, 2),
    ("rate_div", 0.02, 2),
    ("rate_apiece", 0.04, 2),
    ("rate_question", 0.03, 2),
    ("rate_two_step", 0.04, 3),
    ("rate_order_mult", 0.05, 2),
    ("rate_order_div", 0.05, 2),
    ("rate_mult_distractor", 0.015, 3),
    ("rate_div_distractor", 0.015, 3),
)


def _plural(word: str) -> str:
    if word.endswith(("s", "x", "z", "ch", "sh")):
        return word + "es"
    if word.endswith("y") and word[-2] not in "aeiou":
        return word[:-1] + "ies"
    return word + "s"


class _Slots:
    """Per-problem vocabulary draw, confined to one pool."""

    def __init__(self, rng: random.Random):
        pool = rng.randrange(2)
        self.names = rng.sample(_NAMES[pool], 3)
        items = rng.sample(_ITEMS[pool], 2)
        self.item, self.other = items[0], items[1]
        self.container = rng.choice(_CONTAINERS[pool])
        chain = _NESTED[pool]
        inner_at = rng.randrange(len(chain) - 1)
        self.inner, self.outer = chain[inner_at], chain[inner_at + 1]
        self.items = _plural(self.item)
        self.others = _plural(self.other)
        self.containers = _plural(self.container)
        self.inners = _plural(self.inner)
        self.outers = _plural(self.outer)


def _distinct(rng: random.Random, lo: int, hi: int, taken: set[int]) -> int:
    while True:
        v = rng.randint(lo, hi)
        if v not in taken:
            taken.add(v)
            return v


def _add(rng, s):
    taken: set[int] = set()
    x = _distinct(rng, 11, 48, taken)
    y = _distinct(rng, 2, 9, taken)
    text = (
        f"{s.names[0]} had {x} {s.items}. {s.names[1]} gave {s.names[0]} {y} more "
        f"{s.items}. How many {s.items} does {s.names[0]} have now?"
    )
    return text, f"(+ {x} {y})", None, x + y


def _sub(rng, s):
    taken: set[int] = set()
    x = _distinct(rng, 12, 60, taken)
    y = _distinct(rng, 2, x - 2, taken)
    text = (
        f"{s.names[0]} had {x} {s.items}. {s.names[0]} gave away {y} {s.items}. "
        f"How many {s.items} are left?"
    )
    return text, f"(- {x} {y})", None, x - y


def _add_three(rng, s):
    taken: set[int] = set()
    x = _distinct(rng, 11, 40, taken)
    y = _distinct(rng, 2, 9, taken)
    z = _distinct(rng, 2, 9, taken)
    text = (
        f"{s.names[0]} picked {x} {s.items}. Then {s.names[0]} picked {y} {s.items} "
        f"and {z} {s.items} from the garden. How many {s.items} were picked in all?"
    )
    return text, f"(+ (+ {x} {y}) {z})", None, x + y + z


def _sub_three(rng, s):
    taken: set[int] = set()
    x = _distinct(rng, 11, 40, taken)
    y = _distinct(rng, 2, 9, taken)
    z = _distinct(rng, 2, min(x + y - 2, 9), taken)
    text = (
        f"{s.names[0]} had {x} {s.items}. {s.names[0]} bought {y} {s.items} and then "
        f"gave away {z} {s.items}. How many {s.items} does {s.names[0]} have now?"
    )
    return text, f"(- (+ {x} {y}) {z})", None, x + y - z


def _add_distractor(rng, s):
    taken: set[int] = set()
    x = _distinct(rng, 11, 48, taken)
    d = _distinct(rng, 2, 60, taken)
    y = _distinct(rng, 2, 9, taken)
    text = (
        f"{s.names[0]} picked {x} {s.items}. {s.names[1]} picked {d} {s.others}. "
        f"{s.names[2]} gave {s.names[0]} {y} more {s.items}. How many {s.items} "
        f"does {s.names[0]} have now?"
    )
    return text, f"(+ {x} {y})", None, x + y


def _sub_distractor(rng, s):
    taken: set[int] = set()
    x = _distinct(rng, 12, 60, taken)
    d = _distinct(rng, 2, 60, taken)
    y = _distinct(rng, 2, x - 2, taken)
    if rng.random() < 0.5:
        place = rng.choice(("orchard", "garden", "market", "yard"))
        text = (
            f"{s.names[0]} picked {x} {s.items} and {d} {s.others} from the "
            f"{place}. {s.names[0]} gave {y} {s.items} to {s.names[1]}. "
            f"How many {s.items} does {s.names[0]} have now?"
        )
    else:
        text = (
            f"{s.names[0]} picked {x} {s.items}. {s.names[1]} picked {d} {s.others}. "
            f"{s.names[0]} gave away {y} {s.items}. How many {s.items} does "
            f"{s.names[0]} have now?"
        )
    return text, f"(- {x} {y})", None, x - y


def _rate_mult(rng, s):
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    c = _distinct(rng, 2, 9, taken)
    text = (
        f"Each {s.container} holds {r} {s.items}. {s.names[0]} filled {c} "
        f"{s.containers}. How many {s.items} are there in all?"
    )
    return text, f"(* {r} {c})", [0], r * c


def _rate_div(rng, s):
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    answer = rng.randint(2, 9)
    t = r * answer
    text = (
        f"{s.names[0]} collected {t} {s.items}. {s.names[0]} packs {r} {s.items} "
        f"in each {s.container}. How many {s.containers} can {s.names[0]} fill?"
    )
    return text, f"(/ {t} {r})", [1], answer


def _rate_apiece(rng, s):
    # "apiece" is outside the rate trigger lexicon, so the rule-based
    # extractor misses this rate and context features must carry it
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    answer = rng.randint(2, 9)
    t = r * answer
    text = (
        f"The {s.containers} hold {r} {s.items} apiece. {s.names[0]} collected "
        f"{t} {s.items}. How many {s.containers} does {s.names[0]} fill?"
    )
    return text, f"(/ {t} {r})", [0], answer


def _rate_question(rng, s):
    taken: set[int] = set()
    c = _distinct(rng, 2, 9, taken)
    answer = rng.randint(2, 9)
    t = c * answer
    text = (
        f"{s.names[0]} split {t} {s.items} evenly among {c} {s.containers}. "
        f"How many {s.items} are in each {s.container}?"
    )
    return text, f"(/ {t} {c})", ["question"], answer


def _rate_two_step(rng, s):
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    answer = rng.randint(2, 9)
    y = _distinct(rng, 2, 9, taken)
    x = answer * r + y
    text = (
        f"{s.names[0]} picked {x} {s.items} for the fair. {s.names[0]} was making "
        f"{s.containers} with {r} {s.items} in each one. If {y} of the {s.items} "
        f"were ruined, how many {s.containers} could {s.names[0]} still make?"
    )
    return text, f"(/ (- {x} {y}) {r})", [1], answer


def _rate_order_mult(rng, s):
    # same surface template as rate_order_div; only the units tell the
    # second quantity's role, so op direction is not context-separable
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    c = _distinct(rng, 2, 9, taken)
    text = (
        f"{s.names[0]} stores {r} {s.inners} in each {s.outer}. {s.names[0]} has "
        f"{c} {s.outers}. How many {s.inners} does {s.names[0]} have in all?"
    )
    return text, f"(* {r} {c})", [0], r * c


def _rate_order_div(rng, s):
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    answer = rng.randint(2, 9)
    t = r * answer
    text = (
        f"{s.names[0]} stores {r} {s.inners} in each {s.outer}. {s.names[0]} has "
        f"{t} {s.inners}. How many {s.outers} does {s.names[0]} need?"
    )
    return text, f"(/ {t} {r})", [0], answer


def _rate_mult_distractor(rng, s):
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    d = _distinct(rng, 10, 60, taken)
    c = _distinct(rng, 2, 9, taken)
    text = (
        f"Each {s.container} holds {r} {s.items}. {s.names[1]} kept {d} {s.others}. "
        f"{s.names[0]} filled {c} {s.containers}. How many {s.items} are there in all?"
    )
    return text, f"(* {r} {c})", [0], r * c


def _rate_div_distractor(rng, s):
    taken: set[int] = set()
    r = _distinct(rng, 3, 9, taken)
    answer = rng.randint(2, 9)
    t = r * answer
    taken.add(t)
    d = _distinct(rng, 10, 60, taken)
    text = (
        f"{s.names[0]} collected {t} {s.items}. {s.names[1]} collected {d} {s.others}. "
        f"{s.names[0]} packs {r} {s.items} in each {s.container}. How many "
        f"{s.containers} can {s.names[0]} fill?"
    )
    return text, f"(/ {t} {r})", [2], answer


_BUILDERS: dict[str, Callable] = {
    "add": _add,
    "sub": _sub,
    "add_three": _add_three,
    "sub_three": _sub_three,
    "add_distractor": _add_distractor,
    "sub_distractor": _sub_distractor,
    "rate_mult": _rate_mult,
    "rate_div": _rate_div,
    "rate_apiece": _rate_apiece,
    "rate_question": _rate_question,
    "rate_two_step": _rate_two_step,
    "rate_order_mult": _rate_order_mult,
    "rate_order_div": _rate_order_div,
    "rate_mult_distractor": _rate_mult_distractor,
    "rate_div_distractor": _rate_div_distractor,
}

#: Families exercising rates or distractors (the hard slice of the corpus).
HARD_FAMILIES = tuple(
    name for name, _, _ in FAMILIES if "rate" in name or "distractor" in name
)


def family_of(problem_id: str) -> str:
    return problem_id.split("-", 1)[1]


def _family_counts(size: int) -> list[tuple[str, int]]:
    counts = []
    assigned = 0
    for name, weight, _ in FAMILIES:
        c = int(size * weight)
        counts.append([name, c])
        assigned += c
    i = 0
    while assigned < size:
        counts[i % len(counts)][1] += 1
        assigned += 1
        i += 1
    return [(name, c) for name, c in counts]


def gen_synthetic_corpus(seed: int, size: int) -> list[Problem]:
    """Deterministic corpus of ``size`` problems with full gold annotations."""
    if size < 50:
        raise ValueError(f"corpus size must be at least 50, got {size}")
    rng = random.Random(seed)
    plan = []
    for name, count in _family_counts(size):
        plan.extend([name] * count)
    rng.shuffle(plan)
    problems = []
    for i, family in enumerate(plan):
        builder = _BUILDERS[family]
        expected_n = next(n for fam, _, n in FAMILIES if fam == family)
        text, tree, rates, answer = builder(rng, _Slots(rng))
        problem = build_problem(
            f"syn{i:04d}-{family}", text, answer=answer, tree_text=tree, rates=rates
        )
        if problem.n != expected_n:
            raise AssertionError(
                f"template {family} produced {problem.n} quantities, expected {expected_n}"
            )
        problems.append(problem)
    return problems
