"""Words of integral labels and the index sets that define strong schemes.

An iterated stochastic integral is labelled by a word whose letters come from
a finite alphabet: one time letter, one letter per Wiener dimension
``1..m``, letters counting exactly ``r`` chain jumps for ``r = 1..mu``, and a
single overflow letter for "more than ``mu`` jumps".  A word is admissible
when no two jump-count letters are adjacent.  This module implements the word
combinatorics (weights, truncation, concatenation, classification), the
hierarchical/remainder set construction, and the specific index-set families
that drive the order-``gamma`` schemes for ``gamma`` in ``{0.5, 1.0, 1.5}``
(enumeration is supported up to ``gamma = 3.0``).

Rendering convention: the time letter prints as ``0``, Wiener letters print
as their dimension, exact-jump letters as ``N<r>``, the overflow letter as
``Nb<mu>``, and the empty word as ``nu``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Collection, Iterable

from .errors import (
    ConsecutiveJumpComponents,
    EmptyIndex,
    InvalidComponent,
    InvalidGamma,
)

__all__ = [
    "ComponentKind",
    "Component",
    "MultiIndex",
    "IndexCounts",
    "WordClass",
    "SchemeSets",
    "EMPTY_INDEX",
    "TIME",
    "wiener",
    "jump_exact",
    "jump_overflow",
    "word",
    "validate_word",
    "alphabet",
    "counts",
    "eta",
    "drop_first",
    "drop_last",
    "concat",
    "classify",
    "build_hierarchical_set",
    "remainder_set",
    "build_scheme_sets",
    "canonical_order",
    "render_index",
    "sets_as_dict",
]

# Enumeration is refused above this order; the sets grow combinatorially and
# nothing in the package uses longer words.
MAX_GAMMA = 3.0


class ComponentKind(enum.Enum):
    """The four letter families a word may contain."""

    TIME = "time"
    WIENER = "wiener"
    JUMP_EXACT = "jump_exact"
    JUMP_OVERFLOW = "jump_overflow"


_SORT_RANK = {
    ComponentKind.TIME: 0,
    ComponentKind.WIENER: 1,
    ComponentKind.JUMP_EXACT: 2,
    ComponentKind.JUMP_OVERFLOW: 3,
}


@dataclass(frozen=True)
class Component:
    """One letter of a word.

    The meaning of ``index`` depends on ``kind``: Wiener dimension for
    WIENER, the exact jump count for JUMP_EXACT, and the overflow threshold
    for JUMP_OVERFLOW (which stands for "more than ``index`` jumps").  It
    must be 0 for the time letter.
    """

    kind: ComponentKind
    index: int = 0

    def __post_init__(self):
        if self.kind is ComponentKind.TIME:
            if self.index != 0:
                raise InvalidComponent("time letter carries no index")
        elif self.index < 1:
            raise InvalidComponent(
                "%s letter needs a positive index, got %r" % (self.kind.value, self.index)
            )

    @property
    def is_jump(self) -> bool:
        """True for the two jump-count letter families."""
        return self.kind in (ComponentKind.JUMP_EXACT, ComponentKind.JUMP_OVERFLOW)

    @property
    def jump_value(self) -> int:
        """Numeric weight of a jump letter: r for exactly-r, mu + 1 for overflow."""
        if self.kind is ComponentKind.JUMP_EXACT:
            return self.index
        if self.kind is ComponentKind.JUMP_OVERFLOW:
            return self.index + 1
        return 0

    @property
    def tag(self) -> str:
        """Short text form used in word rendering."""
        if self.kind is ComponentKind.TIME:
            return "0"
        if self.kind is ComponentKind.WIENER:
            return str(self.index)
        if self.kind is ComponentKind.JUMP_EXACT:
            return "N%d" % self.index
        return "Nb%d" % self.index

    def sort_key(self) -> tuple:
        return (_SORT_RANK[self.kind], self.index)

    def __repr__(self):
        return "Component(%s)" % self.tag


TIME = Component(ComponentKind.TIME)


def wiener(j: int) -> Component:
    """Letter for the j-th Wiener dimension (1-based)."""
    return Component(ComponentKind.WIENER, j)


def jump_exact(r: int) -> Component:
    """Letter counting steps on which the chain jumps exactly r times."""
    return Component(ComponentKind.JUMP_EXACT, r)


def jump_overflow(mu: int) -> Component:
    """Letter counting steps on which the chain jumps more than mu times."""
    return Component(ComponentKind.JUMP_OVERFLOW, mu)


@dataclass(frozen=True)
class MultiIndex:
    """An admissible word of letters.

    Admissibility (no adjacent jump-count letters) is enforced on
    construction; alphabet bounds are checked separately by
    :func:`validate_word` because they depend on the ambient ``(m, mu)``.
    """

    components: tuple[Component, ...] = ()

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        for c in comps:
            if not isinstance(c, Component):
                raise InvalidComponent("word letters must be Component, got %r" % (c,))
        for a, b in zip(comps, comps[1:]):
            if a.is_jump and b.is_jump:
                raise ConsecutiveJumpComponents(
                    "adjacent jump letters %s,%s are not admissible" % (a.tag, b.tag)
                )

    @property
    def length(self) -> int:
        return len(self.components)

    @property
    def is_empty(self) -> bool:
        return not self.components

    def sort_key(self) -> tuple:
        return (len(self.components), tuple(c.sort_key() for c in self.components))

    def __str__(self):
        return render_index(self)

    def __repr__(self):
        return "MultiIndex(%s)" % render_index(self)


EMPTY_INDEX = MultiIndex(())


class IndexCounts(tuple):
    """Letter statistics of a word: (length, wiener, time, jump, max_jump_value)."""

    __slots__ = ()

    def __new__(cls, length, wiener_count, time_count, jump_count, max_jump_value):
        return super().__new__(cls, (length, wiener_count, time_count, jump_count, max_jump_value))

    length = property(lambda self: self[0])
    wiener_count = property(lambda self: self[1])
    time_count = property(lambda self: self[2])
    jump_count = property(lambda self: self[3])
    max_jump_value = property(lambda self: self[4])


class WordClass(enum.Enum):
    """Partition of words by where jump-count letters appear.

    CONTINUOUS_ONLY: no jump letters at all (the empty word included).
    JUMP_INTERIOR:   jump letters occur, but the first letter is time/Wiener.
    JUMP_FIRST:      the first letter is a jump letter.
    """

    CONTINUOUS_ONLY = "continuous_only"
    JUMP_INTERIOR = "jump_interior"
    JUMP_FIRST = "jump_first"


def word(*tags) -> MultiIndex:
    """Build a word from components or rendered tags.

    Accepts Component objects, integers (0 for the time letter, j >= 1 for
    Wiener letters), or tag strings like "N2" / "Nb3".

    >>> word(0, "N2", 2)
    MultiIndex((0,N2,2))
    """
    comps = []
    for t in tags:
        if isinstance(t, Component):
            comps.append(t)
        elif isinstance(t, int):
            comps.append(TIME if t == 0 else wiener(t))
        elif isinstance(t, str):
            comps.append(_component_from_tag(t))
        else:
            raise InvalidComponent("cannot interpret %r as a word letter" % (t,))
    return MultiIndex(tuple(comps))


def _component_from_tag(tag: str) -> Component:
    t = tag.strip()
    if t.startswith("Nb"):
        return jump_overflow(int(t[2:]))
    if t.startswith("N"):
        return jump_exact(int(t[1:]))
    j = int(t)
    return TIME if j == 0 else wiener(j)


def validate_word(components: Iterable[Component], m: int, mu: int) -> MultiIndex:
    """Check a letter sequence against the alphabet with m Wiener dimensions
    and jump threshold mu, and return it as a MultiIndex.

    Raises:
      InvalidComponent: a letter is outside the alphabet (Wiener dimension
        above m, exact-jump count above mu, or overflow threshold != mu).
      ConsecutiveJumpComponents: two jump letters are adjacent.
    """
    if m < 1 or mu < 1:
        raise InvalidComponent("alphabet needs m >= 1 and mu >= 1")
    comps = tuple(components)
    for c in comps:
        if c.kind is ComponentKind.WIENER and c.index > m:
            raise InvalidComponent("Wiener letter %s outside 1..%d" % (c.tag, m))
        if c.kind is ComponentKind.JUMP_EXACT and c.index > mu:
            raise InvalidComponent("jump letter %s outside 1..%d" % (c.tag, mu))
        if c.kind is ComponentKind.JUMP_OVERFLOW and c.index != mu:
            raise InvalidComponent("overflow letter %s must have threshold %d" % (c.tag, mu))
    return MultiIndex(comps)


def counts(index: MultiIndex) -> IndexCounts:
    """Letter statistics used by the weight eta."""
    wiener_count = time_count = jump_count = 0
    max_jump = 0
    for c in index.components:
        if c.kind is ComponentKind.WIENER:
            wiener_count += 1
        elif c.kind is ComponentKind.TIME:
            time_count += 1
        else:
            jump_count += 1
            max_jump = max(max_jump, c.jump_value)
    return IndexCounts(index.length, wiener_count, time_count, jump_count, max_jump)


def eta(index: MultiIndex) -> int:
    """Weight of a word: wiener count + 2 * time count + largest jump value.

    The weight of the empty word is 0.
    """
    c = counts(index)
    return c.wiener_count + 2 * c.time_count + c.max_jump_value


def drop_first(index: MultiIndex) -> MultiIndex:
    """Remove the first letter.  Raises EmptyIndex on the empty word."""
    if index.is_empty:
        raise EmptyIndex("cannot drop a letter from the empty word")
    return MultiIndex(index.components[1:])


def drop_last(index: MultiIndex) -> MultiIndex:
    """Remove the last letter.  Raises EmptyIndex on the empty word."""
    if index.is_empty:
        raise EmptyIndex("cannot drop a letter from the empty word")
    return MultiIndex(index.components[:-1])


def concat(left: MultiIndex, right: MultiIndex) -> MultiIndex:
    """Concatenate two words; fails if jump letters meet at the junction."""
    if left.is_empty:
        return right
    if right.is_empty:
        return left
    if left.components[-1].is_jump and right.components[0].is_jump:
        raise ConsecutiveJumpComponents(
            "junction %s,%s has adjacent jump letters"
            % (left.components[-1].tag, right.components[0].tag)
        )
    return MultiIndex(left.components + right.components)


def classify(index: MultiIndex) -> WordClass:
    """Partition a word by the placement of its jump letters."""
    if not any(c.is_jump for c in index.components):
        return WordClass.CONTINUOUS_ONLY
    if index.components[0].is_jump:
        return WordClass.JUMP_FIRST
    return WordClass.JUMP_INTERIOR


def alphabet(m: int, mu: int) -> tuple[Component, ...]:
    """All letters for m Wiener dimensions and jump threshold mu."""
    if m < 1 or mu < 1:
        raise InvalidComponent("alphabet needs m >= 1 and mu >= 1")
    letters = [TIME]
    letters.extend(wiener(j) for j in range(1, m + 1))
    letters.extend(jump_exact(r) for r in range(1, mu + 1))
    letters.append(jump_overflow(mu))
    return tuple(letters)


def build_hierarchical_set(
    predicate: Callable[[MultiIndex], bool],
    m: int,
    mu: int,
    max_length: int = 64,
) -> frozenset:
    """Enumerate the admissible words satisfying a membership predicate.

    The predicate must be monotone under removal of the first letter (if a
    word is a member, so is the word with its first letter dropped), which
    makes the result closed under that truncation.  Enumeration proceeds by
    prepending alphabet letters, so a non-monotone predicate silently loses
    members; ``max_length`` guards against runaway growth.
    """
    if not predicate(EMPTY_INDEX):
        return frozenset()
    letters = alphabet(m, mu)
    members = {EMPTY_INDEX}
    frontier = [EMPTY_INDEX]
    while frontier:
        grown = []
        for w in frontier:
            blocked = w.components and w.components[0].is_jump
            for c in letters:
                if blocked and c.is_jump:
                    continue
                cand = MultiIndex((c,) + w.components)
                if cand.length > max_length:
                    raise InvalidGamma(
                        "hierarchical enumeration exceeded %d letters; "
                        "predicate is too permissive" % max_length
                    )
                if predicate(cand):
                    members.add(cand)
                    grown.append(cand)
        frontier = grown
    return frozenset(members)


def remainder_set(members: Collection[MultiIndex], m: int, mu: int) -> frozenset:
    """Words one prepended letter outside a truncation-closed set.

    For a set A closed under drop_first, these are exactly the words not in
    A whose first-letter truncation lies in A.  The remainder of the empty
    set is the singleton {empty word}.
    """
    base = frozenset(members)
    if not base:
        return frozenset([EMPTY_INDEX])
    letters = alphabet(m, mu)
    out = set()
    for w in base:
        blocked = w.components and w.components[0].is_jump
        for c in letters:
            if blocked and c.is_jump:
                continue
            cand = MultiIndex((c,) + w.components)
            if cand not in base:
                out.add(cand)
    return frozenset(out)


@dataclass(frozen=True)
class SchemeSets:
    """Index-set family of the order-``gamma`` scheme.

    drift/diffusion hold the words kept in the drift and diffusion
    expansions; the *_jump subsets collect members with at least one
    exact-jump letter (these drive the regime-switch correction terms); the
    *_remainder sets hold the words one letter beyond the kept sets, which
    carry the local truncation error.
    """

    gamma: float
    mu: int
    m: int
    drift: frozenset = field(repr=False)
    diffusion: frozenset = field(repr=False)
    drift_jump: frozenset = field(repr=False)
    diffusion_jump: frozenset = field(repr=False)
    drift_remainder: frozenset = field(repr=False)
    diffusion_remainder: frozenset = field(repr=False)


def _has_exact_jump(index: MultiIndex) -> bool:
    return any(c.kind is ComponentKind.JUMP_EXACT for c in index.components)


def build_scheme_sets(gamma: float, m: int) -> SchemeSets:
    """Construct the kept/jump/remainder index sets of the order-gamma scheme.

    gamma must be a positive multiple of 0.5; enumeration is refused above
    3.0.  The jump threshold is mu = 2 * gamma.  Membership: the diffusion
    set keeps every word of weight at most 2*gamma - 1; the drift set keeps
    the empty word, all-time words of weight at most 2*gamma - 1, and any
    other nonempty word only at weight at most 2*gamma - 2.

    Raises:
      InvalidGamma: gamma is not a positive half-integer, or above 3.0.
    """
    two_gamma = round(2 * float(gamma))
    if abs(2 * float(gamma) - two_gamma) > 1e-12 or two_gamma < 1:
        raise InvalidGamma("scheme order must be a positive multiple of 0.5, got %r" % gamma)
    if float(gamma) > MAX_GAMMA:
        raise InvalidGamma(
            "enumeration refused for order %s > %s; the sets grow combinatorially"
            % (gamma, MAX_GAMMA)
        )
    if m < 1:
        raise InvalidComponent("need at least one Wiener dimension")
    mu = two_gamma

    def keep_diffusion(index: MultiIndex) -> bool:
        return eta(index) <= two_gamma - 1

    def keep_drift(index: MultiIndex) -> bool:
        if index.is_empty:
            return True
        if all(c.kind is ComponentKind.TIME for c in index.components):
            return eta(index) <= two_gamma - 1
        return eta(index) <= two_gamma - 2

    drift = build_hierarchical_set(keep_drift, m, mu)
    diffusion = build_hierarchical_set(keep_diffusion, m, mu)
    return SchemeSets(
        gamma=float(gamma),
        mu=mu,
        m=m,
        drift=drift,
        diffusion=diffusion,
        drift_jump=frozenset(w for w in drift if _has_exact_jump(w)),
        diffusion_jump=frozenset(w for w in diffusion if _has_exact_jump(w)),
        drift_remainder=remainder_set(drift, m, mu),
        diffusion_remainder=remainder_set(diffusion, m, mu),
    )


def canonical_order(indices: Iterable[MultiIndex]) -> list:
    """Sort words by length, then letter-wise by kind rank and index."""
    return sorted(indices, key=MultiIndex.sort_key)


def render_index(index: MultiIndex) -> str:
    """Text form of a word: "nu" when empty, else "(tag,...,tag)"."""
    if index.is_empty:
        return "nu"
    return "(" + ",".join(c.tag for c in index.components) + ")"


def sets_as_dict(sets: SchemeSets) -> dict:
    """JSON-ready form of a scheme-set family.

    Each word becomes a list of letter tags in canonical order; the empty
    word is an empty list.
    """

    def encode(group):
        return [[c.tag for c in w.components] for w in canonical_order(group)]

    return {
        "gamma": sets.gamma,
        "mu": sets.mu,
        "m": sets.m,
        "drift": encode(sets.drift),
        "diffusion": encode(sets.diffusion),
        "drift_jump": encode(sets.drift_jump),
        "diffusion_jump": encode(sets.diffusion_jump),
        "drift_remainder": encode(sets.drift_remainder),
        "diffusion_remainder": encode(sets.diffusion_remainder),
    }
