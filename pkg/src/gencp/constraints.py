"""Constraint specs, domain propagators and a full-text validator.

Propagators filter the candidate domain of the next decision variable given
the current state. They only ever remove candidates and keep the order of the
survivors. ``validate_solution`` re-reads finished text from scratch and
shares no code with the propagators; the test-suite uses it as the oracle.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

from .core import CspState, Token

if TYPE_CHECKING:
    from .bench import TaskSpec
    from .lm import Domain

ALL = "all"
Scope = Union[int, str]

# Upper bound on the characters of one word; used for the coarse
# remaining-length relaxation when a word-count maximum is known.
MAX_WORD_LEN = 20
# Every well-formed token contributes at least one character.
MIN_TOKEN_COST = 1


def _applies(scope: Scope, sentence: int) -> bool:
    return scope == ALL or scope == sentence


@dataclass(frozen=True)
class CharSum:
    target_min: int
    target_max: int
    sentence: Scope = ALL

    def __post_init__(self):
        if not 0 <= self.target_min <= self.target_max:
            raise ValueError(f"bad char-sum window [{self.target_min}, {self.target_max}]")

    @classmethod
    def exact(cls, target: int, sentence: Scope = ALL) -> "CharSum":
        return cls(target, target, sentence)

    def applies(self, sentence: int) -> bool:
        return _applies(self.sentence, sentence)

    def describe(self) -> str:
        if self.target_min == self.target_max:
            return f"={self.target_min}"
        return f"[{self.target_min},{self.target_max}]"


@dataclass(frozen=True)
class WordCount:
    min: int = 0
    max: Optional[int] = None
    sentence: Scope = ALL

    def __post_init__(self):
        if self.min < 0 or (self.max is not None and self.max < self.min):
            raise ValueError(f"bad word-count window [{self.min}, {self.max}]")

    def applies(self, sentence: int) -> bool:
        return _applies(self.sentence, sentence)

    def describe(self) -> str:
        if self.max is None:
            return f">={self.min}"
        if self.min == self.max:
            return f"={self.min}"
        return f"[{self.min},{self.max}]"


@dataclass(frozen=True)
class SentenceCount:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sentence count must be >= 1")

    def describe(self) -> str:
        return f"={self.n}"


@dataclass(frozen=True)
class PrefixKeyword:
    sentence: int
    keyword: str

    def __post_init__(self):
        if not self.keyword:
            raise ValueError("keyword must be non-empty")

    def applies(self, sentence: int) -> bool:
        return self.sentence == sentence

    def describe(self) -> str:
        return f"starts with {self.keyword!r}"


@dataclass(frozen=True)
class ForbiddenWords:
    words: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "words", frozenset(w.lower() for w in self.words))

    def describe(self) -> str:
        return "none of " + ",".join(sorted(self.words))


@dataclass(frozen=True)
class LetterExclusion:
    letters: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "letters", frozenset(c.lower() for c in self.letters))

    def describe(self) -> str:
        return "no letter " + ",".join(sorted(self.letters))


ConstraintSpec = Union[CharSum, WordCount, SentenceCount, PrefixKeyword, ForbiddenWords, LetterExclusion]


@dataclass(frozen=True)
class PropagationBounds:
    lower: int
    upper: int


@dataclass
class PropagationResult:
    filtered: "Domain"
    bounds_used: Optional[PropagationBounds] = None

    @property
    def wiped_out(self) -> bool:
        return not self.filtered.candidates


def _keep(candidate: "Domain", pred) -> "Domain":
    return candidate.replace([t for t in candidate.candidates if pred(t)])


def _strip_word(word: str) -> str:
    return word.strip(string.punctuation)


def _word_after(state: CspState, token: Token) -> str:
    """Text of the meta-variable that ``token`` ends up in."""
    meta = state.open_meta
    if token.starts_word or meta is None:
        return token.surface[1:] if token.starts_word else token.surface
    return meta.word + token.surface


def words_after(state: CspState, token: Token) -> int:
    """Word count of the current sentence once ``token`` is assigned."""
    opens = token.starts_word or state.at_sentence_start
    return state.words_in_sentence + opens


# -- char-sum -----------------------------------------------------------------


def remaining_max(state: CspState, token: Token, word_max: Optional[int],
                  max_word_len: int = MAX_WORD_LEN) -> Optional[int]:
    """Most characters the sentence can still take after ``token``; None = unbounded."""
    if word_max is None:
        return None
    more_words = max(word_max - words_after(state, token), 0)
    # the current word may still grow by continuation tokens
    return (more_words + 1) * (1 + max_word_len)


def propagate_char_sum(state: CspState, candidate: "Domain", spec: CharSum,
                       future_lengths=None, *, word_max: Optional[int] = None,
                       max_word_len: int = MAX_WORD_LEN) -> PropagationResult:
    """Keep tokens that can still reach the sentence length window.

    A sentence-closing token is kept iff the sentence total lands in
    ``[target_min, target_max]``. Any other token must leave at least one
    character of room and, when ``word_max`` bounds the remaining words, must
    not leave more than they could fill.

    ``future_lengths`` gives one set of word costs per remaining position,
    starting with the current one. When supplied, exactly that many words are
    assumed to remain: a token survives iff its cost opens a tuple, one cost
    per position, whose sum lands in the window.
    """
    used = state.sentence_char_used
    lower = max(spec.target_min - used, 0)
    upper = spec.target_max - used

    def ok(token: Token) -> bool:
        cost = state.token_cost(token)
        if future_lengths:
            first, *rest = future_lengths
            return cost in first and _sum_reachable(rest, lower - cost, upper - cost)
        if token.ends_sentence:
            return spec.target_min <= used + cost <= spec.target_max
        rest_hi = upper - cost
        if rest_hi < MIN_TOKEN_COST:
            return False
        cap = remaining_max(state, token, word_max, max_word_len)
        if cap is not None and cost + cap < lower:
            return False
        return True

    bounds = PropagationBounds(lower, max(upper, 0))
    return PropagationResult(_keep(candidate, ok), bounds)


def _sum_reachable(length_sets, lo: int, hi: int) -> bool:
    sums = {0}
    for options in length_sets:
        sums = {s + c for s in sums for c in options if s + c <= hi}
    return any(lo <= s <= hi for s in sums)


# -- word count ---------------------------------------------------------------


def propagate_word_count(state: CspState, candidate: "Domain", spec: WordCount) -> PropagationResult:
    """Forbid closing a sentence short of ``min`` words or opening word ``max + 1``."""

    def ok(token: Token) -> bool:
        n = words_after(state, token)
        if spec.max is not None and n > spec.max:
            return False
        if token.ends_sentence and n < spec.min:
            return False
        return True

    return PropagationResult(_keep(candidate, ok))


# -- lexical ------------------------------------------------------------------


def _prefix_ok(state: CspState, token: Token, spec: PrefixKeyword) -> bool:
    meta = state.open_meta
    first_word_open = state.at_sentence_start or (meta is not None and state.sentence_word_count == 0)
    if not first_word_open:
        return True
    if token.starts_word and not state.at_sentence_start:
        # the first word is complete now
        return _strip_trailing(meta.word) == spec.keyword
    word = _word_after(state, token)
    if token.ends_sentence:
        return _strip_trailing(word) == spec.keyword
    if spec.keyword.startswith(word):
        return True
    return word.startswith(spec.keyword) and all(
        c in string.punctuation for c in word[len(spec.keyword):]
    )


def _strip_trailing(word: str) -> str:
    return word.rstrip(string.punctuation)


def _forbidden_ok(state: CspState, token: Token, spec: ForbiddenWords) -> bool:
    meta = state.open_meta
    if (token.starts_word or state.at_sentence_start) and meta is not None:
        if _strip_word(meta.word).lower() in spec.words:
            return False
    if token.ends_sentence:
        if _strip_word(_word_after(state, token)).lower() in spec.words:
            return False
    return True


def _letters_ok(token: Token, spec: LetterExclusion) -> bool:
    return not any(c.lower() in spec.letters for c in token.surface)


def propagate_lexical(state: CspState, candidate: "Domain", spec) -> PropagationResult:
    if isinstance(spec, PrefixKeyword):
        if not spec.applies(state.sentence_index):
            return PropagationResult(candidate)
        return PropagationResult(_keep(candidate, lambda t: _prefix_ok(state, t, spec)))
    if isinstance(spec, ForbiddenWords):
        return PropagationResult(_keep(candidate, lambda t: _forbidden_ok(state, t, spec)))
    if isinstance(spec, LetterExclusion):
        return PropagationResult(_keep(candidate, lambda t: _letters_ok(t, spec)))
    raise TypeError(f"not a lexical constraint: {spec!r}")


def word_allowed(word: str, constraints, sentence: int) -> bool:
    """Whether a whole previewed word may appear in ``sentence``."""
    for spec in constraints:
        if isinstance(spec, LetterExclusion) and any(c.lower() in spec.letters for c in word):
            return False
        if isinstance(spec, ForbiddenWords) and _strip_word(word).lower() in spec.words:
            return False
    return True


def propagate_all(state: CspState, candidate: "Domain", constraints, *,
                  max_word_len: int = MAX_WORD_LEN) -> "Domain":
    """Run every propagator that applies to the current sentence."""
    sentence = state.sentence_index
    word_max = None
    for spec in constraints:
        if isinstance(spec, WordCount) and spec.applies(sentence) and spec.max is not None:
            word_max = spec.max if word_max is None else min(word_max, spec.max)
    domain = candidate
    for spec in constraints:
        if not domain.candidates:
            break
        if isinstance(spec, CharSum):
            if spec.applies(sentence):
                domain = propagate_char_sum(state, domain, spec, word_max=word_max,
                                            max_word_len=max_word_len).filtered
        elif isinstance(spec, WordCount):
            if spec.applies(sentence):
                domain = propagate_word_count(state, domain, spec).filtered
        elif isinstance(spec, (PrefixKeyword, ForbiddenWords, LetterExclusion)):
            domain = propagate_lexical(state, domain, spec).filtered
    return domain


# -- validator ----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    constraint_id: int
    kind: str
    expected: str
    measured: object
    sentence: Optional[int] = None


def _split_sentences(text: str) -> list[list[str]]:
    out: list[list[str]] = []
    current: list[str] = []
    for chunk in text.split():
        current.append(chunk)
        if chunk[-1] in ".!?":
            out.append(current)
            current = []
    if current:
        out.append(current)
    return out


def measure_chars(chunks: list[str], count_spaces: bool = True) -> int:
    if count_spaces:
        return len(" ".join(chunks))
    return sum(len(c) for c in chunks)


def validate_solution(text: str, task: "TaskSpec") -> tuple[bool, list[Violation]]:
    """Check finished ``text`` against every constraint of ``task``.

    Constraint id 0 is the task's sentence count; ids 1.. follow
    ``task.constraints``.
    """
    sents = _split_sentences(text)
    violations: list[Violation] = []
    n = task.sentence_count
    terminated = bool(sents) and sents[-1][-1][-1] in ".!?"
    if len(sents) != n or not terminated:
        measured = len(sents) if terminated or not sents else f"{len(sents)} (unterminated)"
        violations.append(Violation(0, "SentenceCount", f"={n}", measured))

    for cid, spec in enumerate(task.constraints, start=1):
        kind = type(spec).__name__
        if isinstance(spec, CharSum):
            for i, chunks in enumerate(sents):
                if spec.applies(i):
                    m = measure_chars(chunks, task.count_spaces)
                    if not spec.target_min <= m <= spec.target_max:
                        violations.append(Violation(cid, kind, spec.describe(), m, i))
            if isinstance(spec.sentence, int) and spec.sentence >= len(sents):
                violations.append(Violation(cid, kind, spec.describe(), None, spec.sentence))
        elif isinstance(spec, WordCount):
            for i, chunks in enumerate(sents):
                if spec.applies(i):
                    m = len(chunks)
                    if m < spec.min or (spec.max is not None and m > spec.max):
                        violations.append(Violation(cid, kind, spec.describe(), m, i))
        elif isinstance(spec, SentenceCount):
            if len(sents) != spec.n:
                violations.append(Violation(cid, kind, spec.describe(), len(sents)))
        elif isinstance(spec, PrefixKeyword):
            if spec.sentence >= len(sents):
                violations.append(Violation(cid, kind, spec.describe(), None, spec.sentence))
            else:
                first = sents[spec.sentence][0].rstrip(string.punctuation)
                if first != spec.keyword:
                    violations.append(Violation(cid, kind, spec.describe(), first, spec.sentence))
        elif isinstance(spec, ForbiddenWords):
            for i, chunks in enumerate(sents):
                for chunk in chunks:
                    w = chunk.strip(string.punctuation).lower()
                    if w in spec.words:
                        violations.append(Violation(cid, kind, spec.describe(), chunk, i))
        elif isinstance(spec, LetterExclusion):
            found = sorted({c.lower() for c in text if c.lower() in spec.letters})
            if found:
                violations.append(Violation(cid, kind, spec.describe(), "".join(found)))
        else:
            raise TypeError(f"unknown constraint {spec!r}")
    return not violations, violations
