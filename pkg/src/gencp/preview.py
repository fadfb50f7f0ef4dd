"""Masked-model lookahead for the sentence length constraint.

Near the end of a sentence the solver asks the masked model for whole-word
candidates at the next ``d`` positions. Their character costs give, per
position, the set of lengths a future word can take. A candidate for the
current position survives only if its word cost starts some tuple of future
costs that fits the remaining budget. Survivors keep their original order,
so the left-to-right likelihood ranking is untouched.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Union

from .constraints import MAX_WORD_LEN, MIN_TOKEN_COST, CharSum, PrefixKeyword, word_allowed
from .core import CspState, Token, surface_cost
from .lm import Domain, build_masked_prompt, fill_mask_domains

if TYPE_CHECKING:
    from .bench import TaskSpec
    from .search import Metrics, SearchConfig

Budget = Union[int, tuple[int, int]]


@dataclass(frozen=True)
class PreviewSnapshot:
    depth: int
    domains: tuple[Domain, ...]
    # costs of candidates that do not / do end the sentence, per position
    open_sets: tuple[frozenset, ...]
    closing_sets: tuple[frozenset, ...]
    sentence_initial: bool = False
    count_spaces: bool = True

    @property
    def length_sets(self) -> tuple[frozenset, ...]:
        return tuple(a | b for a, b in zip(self.open_sets, self.closing_sets))

    @property
    def wiped_out(self) -> bool:
        return any(not d.candidates for d in self.domains)

    def cost(self, surface: str, position: int) -> int:
        return masked_word_cost(surface, self.sentence_initial and position == 0, self.count_spaces)

    @classmethod
    def from_lengths(cls, length_sets) -> "PreviewSnapshot":
        """Snapshot built from bare cost sets, none of them sentence-closing."""
        sets = tuple(frozenset(s) for s in length_sets)
        return cls(len(sets), tuple(Domain() for _ in sets), sets, tuple(frozenset() for _ in sets))


def masked_word_cost(surface: str, sentence_initial: bool, count_spaces: bool = True) -> int:
    """Cost of a whole masked-model word placed in the current sentence.

    Masked candidates come without the separator; a word (anything holding a
    letter or digit) that is not sentence-initial pays for one space.
    """
    word = surface[1:] if surface.startswith(" ") else surface
    spaced = any(c.isalnum() for c in word) and not sentence_initial
    return surface_cost((" " if spaced else "") + word, False, count_spaces)


def _charsum_for(state: CspState) -> Optional[CharSum]:
    for spec in state.constraints:
        if isinstance(spec, CharSum) and spec.applies(state.sentence_index):
            return spec
    return None


def remaining_window(state: CspState) -> Optional[tuple[int, int]]:
    """Characters still needed by the current sentence, as ``(lo, hi)``."""
    spec = _charsum_for(state)
    if spec is None:
        return None
    used = state.sentence_char_used
    return max(spec.target_min - used, 0), spec.target_max - used


def default_trigger(max_word_len: int = MAX_WORD_LEN) -> int:
    return 2 * (1 + max_word_len)


def should_preview(state: CspState, task: Optional["TaskSpec"], cfg: "SearchConfig") -> bool:
    """True when the sentence has a length target and at most about two words remain."""
    if cfg.preview_depth < 1:
        return False
    window = remaining_window(state)
    if window is None:
        return False
    trigger = cfg.preview_trigger_budget
    if trigger is None:
        trigger = default_trigger(cfg.max_word_len)
    return window[1] <= trigger


def _previewed_ok(state: CspState, token: Token, position: int) -> bool:
    word = token.surface.lstrip(" ")
    if not word_allowed(word, state.constraints, state.sentence_index):
        return False
    if position == 0 and state.at_sentence_start:
        for spec in state.constraints:
            if isinstance(spec, PrefixKeyword) and spec.applies(state.sentence_index):
                if word.rstrip(".!?") != spec.keyword:
                    return False
    return True


def preview_domains(state: CspState, mlm, d: int, k: int, *, preprompt: str = "",
                    metrics: Optional["Metrics"] = None) -> PreviewSnapshot:
    """Query the masked model once for ``d`` positions and filter the answers.

    The returned snapshot reports ``wiped_out`` when a position has no
    admissible word left; the caller backtracks in that case.
    """
    prompt = build_masked_prompt(state, d, preprompt)
    raw = fill_mask_domains(mlm, prompt, k, metrics)
    domains, open_sets, closing_sets = [], [], []
    initial = state.at_sentence_start
    for i, dom in enumerate(raw):
        kept = dom.replace(t for t in dom.candidates if _previewed_ok(state, t, i))
        domains.append(kept)
        costs_open, costs_close = set(), set()
        for t in kept.candidates:
            c = masked_word_cost(t.surface, initial and i == 0, state.count_spaces)
            (costs_close if t.ends_sentence else costs_open).add(c)
        open_sets.append(frozenset(costs_open))
        closing_sets.append(frozenset(costs_close))
    return PreviewSnapshot(d, tuple(domains), tuple(open_sets), tuple(closing_sets),
                           initial, state.count_spaces)


def _window(budget: Budget) -> tuple[int, int]:
    if isinstance(budget, tuple):
        return budget
    return budget, budget


def admissible_sums(snapshot: PreviewSnapshot, budget: Budget, *, closing: bool = False,
                    open_tail: bool = False, min_tail: int = MIN_TOKEN_COST) -> set[tuple[int, ...]]:
    """Cost tuples over the previewed positions that fit ``budget``.

    By default every position is filled and the tuple sum must land in the
    budget window (an int means an exact target).

    With ``closing=True`` the first position is a word that does not end the
    sentence and the tuple may stop early: positions before the last take a
    non-closing cost and the last takes a sentence-closing one. With
    ``open_tail=True`` tuples over all positions that leave at least
    ``min_tail`` characters for words beyond the window are admissible too.
    """
    lo, hi = _window(budget)
    out: set[tuple[int, ...]] = set()
    if not closing:
        for combo in itertools.product(*snapshot.length_sets):
            if lo <= sum(combo) <= hi:
                out.add(combo)
        return out
    opens, closes = snapshot.open_sets, snapshot.closing_sets
    for j in range(2, snapshot.depth + 1):
        for head in itertools.product(*opens[:j - 1]):
            s = sum(head)
            if s >= hi:
                continue
            for c in closes[j - 1]:
                if lo <= s + c <= hi:
                    out.add(head + (c,))
    if open_tail:
        for combo in itertools.product(*opens):
            if sum(combo) <= hi - min_tail:
                out.add(combo)
    return out


def join_filter(current: Domain, snapshot: PreviewSnapshot, sums: Optional[set],
                state: Optional[CspState] = None) -> Domain:
    """Keep the candidates whose cost opens an admissible tuple.

    ``sums=None`` stands for "every tuple" and returns ``current`` unchanged.
    Without ``state`` a candidate's cost is its character length. With a
    state, only word-opening, non-closing tokens are judged, and a token is
    matched through the previewed first-position words it is a prefix of, so
    a sub-word token is costed as the full word it begins.
    """
    if sums is None:
        return current
    firsts = {t[0] for t in sums}
    if state is None:
        return current.replace(t for t in current.candidates if t.char_len in firsts)

    def ok(token: Token) -> bool:
        if token.ends_sentence:
            return True
        if not (token.starts_word or state.at_sentence_start):
            return True
        stem = token.surface[1:] if token.starts_word else token.surface
        for w in snapshot.domains[0].candidates:
            if w.ends_sentence:
                continue
            if w.surface.lstrip(" ").startswith(stem) and snapshot.cost(w.surface, 0) in firsts:
                return True
        return False

    return current.replace(t for t in current.candidates if ok(t))


def preview_filter(state: CspState, current: Domain, snapshot: PreviewSnapshot) -> Domain:
    """Apply the lookahead to the current domain as the solver does."""
    window = remaining_window(state)
    if window is None:
        return current
    sums = admissible_sums(snapshot, window, closing=True, open_tail=True)
    return join_filter(current, snapshot, sums, state)
