"""Dynamic CSP state for left-to-right text generation.

Decision variables are created one at a time as generation proceeds. Each
holds one sub-word token; consecutive tokens are grouped into word-level
meta-variables (a token opens a new word when it begins with the separator
space or starts a sentence). The state keeps a chronological trail so that
the newest assignment can be undone exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .bench import TaskSpec
    from .lm import Domain

SEPARATOR = " "
SENTENCE_END = frozenset(".!?")


class StateError(RuntimeError):
    """Raised when a core operation is called outside its precondition."""


@dataclass(frozen=True)
class Token:
    surface: str
    score: float = 0.0

    def __post_init__(self):
        if not self.surface:
            raise ValueError("token surface must be non-empty")

    @property
    def char_len(self) -> int:
        return len(self.surface)

    @property
    def starts_word(self) -> bool:
        return self.surface[0] == SEPARATOR

    @property
    def ends_sentence(self) -> bool:
        stripped = self.surface.rstrip()
        return bool(stripped) and stripped[-1] in SENTENCE_END


@dataclass
class DecisionVariable:
    id: int
    meta_id: Optional[int] = None
    assignment: Optional[Token] = None
    domain: Optional["Domain"] = None


@dataclass
class MetaVariable:
    id: int
    member_ids: list[int]
    complete: bool = False
    word: str = ""


@dataclass
class _Undo:
    sentence_index: int
    sentence_char_used: int
    sentence_word_count: int
    sentence_start: int
    n_metas: int
    last_meta: Optional[tuple[list[int], bool, str]]


@dataclass
class CspState:
    constraints: list = field(default_factory=list)
    count_spaces: bool = True
    variables: list[DecisionVariable] = field(default_factory=list)
    metas: list[MetaVariable] = field(default_factory=list)
    trail: list[tuple[int, Token]] = field(default_factory=list)
    sentence_index: int = 0
    sentence_char_used: int = 0
    sentence_word_count: int = 0
    # trail position of the first token of the current sentence
    sentence_start: int = 0
    _undo: list[_Undo] = field(default_factory=list, repr=False)

    @property
    def at_sentence_start(self) -> bool:
        return len(self.trail) == self.sentence_start

    @property
    def open_meta(self) -> Optional[MetaVariable]:
        """The word currently being built in this sentence, if any."""
        if self.at_sentence_start or not self.metas:
            return None
        last = self.metas[-1]
        return None if last.complete else last

    @property
    def words_in_sentence(self) -> int:
        return self.sentence_word_count + (self.open_meta is not None)

    def token_cost(self, token: Token) -> int:
        """Characters ``token`` adds to the current sentence if assigned next."""
        return surface_cost(token.surface, self.at_sentence_start, self.count_spaces)

    def signature(self) -> tuple:
        """Structural identity used for round-trip comparisons."""
        return (
            tuple(self.trail),
            tuple((v.id, v.meta_id, v.assignment) for v in self.variables),
            tuple((m.id, tuple(m.member_ids), m.complete, m.word) for m in self.metas),
            self.sentence_index,
            self.sentence_char_used,
            self.sentence_word_count,
            self.sentence_start,
        )


def surface_cost(surface: str, sentence_initial: bool, count_spaces: bool = True) -> int:
    if sentence_initial and surface.startswith(SEPARATOR):
        surface = surface[1:]
    if count_spaces:
        return len(surface)
    return sum(not c.isspace() for c in surface)


def init_state(task: "TaskSpec") -> CspState:
    if not task.constraints and task.budget is None:
        raise ValueError("unbounded task: no constraints and no budget")
    return CspState(constraints=list(task.constraints), count_spaces=task.count_spaces)


def extend_variable(state: CspState) -> int:
    if state.variables and state.variables[-1].assignment is None:
        raise StateError("previous variable unassigned")
    var = DecisionVariable(id=len(state.variables))
    state.variables.append(var)
    return var.id


def discard_variable(state: CspState) -> None:
    """Drop the newest variable; it must be unassigned."""
    if not state.variables or state.variables[-1].assignment is not None:
        raise StateError("newest variable is not an unassigned variable")
    state.variables.pop()


def assign_token(state: CspState, var: int, token: Token) -> CspState:
    if not state.variables or var != state.variables[-1].id:
        raise StateError(f"variable {var} is not the newest variable")
    dv = state.variables[var]
    if dv.assignment is not None:
        raise StateError(f"variable {var} already assigned")
    if dv.domain is not None and token not in dv.domain.candidates:
        raise StateError(f"token {token.surface!r} not in domain of variable {var}")

    last = state.metas[-1] if state.metas else None
    state._undo.append(
        _Undo(
            state.sentence_index,
            state.sentence_char_used,
            state.sentence_word_count,
            state.sentence_start,
            len(state.metas),
            (list(last.member_ids), last.complete, last.word) if last else None,
        )
    )

    initial = state.at_sentence_start
    if token.starts_word or initial:
        current = state.open_meta
        if current is not None:
            current.complete = True
            state.sentence_word_count += 1
        word = token.surface[1:] if token.starts_word else token.surface
        state.metas.append(MetaVariable(id=len(state.metas), member_ids=[var], word=word))
    else:
        meta = state.metas[-1]
        meta.member_ids.append(var)
        meta.word += token.surface

    state.sentence_char_used += surface_cost(token.surface, initial, state.count_spaces)
    dv.assignment = token
    dv.meta_id = state.metas[-1].id
    state.trail.append((var, token))

    if token.ends_sentence:
        state.metas[-1].complete = True
        state.sentence_index += 1
        state.sentence_char_used = 0
        state.sentence_word_count = 0
        state.sentence_start = len(state.trail)
    return state


def retract_last(state: CspState) -> tuple[CspState, tuple[int, Token]]:
    """Undo the newest assignment.

    Unassigned variables created after it are dropped; the retracted variable
    itself stays in place, unassigned, so it can take another value.
    """
    if not state.trail:
        raise StateError("nothing to retract")
    var, token = state.trail.pop()
    undo = state._undo.pop()
    del state.variables[var + 1:]
    dv = state.variables[var]
    dv.assignment = None
    dv.meta_id = None

    del state.metas[undo.n_metas:]
    if undo.last_meta is not None:
        members, complete, word = undo.last_meta
        meta = state.metas[-1]
        meta.member_ids, meta.complete, meta.word = members, complete, word
    state.sentence_index = undo.sentence_index
    state.sentence_char_used = undo.sentence_char_used
    state.sentence_word_count = undo.sentence_word_count
    state.sentence_start = undo.sentence_start
    return state, (var, token)


def sentences(state: CspState) -> list[str]:
    """Rendered sentences in order; the last may be unfinished."""
    out: list[str] = []
    current = ""
    initial = True
    for _, token in state.trail:
        surface = token.surface
        if initial and surface.startswith(SEPARATOR):
            surface = surface[1:]
        current += surface
        initial = token.ends_sentence
        if initial:
            out.append(current.rstrip(SEPARATOR))
            current = ""
    if current:
        out.append(current.rstrip(SEPARATOR))
    return out


def render_text(state: CspState) -> str:
    return SEPARATOR.join(sentences(state))


def serialize_assignment(state: CspState) -> str:
    """Encode the trail as ``surface;`` records, e.g. ``Us;ing; a;``.

    A literal ``;`` or backslash inside a surface is backslash-escaped.
    """
    return "".join(
        token.surface.replace("\\", "\\\\").replace(";", "\\;") + ";"
        for _, token in state.trail
    )


def parse_assignment(text: str) -> list[str]:
    surfaces: list[str] = []
    buf: list[str] = []
    chars = iter(text)
    for c in chars:
        if c == "\\":
            nxt = next(chars, None)
            if nxt is None:
                raise ValueError("dangling escape at end of input")
            buf.append(nxt)
        elif c == ";":
            if not buf:
                raise ValueError(f"empty token at record {len(surfaces)}")
            surfaces.append("".join(buf))
            buf = []
        else:
            buf.append(c)
    if buf:
        raise ValueError(f"unterminated token {''.join(buf)!r}")
    return surfaces
