"""Backtracking search that generates text one token variable at a time.

Each step creates a variable, optionally previews the next few word slots
with the masked model, asks the left-to-right model for a domain, filters it
with every propagator, and assigns the best remaining candidate. An empty
domain retracts the newest assignment and moves on to its next candidate.
After a solution the search restarts from scratch with that exact token
sequence banned, so a deterministic backend still yields distinct texts.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator, Optional

from .constraints import MAX_WORD_LEN, propagate_all, validate_solution
from .core import (
    CspState,
    Token,
    assign_token,
    discard_variable,
    extend_variable,
    init_state,
    render_text,
    retract_last,
)
from .lm import Domain, build_left_prompt, next_token_domain
from .preview import preview_domains, preview_filter, remaining_window, should_preview

log = logging.getLogger(__name__)

VARIANTS = ("vanilla", "metavar", "previewMLM")


@dataclass(frozen=True)
class SearchConfig:
    top_k: int = 50
    temperature: float = 0.8
    preview_depth: int = 2
    preview_trigger_budget: Optional[int] = None
    mlm_top_k: int = 50
    max_llm_calls: Optional[int] = None
    max_solutions: Optional[int] = 10
    max_wall_ms: Optional[int] = None
    seed: int = 0
    restart_on_solution: bool = True
    likelihood_floor: Optional[float] = None
    variant: str = "previewMLM"
    max_tokens: Optional[int] = None
    max_sentence_tokens: Optional[int] = 40
    max_word_len: int = MAX_WORD_LEN

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.preview_depth < 0:
            raise ValueError("preview_depth must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.max_llm_calls is None and self.max_solutions is None and self.max_wall_ms is None:
            raise ValueError("at least one of max_llm_calls, max_solutions, max_wall_ms must be set")

    @property
    def depth(self) -> int:
        """Preview depth actually used by this variant."""
        return self.preview_depth if self.variant == "previewMLM" else 0


@dataclass
class Metrics:
    llm_calls: int = 0
    mlm_calls: int = 0
    backtracks: int = 0
    solutions: int = 0
    nodes_expanded: int = 0
    wall_ms: float = 0.0
    rejected: int = 0

    def snapshot(self) -> "Metrics":
        return replace(self)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Solution:
    text: str
    log_likelihood: float
    metrics_at_emit: Metrics
    task_name: str
    tokens: tuple[str, ...] = ()


def select_value(domain: Domain, tried) -> Optional[Token]:
    """Best-scored candidate whose surface is not in ``tried`` (ties by surface)."""
    best = None
    for t in domain.candidates:
        if t.surface in tried:
            continue
        if best is None or (t.score, _neg(t.surface)) > (best.score, _neg(best.surface)):
            best = t
    return best


def _neg(surface: str):
    # lexicographically smaller surfaces win ties under a max comparison
    return tuple(-ord(c) for c in surface) + (1,)


def on_solution(state: CspState, cfg: SearchConfig, solutions_so_far: int) -> str:
    if cfg.max_solutions is not None and solutions_so_far >= cfg.max_solutions:
        return "stop"
    return "restart" if cfg.restart_on_solution else "continue"


def _well_formed(token: Token) -> bool:
    body = token.surface[1:] if token.starts_word else token.surface
    return bool(body) and not any(c.isspace() for c in body)


@dataclass
class _Frame:
    var: int
    domain: Domain
    tried: set = field(default_factory=set)


class Solver:
    """One search over one task. Not thread-safe; run one per thread."""

    def __init__(self, task, cfg: SearchConfig, llm, mlm=None,
                 clock: Callable[[], float] = time.perf_counter):
        if cfg.variant == "previewMLM" and cfg.preview_depth > 0 and mlm is None:
            raise ValueError("variant previewMLM needs a masked-model backend")
        self.task = task
        self.cfg = cfg
        self.llm = llm
        self.mlm = mlm
        self.clock = clock
        self.metrics = Metrics()
        self.nogoods: set[tuple[str, ...]] = set()
        # (sentence index, remaining budget, words so far) at each preview
        self.preview_log: list[tuple[int, int, int]] = []
        self.state: CspState = init_state(task)
        self._frames: list[_Frame] = []
        self._start = 0.0
        llm_budget = [b for b in (cfg.max_llm_calls, task.budget) if b is not None]
        self._llm_budget = min(llm_budget) if llm_budget else None

    # -- budgets ---------------------------------------------------------------

    def _elapsed_ms(self) -> float:
        return (self.clock() - self._start) * 1000.0

    def _llm_exhausted(self) -> bool:
        return self._llm_budget is not None and self.metrics.llm_calls >= self._llm_budget

    def _out_of_budget(self) -> bool:
        if self._llm_exhausted():
            return True
        return self.cfg.max_wall_ms is not None and self._elapsed_ms() >= self.cfg.max_wall_ms

    # -- tree moves ------------------------------------------------------------

    def _restart(self) -> None:
        self.state = init_state(self.task)
        self._frames = []

    def _retract(self) -> None:
        retract_last(self.state)
        self.metrics.backtracks += 1

    def _choose(self) -> bool:
        """Assign the next untried value, backtracking as needed; False when exhausted."""
        while True:
            frame = self._frames[-1]
            token = select_value(frame.domain, frame.tried)
            if token is not None:
                frame.tried.add(token.surface)
                assign_token(self.state, frame.var, token)
                self.metrics.nodes_expanded += 1
                return True
            self._frames.pop()
            discard_variable(self.state)
            if not self.state.trail:
                return False
            self._retract()

    def _backtrack(self) -> bool:
        if not self.state.trail:
            return False
        self._retract()
        return self._choose()

    # -- filtering -------------------------------------------------------------

    def _filter(self, raw: Domain, snapshot) -> Domain:
        state, cfg, task = self.state, self.cfg, self.task
        tokens = [t for t in raw.candidates if _well_formed(t)]
        if cfg.variant == "vanilla":
            tokens = [t for t in tokens if t.starts_word or state.at_sentence_start
                      or not any(c.isalnum() for c in t.surface)]
        last_sentence = state.sentence_index == task.sentence_count - 1
        depth = len(state.trail) + 1
        if cfg.max_tokens is not None and depth >= cfg.max_tokens:
            tokens = [t for t in tokens if t.ends_sentence and last_sentence]
        in_sentence = len(state.trail) - state.sentence_start + 1
        if cfg.max_sentence_tokens is not None and in_sentence >= cfg.max_sentence_tokens:
            tokens = [t for t in tokens if t.ends_sentence]
        if cfg.likelihood_floor is not None:
            total = sum(t.score for _, t in state.trail)
            tokens = [t for t in tokens if (total + t.score) / depth >= cfg.likelihood_floor]
        if self.nogoods and last_sentence:
            prefix = tuple(t.surface for _, t in state.trail)
            tokens = [t for t in tokens
                      if not (t.ends_sentence and prefix + (t.surface,) in self.nogoods)]
        domain = propagate_all(state, raw.replace(tokens), task.constraints,
                               max_word_len=cfg.max_word_len)
        if snapshot is not None and domain.candidates:
            domain = preview_filter(state, domain, snapshot)
        return domain

    # -- main loop -------------------------------------------------------------

    def _emit(self) -> Optional[Solution]:
        state = self.state
        text = render_text(state)
        tokens = tuple(t.surface for _, t in state.trail)
        self.nogoods.add(tokens)
        ok, violations = validate_solution(text, self.task)
        if not ok:
            self.metrics.rejected += 1
            log.error("search produced an invalid text %r: %s", text, violations)
            return None
        self.metrics.solutions += 1
        self.metrics.wall_ms = self._elapsed_ms()
        return Solution(
            text=text,
            log_likelihood=sum(t.score for _, t in state.trail),
            metrics_at_emit=self.metrics.snapshot(),
            task_name=self.task.name,
            tokens=tokens,
        )

    def _step(self) -> bool:
        """Create and assign one more variable; False when the tree is exhausted."""
        state, cfg = self.state, self.cfg
        if cfg.max_tokens is not None and len(state.trail) >= cfg.max_tokens:
            return self._backtrack()
        var = extend_variable(state)
        snapshot = None
        if cfg.depth > 0 and should_preview(state, self.task, cfg):
            window = remaining_window(state)
            self.preview_log.append((state.sentence_index, window[1], state.words_in_sentence))
            snapshot = preview_domains(state, self.mlm, cfg.depth, cfg.mlm_top_k,
                                       preprompt=self.task.preprompt, metrics=self.metrics)
            if snapshot.wiped_out:
                discard_variable(state)
                return self._backtrack()
        raw = next_token_domain(self.llm, build_left_prompt(state, self.task.preprompt),
                                cfg.top_k, cfg.temperature, self.metrics)
        domain = self._filter(raw, snapshot)
        state.variables[var].domain = domain
        self._frames.append(_Frame(var, domain))
        return self._choose()

    def run(self) -> Iterator[Solution]:
        self._start = self.clock()
        self._restart()
        try:
            while not self._out_of_budget():
                if self.state.sentence_index >= self.task.sentence_count:
                    solution = self._emit()
                    if solution is not None:
                        yield solution
                    action = on_solution(self.state, self.cfg, self.metrics.solutions)
                    if action == "stop":
                        break
                    if action == "restart":
                        self._restart()
                        continue
                    if not self._backtrack():
                        break
                    continue
                if not self._step():
                    break
        finally:
            self.metrics.wall_ms = self._elapsed_ms()


def solve(task, cfg: SearchConfig, llm, mlm=None, **kwargs) -> tuple[list[Solution], Metrics]:
    solver = Solver(task, cfg, llm, mlm, **kwargs)
    solutions = list(solver.run())
    return solutions, solver.metrics
