"""Domain-generating model interfaces and prompt construction.

Two backend roles exist: a left-to-right model proposing the next sub-word
token, and a masked model proposing whole words for masked positions. Both
are plain protocols so the built-in n-gram mock and the HTTP adapters are
interchangeable. All model traffic from the solver goes through
``next_token_domain`` and ``fill_mask_domains``, which own call accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Optional, Protocol

from .core import CspState, Token, render_text

if TYPE_CHECKING:
    from .search import Metrics

MASK = "[MASK]"


@dataclass(frozen=True)
class Domain:
    """Candidate values of one variable, best first.

    ``short`` flags a backend that returned fewer than the requested k.
    """

    candidates: tuple[Token, ...] = ()
    source: str = "mock"
    short: bool = False

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def replace(self, candidates: Iterable[Token]) -> "Domain":
        return replace(self, candidates=tuple(candidates))

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.candidates]


def make_domain(tokens: Iterable[Token], k: Optional[int] = None, source: str = "mock") -> Domain:
    """Sort by score (ties by surface), drop duplicate surfaces, cut to ``k``."""
    best: dict[str, Token] = {}
    for t in tokens:
        if t.surface not in best or t.score > best[t.surface].score:
            best[t.surface] = t
    ordered = sorted(best.values(), key=lambda t: (-t.score, t.surface))
    if k is not None:
        ordered = ordered[:k]
    return Domain(tuple(ordered), source, short=k is not None and len(ordered) < k)


class LanguageModel(Protocol):
    def next_tokens(self, prompt: str, k: int, temperature: float) -> Domain: ...


class MaskedLanguageModel(Protocol):
    mask_token: str

    def fill_mask(self, prompt: str, k: int) -> list[Domain]: ...


def _join(*parts: str) -> str:
    return " ".join(p for p in parts if p)


@dataclass(frozen=True)
class LeftPrompt:
    preprompt: str
    generated: str

    @property
    def text(self) -> str:
        return _join(self.preprompt, self.generated)


@dataclass(frozen=True)
class MaskedPrompt:
    preprompt: str
    generated: str
    mask_count: int

    def text(self, mask_token: str = MASK) -> str:
        return _join(self.preprompt, self.generated, " ".join([mask_token] * self.mask_count))


def build_left_prompt(state: CspState, preprompt: str = "") -> LeftPrompt:
    return LeftPrompt(preprompt, render_text(state))


def build_masked_prompt(state: CspState, d: int, preprompt: str = "") -> MaskedPrompt:
    if d < 1:
        raise ValueError("mask count must be >= 1")
    return MaskedPrompt(preprompt, render_text(state), d)


def next_token_domain(backend: LanguageModel, prompt: LeftPrompt, k: int,
                      temperature: float = 0.8, metrics: Optional["Metrics"] = None) -> Domain:
    if k < 1:
        raise ValueError("k must be >= 1")
    if metrics is not None:
        metrics.llm_calls += 1
    domain = backend.next_tokens(prompt.text, k, temperature)
    # adapters are not trusted to sort
    ordered = make_domain(domain.candidates, k, domain.source)
    return replace(ordered, short=ordered.short or domain.short)


def fill_mask_domains(backend: MaskedLanguageModel, prompt: MaskedPrompt, k: int,
                      metrics: Optional["Metrics"] = None) -> list[Domain]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if metrics is not None:
        metrics.mlm_calls += 1
    domains = backend.fill_mask(prompt.text(getattr(backend, "mask_token", MASK)), k)
    if len(domains) != prompt.mask_count:
        raise ValueError(f"backend returned {len(domains)} domains for {prompt.mask_count} masks")
    return [make_domain(d.candidates, k, d.source) for d in domains]


@dataclass
class CountingBackend:
    """Wraps a backend and counts raw calls; used to audit metrics."""

    inner: object
    next_calls: int = 0
    mask_calls: int = 0
    mask_token: str = field(default=MASK)

    def __post_init__(self):
        self.mask_token = getattr(self.inner, "mask_token", MASK)

    def next_tokens(self, prompt: str, k: int, temperature: float) -> Domain:
        self.next_calls += 1
        return self.inner.next_tokens(prompt, k, temperature)

    def fill_mask(self, prompt: str, k: int) -> list[Domain]:
        self.mask_calls += 1
        return self.inner.fill_mask(prompt, k)
