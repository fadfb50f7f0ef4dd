"""Deterministic word n-gram backend used for offline runs and tests.

One object serves both backend roles. Left-to-right scoring uses the last
``n - 1`` units of context with add-one smoothing. Fill-mask scoring
multiplies the left-bigram and right-bigram probabilities of each word, a
cheap stand-in for bidirectional conditioning.

Long words can be split into a head and a tail sub-token (chosen by ``seed``)
so that generation has to build some words from several decision variables.
A split word is only reachable through its head; a head never coincides with
a vocabulary word, which lets the mock tell from plain text that a word is
still unfinished.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter, defaultdict
from functools import lru_cache
from importlib import resources
from typing import Optional

from .core import Token
from .lm import MASK, Domain, make_domain

UNIT_RE = re.compile(r"[A-Za-z0-9]+|[.!?]")
BOS = "<s>"


def tokenize(text: str) -> list[str]:
    return UNIT_RE.findall(text)


def is_punct(unit: str) -> bool:
    return not unit[0].isalnum()


def default_corpus() -> str:
    return resources.files("gencp").joinpath("data/corpus.txt").read_text(encoding="utf-8")


class NGramMock:
    mask_token = MASK

    def __init__(self, corpus: str, n: int = 2, seed: int = 0,
                 split_min: Optional[int] = 7, split_prob: float = 0.5):
        if n not in (2, 3):
            raise ValueError("n must be 2 or 3")
        units = tokenize(corpus)
        if not units:
            raise ValueError("empty corpus")
        self.n = n
        self.seed = seed
        self.vocab: list[str] = sorted(set(units))
        self._vocab_set = frozenset(self.vocab)

        stream = [BOS] * (n - 1) + units
        self._ngram: Counter = Counter()
        self._hist: Counter = Counter()
        for i in range(n - 1, len(stream)):
            h = tuple(stream[i - n + 1:i])
            self._ngram[h, stream[i]] += 1
            self._hist[h] += 1
        padded = [BOS] + units
        self._bigram = Counter(zip(padded, padded[1:]))
        self._bihist = Counter(padded[:-1])
        self._unigram = Counter(units)
        self._total = len(units)

        rng = random.Random(seed)
        self.splits: dict[str, tuple[str, str]] = {}
        self.heads: dict[str, list[str]] = defaultdict(list)
        if split_min is not None:
            for w in self.vocab:
                if is_punct(w) or len(w) < max(split_min, 4):
                    continue
                if rng.random() >= split_prob:
                    continue
                cut = rng.randint(2, len(w) - 2)
                head = w[:cut]
                if head in self._vocab_set:
                    continue
                self.splits[w] = (head, w[cut:])
                self.heads[head].append(w)
        self.heads = dict(self.heads)

    @property
    def V(self) -> int:
        return len(self.vocab)

    def prob(self, word: str, history: tuple[str, ...]) -> float:
        """Add-one smoothed P(word | history) with ``len(history) == n - 1``."""
        return (self._ngram[history, word] + 1) / (self._hist[history] + self.V)

    def bigram_prob(self, word: str, prev: str) -> float:
        return (self._bigram[prev, word] + 1) / (self._bihist[prev] + self.V)

    def unigram_prob(self, word: str) -> float:
        return (self._unigram[word] + 1) / (self._total + self.V)

    def _context(self, prompt: str) -> tuple[tuple[str, ...], Optional[str]]:
        units = [BOS] * (self.n - 1) + tokenize(prompt)
        last = units[-1]
        if last in self.heads and last not in self._vocab_set:
            return tuple(units[-self.n:-1]), last
        return tuple(units[len(units) - self.n + 1:]), None

    @lru_cache(maxsize=65536)
    def _ranked(self, history: tuple[str, ...], head: Optional[str]) -> Domain:
        if head is not None:
            words = self.heads[head]
            probs = {w: self.prob(w, history) for w in words}
            total = sum(probs.values())
            tokens = [Token(self.splits[w][1], math.log(p / total)) for w, p in probs.items()]
            return make_domain(tokens)
        mass: dict[str, float] = defaultdict(float)
        for w in self.vocab:
            if w in self.splits:
                surface = " " + self.splits[w][0]
            elif is_punct(w):
                surface = w
            else:
                surface = " " + w
            mass[surface] += self.prob(w, history)
        return make_domain(Token(s, math.log(p)) for s, p in mass.items())

    def next_tokens(self, prompt: str, k: int, temperature: float = 0.8) -> Domain:
        # temperature is ignored: the mock stays deterministic
        ranked = self._ranked(*self._context(prompt))
        return make_domain(ranked.candidates, k, "mock")

    def fill_mask(self, prompt: str, k: int) -> list[Domain]:
        parts = prompt.split(self.mask_token)
        out = []
        for i in range(len(parts) - 1):
            left = tokenize(parts[i])
            right = tokenize(parts[i + 1])
            if left:
                prev = left[-1]
            elif i == 0:
                prev = BOS
            else:
                prev = None
            nxt = right[0] if right and parts[i + 1].strip() else None
            out.append(self._fill_one(prev, nxt, k))
        return out

    @lru_cache(maxsize=65536)
    def _fill_one(self, prev: Optional[str], nxt: Optional[str], k: int) -> Domain:
        tokens = []
        for w in self.vocab:
            score = math.log(self.bigram_prob(w, prev) if prev is not None else self.unigram_prob(w))
            if nxt is not None:
                score += math.log(self.bigram_prob(nxt, w))
            tokens.append(Token(w, score))
        return make_domain(tokens, k, "masked")


def build_mock(corpus: str, n: int = 2, seed: int = 0, **kwargs) -> NGramMock:
    return NGramMock(corpus, n=n, seed=seed, **kwargs)


def load_corpus(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()
