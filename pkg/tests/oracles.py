"""Reference implementations used as test oracles.

None of these import solver internals beyond the public data types and the
mock backend; they re-derive every answer the slow, obvious way.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from gencp.bench import PREPROMPT, TaskSpec
from gencp.constraints import CharSum, validate_solution
from gencp.mock import build_mock, default_corpus


def closes(surface: str) -> bool:
    s = surface.rstrip(" ")
    return bool(s) and s[-1] in ".!?"


def ref_render(surfaces) -> str:
    """Character-by-character concatenation with sentence-initial spaces dropped."""
    out = []
    at_start = True
    for s in surfaces:
        for i, ch in enumerate(s):
            if at_start and i == 0 and ch == " ":
                if out:
                    out.append(" ")  # sentences are joined by exactly one space
                continue
            if at_start and i == 0 and out:
                out.append(" ")
            out.append(ch)
        at_start = closes(s)
    return "".join(out)


def ref_prompt(preprompt: str, generated: str) -> str:
    if preprompt and generated:
        return preprompt + " " + generated
    return preprompt + generated


def brute_force(task: TaskSpec, llm, k: int, max_tokens: int) -> set[tuple[str, ...]]:
    """Generate-and-test over the whole top-k token tree up to ``max_tokens``."""
    found: set[tuple[str, ...]] = set()

    def rec(surfaces: list[str]) -> None:
        if sum(closes(s) for s in surfaces) == task.sentence_count:
            if validate_solution(ref_render(surfaces), task)[0]:
                found.add(tuple(surfaces))
            return
        if len(surfaces) == max_tokens:
            return
        prompt = ref_prompt(task.preprompt, ref_render(surfaces))
        for t in llm.next_tokens(prompt, k, 0.8).candidates:
            rec(surfaces + [t.surface])

    rec([])
    return found


@lru_cache(maxsize=None)
def mock_for(seed: int, n: int = 2):
    return build_mock(default_corpus(), n=n, seed=seed)


@dataclass(frozen=True)
class Instance:
    task: TaskSpec
    mock_seed: int
    k: int
    max_tokens: int


def random_instance(seed: int) -> Instance:
    """A small exact-char-sum instance with at least one solution.

    The target is the length of a random walk through the top-k tree, so the
    brute-force set is never empty.
    """
    rng = random.Random(seed)
    mock_seed = rng.randrange(4)
    llm = mock_for(mock_seed)
    k = rng.randint(3, 5)
    max_tokens = rng.randint(4, 6)
    preprompt = rng.choice(["", PREPROMPT, "The night was cold."])
    for _ in range(200):
        surfaces: list[str] = []
        while len(surfaces) < max_tokens:
            prompt = ref_prompt(preprompt, ref_render(surfaces))
            cands = llm.next_tokens(prompt, k, 0.8).candidates
            surfaces.append(rng.choice(cands).surface)
            if closes(surfaces[-1]):
                break
        if closes(surfaces[-1]):
            target = len(ref_render(surfaces))
            task = TaskSpec(f"rand-{seed}", 1, (CharSum.exact(target),), preprompt)
            return Instance(task, mock_seed, k, max_tokens)
    raise RuntimeError(f"no closing walk for seed {seed}")


def exhaustive_config(inst: Instance, variant: str):
    from gencp.search import SearchConfig

    return SearchConfig(top_k=inst.k, max_tokens=inst.max_tokens, restart_on_solution=False,
                        max_solutions=None, max_llm_calls=10**7, variant=variant)


def solver_set(inst: Instance, variant: str):
    """Every solution the solver finds with restarts off and no practical budget."""
    from gencp.search import Solver

    llm = mock_for(inst.mock_seed)
    solver = Solver(inst.task, exhaustive_config(inst, variant), llm, llm, clock=lambda: 0.0)
    sols = list(solver.run())
    return {s.tokens for s in sols}, solver.metrics, sols


def make_state(surfaces, task: TaskSpec):
    from gencp.core import Token, assign_token, extend_variable, init_state

    state = init_state(task)
    for s in surfaces:
        var = extend_variable(state)
        assign_token(state, var, Token(s))
    return state


def is_subsequence(small, big) -> bool:
    it = iter(big)
    return all(any(x is y or x == y for y in it) for x in small)
