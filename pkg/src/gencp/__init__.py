"""Constraint-guided text generation as a dynamically built CSP."""

from .bench import TaskSpec, builtin_tasks, get_task, run_suite, scaled_tasks
from .constraints import (
    ALL,
    CharSum,
    ForbiddenWords,
    LetterExclusion,
    PrefixKeyword,
    SentenceCount,
    WordCount,
    validate_solution,
)
from .core import Token, init_state, parse_assignment, render_text, serialize_assignment
from .lm import Domain, make_domain
from .mock import NGramMock, build_mock, default_corpus
from .search import Metrics, SearchConfig, Solution, Solver, solve

__version__ = "0.1.0"

__all__ = [
    "ALL", "CharSum", "Domain", "ForbiddenWords", "LetterExclusion", "Metrics", "NGramMock",
    "PrefixKeyword", "SearchConfig", "SentenceCount", "Solution", "Solver", "TaskSpec", "Token",
    "WordCount", "build_mock", "builtin_tasks", "get_task", "init_state", "make_domain",
    "parse_assignment", "render_text", "run_suite", "scaled_tasks", "serialize_assignment",
    "solve", "validate_solution",
]
