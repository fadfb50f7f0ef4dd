"""Benchmark tasks and the suite runner.

``builtin_tasks`` holds the six full-size tasks. Their character targets are
far beyond what the tiny mock vocabulary can reach in reasonable time, so
each also has a ``-scaled`` variant with the same constraint structure and
smaller numbers for offline runs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .constraints import (
    ALL,
    CharSum,
    ForbiddenWords,
    LetterExclusion,
    PrefixKeyword,
    SentenceCount,
    WordCount,
)
from .search import SearchConfig, Solution, solve

log = logging.getLogger(__name__)

PREPROMPT = (
    "Amidst the crimson glow of a setting sun, a lone warrior, clad in battle-worn silver, "
    "stood atop the ancient ruins, his blade gleaming with the promise of legend."
)

CSV_COLUMNS = ("task", "variant", "depth", "llm_calls", "mlm_calls", "backtracks", "solutions", "wall_ms")
ERROR_MARK = "ERROR"


@dataclass(frozen=True)
class TaskSpec:
    name: str
    sentence_count: int
    constraints: tuple = ()
    preprompt: str = PREPROMPT
    budget: Optional[int] = None
    count_spaces: bool = True

    def __post_init__(self):
        if self.sentence_count < 1:
            raise ValueError("sentence_count must be >= 1")
        object.__setattr__(self, "constraints", tuple(self.constraints))


def builtin_tasks() -> list[TaskSpec]:
    return [
        TaskSpec("sent-1", 1, (CharSum.exact(82),)),
        TaskSpec("para-2", 2, (WordCount(10, 15), CharSum.exact(60))),
        TaskSpec("para-3", 3, (WordCount(15),)),
        TaskSpec("para-4", 2, (WordCount(14, 14), CharSum(72, 74))),
        TaskSpec("para-5", 3, (PrefixKeyword(0, "Dragons"), PrefixKeyword(1, "Kingdoms"),
                               PrefixKeyword(2, "Barbarians"))),
        TaskSpec("para-6", 4, (ForbiddenWords(frozenset({"the", "and", "of"})),)),
    ]


def scaled_tasks() -> list[TaskSpec]:
    """Small versions of the builtin tasks that the bundled mock corpus can satisfy."""
    return [
        TaskSpec("sent-1-scaled", 1, (CharSum.exact(24),)),
        TaskSpec("para-2-scaled", 2, (WordCount(3, 5), CharSum.exact(20))),
        TaskSpec("para-3-scaled", 3, (WordCount(4),)),
        TaskSpec("para-4-scaled", 2, (WordCount(4, 4), CharSum(21, 23))),
        TaskSpec("para-5-scaled", 3, (PrefixKeyword(0, "Dragons"), PrefixKeyword(1, "Kingdoms"),
                                      PrefixKeyword(2, "Barbarians"))),
        TaskSpec("para-6-scaled", 4, (ForbiddenWords(frozenset({"the", "and", "of"})),)),
    ]


def _key(name: str) -> str:
    return name.replace("-", "").replace("_", "").lower()


def get_task(name: str) -> TaskSpec:
    """Look up a builtin or scaled task; dashes are optional (``sent1-scaled``)."""
    for task in builtin_tasks() + scaled_tasks():
        if _key(task.name) == _key(name):
            return task
    raise KeyError(f"no builtin task named {name!r}")


# -- task (de)serialization ----------------------------------------------------


def constraint_to_dict(spec) -> dict:
    if isinstance(spec, CharSum):
        kind, sentence, params = "char_sum", spec.sentence, {"min": spec.target_min, "max": spec.target_max}
    elif isinstance(spec, WordCount):
        kind, sentence, params = "word_count", spec.sentence, {"min": spec.min, "max": spec.max}
    elif isinstance(spec, SentenceCount):
        return {"type": "sentence_count", "params": {"n": spec.n}}
    elif isinstance(spec, PrefixKeyword):
        kind, sentence, params = "prefix_keyword", spec.sentence, {"keyword": spec.keyword}
    elif isinstance(spec, ForbiddenWords):
        kind, sentence, params = "forbidden_words", ALL, {"words": sorted(spec.words)}
    elif isinstance(spec, LetterExclusion):
        kind, sentence, params = "letter_exclusion", ALL, {"letters": sorted(spec.letters)}
    else:
        raise TypeError(f"unknown constraint {spec!r}")
    return {"type": kind, "sentence": sentence, "params": params}


def task_to_dict(task: TaskSpec) -> dict:
    return {
        "name": task.name,
        "preprompt": task.preprompt,
        "sentences": task.sentence_count,
        "count_spaces": task.count_spaces,
        "budget": task.budget,
        "constraints": [constraint_to_dict(c) for c in task.constraints],
    }


# -- suite ---------------------------------------------------------------------


@dataclass(frozen=True)
class RunRow:
    task: str
    variant: str
    depth: int
    llm_calls: int
    mlm_calls: int
    backtracks: int
    solutions: int
    wall_ms: int
    failed: bool = False


@dataclass
class RunReport:
    rows: list[RunRow] = field(default_factory=list)
    solutions: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.task, r.variant, r.depth, r.llm_calls, r.mlm_calls, r.backtracks,
                             ERROR_MARK if r.failed else r.solutions, r.wall_ms])
        return buf.getvalue()

    @staticmethod
    def rows_from_csv(text: str) -> list[RunRow]:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for rec in reader:
            failed = rec["solutions"] == ERROR_MARK
            rows.append(RunRow(
                rec["task"], rec["variant"], int(rec["depth"]), int(rec["llm_calls"]),
                int(rec["mlm_calls"]), int(rec["backtracks"]),
                0 if failed else int(rec["solutions"]), int(rec["wall_ms"]), failed,
            ))
        return rows

    def solutions_jsonl(self) -> str:
        lines = []
        for (task, variant), sols in self.solutions.items():
            for s in sols:
                lines.append(json.dumps(solution_record(s, variant), sort_keys=True))
        return "".join(line + "\n" for line in lines)


def solution_record(solution: Solution, variant: Optional[str] = None) -> dict:
    m = solution.metrics_at_emit
    rec = {
        "task": solution.task_name,
        "text": solution.text,
        "log_likelihood": solution.log_likelihood,
        "llm_calls": m.llm_calls,
        "mlm_calls": m.mlm_calls,
        "backtracks": m.backtracks,
        "elapsed_ms": round(m.wall_ms),
    }
    if variant is not None:
        rec["variant"] = variant
    return rec


def run_suite(tasks: Sequence[TaskSpec], variants: Sequence[str], cfg: SearchConfig,
              llm, mlm=None, *, jobs: int = 1, clock=time.perf_counter) -> RunReport:
    """Run every (task, variant) cell under the same budgets and seed."""
    cells = [(t, v) for t in tasks for v in variants]

    def run_cell(cell):
        task, variant = cell
        cell_cfg = replace(cfg, variant=variant)
        try:
            sols, metrics = solve(task, cell_cfg, llm, mlm, clock=clock)
        except Exception as exc:  # a broken cell must not sink the suite
            log.exception("cell %s/%s failed", task.name, variant)
            return RunRow(task.name, variant, cell_cfg.depth, 0, 0, 0, 0, 0, True), [], repr(exc)
        row = RunRow(task.name, variant, cell_cfg.depth, metrics.llm_calls, metrics.mlm_calls,
                     metrics.backtracks, metrics.solutions, round(metrics.wall_ms))
        return row, sols, None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]

    report = RunReport()
    for (task, variant), (row, sols, err) in zip(cells, results):
        report.rows.append(row)
        report.solutions[task.name, variant] = sols
        if err is not None:
            report.errors[task.name, variant] = err
    return report
