"""Command-line entry point: ``gencp run | suite | validate``.

Exit codes: 0 completed, 1 completed without any solution, 2 usage or
configuration error, 3 fatal backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

from . import bench
from .bench import TaskSpec, get_task, run_suite, scaled_tasks, solution_record
from .clients import (
    LLM_KEY_ENV,
    MLM_KEY_ENV,
    BackendError,
    CompletionClient,
    CredentialsError,
    EndpointConfig,
    FillMaskClient,
)
from .constraints import ALL, validate_solution
from .mock import build_mock, default_corpus, load_corpus
from .search import VARIANTS, SearchConfig, Solver

log = logging.getLogger("gencp")

EXIT_OK, EXIT_NO_SOLUTIONS, EXIT_USAGE, EXIT_BACKEND = 0, 1, 2, 3

COUNTER_NOTE = ("backtracks count retraction events; one prompt sent to a model counts "
                "as one call; wall_ms is wall-clock time")


class TaskFileError(ValueError):
    pass


# -- task files ----------------------------------------------------------------

_FIELDS = {
    "char_sum": {"sentence", "min", "max", "target"},
    "word_count": {"sentence", "min", "max"},
    "sentence_count": {"n"},
    "prefix_keyword": {"sentence", "keyword"},
    "forbidden_words": {"sentence", "words"},
    "letter_exclusion": {"sentence", "letters"},
}


def _scope(value, where: str):
    if value == ALL:
        return ALL
    if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
        return value
    raise TaskFileError(f"{where}.sentence: expected a sentence index or \"all\", got {value!r}")


def _int(rec: dict, name: str, where: str, default=None, required=True):
    if name not in rec or rec[name] is None:
        if required and default is None:
            raise TaskFileError(f"{where}.{name}: missing")
        return default
    v = rec[name]
    if not isinstance(v, int) or isinstance(v, bool):
        raise TaskFileError(f"{where}.{name}: expected integer, got {v!r}")
    return v


def _constraint_from_dict(rec, where: str):
    from .constraints import CharSum, ForbiddenWords, LetterExclusion, PrefixKeyword, SentenceCount, WordCount

    if not isinstance(rec, dict):
        raise TaskFileError(f"{where}: expected an object")
    # parameters may sit in a nested "params" object or directly on the record
    nested = rec.get("params", {})
    if not isinstance(nested, dict):
        raise TaskFileError(f"{where}.params: expected an object")
    rec = {**{k: v for k, v in rec.items() if k != "params"}, **nested}
    kind = rec.get("type")
    if kind not in _FIELDS:
        raise TaskFileError(f"{where}.type: unknown constraint type {kind!r}")
    extra = set(rec) - _FIELDS[kind] - {"type"}
    if extra:
        raise TaskFileError(f"{where}: unexpected field(s) {sorted(extra)}")
    try:
        if kind == "char_sum":
            if "target" in rec:
                t = _int(rec, "target", where)
                return CharSum(t, t, _scope(rec.get("sentence", ALL), where))
            return CharSum(_int(rec, "min", where), _int(rec, "max", where),
                           _scope(rec.get("sentence", ALL), where))
        if kind == "word_count":
            return WordCount(_int(rec, "min", where, default=0), _int(rec, "max", where, required=False),
                             _scope(rec.get("sentence", ALL), where))
        if kind == "sentence_count":
            return SentenceCount(_int(rec, "n", where))
        if kind == "prefix_keyword":
            sentence = _scope(rec.get("sentence"), where)
            if sentence == ALL:
                raise TaskFileError(f"{where}.sentence: prefix_keyword needs a sentence index")
            keyword = rec.get("keyword")
            if not isinstance(keyword, str):
                raise TaskFileError(f"{where}.keyword: expected a string")
            return PrefixKeyword(sentence, keyword)
        if kind == "forbidden_words":
            words = rec.get("words")
            if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
                raise TaskFileError(f"{where}.words: expected a list of strings")
            return ForbiddenWords(frozenset(words))
        letters = rec.get("letters")
        if isinstance(letters, str):
            letters = list(letters)
        if not isinstance(letters, list) or not all(isinstance(c, str) and len(c) == 1 for c in letters):
            raise TaskFileError(f"{where}.letters: expected a list of single characters")
        return LetterExclusion(frozenset(letters))
    except ValueError as exc:
        if isinstance(exc, TaskFileError):
            raise
        raise TaskFileError(f"{where}: {exc}") from None


def task_from_dict(doc) -> TaskSpec:
    if not isinstance(doc, dict):
        raise TaskFileError("task file: top level must be an object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise TaskFileError("name: expected a non-empty string")
    n = _int(doc, "sentences", "task")
    if n < 1:
        raise TaskFileError(f"sentences: must be >= 1, got {n}")
    raw = doc.get("constraints", [])
    if not isinstance(raw, list):
        raise TaskFileError("constraints: expected a list")
    constraints = tuple(_constraint_from_dict(c, f"constraints[{i}]") for i, c in enumerate(raw))
    preprompt = doc.get("preprompt", bench.PREPROMPT)
    if not isinstance(preprompt, str):
        raise TaskFileError("preprompt: expected a string")
    count_spaces = doc.get("count_spaces", True)
    if not isinstance(count_spaces, bool):
        raise TaskFileError("count_spaces: expected true or false")
    budget = _int(doc, "budget", "task", required=False)
    return TaskSpec(name, n, constraints, preprompt, budget, count_spaces)


def parse_task_file(path) -> TaskSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return task_from_dict(doc)
    except TaskFileError as exc:
        raise TaskFileError(f"{path}: {exc}") from None


# -- argument handling -----------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_task_args(p: argparse.ArgumentParser, multiple: bool = False) -> None:
    g = p.add_mutually_exclusive_group(required=not multiple)
    if multiple:
        g.add_argument("--builtin", action="append", metavar="NAME",
                       help="builtin task (repeatable; default: all scaled tasks)")
    else:
        g.add_argument("--builtin", metavar="NAME", help="builtin task name, e.g. sent-1 or sent1-scaled")
    g.add_argument("--task", metavar="FILE", help="JSON task file")
    p.add_argument("--count-spaces", type=_bool, default=None, metavar="BOOL",
                   help="count spaces toward sentence length (default: task setting, true)")


def _add_search_args(p: argparse.ArgumentParser) -> None:
    d = SearchConfig()
    p.add_argument("--backend", choices=("mock", "http"), default="mock")
    p.add_argument("--depth", type=int, default=d.preview_depth, help="preview depth d")
    p.add_argument("--top-k", type=int, default=d.top_k)
    p.add_argument("--mlm-top-k", type=int, default=d.mlm_top_k)
    p.add_argument("--temperature", type=float, default=d.temperature)
    p.add_argument("--max-llm-calls", type=int, default=None)
    p.add_argument("--max-solutions", type=int, default=d.max_solutions)
    p.add_argument("--max-time-ms", type=int, default=None)
    p.add_argument("--max-sentence-tokens", type=int, default=d.max_sentence_tokens)
    p.add_argument("--likelihood-floor", type=float, default=None)
    p.add_argument("--no-restart", action="store_true", help="keep searching after a solution instead of restarting")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--corpus", metavar="FILE", help="plain-text corpus for the mock backend")
    p.add_argument("--ngram", type=int, choices=(2, 3), default=2)
    p.add_argument("--llm-url")
    p.add_argument("--mlm-url")
    p.add_argument("--llm-model", default="babbage-002")
    p.add_argument("--mlm-model", default="bert-base-cased")
    p.add_argument("--cache", type=_bool, default=False, metavar="BOOL")
    p.add_argument("--metrics", metavar="PATH")
    p.add_argument("--solutions", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gencp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one task and stream solutions")
    _add_task_args(run)
    run.add_argument("--variant", choices=VARIANTS, default=SearchConfig().variant)
    _add_search_args(run)

    suite = sub.add_parser("suite", help="run tasks x variants and write a CSV report")
    _add_task_args(suite, multiple=True)
    suite.add_argument("--variants", default="metavar,previewMLM")
    suite.add_argument("--jobs", type=int, default=1)
    suite.add_argument("--report", metavar="PATH", help="CSV output (default: stdout)")
    _add_search_args(suite)

    val = sub.add_parser("validate", help="check a text file against a task")
    _add_task_args(val)
    val.add_argument("text", metavar="TEXTFILE")
    return parser


def _load_task(args) -> TaskSpec:
    if args.task:
        task = parse_task_file(args.task)
    else:
        try:
            task = get_task(args.builtin)
        except KeyError as exc:
            raise TaskFileError(str(exc.args[0])) from None
    if args.count_spaces is not None:
        task = replace(task, count_spaces=args.count_spaces)
    return task


def _config(args, variant: str) -> SearchConfig:
    return SearchConfig(
        top_k=args.top_k,
        temperature=args.temperature,
        preview_depth=args.depth,
        mlm_top_k=args.mlm_top_k,
        max_llm_calls=args.max_llm_calls,
        max_solutions=args.max_solutions,
        max_wall_ms=args.max_time_ms,
        seed=args.seed,
        restart_on_solution=not args.no_restart,
        likelihood_floor=args.likelihood_floor,
        variant=variant,
        max_sentence_tokens=args.max_sentence_tokens,
    )


def _backends(args, need_mlm: bool):
    if args.backend == "mock":
        corpus = load_corpus(args.corpus) if args.corpus else default_corpus()
        mock = build_mock(corpus, n=args.ngram, seed=args.seed)
        return mock, mock
    if not args.llm_url:
        raise CredentialsError("--llm-url is required with --backend http")
    if need_mlm and not args.mlm_url:
        raise CredentialsError("--mlm-url is required for previewMLM with --backend http")
    llm = CompletionClient(EndpointConfig(args.llm_url, LLM_KEY_ENV, args.llm_model, cache=args.cache))
    mlm = None
    if need_mlm:
        mlm = FillMaskClient(EndpointConfig(args.mlm_url, MLM_KEY_ENV, args.mlm_model, cache=args.cache))
    return llm, mlm


def _header(cfg: SearchConfig, task_names) -> None:
    print(f"# tasks: {', '.join(task_names)}", file=sys.stderr)
    print(f"# config: {json.dumps(asdict(cfg), sort_keys=True)}", file=sys.stderr)
    print(f"# counters: {COUNTER_NOTE}", file=sys.stderr)


def _cmd_run(args) -> int:
    task = _load_task(args)
    cfg = _config(args, args.variant)
    llm, mlm = _backends(args, cfg.depth > 0)
    _header(cfg, [task.name])
    solver = Solver(task, cfg, llm, mlm)
    out = open(args.solutions, "w", encoding="utf-8") if args.solutions else sys.stdout
    try:
        for sol in solver.run():
            out.write(json.dumps(solution_record(sol), sort_keys=True) + "\n")
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    if args.metrics:
        doc = {"task": task.name, "variant": cfg.variant, "config": asdict(cfg),
               "metrics": solver.metrics.as_dict(), "counters": COUNTER_NOTE}
        Path(args.metrics).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    m = solver.metrics
    print(f"# done: solutions={m.solutions} llm_calls={m.llm_calls} mlm_calls={m.mlm_calls} "
          f"backtracks={m.backtracks}", file=sys.stderr)
    return EXIT_OK if m.solutions else EXIT_NO_SOLUTIONS


def _cmd_suite(args) -> int:
    if args.task:
        tasks = [parse_task_file(args.task)]
    elif args.builtin:
        try:
            tasks = [get_task(n) for n in args.builtin]
        except KeyError as exc:
            raise TaskFileError(str(exc.args[0])) from None
    else:
        tasks = scaled_tasks()
    if args.count_spaces is not None:
        tasks = [replace(t, count_spaces=args.count_spaces) for t in tasks]
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise TaskFileError(f"--variants: unknown variant {v!r}")
    cfg = _config(args, variants[0])
    llm, mlm = _backends(args, any(v == "previewMLM" for v in variants) and cfg.preview_depth > 0)
    _header(cfg, [t.name for t in tasks])
    report = run_suite(tasks, variants, cfg, llm, mlm, jobs=args.jobs)
    for key, err in report.errors.items():
        print(f"# error in {key[0]}/{key[1]}: {err}", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(report.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(report.to_csv())
    if args.solutions:
        Path(args.solutions).write_text(report.solutions_jsonl(), encoding="utf-8")
    if args.metrics:
        doc = {"config": asdict(cfg), "rows": [asdict(r) for r in report.rows], "counters": COUNTER_NOTE}
        Path(args.metrics).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if report.errors and all(r.failed for r in report.rows):
        return EXIT_BACKEND
    return EXIT_OK if any(r.solutions for r in report.rows) else EXIT_NO_SOLUTIONS


def _cmd_validate(args) -> int:
    task = _load_task(args)
    text = Path(args.text).read_text(encoding="utf-8")
    ok, violations = validate_solution(text, task)
    print(f"task {task.name}: {'satisfied' if ok else 'violated'} ({len(violations)} violation(s))")
    for v in violations:
        where = f" sentence {v.sentence}" if v.sentence is not None else ""
        print(f"  [{v.constraint_id}] {v.kind}{where}: expected {v.expected}, measured {v.measured}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "suite": _cmd_suite, "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except (TaskFileError, CredentialsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
