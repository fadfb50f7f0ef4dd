"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line straight to the terminal
(even under output capture). Run standalone with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import gencp.preview as preview_mod  # noqa: E402
import gencp.search as search_mod  # noqa: E402
from gencp.bench import PREPROMPT, TaskSpec, builtin_tasks, run_suite, scaled_tasks  # noqa: E402
from gencp.constraints import CharSum, validate_solution  # noqa: E402
from gencp.core import Token, assign_token, extend_variable, init_state  # noqa: E402
from gencp.core import parse_assignment, serialize_assignment  # noqa: E402
from gencp.lm import CountingBackend, make_domain  # noqa: E402
from gencp.preview import PreviewSnapshot, admissible_sums, join_filter  # noqa: E402
from gencp.search import SearchConfig, Solver, solve  # noqa: E402
from oracles import brute_force, mock_for, random_instance, solver_set  # noqa: E402

ZERO = lambda: 0.0  # noqa: E731
INSTANCES = 60
TREND_SEEDS = 20

_terminal = None


def emit(criterion: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    if _terminal is not None:
        with _terminal.disabled():
            print(line)
    else:
        print(line)
    assert ok, line


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _terminal
    _terminal = capsys
    yield
    _terminal = None


def state_of(surfaces, task):
    state = init_state(task)
    for s in surfaces:
        assign_token(state, extend_variable(state), Token(s))
    return state


# -- 1 ----------------------------------------------------------------------------------


def test_criterion_1_feasibility_soundness():
    t0 = time.perf_counter()
    llm = mock_for(0)
    cfg = SearchConfig(top_k=10, max_solutions=10)
    report = run_suite(scaled_tasks(), ["metavar", "previewMLM"], cfg, llm, llm, clock=ZERO)
    by_name = {t.name: t for t in scaled_tasks()}
    emitted = bad = 0
    for (name, _), sols in report.solutions.items():
        for sol in sols:
            emitted += 1
            bad += not validate_solution(sol.text, by_name[name])[0]
    elapsed = time.perf_counter() - t0
    ok = emitted >= 100 and bad == 0 and not report.errors and elapsed < 60
    emit(1, ok, f"{emitted} emissions over 6 scaled tasks, {bad} violations, {elapsed:.1f}s (limit 60s)")


# -- 2, 3 ------------------------------------------------------------------------------


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches = []
    for seed in range(INSTANCES):
        inst = random_instance(seed)
        expected = brute_force(inst.task, mock_for(inst.mock_seed), inst.k, inst.max_tokens)
        got, _, _ = solver_set(inst, "metavar")
        if got != expected:
            mismatches.append(seed)
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 120
    emit(2, ok, f"{INSTANCES} instances (k<=5, <=6 tokens), mismatching seeds {mismatches}, {elapsed:.1f}s (limit 120s)")


def test_criterion_3_preview_soundness():
    diffs, worse, saved = [], [], 0
    for seed in range(INSTANCES):
        inst = random_instance(seed)
        a, ma, _ = solver_set(inst, "metavar")
        b, mb, _ = solver_set(inst, "previewMLM")
        if a != b:
            diffs.append(seed)
        if mb.nodes_expanded > ma.nodes_expanded:
            worse.append(seed)
        saved += ma.nodes_expanded - mb.nodes_expanded
    ok = not diffs and not worse
    emit(3, ok, f"{INSTANCES} instances, set differences {diffs}, node regressions {worse}, {saved} nodes saved")


# -- 4 ---------------------------------------------------------------------------------------


def test_criterion_4_pathological_pair():
    snap = PreviewSnapshot.from_lengths([{3, 4, 7}, {3, 5, 7}])
    sums = admissible_sums(snap, 10)
    current = make_domain([Token("x" * n, -i) for i, n in enumerate((3, 4, 7, 9))])
    kept = [t.char_len for t in join_filter(current, snap, sums).candidates]
    ok = sums == {(3, 7), (7, 3)} and kept == [3, 7]
    emit(4, ok, f"admissible sums {sorted(sums)}, costs kept {kept} of [3, 4, 7, 9]")


# -- 5 -----------------------------------------------------------------------------------------


def test_criterion_5_directional_trend():
    task = TaskSpec("trend", 1, (CharSum.exact(24),), PREPROMPT)
    per = {"metavar": [], "previewMLM": []}
    inversions = 0
    for seed in range(TREND_SEEDS):
        llm = mock_for(seed)
        ratios = {}
        for variant in per:
            cfg = SearchConfig(top_k=10, max_solutions=10, max_llm_calls=3000, variant=variant)
            sols, m = solve(task, cfg, llm, llm, clock=ZERO)
            ratios[variant] = m.llm_calls / max(len(sols), 1)
            per[variant].append(ratios[variant])
        inversions += ratios["previewMLM"] > ratios["metavar"]
    mean = {v: sum(xs) / len(xs) for v, xs in per.items()}
    ok = mean["previewMLM"] < mean["metavar"]
    emit(5, ok, f"{TREND_SEEDS} mock seeds, mean llm_calls/solution previewMLM {mean['previewMLM']:.1f} "
                f"vs metavar {mean['metavar']:.1f}, {inversions} seed inversions")


# -- 6 ----------------------------------------------------------------------------------------------


def test_criterion_6_counter_integrity(monkeypatch):
    calls = {"next": 0, "mask": 0}
    real_next, real_mask = search_mod.next_token_domain, preview_mod.fill_mask_domains

    def next_spy(*a, **k):
        calls["next"] += 1
        return real_next(*a, **k)

    def mask_spy(*a, **k):
        calls["mask"] += 1
        return real_mask(*a, **k)

    monkeypatch.setattr(search_mod, "next_token_domain", next_spy)
    monkeypatch.setattr(preview_mod, "fill_mask_domains", mask_spy)
    failures = []
    runs = 0
    for task in scaled_tasks():
        for variant in ("vanilla", "metavar", "previewMLM"):
            calls.update(next=0, mask=0)
            backend = CountingBackend(mock_for(3))
            solver = Solver(task, SearchConfig(top_k=8, max_solutions=5, variant=variant), backend, backend,
                            clock=ZERO)
            list(solver.run())
            m = solver.metrics
            runs += 1
            if not (m.llm_calls == calls["next"] == backend.next_calls
                    and m.mlm_calls == calls["mask"] == backend.mask_calls):
                failures.append((task.name, variant))
    emit(6, not failures, f"{runs} runs, llm/mlm counters vs wrapper calls and raw backend calls, mismatches {failures}")


# -- 7 -------------------------------------------------------------------------------------------------


def _streams():
    llm = mock_for(5)
    report = run_suite(scaled_tasks(), ["vanilla", "metavar", "previewMLM"], SearchConfig(top_k=8, max_solutions=5),
                       llm, llm, clock=ZERO)
    return report.solutions_jsonl().encode(), report.to_csv().encode()


def test_criterion_7_determinism():
    (j1, c1), (j2, c2) = _streams(), _streams()
    ok = j1 == j2 and c1 == c2 and len(j1) > 0
    emit(7, ok, f"two runs: JSONL {len(j1)} bytes identical={j1 == j2}, CSV {len(c1)} bytes identical={c1 == c2}")


# -- 8 -----------------------------------------------------------------------------------------------------


def test_criterion_8_serialization():
    example = ["Us", "ing", " a", " transform", "er"]
    task = TaskSpec("s", 1, (), "", budget=1)
    encoded = serialize_assignment(state_of(example, task))
    ok_example = encoded == "Us;ing; a; transform;er;" and parse_assignment(encoded) == example
    rng = random.Random(0)
    alphabet = "ab ;\\.!?xy"
    mismatches = 0
    for _ in range(1000):
        surfaces = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6))) for _ in range(rng.randint(0, 8))]
        state = state_of(surfaces, TaskSpec("r", 10**6, (), "", budget=1))
        mismatches += parse_assignment(serialize_assignment(state)) != surfaces
    emit(8, ok_example and mismatches == 0,
         f"example encodes to {encoded!r}, 1000 random round-trips with {mismatches} mismatches")


# -- 9 -------------------------------------------------------------------------------------------------------


def test_criterion_9_sample_audit():
    samples = json.loads((Path(__file__).parent / "data" / "samples.json").read_text())
    tasks = {t.name: t for t in builtin_tasks()}
    lines = []
    passes = {True: 0, False: 0}
    for name, text in samples.items():
        for spaces in (True, False):
            task = tasks[name]
            task = TaskSpec(task.name, task.sentence_count, task.constraints, task.preprompt, task.budget, spaces)
            ok, violations = validate_solution(text, task)
            passes[spaces] += ok
            found = "; ".join(f"{v.kind} sentence {v.sentence} expected {v.expected} measured {v.measured}"
                              for v in violations)
            lines.append(f"  {name} count_spaces={spaces}: {'ok' if ok else 'violated: ' + found}")
    detail = f"informational, samples satisfying targets: spaces counted {passes[True]}/6, not counted {passes[False]}/6"
    emit(9, True, detail)
    if _terminal is not None:
        with _terminal.disabled():
            print("\n".join(lines))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
