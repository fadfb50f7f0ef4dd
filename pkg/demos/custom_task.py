"""Load a JSON task file, solve it, and re-check every answer independently."""

from pathlib import Path

from gencp import SearchConfig, build_mock, default_corpus, solve, validate_solution
from gencp.cli import parse_task_file

TASK = Path(__file__).parent / "tasks" / "two_sentences.json"


def main() -> None:
    task = parse_task_file(TASK)
    model = build_mock(default_corpus(), seed=1)
    solutions, _ = solve(task, SearchConfig(top_k=10, max_solutions=5), model, model)
    for sol in solutions:
        ok, violations = validate_solution(sol.text, task)
        print(("ok  " if ok else "BAD ") + sol.text)
        for v in violations:
            print("    ", v)


if __name__ == "__main__":
    main()
