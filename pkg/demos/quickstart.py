"""Generate a few 24-character sentences with the offline mock backend."""

from gencp import SearchConfig, build_mock, default_corpus, get_task, solve


def main() -> None:
    model = build_mock(default_corpus(), seed=0)
    task = get_task("sent-1-scaled")
    solutions, metrics = solve(task, SearchConfig(top_k=10, max_solutions=5), model, model)
    for sol in solutions:
        print(f"{len(sol.text):3d}  {sol.text}")
    print(f"llm calls {metrics.llm_calls}, mlm calls {metrics.mlm_calls}, backtracks {metrics.backtracks}")


if __name__ == "__main__":
    main()
