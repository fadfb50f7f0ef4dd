"""Compare model calls per solution with and without masked-model preview.

Each mock seed reshuffles how words split into sub-word tokens, so every seed
is a slightly different search problem with the same target.
"""

import sys

from gencp import CharSum, SearchConfig, TaskSpec, build_mock, default_corpus, solve


def main(seeds: int = 10, target: int = 24) -> None:
    task = TaskSpec("demo", 1, (CharSum.exact(target),))
    print(f"{'seed':>4} {'metavar':>10} {'previewMLM':>11}")
    totals = {"metavar": 0.0, "previewMLM": 0.0}
    for seed in range(seeds):
        model = build_mock(default_corpus(), seed=seed)
        row = []
        for variant in totals:
            cfg = SearchConfig(top_k=10, max_solutions=10, max_llm_calls=3000, variant=variant)
            sols, m = solve(task, cfg, model, model)
            per = m.llm_calls / max(len(sols), 1)
            totals[variant] += per
            row.append(per)
        print(f"{seed:>4} {row[0]:>10.1f} {row[1]:>11.1f}")
    print(f"mean {totals['metavar'] / seeds:>10.1f} {totals['previewMLM'] / seeds:>11.1f}")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))
