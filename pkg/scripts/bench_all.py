"""Run every bench suite and write one CSV per suite plus a summary line each.

    python3 scripts/bench_all.py --count 20 --out bench_out
"""
import argparse
import csv
import time
from dataclasses import dataclass
from pathlib import Path

from cpquad.cli import bench_rows
from cpquad.factorize import FactorizeBudget
from cpquad.suites import SUITES


@dataclass
class BenchConfig:
    count: int = 20
    seed: int = 0
    out: Path = Path("bench_out")


def summarize(suite: str, rows: list) -> str:
    if suite == "factorize":
        return f"found {sum(r['found'] for r in rows)}/{len(rows)}"
    if suite == "pareto":
        return f"uncovered {sum(r['uncovered'] for r in rows)} of {sum(r['oracle_points'] for r in rows)} points"
    ratios = [r["ratio"] for r in rows]
    return f"ratio min {min(ratios):.4f} max {max(ratios):.4f}, infeasible {sum(not r['feasible'] for r in rows)}"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=BenchConfig.count)
    ap.add_argument("--seed", type=int, default=BenchConfig.seed)
    ap.add_argument("--out", type=Path, default=BenchConfig.out)
    cfg = BenchConfig(**vars(ap.parse_args()))
    cfg.out.mkdir(parents=True, exist_ok=True)
    for suite in SUITES:
        eps = 0.02 if suite == "cover-lin" else 0.25
        t0 = time.perf_counter()
        rows = bench_rows(suite, cfg.count, eps, cfg.seed, FactorizeBudget(seed=cfg.seed))
        keys = sorted({k for r in rows for k in r})
        with open(cfg.out / f"{suite}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rows)
        print(f"{suite:10s} {summarize(suite, rows)} ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
