"""Returned Pareto set size against the exact frontier as eps shrinks.

    python3 scripts/pareto_sizes.py --count 10
"""
import argparse
from dataclasses import dataclass

from cpquad.multiobj import covers, pareto_opt
from cpquad.oracle import brute_force_pareto
from cpquad.suites import pareto_objectives, suite_instance


@dataclass
class SizeConfig:
    count: int = 10
    seed: int = 0
    eps: tuple = (0.5, 0.25, 0.1)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=SizeConfig.count)
    ap.add_argument("--seed", type=int, default=SizeConfig.seed)
    cfg = SizeConfig(**vars(ap.parse_args()))
    print("eps   returned  exact  uncovered  solves")
    for eps in cfg.eps:
        ret = exact = miss = solves = 0
        for i in range(cfg.count):
            inst = suite_instance("pareto", i, cfg.seed)
            F, G = pareto_objectives(inst)
            front = pareto_opt(inst, F, G, eps)
            pts = brute_force_pareto(inst, F, G)
            ret += len(front.solutions)
            exact += len(pts)
            miss += sum(not covers(front, p.maxima, p.minima, eps) for p in pts)
            solves += front.solves
        print(f"{eps:<5} {ret:<9} {exact:<6} {miss:<10} {solves}")


if __name__ == "__main__":
    main()
