"""Empirical cover-lin ratios against the proven bound for several eps.

    python3 scripts/cover_ratios.py --count 30
"""
import argparse
from dataclasses import dataclass

import numpy as np

from cpquad.coverlin import cover_bound, cover_lin_run
from cpquad.oracle import brute_force_opt
from cpquad.suites import suite_instance


@dataclass
class RatioConfig:
    count: int = 30
    seed: int = 0
    eps: tuple = (0.005, 0.01, 0.02)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=RatioConfig.count)
    ap.add_argument("--seed", type=int, default=RatioConfig.seed)
    cfg = RatioConfig(**vars(ap.parse_args()))
    insts = [suite_instance("cover-lin", i, cfg.seed) for i in range(cfg.count)]
    opts = [brute_force_opt(x).value for x in insts]
    print("eps     r  bound    max     mean   guesses")
    for eps in cfg.eps:
        for r in (1, 2):
            sel = [(x, o) for x, o in zip(insts, opts) if x.constraints[0].rank == r]
            ratios, guesses = [], []
            for inst, opt in sel:
                sol, st = cover_lin_run(inst, eps)
                ratios.append(sol.value / opt)
                guesses.append(st.distinct)
            print(f"{eps:<7} {r}  {cover_bound(eps, r):<8.4f} {max(ratios):<7.4f} {np.mean(ratios):<7.4f} "
                  f"{np.mean(guesses):.1f}")


if __name__ == "__main__":
    main()
