"""How many random gain draws does it take to stabilize a 2-cycles target?"""
import argparse
from dataclasses import asdict, dataclass

import numpy as np

from formation_lab import formations as F
from formation_lab import geometry as G
from formation_lab.dynamics import ObjectiveMode


@dataclass
class Config:
    targets: int = 20
    draws: int = 10_000
    low: float = -5.0
    high: float = 5.0
    mode: str = "FullInformation"
    seed: int = 0


def main():
    p = argparse.ArgumentParser(description=__doc__)
    for k, v in asdict(Config()).items():
        p.add_argument(f"--{k}", type=type(v), default=v)
    cfg = Config(**vars(p.parse_args()))
    rng = np.random.default_rng(cfg.seed)
    used = []
    for t in range(cfg.targets):
        mu = G.to_target(rng.uniform(-1, 1, (4, 2)))
        hit = F.search_gains(mu, ObjectiveMode(cfg.mode), cfg.draws, cfg.low, cfg.high, seed=t)
        n = hit[1] if hit else None
        used.append(n)
        print(f"target {t}: " + (f"stable after {n} draws, gains {np.round(hit[0], 3)}"
                                 if hit else "no stabilizing gains found"))
    ok = [n for n in used if n is not None]
    print(f"succeeded {len(ok)}/{cfg.targets}; median draws {np.median(ok) if ok else float('nan')}")


if __name__ == "__main__":
    main()
