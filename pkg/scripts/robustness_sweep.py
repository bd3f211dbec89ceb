"""Survival fraction versus perturbation size for a sink, a fold and a gradient design."""
import argparse
from dataclasses import asdict, dataclass

import numpy as np

from formation_lab import formations as F
from formation_lab import geometry as G
from formation_lab.dynamics import PolynomialField, vector_field
from formation_lab.rigidity import Framework, rigidity_condition
from formation_lab.robustness import PerturbationSpec, linear_drift, probe


@dataclass
class Config:
    trials: int = 50
    radius: float = 0.2
    seed: int = 0


def main():
    p = argparse.ArgumentParser(description=__doc__)
    for k, v in asdict(Config()).items():
        p.add_argument(f"--{k}", type=type(v), default=v)
    cfg = Config(**vars(p.parse_args()))
    rng = np.random.default_rng(cfg.seed)
    g = F.leader_follower(4)
    P = rng.uniform(-2, 2, (4, 2))
    while rigidity_condition(Framework(g, P)) < 0.1:
        P = rng.uniform(-2, 2, (4, 2))
    s = F.gradient_scenario(G.to_target(P), g)
    cases = {"sink": (PolynomialField((0.0, -1.0)), np.zeros(1)),
             "fold": (PolynomialField((0.0, 0.0, 1.0)), np.zeros(1)),
             "gradient": (vector_field(s), s.target_config.ravel())}
    for eps in (1e-4, 1e-3, 1e-2):
        spec = PerturbationSpec(eps, trials=cfg.trials, seed=cfg.seed)
        line = [f"eps={eps:g}"]
        for name, (f, x) in cases.items():
            default = probe(f, x, spec)
            fixed = probe(f, x, spec, locality_radius=cfg.radius)
            line.append(f"{name}: {default.survived}/{fixed.survived}")
        f, x = cases["gradient"]
        line.append(f"gradient linear drift {linear_drift(f, x, spec):.2e}")
        print("  ".join(line))
    print("(survivors with the default radius / with the fixed radius)")


if __name__ == "__main__":
    main()
