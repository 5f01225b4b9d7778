"""Evolve with and without learning-in-the-loop, then post-train the final bests.

Prints the median post-training train MSE of each arm over a few seeds.
"""

import argparse

import numpy as np

from diffgrn import data, evo, optim


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--generations", type=int, default=30)
    p.add_argument("--arms", type=int, nargs="+", default=[0, 10])
    p.add_argument("--epochs", type=int, default=200)
    args = p.parse_args()

    tr, te = data.split(data.synthetic_mean(200, 5, seed=0), 0.25, seed=0)
    train_set, _ = data.normalize(tr, te)
    for arm in args.arms:
        scores = []
        for seed in range(args.seeds):
            cfg = evo.EvoConfig(generations=args.generations, fitness_epochs=arm, rng_seed=seed)
            _, best = evo.evolve(cfg, train_set, 5, 1)
            trained, _ = optim.train(best.genome, train_set, args.epochs, rng_seed=seed, record_curve=False)
            scores.append(optim.evaluate(trained, train_set, 3))
        print(f"arm {arm:>3} epochs: median post-train MSE {np.median(scores):.6f}")


if __name__ == "__main__":
    main()
