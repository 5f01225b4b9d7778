"""Write the synthetic mean task and the housing-shaped stand-in as CSV files."""

import argparse
from pathlib import Path

from diffgrn import data


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, default=Path("data"))
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    data.write_csv(args.out / "mean.csv", data.synthetic_mean(200, 5, args.seed))
    data.write_csv(args.out / "housing.csv", data.synthetic_housing(506, 13, args.seed))
    print(args.out / "mean.csv")
    print(args.out / "housing.csv")


if __name__ == "__main__":
    main()
