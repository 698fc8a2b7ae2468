#!/usr/bin/env python3
"""Run the two end-to-end regularization showcases and print their reports.

The circle needs one distance-probe rejection before the chart extension
fires; the exp curve accepts the very first probe, whose minimizer is the
closest point of the graph of exp to the origin.
"""

import argparse
import json

from regulus.acceptance import exp_curve_reference
from regulus.engine import EngineOptions, regularize
from regulus.terms import parse


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    options = EngineOptions(seed=args.seed)

    for label, source in (
        ("circle", "(- (+ (^ x1 2) (^ x2 2)) 1)"),
        ("exp-curve", "(- x2 (exp x1))"),
    ):
        result = regularize(parse(source), 2, options)
        print(f"== {label} ==")
        print(json.dumps(result.to_json_dict(), indent=2))

    t, y = exp_curve_reference()
    print(f"# exp-curve closest point to the origin "
          f"(independent 1-d oracle): ({t:.5f}, {y:.5f})")


if __name__ == "__main__":
    main()
