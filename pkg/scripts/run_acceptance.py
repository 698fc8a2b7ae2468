#!/usr/bin/env python3
"""Build the full acceptance report (deterministic for a fixed seed).

Exit code 0 when every check passes.  Running twice with the same seed
produces byte-identical output; piping both runs through ``diff`` is the
determinism check.
"""

import argparse
import sys

from regulus.acceptance import report_json, run_report


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    print(report_json(args.seed))
    return 0 if run_report(args.seed)["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
