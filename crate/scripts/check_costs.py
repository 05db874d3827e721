#!/usr/bin/env python3
"""Recompute the cost columns of dgdsim trace CSVs from their counters.

Usage: check_costs.py TRACE.csv [TRACE.csv ...]

Each cost column must equal comm_rounds * c_c + grad_rounds * c_g exactly,
with the cost models read from the `# cost_models=` manifest line.
"""
import sys


def check(path):
    models = [(1.0, 1.0)]
    header = None
    checked = 0
    bad = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "cost_models" and value:
                    models = [tuple(float(v) for v in m.split(":")) for m in value.split(",")]
                continue
            if not line:
                continue
            fields = line.split(",")
            if header is None:
                header = fields
                continue
            row = dict(zip(header, fields))
            comm = int(row["comm_rounds"])
            grad = int(row["grad_rounds"])
            cost_cols = [c for c in header if c == "cost" or c.startswith("cost_")]
            if len(cost_cols) != len(models):
                bad.append((lineno, "column/model count mismatch"))
                continue
            for col, (cc, cg) in zip(cost_cols, models):
                expected = float(comm) * cc + float(grad) * cg
                emitted = float(row[col])
                checked += 1
                if emitted != expected:
                    bad.append((lineno, f"{col}: emitted {row[col]}, recomputed {expected!r}"))
    return checked, bad


def main(paths):
    if not paths:
        print(__doc__.strip())
        return 2
    total = 0
    failures = 0
    for path in paths:
        checked, bad = check(path)
        total += checked
        failures += len(bad)
        for lineno, msg in bad[:5]:
            print(f"{path}:{lineno}: {msg}")
    print(f"checked {total} cost values, {failures} mismatches")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
