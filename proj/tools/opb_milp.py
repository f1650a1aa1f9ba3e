#!/usr/bin/env python3
"""Decides an OPB file with the HiGHS MILP solver (via scipy) and prints the
answer in PB-competition form ("s ..." and "v ..." lines)."""

import argparse
import re
import sys
import time

START = time.monotonic()

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

TERM = re.compile(r"([+-]?\d+)\s+(~?)x(\d+)")


def read_opb(path):
    n = 0
    rows = []  # (coefs dict, rel, bound)
    with open(path) as fh:
        text = fh.read()
    m = re.search(r"#variable=\s*(\d+)", text)
    if m:
        n = int(m.group(1))
    for stmt in text.split(";"):
        lines = [ln for ln in stmt.splitlines() if ln.strip() and not ln.lstrip().startswith("*")]
        body = " ".join(lines).strip()
        if not body or body.startswith("min:"):
            continue
        rel = next((r for r in (">=", "<=", "=") if r in body), None)
        if rel is None:
            raise ValueError("no relation in: " + body)
        lhs, rhs = body.split(rel, 1)
        bound = int(rhs)
        coefs = {}
        for c, neg, v in TERM.findall(lhs):
            c, v = int(c), int(v) - 1
            n = max(n, v + 1)
            if neg:  # c ~x = c - c x
                bound -= c
                c = -c
            coefs[v] = coefs.get(v, 0) + c
        rows.append((coefs, rel, bound))
    return n, rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("opb")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--time-limit", type=float, default=600.0)
    args = ap.parse_args()

    n, rows = read_opb(args.opb)
    r, c, d, lo, hi = [], [], [], [], []
    for k, (coefs, rel, bound) in enumerate(rows):
        for v, a in coefs.items():
            r.append(k)
            c.append(v)
            d.append(a)
        lo.append(bound if rel in (">=", "=") else -np.inf)
        hi.append(bound if rel in ("<=", "=") else np.inf)

    # The caller's limit covers the whole process, parsing included.
    budget = max(0.5, args.time_limit - (time.monotonic() - START) - 1.0)

    # A random objective steers HiGHS toward different feasible points per seed.
    rng = np.random.default_rng(args.seed)
    cost = rng.uniform(-1.0, 1.0, size=n) if args.seed else np.zeros(n)
    cons = []
    if rows:
        a = coo_matrix((d, (r, c)), shape=(len(rows), n)).tocsr()
        cons.append(LinearConstraint(a, lo, hi))
    res = milp(
        cost,
        constraints=cons,
        integrality=np.ones(n),
        bounds=Bounds(0, 1),
        options={"time_limit": budget, "disp": False, "mip_rel_gap": 1.0},
    )
    if res.x is not None and res.status in (0, 1):
        print("s SATISFIABLE")
        x = np.round(res.x).astype(int)
        lits = [("" if x[v] else "-") + "x%d" % (v + 1) for v in range(n)]
        for k in range(0, n, 20):
            print("v " + " ".join(lits[k:k + 20]))
    elif res.status == 2:
        print("s UNSATISFIABLE")
    else:
        print("s UNKNOWN")
    sys.stdout.flush()


if __name__ == "__main__":
    main()
