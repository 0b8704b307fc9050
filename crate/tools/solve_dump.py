"""Solve a cone program text dump with cvxpy and print the optimal value.

usage: python3 tools/solve_dump.py program.txt
"""
import sys

import cvxpy as cp
import numpy as np


def parse(path):
    lines = [l.split() for l in open(path) if l.strip() and not l.startswith("#")]
    assert lines[0] == ["cone_program", "1"]
    n = int(lines[1][1])
    obj = np.zeros(n)
    offset = 0.0
    eqs, cones = [], []
    i = 2
    while lines[i][0] != "end":
        f = lines[i]
        if f[0] == "objective":
            obj[int(f[1])] = float(f[2])
        elif f[0] == "objective_offset":
            offset = float(f[1])
        elif f[0] == "equality":
            eqs.append(expr(f[1:], n))
        elif f[0] == "cone":
            k = int(f[2])
            rows = [expr(lines[i + 1 + r][1:], n) for r in range(k)]
            cones.append((f[1], rows))
            i += k
        i += 1
    return n, obj, offset, eqs, cones


def expr(fields, n):
    a = np.zeros(n)
    for j in range(1, len(fields), 2):
        a[int(fields[j])] += float(fields[j + 1])
    return a, float(fields[0])


def main():
    n, obj, offset, eqs, cones = parse(sys.argv[1])
    x = cp.Variable(n)
    ev = lambda e: e[0] @ x + e[1]
    cons = [ev(e) == 0 for e in eqs]
    for kind, rows in cones:
        vals = [ev(r) for r in rows]
        if kind == "nonnegative":
            cons += [v >= 0 for v in vals]
        elif kind == "second_order":
            cons.append(cp.SOC(vals[0], cp.hstack(vals[1:])))
        else:
            u, v = vals[0], vals[1]
            cons.append(cp.SOC((u + v) / np.sqrt(2), cp.hstack([(u - v) / np.sqrt(2)] + vals[2:])))
    prob = cp.Problem(cp.Maximize(obj @ x + offset), cons)
    prob.solve()
    print(prob.status, prob.value)
    print(" ".join(f"{v:.9g}" for v in x.value))


if __name__ == "__main__":
    main()
