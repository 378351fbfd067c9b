"""Exact Gaussian elimination over the rationals."""
from __future__ import annotations

from fractions import Fraction


def row_echelon(rows):
    """Return (echelon rows, pivot columns) for a list of rational rows."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return [], []
    n_cols = len(m[0])
    pivots = []
    r = 0
    for c in range(n_cols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        for i in range(r + 1, len(m)):
            f = m[i][c]
            if f == 0:
                continue
            f = f / p
            row_r, row_i = m[r], m[i]
            for cc in range(c, n_cols):
                if row_r[cc]:
                    row_i[cc] -= f * row_r[cc]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows) -> int:
    rows = [r for r in rows if any(x != 0 for x in r)]
    if not rows:
        return 0
    return len(row_echelon(rows)[1])


def matmul(a, b):
    if not a or not b:
        return [[Fraction(0)] * (len(b[0]) if b else 0) for _ in a]
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def is_zero(m) -> bool:
    return all(x == 0 for row in m for x in row)
