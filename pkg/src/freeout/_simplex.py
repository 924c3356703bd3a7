"""Exact rational feasibility for small linear systems (phase-I simplex, Bland's rule)."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def feasible_point(
    A_ub: Sequence[Sequence],
    b_ub: Sequence,
    A_eq: Sequence[Sequence],
    b_eq: Sequence,
    n: int,
    maximize: Sequence | None = None,
) -> list[Fraction] | None:
    """A point x >= 0 with ``A_ub x <= b_ub`` and ``A_eq x = b_eq``, or None.

    With ``maximize`` the returned point maximizes that linear objective
    (phase II); the objective must be bounded on the feasible set.  All
    arithmetic is in Fractions, so the answer is exact.
    """
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    n_slack = len(A_ub)
    width = n + n_slack
    for k, (a, b) in enumerate(zip(A_ub, b_ub)):
        row = [Fraction(v) for v in a] + [Fraction(0)] * n_slack
        row[n + k] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(b))
    for a, b in zip(A_eq, b_eq):
        rows.append([Fraction(v) for v in a] + [Fraction(0)] * n_slack)
        rhs.append(Fraction(b))
    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
    # one artificial per row; tableau columns: original + slack + artificial
    total = width + m
    T = [rows[i] + [Fraction(int(i == j)) for j in range(m)] + [rhs[i]] for i in range(m)]
    basis = [width + i for i in range(m)]
    # phase-I objective: minimise sum of artificials, stored as reduced costs
    cost = [Fraction(0)] * (total + 1)
    for i in range(m):
        for j in range(width):
            cost[j] -= T[i][j]
        cost[total] -= T[i][total]
    while True:
        enter = next((j for j in range(total) if cost[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            if T[i][enter] > 0:
                r = T[i][total] / T[i][enter]
                if best is None or r < best or (r == best and basis[i] < basis[leave]):
                    leave, best = i, r
        if leave is None:  # unbounded phase I cannot happen; guard anyway
            break
        _pivot(T, cost, leave, enter)
        basis[leave] = enter
    if cost[total] != 0:
        return None
    if maximize is not None:
        _phase_two(T, basis, width, total, [Fraction(c) for c in maximize] + [Fraction(0)] * (width - n))
    x = [Fraction(0)] * total
    for i, j in enumerate(basis):
        x[j] = T[i][total]
    return x[:n]


def _pivot(T, cost, r, c):
    piv = T[r][c]
    row = T[r]
    if piv != 1:
        T[r] = row = [v / piv for v in row]
    for i, other in enumerate(T):
        if i != r and other[c] != 0:
            f = other[c]
            T[i] = [a - f * b for a, b in zip(other, row)]
    if cost[c] != 0:
        f = cost[c]
        cost[:] = [a - f * b for a, b in zip(cost, row)]


def _phase_two(T, basis, width, total, c):
    # drive zero-level artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(T):
        if basis[r] >= width:
            col = next((j for j in range(width) if T[r][j] != 0), None)
            if col is None:
                del T[r]
                del basis[r]
                continue
            _pivot(T, [Fraction(0)] * (total + 1), r, col)
            basis[r] = col
        r += 1
    # reduced costs of -c (we minimise -c.x); artificials never re-enter
    cost = [-v for v in c] + [Fraction(0)] * (total - width + 1)
    for i, j in enumerate(basis):
        if cost[j] != 0:
            f = cost[j]
            cost[:] = [a - f * b for a, b in zip(cost, T[i])]
    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            return
        leave, best = None, None
        for i in range(len(T)):
            if T[i][enter] > 0:
                q = T[i][total] / T[i][enter]
                if best is None or q < best or (q == best and basis[i] < basis[leave]):
                    leave, best = i, q
        if leave is None:
            raise ValueError("objective is unbounded")
        _pivot(T, cost, leave, enter)
        basis[leave] = enter
