"""Dense linear algebra on small numeric matrices (Fraction or float)."""

from fractions import Fraction
from math import lcm

FLOAT_PIVOT_TOL = 1e-9


def _integer_rows(rows):
    out = []
    for row in rows:
        m = 1
        for a in row:
            if a:
                m = lcm(m, Fraction(a).denominator)
        out.append([int(Fraction(a) * m) for a in row])
    return out


def bareiss_rank(rows):
    """Rank of a rational matrix by fraction-free (Bareiss) elimination."""
    a = [r for r in _integer_rows(rows) if any(r)]
    if not a:
        return 0
    m, n = len(a), len(a[0])
    rank = 0
    prev = 1
    for col in range(n):
        if rank == m:
            break
        piv = next((i for i in range(rank, m) if a[i][col]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        p = a[rank][col]
        for i in range(rank + 1, m):
            ai = a[i]
            f = ai[col]
            ar = a[rank]
            for j in range(col + 1, n):
                ai[j] = (p * ai[j] - f * ar[j]) // prev
            ai[col] = 0
        prev = p
        rank += 1
    return rank


def _float_scaled(rows):
    out = []
    for row in rows:
        row = [float(x) for x in row]
        s = max((abs(x) for x in row), default=0.0)
        out.append([x / s for x in row] if s > 0 else row)
    return out


def float_rank(rows, tol=FLOAT_PIVOT_TOL):
    """Rank by complete-pivoting elimination with a relative pivot threshold."""
    a = _float_scaled(rows)
    if not a or not a[0]:
        return 0
    m, n = len(a), len(a[0])
    rank = 0
    for _ in range(min(m, n)):
        best, bi, bj = 0.0, -1, -1
        for i in range(rank, m):
            for j in range(n):
                v = abs(a[i][j])
                if v > best:
                    best, bi, bj = v, i, j
        if best <= tol:
            break
        a[rank], a[bi] = a[bi], a[rank]
        pr = a[rank]
        for i in range(rank + 1, m):
            f = a[i][bj] / pr[bj]
            if f:
                ai = a[i]
                for j in range(n):
                    ai[j] -= f * pr[j]
        pr_j = pr[bj]
        for i in range(rank + 1, m):
            a[i][bj] = 0.0
        pr[bj] = pr_j
        rank += 1
    return rank


def rank(rows, exact):
    return bareiss_rank(rows) if exact else float_rank(rows)


def rref(rows, exact=True, tol=FLOAT_PIVOT_TOL):
    """Reduced row echelon form; returns (matrix, pivot columns)."""
    if exact:
        a = [[Fraction(x) for x in r] for r in rows]
    else:
        a = _float_scaled(rows)
    if not a:
        return a, []
    m, n = len(a), len(a[0])
    pivots = []
    r = 0
    for col in range(n):
        if r == m:
            break
        if exact:
            piv = next((i for i in range(r, m) if a[i][col] != 0), None)
        else:
            cand = max(range(r, m), key=lambda i: abs(a[i][col]))
            piv = cand if abs(a[cand][col]) > tol else None
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        p = a[r][col]
        a[r] = [x / p for x in a[r]]
        for i in range(m):
            if i != r and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(col)
        r += 1
    return a, pivots


def nullspace(rows, ncols, exact=True):
    """Basis of the right kernel; one vector per free column."""
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    r, pivots = rref(rows, exact)
    free = [j for j in range(ncols) if j not in pivots]
    one = Fraction(1) if exact else 1.0
    basis = []
    for j in free:
        v = [0 * one] * ncols
        v[j] = one
        for i, pc in enumerate(pivots):
            v[pc] = -r[i][j]
        basis.append(v)
    return basis


def independent_rows(rows, exact=True):
    """Indices of a greedy maximal independent subset, in order."""
    chosen = []
    basis = []
    current = 0
    for i, row in enumerate(rows):
        trial = basis + [row]
        rk = rank(trial, exact)
        if rk > current:
            basis = trial
            current = rk
            chosen.append(i)
    return chosen
