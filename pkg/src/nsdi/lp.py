"""Small dense linear programs.

Two-phase tableau simplex with Bland's anti-cycling rule.  In exact mode the
tableau holds Fractions and every comparison is exact; in float mode the same
pivoting runs on float64 with tolerance ``FLOAT_TOL``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

FLOAT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """minimize (or maximize) c·x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi.

    ``bounds`` is a list of (lo, hi) pairs, ``None`` meaning unbounded on
    that side; the default is x >= 0.
    """

    c: Sequence
    A_eq: Sequence | None = None
    b_eq: Sequence | None = None
    A_ub: Sequence | None = None
    b_ub: Sequence | None = None
    bounds: Sequence | None = None
    maximize: bool = False
    exact: bool | None = None

    def __post_init__(self):
        n = len(self.c)
        for A, b, name in ((self.A_eq, self.b_eq, "eq"), (self.A_ub, self.b_ub, "ub")):
            if (A is None) != (b is None):
                raise ValueError(f"A_{name} and b_{name} must be given together")
            if A is not None:
                if len(A) != len(b):
                    raise ValueError(f"A_{name} and b_{name} have different row counts")
                if any(len(row) != n for row in A):
                    raise ValueError(f"A_{name} rows must have {n} columns")
        if self.bounds is not None and len(self.bounds) != n:
            raise ValueError("one bound pair per variable required")
        if self.exact is None:
            self.exact = _all_rational(self.c, self.A_eq, self.b_eq, self.A_ub, self.b_ub,
                                       [v for bd in (self.bounds or []) for v in bd if v is not None])

    @property
    def num_vars(self) -> int:
        return len(self.c)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: object = None
    basis: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _all_rational(*parts) -> bool:
    for part in parts:
        if part is None:
            continue
        for v in np.ravel(np.asarray(part, dtype=object)):
            if not isinstance(v, Rational):
                return False
    return True


class _Tableau:
    """Rows 0..m-1 are constraints, the last row holds reduced costs; the
    last column is the right-hand side."""

    def __init__(self, T: np.ndarray, basis: list[int], exact: bool):
        self.T = T
        self.basis = basis
        self.exact = exact
        self.tol = 0 if exact else FLOAT_TOL

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] = T[r] / T[r, j]
        if self.exact:
            col = T[:, j].copy()
            for i, v in enumerate(col):
                if i != r and v != 0:
                    T[i] = T[i] - v * T[r]
        else:
            col = T[:, j].copy()
            col[r] = 0.0
            T -= np.outer(col, T[r])
            T[np.abs(T) < 1e-13] = 0.0
        self.basis[r] = j

    def run(self, allowed: int) -> str:
        """Minimize with Bland's rule over columns < allowed."""
        T, tol = self.T, self.tol
        m = T.shape[0] - 1
        while True:
            cost = T[-1]
            if self.exact:
                entering = next((j for j in range(allowed) if cost[j] < 0), None)
            else:
                neg = np.flatnonzero(cost[:allowed] < -tol)
                entering = int(neg[0]) if len(neg) else None
            if entering is None:
                return OPTIMAL
            best_r, best_ratio = None, None
            for i in range(m):
                a = T[i, entering]
                if a > tol:
                    ratio = T[i, -1] / a
                    if (best_r is None or ratio < best_ratio - tol
                            or (abs(ratio - best_ratio) <= tol and self.basis[i] < self.basis[best_r])):
                        best_r, best_ratio = i, ratio
            if best_r is None:
                return UNBOUNDED
            self.pivot(best_r, entering)


def _standard_form(lp: LinearProgram):
    """Rewrite as  min c'·y,  A y = b,  y >= 0,  b >= 0.

    Returns (A, b, c, const, recover) where recover maps y back to x.
    """
    exact = lp.exact
    num = Fraction if exact else float
    n = lp.num_vars
    bounds = lp.bounds if lp.bounds is not None else [(0, None)] * n
    c = [num(v) for v in lp.c]
    if lp.maximize:
        c = [-v for v in c]

    # each original variable becomes  x = offset + sign*y  (or y+ - y- if free)
    cols: list[list[tuple[int, object]]] = []  # per x: list of (y index, coefficient)
    offsets = []
    ny = 0
    extra_ub: list[tuple[int, object]] = []  # (y index, upper bound on y)
    for lo, hi in bounds:
        lo = None if lo is None else num(lo)
        hi = None if hi is None else num(hi)
        if lo is not None:
            cols.append([(ny, num(1))])
            offsets.append(lo)
            if hi is not None:
                if hi < lo:
                    return None
                extra_ub.append((ny, hi - lo))
            ny += 1
        elif hi is not None:
            cols.append([(ny, num(-1))])
            offsets.append(hi)
            ny += 1
        else:
            cols.append([(ny, num(1)), (ny + 1, num(-1))])
            offsets.append(num(0))
            ny += 2

    def expand(row):
        out = [num(0)] * ny
        shift = num(0)
        for k, a in enumerate(row):
            a = num(a)
            if a == 0:
                continue
            shift += a * offsets[k]
            for yi, s in cols[k]:
                out[yi] += a * s
        return out, shift

    rows, rhs, slack_rows = [], [], []
    for row, b in zip(lp.A_eq or [], lp.b_eq or []):
        r, s = expand(row)
        rows.append(r)
        rhs.append(num(b) - s)
        slack_rows.append(False)
    for row, b in zip(lp.A_ub or [], lp.b_ub or []):
        r, s = expand(row)
        rows.append(r)
        rhs.append(num(b) - s)
        slack_rows.append(True)
    for yi, ub in extra_ub:
        r = [num(0)] * ny
        r[yi] = num(1)
        rows.append(r)
        rhs.append(ub)
        slack_rows.append(True)

    n_slack = sum(slack_rows)
    total = ny + n_slack
    A = []
    k = 0
    for r, is_slack in zip(rows, slack_rows):
        r = r + [num(0)] * n_slack
        if is_slack:
            r[ny + k] = num(1)
            k += 1
        A.append(r)
    b = list(rhs)
    for i in range(len(A)):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]

    cy = [num(0)] * total
    const = num(0)
    for k, ck in enumerate(c):
        const += ck * offsets[k]
        for yi, s in cols[k]:
            cy[yi] += ck * s

    def recover(y):
        x = []
        for k in range(n):
            v = offsets[k]
            for yi, s in cols[k]:
                v = v + s * y[yi]
            x.append(v)
        return x

    return A, b, cy, const, recover


def solve(lp: LinearProgram) -> LpSolution:
    """Solve ``lp``.  The result status is optimal, infeasible or unbounded."""
    exact = lp.exact
    num = Fraction if exact else float
    std = _standard_form(lp)
    if std is None:
        return LpSolution(INFEASIBLE)
    A, b, c, const, recover = std
    m, n = len(A), len(c)
    dtype = object if exact else float

    # phase 1: one artificial per row
    T = np.empty((m + 1, n + m + 1), dtype=dtype)
    T[:] = num(0)
    for i in range(m):
        T[i, :n] = A[i]
        T[i, n + i] = num(1)
        T[i, -1] = b[i]
    for j in list(range(n)) + [n + m]:
        T[m, j] = -sum((T[i, j] for i in range(m)), num(0))
    tab = _Tableau(T, list(range(n, n + m)), exact)
    tab.run(n + m)
    if T[m, -1] < -tab.tol:
        return LpSolution(INFEASIBLE, meta={"phase1": -T[m, -1]})

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if tab.basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > tab.tol), None)
            if j is None:
                continue
            tab.pivot(i, j)
        keep.append(i)
    T2 = np.empty((len(keep) + 1, n + 1), dtype=dtype)
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis = [tab.basis[i] for i in keep]
    T2[-1] = num(0)
    T2[-1, :n] = c
    for i, j in enumerate(basis):
        if T2[-1, j] != 0:
            T2[-1] = T2[-1] - T2[-1, j] * T2[i]
    tab2 = _Tableau(T2, basis, exact)
    status = tab2.run(n)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, basis=tuple(basis))

    y = [num(0)] * n
    for i, j in enumerate(basis):
        y[j] = T2[i, -1]
    if not exact:
        y = [max(v, 0.0) for v in y]
    x = recover(y)
    obj = sum((num(ck) * xk for ck, xk in zip(lp.c, x)), num(0))
    return LpSolution(OPTIMAL, np.array(x, dtype=dtype), obj, tuple(basis))


def _exactify(vectors) -> tuple[np.ndarray, bool]:
    arr = np.asarray(vectors, dtype=object)
    exact = all(isinstance(v, Rational) for v in arr.flat)
    if exact:
        return np.vectorize(Fraction, otypes=[object])(arr) if arr.size else arr, True
    return np.asarray(vectors, dtype=float), False


def convex_combination_on_support(point, generators) -> np.ndarray | None:
    """Weights w >= 0, sum w = 1, with sum w_i g_i = point, or None.

    Exact when the point and all generators are rational.
    """
    if len(generators) == 0:
        raise ValueError("empty generator set")
    G, ex_g = _exactify([np.ravel(np.asarray(g, dtype=object)) for g in generators])
    p, ex_p = _exactify(np.ravel(np.asarray(point, dtype=object)))
    if G.shape[1] != p.shape[0]:
        raise ValueError("dimension mismatch")
    exact = ex_g and ex_p
    k = G.shape[0]
    one = Fraction(1) if exact else 1.0
    A_eq = [list(G[:, r]) for r in range(G.shape[1])] + [[one] * k]
    b_eq = list(p) + [one]
    sol = solve(LinearProgram([0] * k, A_eq, b_eq, exact=exact))
    return sol.x if sol.optimal else None


# --------------------------------------------------------------------------
# exact linear algebra helpers

def row_reduce(M) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over the rationals and the pivot columns."""
    R = [[Fraction(v) for v in row] for row in M]
    pivots = []
    r = 0
    ncols = len(R[0]) if R else 0
    for j in range(ncols):
        p = next((i for i in range(r, len(R)) if R[i][j] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][j]
        R[r] = [v * inv for v in R[r]]
        for i in range(len(R)):
            if i != r and R[i][j] != 0:
                f = R[i][j]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(j)
        r += 1
        if r == len(R):
            break
    return R, pivots


def exact_rank(M) -> int:
    if len(M) == 0:
        return 0
    return len(row_reduce(M)[1])


def affinely_independent(vectors) -> bool:
    vs = [[Fraction(v) for v in np.ravel(np.asarray(x, dtype=object))] for x in vectors]
    if len(vs) <= 1:
        return True
    return exact_rank([[a - b for a, b in zip(v, vs[0])] for v in vs[1:]]) == len(vs) - 1


def solve_exact(A, b) -> list[Fraction] | None:
    """A solution of A x = b over the rationals (free variables set to 0), or None."""
    n = len(A[0])
    aug = [list(row) + [bv] for row, bv in zip(A, b)]
    R, pivots = row_reduce(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for i, j in enumerate(pivots):
        x[j] = R[i][-1]
    return x


def weights_unique(point, generators) -> bool:
    """Whether the convex weights representing ``point`` are unique.

    Affinely independent generators give uniqueness directly; otherwise each
    weight is minimized and maximized and uniqueness holds iff every range is
    a single value.
    """
    if affinely_independent(generators):
        return True
    G, exact = _exactify([np.ravel(np.asarray(g, dtype=object)) for g in generators])
    p, ex_p = _exactify(np.ravel(np.asarray(point, dtype=object)))
    exact = exact and ex_p
    k = G.shape[0]
    one = Fraction(1) if exact else 1.0
    A_eq = [list(G[:, r]) for r in range(G.shape[1])] + [[one] * k]
    b_eq = list(p) + [one]
    for i in range(k):
        c = [0] * k
        c[i] = 1
        lo = solve(LinearProgram(c, A_eq, b_eq, exact=exact))
        if not lo.optimal:
            return False
        hi = solve(LinearProgram(c, A_eq, b_eq, maximize=True, exact=exact))
        diff = hi.objective - lo.objective
        if (diff != 0) if exact else (abs(diff) > FLOAT_TOL):
            return False
    return True
