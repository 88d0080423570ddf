"""Two-phase primal simplex on a dense tableau.

The same code runs in double precision (with tolerances) or exactly over
``Fraction`` (``exact=True``, all tolerances zero).  Pivoting is Dantzig's
rule, switching to Bland's rule while the iteration is degenerate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIV_TOL = 1e-10


class LPError(RuntimeError):
    pass


@dataclass
class LPProblem:
    """``min/max obj . x`` subject to rows ``coeffs . x (<= | ==) rhs``.

    Variables are free unless listed in ``nonneg``.
    """

    n: int
    rows: list[tuple[Sequence, str, object]] = field(default_factory=list)
    objective: Sequence | None = None
    sense: str = "min"
    nonneg: set[int] = field(default_factory=set)

    def add(self, coeffs: Sequence, rel: str, rhs) -> None:
        if rel == ">=":
            self.rows.append(([-c for c in coeffs], "<=", -rhs))
        elif rel in ("<=", "=="):
            self.rows.append((list(coeffs), rel, rhs))
        else:
            raise ValueError(f"unknown relation {rel!r}")


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    objective: object = None
    iterations: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, T, basis, exact, piv_tol):
        self.T = T
        self.basis = basis
        self.exact = exact
        self.piv_tol = 0 if exact else piv_tol
        self.iterations = 0
        self.small_pivots = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        piv = T[r, j]
        if not self.exact and abs(piv) < 1e3 * PIV_TOL:
            self.small_pivots += 1
        T[r] = T[r] / piv
        col = T[:, j].copy()
        col[r] = 0
        nz = np.nonzero(col)[0]
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        if not self.exact:
            T[np.abs(T) < 1e-14] = 0.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray, opt_tol, max_iter: int) -> str:
        """Minimise the objective in the last row over ``allowed`` columns."""
        T = self.T
        m = T.shape[0] - 1
        bland = False
        while True:
            if self.iterations > max_iter:
                raise LPError("simplex iteration limit reached")
            red = T[m, :-1]
            cand = np.nonzero(allowed & (red < -opt_tol))[0]
            if len(cand) == 0:
                return "optimal"
            if bland:
                j = int(cand[0])
            else:
                vals = red[cand]
                j = int(cand[int(np.argmin(vals))])
            col = T[:m, j]
            rows = np.nonzero(col > self.piv_tol)[0]
            if len(rows) == 0:
                return "unbounded"
            if self.exact:
                ratios = [T[i, -1] / T[i, j] for i in rows]
                best = min(ratios)
                ties = [i for i, q in zip(rows, ratios) if q == best]
            else:
                ratios = T[rows, -1] / col[rows]
                best = ratios.min()
                ties = rows[ratios <= best + 1e-12 * (1 + abs(best))]
            r = min(ties, key=lambda i: self.basis[i])
            bland = best == 0 if self.exact else abs(best) <= 1e-12
            self.pivot(int(r), j)


def lp_solve(problem: LPProblem, *, exact: bool = False, feas_tol: float = FEAS_TOL,
             opt_tol: float = OPT_TOL, piv_tol: float = PIV_TOL, max_iter: int | None = None) -> LPResult:
    """Solve ``problem``; deterministic for a fixed input."""
    zero = Fraction(0) if exact else 0.0
    conv = Fraction if exact else float
    if exact:
        feas_tol = opt_tol = piv_tol = 0
    n = problem.n
    obj = [conv(c) for c in (problem.objective if problem.objective is not None else [0] * n)]
    if len(obj) != n:
        raise ValueError("objective length does not match variable count")
    if problem.sense == "max":
        obj = [-c for c in obj]
    elif problem.sense != "min":
        raise ValueError(f"unknown sense {problem.sense!r}")

    # column layout: x+ for every variable, x- for free ones, then slacks, then artificials
    free = [i for i in range(n) if i not in problem.nonneg]
    neg_col = {i: n + k for k, i in enumerate(free)}
    n_struct = n + len(free)
    rows = problem.rows
    m = len(rows)
    n_slack = sum(1 for _, rel, _ in rows if rel == "<=")
    A = np.zeros((m, n_struct + n_slack), dtype=object if exact else float)
    if exact:
        A[:] = zero
    b = [zero] * m
    slack_of = {}
    s = n_struct
    for i, (coeffs, rel, rhs) in enumerate(rows):
        if len(coeffs) != n:
            raise ValueError("row length does not match variable count")
        for j, c in enumerate(coeffs):
            c = conv(c)
            if c != 0:
                A[i, j] = c
                if j in neg_col:
                    A[i, neg_col[j]] = -c
        b[i] = conv(rhs)
        if rel == "<=":
            A[i, s] = conv(1)
            slack_of[i] = s
            s += 1
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]

    basis = [-1] * m
    need_art = []
    for i in range(m):
        if i in slack_of and A[i, slack_of[i]] > 0:
            basis[i] = slack_of[i]
        else:
            need_art.append(i)
    n_cols = A.shape[1]
    n_art = len(need_art)
    total = n_cols + n_art
    T = np.zeros((m + 1, total + 1), dtype=object if exact else float)
    if exact:
        T[:] = zero
    T[:m, :n_cols] = A
    T[:m, -1] = b
    for k, i in enumerate(need_art):
        T[i, n_cols + k] = conv(1)
        basis[i] = n_cols + k
    cap = max_iter if max_iter is not None else 50 * (m + total) + 1000
    tab = _Tableau(T, basis, exact, piv_tol)
    is_art = np.zeros(total, dtype=bool)
    is_art[n_cols:] = True

    if n_art:
        # phase one: minimise the sum of artificials
        for i in need_art:
            T[m] = T[m] - T[i]
        T[m, n_cols:total] = zero
        tab.run(np.ones(total, dtype=bool), opt_tol, cap)
        if -T[m, -1] > feas_tol * max(1.0, float(max((abs(v) for v in b), default=0))):
            return LPResult("infeasible", iterations=tab.iterations)
        # drive remaining artificials out of the basis
        keep = []
        for r in range(m):
            if is_art[tab.basis[r]]:
                row = T[r, :n_cols]
                nz = [j for j in range(n_cols) if abs(row[j]) > tab.piv_tol]
                if nz:
                    tab.pivot(r, max(nz, key=lambda j: abs(row[j])))
                    keep.append(r)
            else:
                keep.append(r)
        if len(keep) < m:
            T = np.vstack([T[keep], T[m:m + 1]])
            tab.T = T
            tab.basis = [tab.basis[r] for r in keep]
            m = len(keep)

    # phase two
    cost = [zero] * total
    for j in range(n):
        cost[j] = obj[j]
        if j in neg_col:
            cost[neg_col[j]] = -obj[j]
    T[m, :] = zero
    T[m, :total] = cost
    for r in range(m):
        cb = cost[tab.basis[r]]
        if cb != 0:
            T[m] = T[m] - cb * T[r]
    status = tab.run(~is_art, opt_tol, cap)
    warnings = []
    if tab.small_pivots > 10:
        warnings.append(f"numerical instability: {tab.small_pivots} pivots below {1e3 * PIV_TOL:g}")
    if status == "unbounded":
        return LPResult("unbounded", iterations=tab.iterations, warnings=warnings)

    z = [zero] * total
    for r in range(m):
        z[tab.basis[r]] = T[r, -1]
    x = [z[j] - (z[neg_col[j]] if j in neg_col else zero) for j in range(n)]
    xs = np.array(x, dtype=object if exact else float)
    value = sum((conv(c) * v for c, v in zip(problem.objective or [0] * n, x)), zero)
    return LPResult("optimal", xs, value, tab.iterations, warnings)
