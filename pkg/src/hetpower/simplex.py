"""Dense two-phase simplex for small linear programs.

Solves ``min c @ x`` subject to ``a_ge @ x >= b_ge`` and ``0 <= x <= upper``
on a dense tableau. Sized for a few hundred variables/constraints, which
covers the power-allocation programs here (<= 3 layers x 57 users) with
plenty of room; no sparse machinery, no external solver.

Pivoting is Dantzig's rule with a stall detector that switches to Bland's
rule permanently, so degenerate programs terminate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NumericalError

_PIVOT_TOL = 1e-11
_STALL_LIMIT = 200


class LpInfeasibleError(InfeasibleError):
    """Phase 1 ended with positive artificial mass: no feasible point."""

    def __init__(self, infeasibility: float, binding_rows):
        self.infeasibility = infeasibility
        super().__init__(
            f"linear program infeasible (phase-1 mass {infeasibility:.3e}); "
            f"binding rows {sorted(binding_rows)}",
            binding_users=sorted(binding_rows),
        )


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    other = tableau[:, col].copy()
    other[row] = 0.0
    tableau -= np.outer(other, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col


def _run_simplex(tableau, basis, allowed, tol, max_iters, iterations):
    """Minimize over the tableau until reduced costs are >= -tol.

    The last tableau row holds reduced costs with -objective in its final
    entry. Returns the total iteration count; raises on stall/unbounded.
    """
    m = tableau.shape[0] - 1
    bland = False
    stall = 0
    best_obj = np.inf
    while True:
        cost = tableau[-1, :-1]
        if bland:
            entering = -1
            for j in np.flatnonzero(allowed):
                if cost[j] < -tol:
                    entering = j
                    break
            if entering < 0:
                return iterations
        else:
            masked = np.where(allowed, cost, np.inf)
            entering = int(np.argmin(masked))
            if masked[entering] >= -tol:
                return iterations
        col = tableau[:m, entering]
        rhs = tableau[:m, -1]
        rows = np.flatnonzero(col > _PIVOT_TOL)
        if rows.size == 0:
            raise NumericalError("unbounded linear program", iterations=iterations)
        ratios = rhs[rows] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12]
        # smallest basis index among ties keeps Bland's guarantee usable
        leave = ties[np.argmin(basis[ties])]
        _pivot(tableau, basis, int(leave), entering)
        iterations += 1
        if iterations > max_iters:
            raise NumericalError(
                "simplex iteration limit reached", iterations=iterations
            )
        obj = -tableau[-1, -1]
        if obj < best_obj - 1e-12:
            best_obj = obj
            stall = 0
        else:
            stall += 1
            if stall > _STALL_LIMIT:
                bland = True


def solve_lp_dense(c, a_ge, b_ge, upper=None, tol: float = 1e-9, max_iters: int | None = None) -> LpSolution:
    """Two-phase dense simplex.

    Args:
        c: objective coefficients, shape (n,).
        a_ge: constraint matrix for a_ge @ x >= b_ge, shape (m, n).
        b_ge: constraint right-hand sides, shape (m,).
        upper: optional per-variable upper bounds (np.inf allowed).
        tol: reduced-cost tolerance.
        max_iters: pivot budget, defaults to 200*(rows+cols).

    Raises:
        LpInfeasibleError: no feasible point; carries the ge-row indices
            whose artificials stayed basic (the unsatisfiable constraints).
        NumericalError: stall/unbounded.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ge = np.asarray(a_ge, dtype=float).reshape(-1, n)
    b_ge = np.asarray(b_ge, dtype=float)
    m1 = a_ge.shape[0]
    if upper is None:
        upper = np.full(n, np.inf)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper < 0):
        raise LpInfeasibleError(float(np.inf), np.flatnonzero(upper < 0).tolist())
    ub_idx = np.flatnonzero(np.isfinite(upper))
    m2 = ub_idx.size
    m = m1 + m2

    n_struct = n + m1 + m2  # x | surplus | bound slacks
    body = np.zeros((m, n_struct))
    rhs = np.zeros(m)
    basis = np.full(m, -1)
    art_rows = []
    for i in range(m1):
        row = a_ge[i]
        b = b_ge[i]
        if b < 0:
            # flipped row: -a@x + s = -b with s >= 0 basic
            body[i, :n] = -row
            body[i, n + i] = 1.0
            rhs[i] = -b
            basis[i] = n + i
        else:
            body[i, :n] = row
            body[i, n + i] = -1.0
            rhs[i] = b
            art_rows.append(i)
    for k, j in enumerate(ub_idx):
        r = m1 + k
        body[r, j] = 1.0
        body[r, n + m1 + k] = 1.0
        rhs[r] = upper[j]
        basis[r] = n + m1 + k

    n_art = len(art_rows)
    if max_iters is None:
        max_iters = 200 * (m + n_struct + n_art + 10)
    iterations = 0

    columns = n_struct + n_art
    tableau = np.zeros((m + 1, columns + 1))
    tableau[:m, :n_struct] = body
    tableau[:m, -1] = rhs
    for t, i in enumerate(art_rows):
        tableau[i, n_struct + t] = 1.0
        basis[i] = n_struct + t

    if n_art:
        # phase 1: minimize the artificial mass
        cost1 = np.zeros(columns)
        cost1[n_struct:] = 1.0
        tableau[-1, :-1] = cost1
        tableau[-1, -1] = 0.0
        for i in range(m):
            if cost1[basis[i]] != 0.0:
                tableau[-1] -= cost1[basis[i]] * tableau[i]
        allowed = np.ones(columns, dtype=bool)
        iterations = _run_simplex(tableau, basis, allowed, tol, max_iters, iterations)
        mass = -tableau[-1, -1]
        feas_tol = tol * (1.0 + float(np.abs(rhs).max(initial=0.0)))
        if mass > feas_tol:
            bad = [
                art_rows[basis[i] - n_struct]
                for i in range(m)
                if basis[i] >= n_struct and tableau[i, -1] > feas_tol
            ]
            raise LpInfeasibleError(float(mass), bad)
        # drive remaining (zero-valued) artificials out of the basis
        drop_rows = []
        for i in range(m):
            if basis[i] >= n_struct:
                row = tableau[i, :n_struct]
                cand = np.flatnonzero(np.abs(row) > 1e-9)
                if cand.size:
                    _pivot(tableau, basis, i, int(cand[0]))
                else:
                    drop_rows.append(i)  # redundant constraint
        if drop_rows:
            keep = [i for i in range(m) if i not in set(drop_rows)]
            tableau = np.vstack([tableau[keep], tableau[-1:]])
            basis = basis[keep]
            m = len(keep)

    # phase 2 on structural columns only
    tableau = np.hstack([tableau[:, :n_struct], tableau[:, -1:]])
    cost2 = np.zeros(n_struct)
    cost2[:n] = c
    tableau[-1, :-1] = cost2
    tableau[-1, -1] = 0.0
    for i in range(m):
        if cost2[basis[i]] != 0.0:
            tableau[-1] -= cost2[basis[i]] * tableau[i]
    allowed = np.ones(n_struct, dtype=bool)
    iterations = _run_simplex(tableau, basis, allowed, tol, max_iters, iterations)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tableau[i, -1]
    x = np.maximum(x, 0.0)
    return LpSolution(x=x, objective=float(c @ x), iterations=iterations)
