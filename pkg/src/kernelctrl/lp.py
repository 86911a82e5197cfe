"""Dense two-phase primal simplex for small LPs over the probability simplex.

Solves
    min  c . g
    s.t. D g <= 0        (p inequality rows, zero right-hand side)
         sum(g) = 1
         g >= 0

The feasible set is compact, so a genuinely unbounded phase-2 ray signals a
solver bug and raises.  Infeasibility (no simplex point with D g <= 0) is a
regular outcome, not an error.  Bland's rule is used for both the entering
and leaving choices, which prevents cycling on these highly degenerate
instances (every inequality row has rhs 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["SimplexLP", "LPResult", "solve_lp", "PIVOT_TOL", "FEAS_TOL"]

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9

_MAX_ITERS_BASE = 10_000


@dataclass(frozen=True)
class SimplexLP:
    """Objective c (length P) and inequality rows D (p x P, rhs 0)."""

    c: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        D = np.asarray(self.D, dtype=float)
        if D.size == 0:
            D = np.zeros((0, c.shape[0]))
        if D.ndim != 2 or D.shape[1] != c.shape[0]:
            raise ValueError(f"D shape {D.shape} incompatible with c length {c.shape[0]}")
        if not (np.isfinite(c).all() and np.isfinite(D).all()):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "D", D)


@dataclass(frozen=True)
class LPResult:
    feasible: bool
    gamma: Optional[np.ndarray] = None
    objective: Optional[float] = None


def _pivot(T: np.ndarray, row: int, col: int):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _run_simplex(T: np.ndarray, basis: list) -> str:
    """Iterate to optimality on an objective-row-augmented tableau.

    T layout: structural rows then one objective row; last column is rhs
    (objective cell holds minus the objective value).  Returns "optimal" or
    "unbounded".
    """
    n_rows = T.shape[0] - 1
    for _ in range(_MAX_ITERS_BASE + 100 * T.shape[1]):
        reduced = T[-1, :-1]
        entering = -1
        for j in range(reduced.shape[0]):
            if reduced[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        # Ratio test; ties broken by smallest basic-variable index (Bland).
        best_ratio, leave = np.inf, -1
        for i in range(n_rows):
            a = T[i, entering]
            if a > PIVOT_TOL:
                ratio = T[i, -1] / a
                if ratio < best_ratio - PIVOT_TOL or (
                    abs(ratio - best_ratio) <= PIVOT_TOL
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio, leave = ratio, i
        if leave < 0:
            return "unbounded"
        _pivot(T, leave, entering)
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit exceeded (should not happen with Bland's rule)")


def solve_lp(lp: SimplexLP) -> LPResult:
    """Solve the simplex-constrained LP; returns weights and objective, or
    an infeasible result."""
    c, D = lp.c, lp.D
    P, p = c.shape[0], D.shape[0]
    if P < 1:
        raise ValueError("objective must have at least one entry")

    # Standard form columns: [g (P) | slacks (p) | artificial (1) | rhs].
    # Rows: D g + s = 0, then sum(g) + a = 1.
    n_struct = P + p
    T = np.zeros((p + 2, n_struct + 2))
    if p:
        T[:p, :P] = D
        T[:p, P : P + p] = np.eye(p)
    T[p, :P] = 1.0
    T[p, n_struct] = 1.0
    T[p, -1] = 1.0

    basis = [P + i for i in range(p)] + [n_struct]

    # Phase 1: minimize the artificial variable.  Its cost row, with the
    # artificial basic in the last structural row, reduces to the negated
    # simplex-sum row.
    T[-1, :] = 0.0
    T[-1, n_struct] = 1.0
    T[-1, :] -= T[p, :]
    status = _run_simplex(T, basis)
    if status != "optimal":
        raise RuntimeError("phase 1 reported unbounded: solver bug")
    if -T[-1, -1] > FEAS_TOL:
        return LPResult(feasible=False)

    # Drive a residual basic artificial (at zero level) out of the basis.
    if n_struct in basis:
        row = basis.index(n_struct)
        for j in range(n_struct):
            if abs(T[row, j]) > PIVOT_TOL:
                _pivot(T, row, j)
                basis[row] = j
                break
        else:
            raise RuntimeError("could not remove artificial variable: solver bug")

    # Phase 2: drop the artificial column, restore the real objective.
    T = np.delete(T, n_struct, axis=1)
    T[-1, :] = 0.0
    T[-1, :P] = c
    for i, b in enumerate(basis):
        if abs(T[-1, b]) > 0.0:
            T[-1, :] -= T[-1, b] * T[i, :]
    status = _run_simplex(T, basis)
    if status != "optimal":
        raise RuntimeError("phase 2 reported unbounded on a compact feasible set: solver bug")

    gamma = np.zeros(P + p)
    for i, b in enumerate(basis):
        gamma[b] = T[i, -1]
    gamma = gamma[:P]
    return LPResult(feasible=True, gamma=gamma, objective=float(c @ gamma))
