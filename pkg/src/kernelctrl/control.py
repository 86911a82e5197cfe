"""Kernel-based stochastic optimal control.

Two controllers over a finite action grid {u_1 .. u_P}:

* forward (greedy): at each step minimize the one-step expected cost by
  solving a small LP whose variable is a weight vector on the probability
  simplex over the action grid; the action with the largest weight is
  applied.

* backward (dynamic programming): value tables are propagated over the
  sampled successor points, folding expected future cost into the LP's
  coefficient row at act time.

Cost functions are decomposed as f_i(t, x, u) = f_i_x(t, x) + f_i_u(t, u);
index 0 is the objective and the rest are expectation constraints
E[f_i] <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .embedding import Embedding, beta_batch, ridge_solve
from .kernels import gram
from .lp import FEAS_TOL, LPResult, SimplexLP, solve_lp
from .sampling import ActionGrid, SeededRng

__all__ = [
    "CostSpec",
    "Controller",
    "InfeasibleConstraintsError",
    "stage_matrices",
    "forward_controller",
    "fit_backward",
    "act_forward",
    "act_backward",
]


class InfeasibleConstraintsError(RuntimeError):
    """No action distribution satisfies the expectation constraints."""

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(
            f"constraint rows {self.indices} cannot be satisfied by any admissible action"
        )


@dataclass(frozen=True)
class CostSpec:
    """Decomposed stage cost: state_cost(t, states) and action_cost(t, actions).

    Both callables receive a batch (Q x dim array) and should return a
    length-Q vector; plain scalar functions of a single point also work and
    are applied row by row.
    """

    state_cost: Callable
    action_cost: Callable


def eval_cost(fn: Callable, t: int, points: np.ndarray) -> np.ndarray:
    """Evaluate a cost callable on a batch, falling back to a row loop for
    scalar-only functions."""
    points = np.asarray(points, dtype=float)
    try:
        vals = np.asarray(fn(t, points), dtype=float)
        if vals.shape == (points.shape[0],):
            return vals
    except Exception:
        pass
    return np.array([float(fn(t, p)) for p in points], dtype=float)


def zero_cost(t, pts):
    pts = np.asarray(pts, dtype=float)
    return np.zeros(pts.shape[0] if pts.ndim == 2 else 1)


@dataclass
class Controller:
    """A fitted policy.  Backward controllers also carry value tables
    indexed t = 0..N (table N is identically zero: tables hold cost-to-go
    exclusive of the arrival-state cost, which act folds in at t+1)."""

    emb: Embedding
    actions: ActionGrid
    costs: List[CostSpec]
    mode: str  # "forward" | "backward"
    horizon: Optional[int] = None
    value_tables: Optional[List[np.ndarray]] = None
    sample_actions: bool = False
    rng: Optional[SeededRng] = None

    def __post_init__(self):
        if self.mode not in ("forward", "backward"):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if not self.costs:
            raise ValueError("at least an objective CostSpec is required")

    def act(self, x, t: int):
        if self.mode == "forward":
            return act_forward(self, x, t)
        return act_backward(self, x, t)

    def policy(self):
        """As a (t, state) -> action callable for simulation."""
        return lambda t, x: self.act(x, t)


def stage_matrices(
    emb: Embedding, actions: ActionGrid, fvals_x, fu_vals, x
) -> np.ndarray:
    """Length-P coefficient row v_j = fvals_x . beta(x, u_j) + fu_vals[j].

    This is the contraction multiplying the policy weights in the stage LP.
    """
    fvals_x = np.asarray(fvals_x, dtype=float)
    fu_vals = np.asarray(fu_vals, dtype=float)
    P = len(actions)
    if fvals_x.shape != (len(emb),):
        raise ValueError(f"fvals_x must have length {len(emb)}")
    if fu_vals.shape != (P,):
        raise ValueError(f"fu_vals must have length {P}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    B = beta_batch(emb, (np.tile(x, (P, 1)), actions.actions), max_chunk=max(P, 1))
    return fvals_x @ B + fu_vals


def _lp_rows(ctrl: Controller, x, t: int, objective_fvals: np.ndarray):
    """Build the LP objective row and constraint rows at state x, sharing a
    single beta solve across the objective and every constraint."""
    emb, grid = ctrl.emb, ctrl.actions
    P = len(grid)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    B = beta_batch(emb, (np.tile(x, (P, 1)), grid.actions), max_chunk=P)
    Y = emb.sample.Y

    fu0 = eval_cost(ctrl.costs[0].action_cost, t, grid.actions)
    c = objective_fvals @ B + fu0
    rows = []
    for cost in ctrl.costs[1:]:
        fx = eval_cost(cost.state_cost, t + 1, Y)
        fu = eval_cost(cost.action_cost, t, grid.actions)
        rows.append(fx @ B + fu)
    D = np.array(rows) if rows else np.zeros((0, P))
    if not (np.isfinite(c).all() and np.isfinite(D).all()):
        raise FloatingPointError(f"non-finite LP coefficients at t={t}")
    return c, D


def _select_action(ctrl: Controller, res: LPResult, D: np.ndarray):
    if not res.feasible:
        bad = [i for i in range(D.shape[0]) if D[i].min() > FEAS_TOL]
        raise InfeasibleConstraintsError(bad if bad else list(range(D.shape[0])))
    gamma = res.gamma
    if ctrl.sample_actions and ctrl.rng is not None:
        w = np.clip(gamma, 0.0, None)
        w = w / w.sum()
        j = int(ctrl.rng.generator.choice(len(gamma), p=w))
    else:
        j = int(np.argmax(gamma))  # lowest index on ties
    return ctrl.actions.actions[j]


def forward_controller(
    emb: Embedding,
    actions: ActionGrid,
    costs: Sequence[CostSpec],
    sample_actions: bool = False,
    rng: Optional[SeededRng] = None,
) -> Controller:
    """Greedy one-step controller (no value tables to fit)."""
    return Controller(
        emb=emb,
        actions=actions,
        costs=list(costs),
        mode="forward",
        sample_actions=sample_actions,
        rng=rng,
    )


def act_forward(ctrl: Controller, x, t: int):
    """Pick the action minimizing the one-step expected cost at (x, t)."""
    if ctrl.mode != "forward":
        raise ValueError("act_forward requires a forward-mode controller")
    fx = eval_cost(ctrl.costs[0].state_cost, t + 1, ctrl.emb.sample.Y)
    c, D = _lp_rows(ctrl, x, t, fx)
    return _select_action(ctrl, solve_lp(SimplexLP(c=c, D=D)), D)


def fit_backward(
    emb: Embedding, actions: ActionGrid, costs, N: int
) -> Controller:
    """Backward dynamic programming over the sampled successor points.

    Tables satisfy Z_N = 0 and, for t = N-1 .. 0,

        Z_t[i] = min_j  f0_u(t, u_j) + (f0_x(t+1, .) + Z_{t+1}) . beta(y_i, u_j)

    so Z_t[i] is the optimal expected cost accrued from successor point y_i
    onward, counting action costs at t..N-1 and state costs at t+1..N.
    When constraints are present the min runs over the actions whose
    one-step constraint expectations are all <= 0 at that point; if none
    qualify the least-violating action is used.

    Each stage folds the weight vector through the fitted factorization once
    ((G + lam*M*I)^{-1} is symmetric, so w . beta(y_i, u_j) equals
    (solve(w)) . z(y_i, u_j)), then contracts against precomputed
    cross-Grams; cost per stage is O(M^2 P) instead of O(M^3 P).
    """
    if isinstance(costs, CostSpec):
        costs = [costs]
    costs = list(costs)
    if N < 1:
        raise ValueError("horizon must be >= 1")
    M = len(emb)
    grid = actions.actions
    P = grid.shape[0]
    X, U, Y = emb.sample.X, emb.sample.U, emb.sample.Y

    Kxy = gram(emb.state_kernel, X, Y)  # k(x_l, y_i)
    Ku = gram(emb.action_kernel, U, grid)  # l(u_l, u_j)

    tables: List[Optional[np.ndarray]] = [None] * (N + 1)
    tables[N] = np.zeros(M)
    for t in range(N - 1, -1, -1):
        w = eval_cost(costs[0].state_cost, t + 1, Y) + tables[t + 1]
        q = ridge_solve(emb, w)
        vals = Kxy.T @ (q[:, None] * Ku)  # (M, P): expected cost-to-go
        obj = vals + eval_cost(costs[0].action_cost, t, grid)[None, :]

        if len(costs) > 1:
            violation = np.full((M, P), -np.inf)
            for cost in costs[1:]:
                qc = ridge_solve(emb, eval_cost(cost.state_cost, t + 1, Y))
                cons = Kxy.T @ (qc[:, None] * Ku)
                cons += eval_cost(cost.action_cost, t, grid)[None, :]
                violation = np.maximum(violation, cons)
            admissible = violation <= FEAS_TOL
            masked = np.where(admissible, obj, np.inf)
            Z = masked.min(axis=1)
            none_ok = ~admissible.any(axis=1)
            if none_ok.any():
                fallback_j = violation[none_ok].argmin(axis=1)
                Z[none_ok] = obj[none_ok, fallback_j]
        else:
            Z = obj.min(axis=1)

        if not np.isfinite(Z).all():
            i = int(np.flatnonzero(~np.isfinite(Z))[0])
            raise FloatingPointError(f"non-finite value table entry at stage {t}, point {i}")
        tables[t] = Z

    return Controller(
        emb=emb,
        actions=actions,
        costs=costs,
        mode="backward",
        horizon=N,
        value_tables=tables,
    )


def act_backward(ctrl: Controller, x, t: int):
    """Stage-t action from the fitted value tables."""
    if ctrl.mode != "backward":
        raise ValueError("act_backward requires a backward-mode controller")
    if not (0 <= t < ctrl.horizon):
        raise ValueError(f"t={t} outside horizon [0, {ctrl.horizon})")
    fx = eval_cost(ctrl.costs[0].state_cost, t + 1, ctrl.emb.sample.Y)
    c, D = _lp_rows(ctrl, x, t, fx + ctrl.value_tables[t + 1])
    return _select_action(ctrl, solve_lp(SimplexLP(c=c, D=D)), D)
