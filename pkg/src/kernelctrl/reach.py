"""Backward stochastic reachability and forward reachable set estimation.

Backward reachability propagates approximate value tables over the sampled
successor points:

    terminal-hitting (THT):
        V_N[i] = 1_T(N)(y_i)
        V_t[i] = 1_K(t)(y_i) * clip01( max_j  V_{t+1} . beta(y_i, u_j) )

    first-hitting (FHT):
        V_N[i] = 1_T(N)(y_i)
        V_t[i] = 1_T(t)(y_i) + 1_{K(t) \\ T(t)}(y_i) * clip01( max_j ... )

Values are clipped to [0, 1] at every stage: the tables are probabilities,
but kernel weights need not be, so raw expectations can stray outside.

Forward reachable sets are estimated per time step as the support of the
state distribution, via an Abel-kernel one-class regression: scores near 1
on the data, decaying with distance, thresholded at the smallest training
score.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import cho_solve

from .embedding import Embedding, _chol_lower, ridge_solve
from .kernels import ABEL, KernelSpec, gram
from .sampling import ActionGrid, Box

__all__ = [
    "Tube",
    "SRModel",
    "SupportClassifier",
    "indicator",
    "indicator_values",
    "constant_tube",
    "fit_sr",
    "predict_safety",
    "greedy_policy",
    "fit_support",
    "classify",
]

THT = "THT"
FHT = "FHT"


def indicator(box: Box, x) -> int:
    """1 iff x lies in the closed box."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != box.dim:
        raise ValueError(f"point dim {x.shape[0]} != box dim {box.dim}")
    return int(np.all((x >= box.lower) & (x <= box.upper)))


def indicator_values(box: Box, X) -> np.ndarray:
    """Vectorized closed-box indicator over rows of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != box.dim:
        raise ValueError(f"point dim {X.shape[1]} != box dim {box.dim}")
    return np.all((X >= box.lower) & (X <= box.upper), axis=1).astype(float)


@dataclass(frozen=True)
class Tube:
    """Time-indexed boxes, one per t = 0..N."""

    sets: tuple

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise ValueError("tube must contain at least one box")
        dim = sets[0].dim
        if any(b.dim != dim for b in sets):
            raise ValueError("all tube boxes must share one dimension")
        object.__setattr__(self, "sets", sets)

    def __getitem__(self, t: int) -> Box:
        return self.sets[t]

    def __len__(self) -> int:
        return len(self.sets)


def constant_tube(box: Box, N: int) -> Tube:
    """The same box at every t = 0..N."""
    return Tube(sets=(box,) * (N + 1))


@dataclass
class SRModel:
    """Fitted stochastic-reachability model with per-stage value tables."""

    emb: Embedding
    actions: ActionGrid
    safe: Tube
    target: Tube
    problem: str
    horizon: int
    value_tables: List[np.ndarray]
    # solve((G+lam*M*I), V_t) per stage, reused by prediction and the
    # extracted greedy policy.
    _solved_tables: List[Optional[np.ndarray]] = field(default=None, repr=False)
    _action_gram: np.ndarray = field(default=None, repr=False)


def _stage_values(model: SRModel, t_next: int, points: np.ndarray) -> np.ndarray:
    """max_j V_{t_next} . beta(x, u_j) for each query row, pre-clip."""
    emb = model.emb
    Kxq = gram(emb.state_kernel, emb.sample.X, points)  # (M, Q)
    q = model._solved_tables[t_next]
    scores = Kxq.T @ (q[:, None] * model._action_gram)  # (Q, P)
    return scores.max(axis=1)


def fit_sr(
    emb: Embedding,
    actions: ActionGrid,
    safe: Tube,
    target: Tube,
    N: int,
    problem: str = THT,
) -> SRModel:
    """Run the backward recursion, storing value tables at the sampled
    successor points for t = 0..N."""
    if problem not in (THT, FHT):
        raise ValueError(f"problem must be 'THT' or 'FHT', got {problem!r}")
    if N < 1:
        raise ValueError("horizon must be >= 1")
    if len(safe) < N + 1 or len(target) < N + 1:
        raise ValueError(f"tubes must contain at least N+1 = {N + 1} boxes")
    M = len(emb)
    X, U, Y = emb.sample.X, emb.sample.U, emb.sample.Y
    Kxy = gram(emb.state_kernel, X, Y)
    Ku = gram(emb.action_kernel, U, actions.actions)

    tables: List[Optional[np.ndarray]] = [None] * (N + 1)
    solved: List[Optional[np.ndarray]] = [None] * (N + 1)
    tables[N] = indicator_values(target[N], Y)
    for t in range(N - 1, -1, -1):
        q = ridge_solve(emb, tables[t + 1])
        solved[t + 1] = q
        cont = np.clip((Kxy.T @ (q[:, None] * Ku)).max(axis=1), 0.0, 1.0)
        if problem == THT:
            V = indicator_values(safe[t], Y) * cont
        else:
            in_target = indicator_values(target[t], Y)
            in_safe = indicator_values(safe[t], Y)
            V = in_target + in_safe * (1.0 - in_target) * cont
        if not np.isfinite(V).all():
            i = int(np.flatnonzero(~np.isfinite(V))[0])
            raise FloatingPointError(f"non-finite value at stage {t}, point {i}")
        tables[t] = V

    model = SRModel(
        emb=emb,
        actions=actions,
        safe=safe,
        target=target,
        problem=problem,
        horizon=N,
        value_tables=tables,
    )
    model._solved_tables = solved
    model._action_gram = Ku
    return model


def predict_safety(
    model: SRModel, points, actions: Optional[ActionGrid] = None, max_chunk: int = 1024
) -> np.ndarray:
    """Safety probabilities at query states: one more recursion step from
    the t=1 tables, clipped to [0, 1].

    ``actions`` defaults to the grid the model was fitted with (passing a
    different grid re-fits nothing and is rejected).
    """
    if actions is not None and actions is not model.actions:
        if not np.array_equal(actions.actions, model.actions.actions):
            raise ValueError("prediction must use the action grid the model was fitted with")
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != model.emb.sample.state_dim:
        raise ValueError(
            f"query dim {points.shape[1]} != state dim {model.emb.sample.state_dim}"
        )
    out = np.empty(points.shape[0])
    for j0 in range(0, points.shape[0], max_chunk):
        blk = points[j0 : j0 + max_chunk]
        cont = np.clip(_stage_values(model, 1, blk), 0.0, 1.0)
        if model.problem == THT:
            vals = indicator_values(model.safe[0], blk) * cont
        else:
            in_target = indicator_values(model.target[0], blk)
            in_safe = indicator_values(model.safe[0], blk)
            vals = in_target + in_safe * (1.0 - in_target) * cont
        out[j0 : j0 + blk.shape[0]] = np.clip(vals, 0.0, 1.0)
    return out


def greedy_policy(model: SRModel):
    """Extract the action-grid policy the recursion implicitly maximizes:
    at (t, x) pick argmax_j V_{t+1} . beta(x, u_j).

    The returned callable has a ``batch(t, X)`` attribute evaluating whole
    state batches at once, which Monte-Carlo validation exploits.
    """
    grid = model.actions.actions

    def batch(t, X):
        t = min(int(t), model.horizon - 1)
        X = np.asarray(X, dtype=float)
        emb = model.emb
        Kxq = gram(emb.state_kernel, emb.sample.X, X)  # (M, Q)
        q = model._solved_tables[t + 1]
        scores = Kxq.T @ (q[:, None] * model._action_gram)  # (Q, P)
        return grid[np.argmax(scores, axis=1)]

    def policy(t, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return batch(t, x[None, :])[0]

    policy.batch = batch
    return policy


@dataclass(frozen=True)
class SupportClassifier:
    """One-class support estimate from samples of a distribution.

    score(x) = kappa(x) . alpha with (K + lam*M*I) alpha = 1; a point is
    inside when its score reaches the smallest training score.  The decision
    threshold is stored directly (rather than re-deriving it from tau) so
    training points stay inside under floating-point rounding.
    """

    points: np.ndarray
    kernel: KernelSpec
    lam: float
    alpha: np.ndarray
    tau: float
    threshold: float


def _point_score(points, kernel, alpha, x) -> float:
    krow = gram(kernel, points, np.atleast_1d(np.asarray(x, dtype=float))[None, :])[:, 0]
    return float(krow @ alpha)


def fit_support(points, sigma: float, lam: float) -> SupportClassifier:
    """Fit the separating-kernel (Abel) support classifier."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    M = points.shape[0]
    if M < 1:
        raise ValueError("need at least one point")
    if lam <= 0:
        raise ValueError(f"regularization must be positive, got {lam}")
    kernel = KernelSpec(ABEL, sigma)
    K = gram(kernel, points, points)
    factor = _chol_lower(K + lam * M * np.eye(M), 1e-10 * np.trace(K) / M)
    alpha = cho_solve((factor, True), np.ones(M))
    # Same evaluation path as classify(), so the min is reproduced exactly.
    scores = np.array([_point_score(points, kernel, alpha, p) for p in points])
    threshold = float(scores.min())
    return SupportClassifier(
        points=points,
        kernel=kernel,
        lam=float(lam),
        alpha=alpha,
        tau=1.0 - threshold,
        threshold=threshold,
    )


def classify(cls: SupportClassifier, x):
    """(score, inside): inside iff score >= 1 - tau."""
    score = _point_score(cls.points, cls.kernel, cls.alpha, x)
    return score, bool(score >= cls.threshold)
