"""Independent Monte-Carlo and closed-form oracles.

These deliberately avoid the kernel machinery: safety probabilities come
from plain rollouts and set membership, conditional means from the exact
LTI matrices.  Tests and the CLI use them to cross-check the embedding-based
estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .reach import FHT, THT, Tube, indicator
from .sampling import SeededRng
from .systems import SystemSpec, simulate, step_batch

__all__ = ["McReport", "mc_safety", "linear_gaussian_mean", "rollout_success"]


@dataclass(frozen=True)
class McReport:
    """Binomial estimate with a 95% normal-approximation half width."""

    estimate: float
    trials: int
    half_width: float


def rollout_success(states: np.ndarray, safe: Tube, target: Tube, N: int, problem: str) -> bool:
    """Reach-avoid success of one trajectory.

    THT: stay in safe(t) for all t < N and land in target(N) at t = N.
    FHT: hit target(t) at some t <= N having stayed in safe(s) for s < t.
    """
    if problem == THT:
        for t in range(N):
            if not indicator(safe[t], states[t]):
                return False
        return bool(indicator(target[N], states[N]))
    if problem == FHT:
        for t in range(N + 1):
            if indicator(target[t], states[t]):
                return True
            if t == N or not indicator(safe[t], states[t]):
                return False
        return False
    raise ValueError(f"problem must be 'THT' or 'FHT', got {problem!r}")


def _in_box(box, X) -> np.ndarray:
    return np.all((X >= box.lower) & (X <= box.upper), axis=1)


def _mc_lockstep(sys, policy_batch, x0, safe, target, N, problem, K, rng):
    """All K rollouts advanced together; needs a batch-capable policy."""
    X = np.tile(np.atleast_1d(np.asarray(x0, dtype=float)), (K, 1))
    if problem == THT:
        ok = np.ones(K, dtype=bool)
        for t in range(N):
            ok &= _in_box(safe[t], X)
            X = step_batch(sys, X, policy_batch(t, X), rng)
        success = ok & _in_box(target[N], X)
    else:
        prefix_ok = np.ones(K, dtype=bool)
        success = np.zeros(K, dtype=bool)
        for t in range(N + 1):
            in_t = _in_box(target[t], X)
            success |= prefix_ok & in_t
            prefix_ok &= ~in_t
            if t < N:
                prefix_ok &= _in_box(safe[t], X)
                X = step_batch(sys, X, policy_batch(t, X), rng)
    return int(success.sum())


def mc_safety(
    sys: SystemSpec,
    policy,
    x0,
    safe: Tube,
    target: Tube,
    N: int,
    problem: str,
    K: int,
    rng: SeededRng,
) -> McReport:
    """Estimate the reach-avoid probability from K independent rollouts.

    Policies carrying a ``batch(t, X)`` attribute are simulated in lockstep
    (one vectorized step per stage); plain callables are rolled out one
    trial at a time on independent substreams.  Either way the trials are
    i.i.d. and the report is deterministic given the rng.
    """
    if K < 1:
        raise ValueError("need at least one trial")
    if problem not in (THT, FHT):
        raise ValueError(f"problem must be 'THT' or 'FHT', got {problem!r}")
    batch = getattr(policy, "batch", None)
    if batch is not None:
        successes = _mc_lockstep(sys, batch, x0, safe, target, N, problem, K, rng)
    else:
        successes = 0
        for trial in range(K):
            traj = simulate(sys, x0, policy, N, rng.substream(trial))
            if rollout_success(traj.states, safe, target, N, problem):
                successes += 1
    est = successes / K
    return McReport(
        estimate=est,
        trials=K,
        half_width=1.96 * math.sqrt(est * (1.0 - est) / K),
    )


def linear_gaussian_mean(sys: SystemSpec, x, u) -> np.ndarray:
    """Exact conditional mean A x + B u of an LTI system's successor."""
    if not sys.is_lti:
        raise ValueError(f"system {sys.name!r} is not LTI")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return sys.A @ x + sys.B @ u
