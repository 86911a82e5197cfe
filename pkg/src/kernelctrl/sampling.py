"""Seeded sample generation: boxes, transition samples, trajectories, action grids.

Every draw is a pure function of (inputs, seed, stream).  Parallel or
repeated work derives child streams from a root ``SeededRng`` so results
never depend on evaluation order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .embedding import TransitionSample
from .systems import SystemSpec, simulate, step_batch

__all__ = [
    "Box",
    "ActionGrid",
    "SeededRng",
    "uniform_box",
    "draw_transitions",
    "draw_trajectories",
    "grid_actions",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned hyperrectangle, lower[i] <= upper[i]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError(f"box bounds mismatch: {lower.shape} vs {upper.shape}")
        if np.any(lower > upper):
            raise ValueError("box has lower > upper in some coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def scaled(self, factor: float) -> "Box":
        """Box shrunk/grown about its center by ``factor``."""
        c, h = self.center, 0.5 * (self.upper - self.lower)
        return Box(c - factor * h, c + factor * h)


@dataclass(frozen=True)
class ActionGrid:
    """A finite set of admissible control actions (P x m)."""

    actions: np.ndarray

    def __post_init__(self):
        actions = np.asarray(self.actions, dtype=float)
        if actions.ndim == 1:
            actions = actions[:, None]
        if actions.shape[0] < 1:
            raise ValueError("action grid must contain at least one action")
        if not np.isfinite(actions).all():
            raise ValueError("action grid contains non-finite entries")
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return self.actions.shape[0]

    @property
    def dim(self) -> int:
        return self.actions.shape[1]


class SeededRng:
    """Deterministic RNG keyed by (seed, stream).

    The same (seed, stream) always yields the same sequence.  ``substream``
    derives an independent child generator; nesting is collision-free
    because children extend the seed-sequence spawn key.
    """

    def __init__(self, seed: int, stream: int = 0, _path: tuple = ()):
        self.seed = int(seed)
        self.stream = int(stream)
        self._path = tuple(_path)
        key = (self.stream, *self._path)
        self._generator = np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        )

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def substream(self, index: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream, self._path + (int(index),))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream}, path={self._path})"


def uniform_box(box: Box, count: int, rng: SeededRng) -> np.ndarray:
    """I.i.d. uniform points in the box, shape (count, dim)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return np.empty((0, box.dim))
    return rng.generator.uniform(box.lower, box.upper, size=(count, box.dim))


def draw_transitions(
    sys: SystemSpec, state_box: Box, action_box: Box, M: int, rng: SeededRng
) -> TransitionSample:
    """M i.i.d. transitions (x, u, y): x, u uniform, y one system step."""
    if M < 1:
        raise ValueError("sample size must be >= 1")
    X = uniform_box(state_box, M, rng)
    U = uniform_box(action_box, M, rng)
    Y = step_batch(sys, X, U, rng)
    return TransitionSample(X=X, U=U, Y=Y)


def draw_trajectories(
    sys: SystemSpec, init_box: Box, policy, N: int, M: int, rng: SeededRng
):
    """M independent rollouts of length N from uniform initial conditions."""
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")
    X0 = uniform_box(init_box, M, rng)
    return [simulate(sys, X0[i], policy, N, rng.substream(i)) for i in range(M)]


def grid_actions(action_box: Box, per_dim: int) -> ActionGrid:
    """Uniform grid over the action box: per_dim points per axis, endpoints
    included; per_dim = 1 degenerates to the box midpoint."""
    if per_dim < 1:
        raise ValueError("per_dim must be >= 1")
    if per_dim == 1:
        axes = [np.array([0.5 * (lo + hi)]) for lo, hi in zip(action_box.lower, action_box.upper)]
    else:
        axes = [
            np.linspace(lo, hi, per_dim)
            for lo, hi in zip(action_box.lower, action_box.upper)
        ]
    pts = np.array(list(itertools.product(*axes)))
    return ActionGrid(actions=pts)
