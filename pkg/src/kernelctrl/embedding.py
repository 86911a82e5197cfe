"""Empirical conditional-distribution embeddings.

Given transitions S = {(x_i, u_i, y_i)} the conditional distribution of the
successor state is represented through the regularized least-squares weights

    beta(x, u) = (G + lam*M*I)^{-1} z(x, u),
    G_ij = k(x_i, x_j) * l(u_i, u_j),      z_i = k(x_i, x) * l(u_i, u),

so that any expectation E[f(y) | x, u] is approximated by f_vals . beta,
with f_vals the function values at the sampled successors.

The regularized Gram matrix is factorized once (Cholesky) at fit time; each
query costs two triangular solves.  The inverse is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .kernels import KernelSpec, gram

__all__ = [
    "TransitionSample",
    "Embedding",
    "CholeskyError",
    "fit",
    "beta",
    "expectation",
    "beta_batch",
    "ridge_solve",
]


class CholeskyError(np.linalg.LinAlgError):
    """Regularized Gram matrix failed to factorize; carries the 1-based
    index of the failing pivot."""

    def __init__(self, pivot: int):
        super().__init__(f"Cholesky factorization failed at pivot {pivot}")
        self.pivot = pivot


@dataclass(frozen=True)
class TransitionSample:
    """The data S = {(x_i, u_i, y_i)}: states X, actions U, successors Y."""

    X: np.ndarray
    U: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _as_matrix(self.X, "X")
        U = _as_matrix(self.U, "U")
        Y = _as_matrix(self.Y, "Y")
        if not (X.shape[0] == U.shape[0] == Y.shape[0]):
            raise ValueError(
                f"inconsistent sample sizes: |X|={X.shape[0]}, |U|={U.shape[0]}, |Y|={Y.shape[0]}"
            )
        if X.shape[0] < 1:
            raise ValueError("sample must contain at least one transition")
        if X.shape[1] != Y.shape[1]:
            raise ValueError("states and successors must share one dimension")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def state_dim(self) -> int:
        return self.X.shape[1]

    @property
    def action_dim(self) -> int:
        return self.U.shape[1]


def _as_matrix(arr, name):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class Embedding:
    """Fitted embedding: training data, kernels, lam, and the lower Cholesky
    factor of G + lam*M*I."""

    sample: TransitionSample
    state_kernel: KernelSpec
    action_kernel: KernelSpec
    lam: float
    factor: np.ndarray

    def __len__(self) -> int:
        return len(self.sample)


def _chol_lower(H: np.ndarray, jitter: float) -> np.ndarray:
    """Lower Cholesky factor with one jitter retry for duplicate-row Grams."""
    c, info = dpotrf(H, lower=1, overwrite_a=0)
    if info == 0:
        return np.tril(c)
    c, info = dpotrf(H + jitter * np.eye(H.shape[0]), lower=1, overwrite_a=0)
    if info == 0:
        return np.tril(c)
    raise CholeskyError(int(info))


def fit(
    sample: TransitionSample,
    state_kernel: KernelSpec,
    action_kernel: Optional[KernelSpec] = None,
    lam: Optional[float] = None,
) -> Embedding:
    """Fit the embedding: build G = K_X o K_U (Hadamard) and factorize
    G + lam*M*I.  Defaults: lam = 1/M, action kernel = state kernel."""
    if action_kernel is None:
        action_kernel = state_kernel
    M = len(sample)
    if lam is None:
        lam = 1.0 / M
    lam = float(lam)
    if lam <= 0:
        raise ValueError(f"regularization must be positive, got {lam}")
    G = gram(state_kernel, sample.X, sample.X) * gram(action_kernel, sample.U, sample.U)
    H = G + lam * M * np.eye(M)
    factor = _chol_lower(H, 1e-10 * np.trace(G) / M)
    return Embedding(
        sample=sample,
        state_kernel=state_kernel,
        action_kernel=action_kernel,
        lam=lam,
        factor=factor,
    )


def ridge_solve(emb: Embedding, rhs: np.ndarray) -> np.ndarray:
    """(G + lam*M*I)^{-1} rhs via two triangular solves against the factor."""
    return cho_solve((emb.factor, True), np.asarray(rhs, dtype=float))


def _query_vector(emb: Embedding, x, u) -> np.ndarray:
    s = emb.sample
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape[0] != s.state_dim or u.shape[0] != s.action_dim:
        raise ValueError(
            f"query dims ({x.shape[0]}, {u.shape[0]}) do not match sample "
            f"({s.state_dim}, {s.action_dim})"
        )
    kx = gram(emb.state_kernel, s.X, x[None, :])[:, 0]
    lu = gram(emb.action_kernel, s.U, u[None, :])[:, 0]
    return kx * lu


def beta(emb: Embedding, x, u) -> np.ndarray:
    """Weight vector beta(x, u) of length M."""
    return ridge_solve(emb, _query_vector(emb, x, u))


def expectation(emb: Embedding, fvals, x, u) -> float:
    """Approximate E[f(y) | x, u] as fvals . beta with fvals_i = f(y_i)."""
    fvals = np.asarray(fvals, dtype=float)
    if fvals.shape != (len(emb),):
        raise ValueError(f"fvals must have length {len(emb)}, got shape {fvals.shape}")
    return float(fvals @ beta(emb, x, u))


def _query_arrays(emb: Embedding, queries):
    s = emb.sample
    if isinstance(queries, tuple) and len(queries) == 2:
        Xq = _as_matrix(queries[0], "query states")
        Uq = _as_matrix(queries[1], "query actions")
    else:
        queries = list(queries)
        if not queries:
            return np.empty((0, s.state_dim)), np.empty((0, s.action_dim))
        Xq = _as_matrix(np.array([np.atleast_1d(q[0]) for q in queries], dtype=float), "query states")
        Uq = _as_matrix(np.array([np.atleast_1d(q[1]) for q in queries], dtype=float), "query actions")
    if Xq.shape[0] != Uq.shape[0]:
        raise ValueError("query states and actions must have equal counts")
    if Xq.shape[1] != s.state_dim or Uq.shape[1] != s.action_dim:
        raise ValueError(
            f"query dims ({Xq.shape[1]}, {Uq.shape[1]}) do not match sample "
            f"({s.state_dim}, {s.action_dim})"
        )
    return Xq, Uq


def beta_batch(emb: Embedding, queries, max_chunk: int = 1024) -> np.ndarray:
    """Columnwise beta for many queries, processed in blocks of at most
    ``max_chunk`` columns so peak extra memory is O(M * max_chunk).

    ``queries`` is a sequence of (x, u) pairs or a (states, actions) pair of
    matrices.  An empty query list yields an M x 0 matrix.
    """
    if max_chunk < 1:
        raise ValueError("max_chunk must be >= 1")
    Xq, Uq = _query_arrays(emb, queries)
    s = emb.sample
    M, Q = len(emb), Xq.shape[0]
    out = np.empty((M, Q))
    for j0 in range(0, Q, max_chunk):
        j1 = min(j0 + max_chunk, Q)
        Z = gram(emb.state_kernel, s.X, Xq[j0:j1]) * gram(emb.action_kernel, s.U, Uq[j0:j1])
        out[:, j0:j1] = cho_solve((emb.factor, True), Z)
    return out
