"""Benchmark discrete-time stochastic systems.

Each system is either an exact linear map x' = A x + B u + w (chain of
integrators, spacecraft rendezvous) or a continuous-time vector field
integrated over one sampling interval under a zero-order hold (nonholonomic
vehicle, TORA).  The disturbance w ~ N(0, Sigma) is added once per discrete
step in both cases.

Nonlinear integration uses fixed-step classical RK4 with 16 substeps per
sampling interval: deterministic, portable, and with local error far below
the noise floor at these horizons.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

__all__ = [
    "NoiseSpec",
    "SystemSpec",
    "Trajectory",
    "make_system",
    "step",
    "step_batch",
    "simulate",
    "integrate_zoh",
    "tora_default_policy",
]

# CWH defaults: 850 km circular orbit (mu = 398600.4418 km^3/s^2,
# R_earth = 6378.1 km) and a 300 kg deputy spacecraft.
CWH_ORBIT_ALTITUDE_KM = 850.0
CWH_SPACECRAFT_MASS_KG = 300.0
_EARTH_MU_KM3_S2 = 398600.4418
_EARTH_RADIUS_KM = 6378.1

RK4_SUBSTEPS = 16


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian disturbance w ~ N(0, covariance)."""

    covariance: np.ndarray
    scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be square, got shape {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "covariance", cov)
        try:
            scale = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            # PSD but singular (e.g. zero noise): eigendecompose and clamp
            # small negative eigenvalues at zero.
            w, v = np.linalg.eigh(cov)
            if w.min() < -1e-10 * max(1.0, abs(w.max())):
                raise ValueError("covariance is not positive semidefinite")
            scale = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
        object.__setattr__(self, "scale", scale)

    def draw(self, count: int, rng) -> np.ndarray:
        z = rng.generator.standard_normal((count, self.covariance.shape[0]))
        return z @ self.scale.T


@dataclass(frozen=True)
class SystemSpec:
    """A discrete-time stochastic system x' = f(x, u) + w.

    LTI systems carry exact discrete matrices (A, B); nonlinear systems
    carry a continuous-time vector_field(x, u) integrated under ZOH.
    """

    name: str
    state_dim: int
    action_dim: int
    sampling_time: float
    noise: NoiseSpec
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    vector_field: Optional[Callable] = None
    action_lower: Optional[np.ndarray] = None
    action_upper: Optional[np.ndarray] = None
    rk4_substeps: int = RK4_SUBSTEPS

    @property
    def is_lti(self) -> bool:
        return self.A is not None


@dataclass(frozen=True)
class Trajectory:
    """A single rollout: (N+1) states and the N actions that produced it."""

    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        if states.ndim != 2 or actions.ndim != 2:
            raise ValueError("states and actions must be 2-D arrays")
        if states.shape[0] != actions.shape[0] + 1:
            raise ValueError(
                f"horizon mismatch: {states.shape[0]} states, {actions.shape[0]} actions"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]


def _noise_from(value, n: int) -> NoiseSpec:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        cov = float(arr) * np.eye(n)
    elif arr.ndim == 1:
        if arr.shape[0] != n:
            raise ValueError(f"noise diagonal has length {arr.shape[0]}, expected {n}")
        cov = np.diag(arr)
    else:
        cov = arr
    return NoiseSpec(cov)


def _integrator_matrices(n: int, ts: float):
    # Exact ZOH discretization of a chain of n integrators driven on the
    # last coordinate: A[i, j] = ts^(j-i)/(j-i)!, B[i] = ts^(n-i)/(n-i)!.
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            A[i, j] = ts ** (j - i) / math.factorial(j - i)
    B = np.array([[ts ** (n - i) / math.factorial(n - i)] for i in range(n)])
    return A, B


def _cwh_matrices(ts: float, altitude_km: float, mass_kg: float):
    radius = _EARTH_RADIUS_KM + altitude_km
    omega = math.sqrt(_EARTH_MU_KM3_S2 / radius**3)  # rad/s
    Ac = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [3.0 * omega**2, 0.0, 0.0, 2.0 * omega],
            [0.0, 0.0, -2.0 * omega, 0.0],
        ]
    )
    Bc = np.zeros((4, 2))
    Bc[2, 0] = 1.0 / mass_kg
    Bc[3, 1] = 1.0 / mass_kg
    # Exact discretization via the augmented matrix exponential.
    aug = np.zeros((6, 6))
    aug[:4, :4] = Ac
    aug[:4, 4:] = Bc
    E = scipy.linalg.expm(aug * ts)
    return E[:4, :4], E[:4, 4:]


def _nonholonomic_field(x, u):
    heading = x[..., 2]
    return np.stack(
        [u[..., 0] * np.cos(heading), u[..., 0] * np.sin(heading), u[..., 1]],
        axis=-1,
    )


def _tora_field(x, u):
    return np.stack(
        [
            x[..., 1],
            -x[..., 0] + 0.1 * np.sin(x[..., 2]),
            x[..., 3],
            u[..., 0],
        ],
        axis=-1,
    )


_NAME_RE = re.compile(r"^integrator\((\d+)\)$")
_VALID_NAMES = "integrator(n), cwh, nonholonomic, tora"


def make_system(name: str, **params) -> SystemSpec:
    """Construct a benchmark system by name with documented defaults.

    Recognized names: ``integrator(n)`` (or ``integrator`` with ``n=...``),
    ``cwh``, ``nonholonomic``, ``tora``.  Optional params: ``ts`` (sampling
    time), ``noise`` (scalar -> c*I, vector -> diagonal, or full matrix),
    plus ``n`` for the integrator and ``orbit_altitude_km`` /
    ``spacecraft_mass_kg`` for cwh.
    """
    base = name
    m = _NAME_RE.match(name.replace(" ", ""))
    if m is not None:
        base = "integrator"
        params.setdefault("n", int(m.group(1)))

    def take(key, default):
        return params.pop(key, default)

    if base == "integrator":
        n = int(take("n", 2))
        if n < 1:
            raise ValueError("integrator order must be >= 1")
        ts = float(take("ts", 0.25))
        noise = _noise_from(take("noise", 0.01), n)
        A, B = _integrator_matrices(n, ts)
        spec = SystemSpec(
            name=f"integrator({n})",
            state_dim=n,
            action_dim=1,
            sampling_time=ts,
            noise=noise,
            A=A,
            B=B,
            action_lower=np.array([-1.0]),
            action_upper=np.array([1.0]),
        )
    elif base == "cwh":
        ts = float(take("ts", 20.0))
        altitude = float(take("orbit_altitude_km", CWH_ORBIT_ALTITUDE_KM))
        mass = float(take("spacecraft_mass_kg", CWH_SPACECRAFT_MASS_KG))
        default_cov = np.diag([1e-4, 1e-4, 5e-8, 5e-8])
        noise = _noise_from(take("noise", default_cov), 4)
        A, B = _cwh_matrices(ts, altitude, mass)
        spec = SystemSpec(
            name="cwh",
            state_dim=4,
            action_dim=2,
            sampling_time=ts,
            noise=noise,
            A=A,
            B=B,
            action_lower=np.array([-0.1, -0.1]),
            action_upper=np.array([0.1, 0.1]),
        )
    elif base == "nonholonomic":
        ts = float(take("ts", 0.25))
        noise = _noise_from(take("noise", 0.01), 3)
        spec = SystemSpec(
            name="nonholonomic",
            state_dim=3,
            action_dim=2,
            sampling_time=ts,
            noise=noise,
            vector_field=_nonholonomic_field,
            action_lower=np.array([0.1, -10.0]),
            action_upper=np.array([1.0, 10.0]),
        )
    elif base == "tora":
        ts = float(take("ts", 0.1))
        noise = _noise_from(take("noise", 0.01), 4)
        spec = SystemSpec(
            name="tora",
            state_dim=4,
            action_dim=1,
            sampling_time=ts,
            noise=noise,
            vector_field=_tora_field,
            action_lower=np.array([-1.0]),
            action_upper=np.array([1.0]),
        )
    else:
        raise ValueError(f"unknown system {name!r}; valid names: {_VALID_NAMES}")

    if params:
        raise ValueError(f"invalid parameter(s) for {base}: {sorted(params)}")
    return spec


def integrate_zoh(vector_field, x, u, dt: float, substeps: int = RK4_SUBSTEPS):
    """Integrate dx/dt = vector_field(x, u) over [0, dt] with u held constant.

    Classical RK4 with ``substeps`` fixed steps; broadcasts over leading
    batch axes of x and u.
    """
    h = dt / substeps
    y = np.asarray(x, dtype=float)
    for _ in range(substeps):
        k1 = vector_field(y, u)
        k2 = vector_field(y + 0.5 * h * k1, u)
        k3 = vector_field(y + 0.5 * h * k2, u)
        k4 = vector_field(y + h * k3, u)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def step_batch(sys: SystemSpec, X, U, rng) -> np.ndarray:
    """One discrete step for a batch of states/actions, one noise draw each."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    if X.ndim != 2 or U.ndim != 2 or X.shape[0] != U.shape[0]:
        raise ValueError("X and U must be matching 2-D batches")
    if X.shape[1] != sys.state_dim or U.shape[1] != sys.action_dim:
        raise ValueError(
            f"dimension mismatch: states {X.shape[1]}x, actions {U.shape[1]}x "
            f"vs system ({sys.state_dim}, {sys.action_dim})"
        )
    if not (np.isfinite(X).all() and np.isfinite(U).all()):
        raise ValueError("non-finite state or action")
    if sys.is_lti:
        Y = X @ sys.A.T + U @ sys.B.T
    else:
        Y = integrate_zoh(sys.vector_field, X, U, sys.sampling_time, sys.rk4_substeps)
    return Y + sys.noise.draw(X.shape[0], rng)


def step(sys: SystemSpec, x, u, rng) -> np.ndarray:
    """One discrete step from a single state under a held action."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return step_batch(sys, x[None, :], u[None, :], rng)[0]


def simulate(sys: SystemSpec, x0, policy, N: int, rng) -> Trajectory:
    """Roll the system forward N steps under policy(t, state) -> action."""
    if N < 1:
        raise ValueError("horizon must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    states = np.empty((N + 1, sys.state_dim))
    actions = np.empty((N, sys.action_dim))
    states[0] = x0
    for t in range(N):
        u = np.atleast_1d(np.asarray(policy(t, states[t]), dtype=float))
        actions[t] = u
        states[t + 1] = step(sys, states[t], u, rng)
    return Trajectory(states=states, actions=actions)


def tora_default_policy(t, x):
    """Saturating state feedback used as the stand-in TORA controller."""
    return np.array([np.clip(-0.1 * x[3] - 0.1 * x[2], -1.0, 1.0)])
