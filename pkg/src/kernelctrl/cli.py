"""Command-line front end: scenario configs in, CSV data out.

Subcommands::

    kernelctrl sample        --config cfg.yaml [--seed S] [--out DIR]
    kernelctrl control       --config cfg.yaml ...
    kernelctrl reach         --config cfg.yaml [--validate K] ...
    kernelctrl forward-reach --config cfg.yaml ...
    kernelctrl validate      --config cfg.yaml [--validate K] ...
    kernelctrl bench         --config cfg.yaml ...

Configs are YAML (JSON works too).  All randomness is derived from a single
seed, so every command rewrites byte-identical data files on the same
machine (wall-clock timing columns excepted).  Exit codes: 0 success,
2 config error, 3 runtime/numerical error, 4 infeasible constraint LP.

Set KERNELCTRL_THREADS to cap BLAS parallelism.
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
import time

import numpy as np
import yaml

from . import embedding as emb_mod
from .control import (
    CostSpec,
    InfeasibleConstraintsError,
    act_backward,
    act_forward,
    fit_backward,
    forward_controller,
)
from .embedding import CholeskyError, TransitionSample
from .kernels import ABEL, GAUSSIAN, KernelSpec
from .reach import (
    FHT,
    THT,
    Tube,
    classify,
    constant_tube,
    fit_sr,
    fit_support,
    greedy_policy,
    indicator_values,
    predict_safety,
)
from .sampling import (
    ActionGrid,
    Box,
    SeededRng,
    draw_trajectories,
    draw_transitions,
    grid_actions,
    uniform_box,
)
from .systems import make_system, simulate, tora_default_policy
from .validate import mc_safety

ALGORITHMS = ("control-fwd", "control-bwd", "reach-tht", "reach-fht", "forward-reach")

# Fixed substream indices so each stage of a run draws independently.
STREAM_SAMPLE = 0
STREAM_ROLLOUT = 1
STREAM_MC = 2
STREAM_HELDOUT = 3
STREAM_SIGMA = 4
STREAM_POINTS = 5

MAX_GRID_POINTS = 1_000_000


class ConfigError(Exception):
    """Invalid scenario configuration; message names the offending key."""


# ---------------------------------------------------------------------------
# config access helpers

def _get(cfg: dict, key: str, path: str, required=True, default=None):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    if key not in cfg or cfg[key] is None:
        if required:
            full = f"{path}.{key}" if path else key
            raise ConfigError(f"{full}: missing required key")
        return default
    return cfg[key]


def _number(value, path: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a number, got {value!r}")


def _int(value, path: str) -> int:
    n = _number(value, path)
    if n != int(n):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return int(n)


def _vector(value, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a list of numbers")
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"{path}: expected a non-empty flat list of numbers")
    return arr


def _box(value, path: str, dim=None) -> Box:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping with 'lower' and 'upper'")
    lower = _vector(_get(value, "lower", path), f"{path}.lower")
    upper = _vector(_get(value, "upper", path), f"{path}.upper")
    try:
        box = Box(lower, upper)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}")
    if dim is not None and box.dim != dim:
        raise ConfigError(f"{path}: box dimension {box.dim} != expected {dim}")
    return box


def _tube(value, path: str, N: int, dim: int) -> Tube:
    if isinstance(value, dict):
        return constant_tube(_box(value, path, dim), N)
    if isinstance(value, list):
        if len(value) < N + 1:
            raise ConfigError(f"{path}: tube needs at least N+1 = {N + 1} boxes, got {len(value)}")
        return Tube(tuple(_box(b, f"{path}[{i}]", dim) for i, b in enumerate(value)))
    raise ConfigError(f"{path}: expected a box or a list of boxes")


# ---------------------------------------------------------------------------
# scenario assembly

class Scenario:
    """Validated config plus derived objects, built lazily per command."""

    def __init__(self, cfg: dict, args):
        if not isinstance(cfg, dict):
            raise ConfigError("top level: expected a mapping")
        self.cfg = cfg
        self.args = args
        self.seed = args.seed if args.seed is not None else _int(cfg.get("seed", 0), "seed")
        self.chunk = args.chunk if args.chunk is not None else _int(cfg.get("chunk", 1024), "chunk")
        if self.chunk < 1:
            raise ConfigError("chunk: must be >= 1")
        self.root = SeededRng(self.seed)
        out = cfg.get("output") or {}
        self.prefix = str(out.get("prefix", "")) if isinstance(out, dict) else ""
        if self.prefix:
            self.prefix += "_"

    # -- system ------------------------------------------------------------
    def system(self):
        sec = _get(self.cfg, "system", "")
        name = str(_get(sec, "name", "system"))
        params = {}
        for key in ("ts", "n", "orbit_altitude_km", "spacecraft_mass_kg", "noise"):
            if sec.get(key) is not None:
                params[key] = sec[key]
        try:
            return make_system(name, **params)
        except ValueError as e:
            raise ConfigError(f"system: {e}")

    # -- sample ------------------------------------------------------------
    def sample_cfg(self):
        return _get(self.cfg, "sample", "")

    def sample(self, sys):
        sec = self.sample_cfg()
        path = sec.get("path")
        if path:
            sample = read_sample(path)
            if sample.state_dim != sys.state_dim or sample.action_dim != sys.action_dim:
                raise ConfigError(
                    f"sample.path: file dims ({sample.state_dim}, {sample.action_dim}) "
                    f"do not match system ({sys.state_dim}, {sys.action_dim})"
                )
            return sample
        M = _int(_get(sec, "m", "sample"), "sample.m")
        if M < 1:
            raise ConfigError("sample.m: must be >= 1")
        state_box = _box(_get(sec, "state_box", "sample"), "sample.state_box", sys.state_dim)
        action_box = _box(_get(sec, "action_box", "sample"), "sample.action_box", sys.action_dim)
        return draw_transitions(sys, state_box, action_box, M, self.root.substream(STREAM_SAMPLE))

    # -- kernel ------------------------------------------------------------
    def kernels(self, sample):
        sec = _get(self.cfg, "kernel", "")
        family = str(sec.get("family", "gaussian")).lower()
        if family not in (GAUSSIAN, ABEL):
            raise ConfigError(f"kernel.family: unknown family {family!r}")
        sigma_arg = self.args.sigma if getattr(self.args, "sigma", None) else sec.get("sigma")
        if sigma_arg is None:
            raise ConfigError("kernel.sigma: missing required key")
        if isinstance(sigma_arg, str) and sigma_arg.lower() == "median":
            sigma = median_pairwise_distance(sample.X, self.root.substream(STREAM_SIGMA))
        else:
            sigma = _number(sigma_arg, "kernel.sigma")
        if sigma <= 0:
            raise ConfigError(f"kernel.sigma: must be positive, got {sigma}")
        lam = sec.get("lam")
        lam = _number(lam, "kernel.lam") if lam is not None else None
        return KernelSpec(family, sigma), lam

    def fit_embedding(self, sample):
        spec, lam = self.kernels(sample)
        return emb_mod.fit(sample, spec, lam=lam)

    # -- actions -----------------------------------------------------------
    def action_grid(self, sys) -> ActionGrid:
        sec = self.cfg.get("actions") or {}
        per_dim = _int(sec.get("per_dim", 5), "actions.per_dim")
        if per_dim < 1:
            raise ConfigError("actions.per_dim: must be >= 1")
        if sec.get("box") is not None:
            box = _box(sec["box"], "actions.box", sys.action_dim)
        elif sys.action_lower is not None:
            box = Box(sys.action_lower, sys.action_upper)
        else:
            raise ConfigError("actions.box: missing and system declares no action bounds")
        return grid_actions(box, per_dim)

    # -- horizon / tubes / costs -------------------------------------------
    def horizon(self) -> int:
        N = _int(_get(self.cfg, "horizon", ""), "horizon")
        if N < 1:
            raise ConfigError(f"horizon: must be >= 1, got {N}")
        return N

    def tubes(self, N: int, dim: int):
        sec = _get(self.cfg, "tubes", "")
        safe = _tube(_get(sec, "safe", "tubes"), "tubes.safe", N, dim)
        target = _tube(_get(sec, "target", "tubes"), "tubes.target", N, dim)
        return safe, target

    def costs(self, sys, N: int):
        sec = _get(self.cfg, "cost", "")
        kind = str(_get(sec, "type", "cost"))
        coords = sec.get("coords")
        if coords is not None:
            coords = [_int(c, "cost.coords") for c in coords]
            if any(c < 0 or c >= sys.state_dim for c in coords):
                raise ConfigError(f"cost.coords: indices must lie in [0, {sys.state_dim})")
        action_weight = _number(sec.get("action_weight", 0.0), "cost.action_weight")

        if kind == "quadratic":
            coords = coords if coords is not None else list(range(sys.state_dim))
            target = _vector(_get(sec, "target", "cost"), "cost.target")
            if target.shape[0] != len(coords):
                raise ConfigError(
                    f"cost.target: length {target.shape[0]} != number of coords {len(coords)}"
                )

            def state_cost(t, Y):
                return ((np.asarray(Y)[:, coords] - target) ** 2).sum(axis=1)

            reference = lambda t: target
        elif kind == "tracking":
            coords = coords if coords is not None else [0, 1]
            wps = _get(sec, "waypoints", "cost")
            wps = np.asarray(wps, dtype=float)
            if wps.ndim != 2 or wps.shape[0] < N + 1 or wps.shape[1] != len(coords):
                raise ConfigError(
                    f"cost.waypoints: expected at least (N+1) x {len(coords)} = "
                    f"{N + 1} x {len(coords)} numbers"
                )

            def state_cost(t, Y):
                wp = wps[min(int(t), wps.shape[0] - 1)]
                return ((np.asarray(Y)[:, coords] - wp) ** 2).sum(axis=1)

            reference = lambda t: wps[min(int(t), wps.shape[0] - 1)]
        else:
            raise ConfigError(f"cost.type: unknown type {kind!r}")

        def action_cost(t, A):
            A = np.asarray(A, dtype=float)
            return action_weight * (A**2).sum(axis=1)

        specs = [CostSpec(state_cost=state_cost, action_cost=action_cost)]
        rows = []
        for i, c in enumerate(self.cfg.get("constraints") or []):
            p = f"constraints[{i}]"
            if str(_get(c, "type", p)) != "linear_state":
                raise ConfigError(f"{p}.type: only 'linear_state' is supported")
            a = _vector(_get(c, "a", p), f"{p}.a")
            if a.shape[0] != sys.state_dim:
                raise ConfigError(f"{p}.a: length {a.shape[0]} != state dim {sys.state_dim}")
            b = _number(c.get("b", 0.0), f"{p}.b")
            rows.append((a, b))
            specs.append(
                CostSpec(
                    state_cost=lambda t, Y, a=a, b=b: np.asarray(Y) @ a + b,
                    action_cost=lambda t, A: np.zeros(np.asarray(A).shape[0]),
                )
            )
        return specs, coords, reference, rows

    def initial_state(self, sys) -> np.ndarray:
        x0 = _vector(_get(self.cfg, "initial_state", ""), "initial_state")
        if x0.shape[0] != sys.state_dim:
            raise ConfigError(
                f"initial_state: length {x0.shape[0]} != state dim {sys.state_dim}"
            )
        return x0

    def algorithm(self) -> str:
        alg = str(_get(self.cfg, "algorithm", ""))
        if alg not in ALGORITHMS:
            raise ConfigError(f"algorithm: {alg!r} not one of {ALGORITHMS}")
        return alg

    def out_path(self, name: str) -> str:
        return os.path.join(self.args.out, self.prefix + name)


def median_pairwise_distance(X: np.ndarray, rng: SeededRng, subsample: int = 500) -> float:
    """Median pairwise distance of (a subsample of) the states; a documented
    convenience heuristic for picking the kernel bandwidth."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] > subsample:
        idx = rng.generator.choice(X.shape[0], size=subsample, replace=False)
        X = X[idx]
    diff = X[:, None, :] - X[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    vals = d[np.triu_indices(X.shape[0], k=1)]
    vals = vals[vals > 0]
    if vals.size == 0:
        raise ConfigError("kernel.sigma: median heuristic failed (all states identical)")
    return float(np.median(vals))


# ---------------------------------------------------------------------------
# file I/O

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: str, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else _fmt(c) for c in row) + "\n")


def write_sample(path: str, sample: TransitionSample):
    n, m = sample.state_dim, sample.action_dim
    header = (
        [f"x{i}" for i in range(n)]
        + [f"u{i}" for i in range(m)]
        + [f"y{i}" for i in range(n)]
    )
    rows = np.hstack([sample.X, sample.U, sample.Y])
    write_csv(path, header, rows)


def read_sample(path: str) -> TransitionSample:
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as e:
        raise ConfigError(f"sample.path: cannot read {path}: {e}")
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("u"))
    ny = sum(1 for h in header if h.startswith("y"))
    if n == 0 or ny != n or n + m + ny != len(header) or data.shape[1] != len(header):
        raise ConfigError(f"sample.path: malformed header in {path}")
    return TransitionSample(X=data[:, :n], U=data[:, n : n + m], Y=data[:, n + m :])


def _linspace_grid(box: Box, per_dim: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(box.lower, box.upper)]
    if per_dim**box.dim > MAX_GRID_POINTS:
        raise ConfigError(
            f"eval_grid: {per_dim}^{box.dim} points exceeds the {MAX_GRID_POINTS} cap"
        )
    return np.array(list(itertools.product(*axes)))


# ---------------------------------------------------------------------------
# commands

def cmd_sample(scn: Scenario) -> int:
    sys_ = scn.system()
    sample = scn.sample(sys_)
    path = scn.out_path("sample.csv")
    write_sample(path, sample)
    print(f"wrote {len(sample)} transitions to {path}")
    return 0


def _violations(rows, states) -> int:
    count = 0
    for t in range(states.shape[0]):
        for a, b in rows:
            if states[t] @ a + b > 1e-9:
                count += 1
                break
    return count


def cmd_control(scn: Scenario) -> int:
    sys_ = scn.system()
    N = scn.horizon()
    alg = scn.algorithm()
    if alg not in ("control-fwd", "control-bwd"):
        raise ConfigError(f"algorithm: cmd control needs control-fwd/control-bwd, got {alg!r}")
    sample = scn.sample(sys_)
    emb = scn.fit_embedding(sample)
    grid = scn.action_grid(sys_)
    costs, coords, reference, cons_rows = scn.costs(sys_, N)
    x0 = scn.initial_state(sys_)

    t0 = time.perf_counter()
    if alg == "control-bwd":
        ctrl = fit_backward(emb, grid, costs, N)
        act = act_backward
    else:
        ctrl = forward_controller(emb, grid, costs)
        act = act_forward
    fit_seconds = time.perf_counter() - t0

    act_seconds = 0.0

    def policy(t, x):
        nonlocal act_seconds
        ta = time.perf_counter()
        u = act(ctrl, x, t)
        act_seconds += time.perf_counter() - ta
        return u

    traj = simulate(sys_, x0, policy, N, scn.root.substream(STREAM_ROLLOUT))

    header = ["t"] + [f"x{i}" for i in range(sys_.state_dim)] + [
        f"u{i}" for i in range(sys_.action_dim)
    ]
    rows = []
    for t in range(N + 1):
        u = traj.actions[t] if t < N else [math.nan] * sys_.action_dim
        rows.append([str(t)] + [_fmt(v) for v in traj.states[t]] + [_fmt(v) for v in u])
    traj_path = scn.out_path("trajectory.csv")
    write_csv(traj_path, header, rows)

    terminal = float(np.linalg.norm(traj.states[N][coords] - reference(N)))
    summary_path = scn.out_path("summary.csv")
    write_csv(
        summary_path,
        ["algorithm", "horizon", "terminal_distance", "constraint_violations",
         "fit_seconds", "act_seconds"],
        [[alg, str(N), _fmt(terminal), str(_violations(cons_rows, traj.states)),
          _fmt(fit_seconds), _fmt(act_seconds)]],
    )
    print(f"wrote {traj_path} and {summary_path} (terminal distance {terminal:.4f})")
    return 0


def _fit_reach_model(scn: Scenario, sys_):
    N = scn.horizon()
    alg = scn.algorithm()
    if alg not in ("reach-tht", "reach-fht"):
        raise ConfigError(f"algorithm: expected reach-tht/reach-fht, got {alg!r}")
    sample = scn.sample(sys_)
    emb = scn.fit_embedding(sample)
    grid = scn.action_grid(sys_)
    safe, target = scn.tubes(N, sys_.state_dim)
    problem = THT if alg == "reach-tht" else FHT
    model = fit_sr(emb, grid, safe, target, N, problem)
    return model, safe, target, N


def _interior_points(scn: Scenario, safe_box: Box, count: int) -> np.ndarray:
    inner = safe_box.scaled(0.8)
    per_dim = round(count ** (1.0 / inner.dim))
    if per_dim**inner.dim == count and per_dim >= 2:
        return _linspace_grid(inner, per_dim)
    return uniform_box(inner, count, scn.root.substream(STREAM_POINTS))


def _run_mc_validation(scn: Scenario, sys_, model, safe, target, N, points, trials):
    policy = greedy_policy(model)
    preds = predict_safety(model, points, max_chunk=scn.chunk)
    rows = []
    mc_rng = scn.root.substream(STREAM_MC)
    for i, (x, p) in enumerate(zip(points, preds)):
        rep = mc_safety(sys_, policy, x, safe, target, N, model.problem, trials, mc_rng.substream(i))
        rows.append(list(x) + [p, rep.estimate, rep.half_width, abs(p - rep.estimate)])
    header = [f"x{i}" for i in range(points.shape[1])] + [
        "prob", "mc_estimate", "mc_half_width", "abs_error"]
    return header, rows


def cmd_reach(scn: Scenario) -> int:
    sys_ = scn.system()
    model, safe, target, N = _fit_reach_model(scn, sys_)

    grid_sec = scn.cfg.get("eval_grid") or {}
    per_dim = _int(grid_sec.get("per_dim", 100), "eval_grid.per_dim")
    box = (
        _box(grid_sec["box"], "eval_grid.box", sys_.state_dim)
        if grid_sec.get("box") is not None
        else safe[0]
    )
    pts = _linspace_grid(box, per_dim)
    probs = predict_safety(model, pts, max_chunk=scn.chunk)

    header = [f"x{i}" for i in range(sys_.state_dim)] + ["prob"]
    path = scn.out_path("probs.csv")
    write_csv(path, header, np.hstack([pts, probs[:, None]]))
    print(f"wrote {probs.shape[0]} grid probabilities to {path}")

    if scn.args.validate:
        vsec = scn.cfg.get("validate") or {}
        count = _int(vsec.get("points", 25), "validate.points")
        points = _interior_points(scn, safe[0], count)
        vh, vrows = _run_mc_validation(
            scn, sys_, model, safe, target, N, points, scn.args.validate
        )
        vpath = scn.out_path("mc_validation.csv")
        write_csv(vpath, vh, vrows)
        worst = max(r[-1] for r in vrows)
        print(f"wrote MC validation to {vpath} (max abs error {worst:.4f})")
    return 0


def cmd_validate(scn: Scenario) -> int:
    sys_ = scn.system()
    model, safe, target, N = _fit_reach_model(scn, sys_)
    vsec = scn.cfg.get("validate") or {}
    count = _int(vsec.get("points", 25), "validate.points")
    trials = scn.args.validate or _int(vsec.get("trials", 2000), "validate.trials")
    points = _interior_points(scn, safe[0], count)
    header, rows = _run_mc_validation(scn, sys_, model, safe, target, N, points, trials)
    path = scn.out_path("mc_validation.csv")
    write_csv(path, header, rows)
    worst = max(r[-1] for r in rows)
    print(f"wrote MC validation to {path} (max abs error {worst:.4f})")
    return 0


def _trajectory_policy(scn: Scenario, sys_):
    sec = _get(scn.cfg, "trajectories", "")
    name = str(sec.get("policy", "tora-default" if sys_.name == "tora" else "zero"))
    if name == "tora-default":
        return tora_default_policy
    if name == "zero":
        return lambda t, x: np.zeros(sys_.action_dim)
    raise ConfigError(f"trajectories.policy: unknown policy {name!r}")


def cmd_forward_reach(scn: Scenario) -> int:
    sys_ = scn.system()
    if scn.algorithm() != "forward-reach":
        raise ConfigError("algorithm: cmd forward-reach needs algorithm forward-reach")
    N = scn.horizon()
    sec = _get(scn.cfg, "trajectories", "")
    M = _int(_get(sec, "m", "trajectories"), "trajectories.m")
    if M < 1:
        raise ConfigError("trajectories.m: must be >= 1")
    init_box = _box(_get(sec, "init_box", "trajectories"), "trajectories.init_box", sys_.state_dim)
    policy = _trajectory_policy(scn, sys_)

    kernel_sec = _get(scn.cfg, "kernel", "")
    sigma = _number(_get(kernel_sec, "sigma", "kernel"), "kernel.sigma")
    lam = kernel_sec.get("lam")
    lam = _number(lam, "kernel.lam") if lam is not None else 1.0 / M

    trajs = draw_trajectories(sys_, init_box, policy, N, M, scn.root.substream(STREAM_ROLLOUT))
    held = draw_trajectories(sys_, init_box, policy, N, M, scn.root.substream(STREAM_HELDOUT))

    axes = scn.cfg.get("project_axes", [0, 1])
    axes = [_int(a, "project_axes") for a in axes]
    if len(axes) != 2 or any(a < 0 or a >= sys_.state_dim for a in axes):
        raise ConfigError(f"project_axes: need two indices in [0, {sys_.state_dim})")
    grid_sec = scn.cfg.get("eval_grid") or {}
    per_dim = _int(grid_sec.get("per_dim", 25), "eval_grid.per_dim")

    tau_rows, score_rows = [], []
    for t in range(1, N + 1):
        pts = np.array([tr.states[t] for tr in trajs])
        cls = fit_support(pts, sigma=sigma, lam=lam)
        fresh = np.array([tr.states[t] for tr in held])
        inside = sum(classify(cls, p)[1] for p in fresh) / M
        tau_rows.append([str(t), _fmt(cls.tau), _fmt(inside)])

        lo, hi = pts[:, axes].min(axis=0), pts[:, axes].max(axis=0)
        pad = 0.25 * np.maximum(hi - lo, 1e-3)
        plane = _linspace_grid(Box(lo - pad, hi + pad), per_dim)
        query = np.tile(pts.mean(axis=0), (plane.shape[0], 1))
        query[:, axes] = plane
        for row, q in zip(plane, query):
            score, ins = classify(cls, q)
            score_rows.append([str(t), _fmt(row[0]), _fmt(row[1]), _fmt(score), str(int(ins))])

    taus_path = scn.out_path("taus.csv")
    write_csv(taus_path, ["t", "tau", "heldout_in_fraction"], tau_rows)
    scores_path = scn.out_path("scores.csv")
    write_csv(scores_path, ["t", f"x{axes[0]}", f"x{axes[1]}", "score", "inside"], score_rows)

    mean_inside = float(np.mean([float(r[2]) for r in tau_rows]))
    flag = "PASS" if mean_inside >= 0.9 else "LOW"
    print(
        f"wrote {taus_path} and {scores_path}; held-out containment "
        f"{mean_inside:.3f} averaged over t [{flag}]"
    )
    return 0


def _bench_once(scn: Scenario, sys_, M: int, seed_rng: SeededRng, algorithm: str, N: int):
    sec = scn.sample_cfg()
    state_box = _box(_get(sec, "state_box", "sample"), "sample.state_box", sys_.state_dim)
    action_box = _box(_get(sec, "action_box", "sample"), "sample.action_box", sys_.action_dim)
    sample = draw_transitions(sys_, state_box, action_box, M, seed_rng)
    spec, lam = scn.kernels(sample)
    grid = scn.action_grid(sys_)

    t0 = time.perf_counter()
    emb = emb_mod.fit(sample, spec, lam=lam)
    if algorithm == "fit":
        pass
    elif algorithm == "control-fwd":
        ctrl = forward_controller(emb, grid, _bench_cost())
        act_forward(ctrl, state_box.center, 0)
    elif algorithm == "control-bwd":
        fit_backward(emb, grid, _bench_cost(), N)
    elif algorithm == "reach-tht":
        safe = constant_tube(state_box, N)
        target = constant_tube(state_box.scaled(0.5), N)
        fit_sr(emb, grid, safe, target, N, THT)
    else:
        raise ConfigError(f"bench.algorithm: unknown algorithm {algorithm!r}")
    return time.perf_counter() - t0


def _bench_cost():
    return [CostSpec(
        state_cost=lambda t, Y: (np.asarray(Y) ** 2).sum(axis=1),
        action_cost=lambda t, A: np.zeros(np.asarray(A).shape[0]),
    )]


def cmd_bench(scn: Scenario) -> int:
    sec = _get(scn.cfg, "bench", "")
    mode = str(_get(sec, "mode", "bench"))
    algorithm = str(sec.get("algorithm", "fit"))
    repeats = _int(sec.get("repeats", 3), "bench.repeats")
    N = _int(scn.cfg.get("horizon", 5), "horizon")
    rows = []
    if mode == "sample-size":
        sys_ = scn.system()
        m_list = [_int(m, "bench.m_list") for m in _get(sec, "m_list", "bench")]
        for M in m_list:
            for trial in range(repeats):
                secs = _bench_once(
                    scn, sys_, M, scn.root.substream(STREAM_SAMPLE).substream(trial),
                    algorithm, N,
                )
                rows.append([mode, algorithm, str(M), str(trial), _fmt(secs)])
    elif mode == "dimension":
        n_list = [_int(n, "bench.n_list") for n in _get(sec, "n_list", "bench")]
        m_fixed = _int(sec.get("m_fixed", 1000), "bench.m_fixed")
        for n in n_list:
            sys_ = make_system(f"integrator({n})")
            box = Box(-np.ones(n), np.ones(n))
            abox = Box([-1.0], [1.0])
            for trial in range(repeats):
                rng = scn.root.substream(STREAM_SAMPLE).substream(trial)
                sample = draw_transitions(sys_, box, abox, m_fixed, rng)
                spec, lam = scn.kernels(sample)
                t0 = time.perf_counter()
                emb_mod.fit(sample, spec, lam=lam)
                secs = time.perf_counter() - t0
                rows.append([mode, algorithm, str(n), str(trial), _fmt(secs)])
    else:
        raise ConfigError(f"bench.mode: expected sample-size or dimension, got {mode!r}")

    path = scn.out_path("bench.csv")
    write_csv(path, ["mode", "algorithm", "size", "trial", "seconds"], rows)
    print(f"wrote {len(rows)} timing rows to {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "sample": cmd_sample,
    "control": cmd_control,
    "reach": cmd_reach,
    "forward-reach": cmd_forward_reach,
    "validate": cmd_validate,
    "bench": cmd_bench,
}


def _apply_thread_cap():
    val = os.environ.get("KERNELCTRL_THREADS")
    if not val:
        return
    try:
        n = max(1, int(val))
    except ValueError:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelctrl",
        description="Data-driven stochastic optimal control and reachability from scenario configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario config (YAML)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--sigma", default=None,
                       help="override kernel bandwidth (number or 'median')")
        p.add_argument("--chunk", type=int, default=None, help="batch-evaluation chunk size")
        p.add_argument("--validate", type=int, default=None, metavar="K",
                       help="Monte-Carlo trials for validation columns")
    return parser


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config parse error in {path}: {e}")
    if cfg is None:
        raise ConfigError(f"config {path} is empty")
    return cfg


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        scn = Scenario(cfg, args)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](scn)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InfeasibleConstraintsError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 4
    except (CholeskyError, FloatingPointError, np.linalg.LinAlgError, ValueError, RuntimeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
