"""kernelctrl: data-driven stochastic optimal control and reachability.

Workflow: draw (or load) a transition sample from a system, fit a
conditional distribution embedding, then hand it to a controller
(forward-greedy or backward DP), a stochastic reachability model (THT/FHT),
or a forward reachable set classifier.  Monte-Carlo oracles validate the
estimates independently.
"""

from .embedding import (
    CholeskyError,
    Embedding,
    TransitionSample,
    beta,
    beta_batch,
    expectation,
    fit,
)
from .kernels import ABEL, GAUSSIAN, KernelSpec, eval_kernel, gram
from .lp import LPResult, SimplexLP, solve_lp
from .control import (
    Controller,
    CostSpec,
    InfeasibleConstraintsError,
    act_backward,
    act_forward,
    fit_backward,
    forward_controller,
    stage_matrices,
)
from .reach import (
    FHT,
    SRModel,
    SupportClassifier,
    THT,
    Tube,
    classify,
    constant_tube,
    fit_sr,
    fit_support,
    greedy_policy,
    indicator,
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
from .systems import (
    NoiseSpec,
    SystemSpec,
    Trajectory,
    integrate_zoh,
    make_system,
    simulate,
    step,
    tora_default_policy,
)
from .validate import McReport, linear_gaussian_mean, mc_safety

__version__ = "0.1.0"
