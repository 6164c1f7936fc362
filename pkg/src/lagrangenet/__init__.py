"""Saddle-point learning of feedforward networks in the Lagrangian adjoint space."""
from .core import ActivationKind, Network, Neuron, activation_eval, build_mlp, forward, predict
from .lagrangian import (
    AdjointState, BlockGradients, LossKind, block_gradients, constraint_residual,
    eps_insensitive_residual, finite_diff_gradient, lagrangian_value,
)
from .backprop import AdjointSolution, backprop_gradient, solve_adjoint, verify_bp_equivalence
from .optimizer import (
    DivergenceError, Method, SaddleConfig, TrainTrace, gda_step, init_state, locality_audit, train,
)
from .support import SupportReport, prune, support_report
from .data import Dataset, gen_two_moons, gen_xor, load_csv, save_csv

__version__ = "0.1.0"
