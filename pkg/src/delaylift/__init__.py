"""Stochastic boundary-control systems with input delay, via a product-space lift."""

__version__ = "0.1.0"

from .boundary import (
    BoundaryTriple,
    DirichletMap,
    Divergent,
    EstimateReport,
    control_map_phi,
    control_map_phi_ibp,
    dirichlet_map,
    f_operator,
    observation_map_psi,
    probe_control_admissibility,
    probe_observation_admissibility,
    regularity_limit,
    transfer_decay,
    yosida_apply,
)
from .delay import (
    DelayMeasure,
    HistorySegment,
    delay_functional,
    e_lambda,
    history_cocycle_check,
    phi_shift,
    shift_apply,
)
from .errors import *  # noqa: F401,F403
from .lift import (
    LiftedState,
    LiftedSystem,
    lifted_control_map,
    lifted_dirichlet,
    lifted_observe,
    lifted_semigroup_apply,
)
from .noise import NoiseOp
from .sde import BrownianPath, MildTrajectory, brownian_path, mc_estimate, phi_W, simulate_mild
from .semigroup import Generator, OperatorMatrix, dual_norm, growth_bound, resolvent, semigroup_apply
from .systems import SystemSpec, make_heat, make_schrodinger, make_system, make_toy
from .verify import (
    VerificationResult,
    heat_exponent_check,
    method_of_steps_oracle,
    oracle_equivalence,
    regularity_suite,
    wellposedness_estimate,
)
