"""Model-reference adaptive LQR simulation library.

Continuous-time adaptive optimal control of linear plants with an
uncertain state matrix: a swapping-filter identifier estimates the plant
inside a known uncertainty ball, a scaled Riccati flow tracks the value
matrix of the current estimate, and a reference-model adaptation loop
closes the gap to the frozen-time optimal feedback.  Ships with a doubly fed
induction machine model, drift schedules, excitation tooling, and a CSV
experiment CLI.
"""

from .actor import ActorState, adaptive_flow, control_law, matching_gain_oracle, refmodel_flow
from .critic import CriticState, UncertaintySpec, identifier_flow, prediction_error, proj_ball, swap_flow, value_flow
from .dither import DitherSpec, dither_eval, pe_margin, richness_check
from .errors import (
    ConfigError,
    ConvergenceError,
    DivergenceError,
    MatchingError,
    MrarlError,
    NotPsdError,
    SingularMatrixError,
    WindowError,
)
from .plant import DfimParams, DfimPlant, DriftSchedule, LtiPlant, dfim_matrices, drifted_params
from .riccati import CareSolution, care_map_sampler, care_residual, dre_flow, solve_care
from .sim import (
    AssumptionReport,
    KstarReference,
    SimConfig,
    Trajectory,
    count_violations,
    p_gap_series,
    run,
    step,
    validate_assumptions,
)
from .config import list_presets, load_config, load_preset, loads

__version__ = "0.1.0"
