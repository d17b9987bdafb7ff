"""horolab: renormalized-ball ergodic averages, nilcharacters, and rate formulas."""

from .group_core import (
    DiagonalFlow,
    FolnerBall,
    HoroSubgroup,
    LieSplitting,
    bch,
    compute_dh,
    conj_by_flow,
    e13_line_sl3,
    elementary,
    folner_boundary_ratio,
    folner_membership,
    folner_sample,
    folner_volume,
    heisenberg_sl3,
    nil_exp,
    nil_log,
    sl2_horocycle,
    split_by_weights,
)
from .homspace import (
    HeisenbergPoint,
    ModularPoint,
    TestFunction,
    eval_test_function,
    flow_point,
    haar_sample_modular,
    inj_rad_lower_bound,
    reduce_heisenberg,
    reduce_modular,
)
from .nilchar import (
    NilCharacter,
    SampledSequence,
    bracket_closed_form,
    degree_probe,
    differentiate_sequence,
    heis_char_eval,
    orbit_character,
)
from .diophantine import (
    AlphaProfile,
    DiophSpec,
    ThetaBound,
    alpha_i,
    alpha_profile,
    in_x1_geq,
    in_x_geq,
    nondivergence_fraction,
    norm_form,
    norm_form_min,
    remez_check,
    theta_diophantine_check,
)
from .averages import (
    DecayReport,
    QuadratureSpec,
    VdcReport,
    coefficient_decay_fit,
    character_ball_average,
    decay_fit,
    decay_scan,
    discrete_average,
    key_lemma_check,
    matrix_coefficient,
    mean_ergodic_check,
    named_base_point,
    twisted_average,
    vdc_check,
)
from .rates import (
    COROLLARY_PARAMS,
    RateParams,
    corollary_gamma,
    default_dioph_exponent,
    gamma_chain,
    gamma_disjointness,
    gamma_equi_uniform,
    rate_report,
)

__version__ = "0.1.0"
