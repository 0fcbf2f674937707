"""Mixed-frequency synthetic control.

Aligns donor outcomes observed at the same, a lower, or a higher
frequency than the treated unit; jointly estimates simplex-constrained
unit weights and dictionary MIDAS aggregation coefficients via an exact
convex lift; produces counterfactuals, treatment effects, and
block-subsampling bootstrap confidence intervals; and ships a Monte
Carlo lab for the risk-ratio and interval-coverage experiments.
"""

from .errors import (
    ConfigError,
    DomainError,
    IllPosedError,
    MfscmError,
    PanelParseError,
    PanelValidationError,
    SampleSizeError,
)
from .estimator import (
    EffectSeries,
    FitConfig,
    FitResult,
    counterfactual,
    effects,
    fit,
    placebo_in_time,
)
from .inference import BlockRule, BootstrapConfig, CiResult, block_bootstrap_ci, sigma_v_hat
from .lowfreq import (
    ReconstructionModel,
    fit_low_freq_aggregate,
    fit_low_freq_point_sample,
    fit_low_freq_pooled,
    reconstruct_baseline,
)
from .midas import LagPolyBasis, MidasWeights, align_high_freq, basis_eval, build_midas_weights
from .optim import (
    AlignedDesign,
    DesignColumn,
    JointSolution,
    SimplexQP,
    build_lifted_problem,
    project_metric,
    project_simplex,
    solve_joint,
    solve_ols,
    solve_simplex_ls,
)
from .panel import (
    Higher,
    Lower,
    MixedPanel,
    Same,
    UnitSeries,
    load_panel,
    read_manifest,
    truncate_panel,
    validate_panel,
    write_panel,
)
from .simlab import (
    DgpConfig,
    ExperimentResult,
    coverage_experiment,
    gen_panel,
    make_dgp,
    oracle_midas_shapes,
    risk_ratio_experiment,
)

__version__ = "0.1.0"
