"""End-to-end estimation: align, fit weights, counterfactuals, effects.

The fitting sequence: reconstruct low-frequency donors on pre-treatment
data only, assemble the pre-treatment design (outcomes stacked over
scaled covariate rows), solve the lifted joint problem for unit weights
and dictionary MIDAS coefficients, then evaluate counterfactuals and
per-period treatment effects on the post-treatment window with the
reconstruction models and aggregation coefficients frozen at their
fitted values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MfscmError, PanelValidationError
from .lowfreq import (
    ReconstructionModel,
    fit_low_freq_aggregate,
    fit_low_freq_point_sample,
    reconstruct_baseline,
)
from .midas import LagPolyBasis, MidasWeights, build_midas_weights
from .optim import AlignedDesign, DesignColumn, build_lifted_problem, solve_joint
from .panel import AGGREGATE, Higher, Lower, MixedPanel, Same, truncate_panel

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FitConfig:
    """Estimation settings; defaults match the library-wide conventions."""

    P: int = 1  # covariate lag order in reconstructions (lags 0..P)
    L: int = 3  # dictionary degree
    nonneg_midas: bool = True  # keep every per-lag weight nonnegative
    covariate_scale: float | None = None  # default 1/sqrt(T0)
    tol: float = 1e-10
    max_iter: int = 50000
    als_tol: float = 1e-8
    als_max_iter: int = 200
    nonneg_agg_weights: bool = False
    zeta_threshold: float = 1e-8
    allow_rank_deficient: bool = False
    uniform_midas: bool = False  # restrict higher-frequency donors to equal lag weights

    @classmethod
    def from_manifest(cls, doc: dict) -> "FitConfig":
        solver = doc.get("solver", {})
        kwargs = {}
        for key in ("P", "L", "nonneg_midas", "uniform_midas", "covariate_scale"):
            if key in doc:
                kwargs[key] = doc[key]
        for key in ("tol", "max_iter", "als_tol", "als_max_iter"):
            if key in solver:
                kwargs[key] = solver[key]
        return cls(**kwargs)


@dataclass
class FitResult:
    """Fitted weights, aggregation coefficients, reconstructions, diagnostics."""

    weights: dict[str, float]
    midas: dict[str, MidasWeights]
    recon_models: dict[str, ReconstructionModel]
    pre_mse: float
    objective: float
    diagnostics: list[str]
    donor_order: tuple[str, ...]
    config: FitConfig
    T0: int
    status: str
    degenerate_units: tuple[str, ...] = ()

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights[u] for u in self.donor_order])


@dataclass(frozen=True)
class EffectSeries:
    """Per-period treatment effects over the post-treatment window."""

    times: np.ndarray  # baseline periods T0+1..T
    effects: np.ndarray
    ate: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=int)
        e = np.asarray(self.effects, dtype=float)
        t.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "effects", e)


def _aligned_donor_column(
    donor, fit_midas: MidasWeights | None, recon: ReconstructionModel | None
) -> np.ndarray:
    """Baseline-frequency outcome path of one donor over its full horizon."""
    if isinstance(donor.freq, Same):
        return donor.outcomes
    if isinstance(donor.freq, Lower):
        return reconstruct_baseline(recon, donor)
    return donor.outcomes @ fit_midas.weights


def aligned_outcomes(fit: FitResult, panel: MixedPanel, times: np.ndarray) -> np.ndarray:
    """Matrix of aligned donor outcomes at the fitted coefficients.

    Row order follows ``times`` (1-based baseline periods); columns follow
    the panel's donor order. Reconstruction models and aggregation
    weights stay frozen at their fitted values.
    """
    times = np.asarray(times, dtype=int)
    if times.size and (times.min() < 1 or times.max() > panel.T):
        raise DomainError(f"requested periods outside 1..{panel.T}")
    cols = []
    for donor in panel.donors:
        col = _aligned_donor_column(
            donor, fit.midas.get(donor.unit_id), fit.recon_models.get(donor.unit_id)
        )
        cols.append(col[times - 1])
    return np.column_stack(cols)


def _covariate_rows(unit, T0: int, scale: float) -> np.ndarray:
    """Scaled pre-treatment covariates stacked covariate-by-covariate."""
    if unit.covariates is None:
        return np.empty(0)
    return scale * unit.covariates[:, :T0].reshape(-1)


def build_design(
    panel: MixedPanel,
    config: FitConfig = FitConfig(),
    recon_models: dict[str, ReconstructionModel] | None = None,
) -> tuple[AlignedDesign, dict[str, ReconstructionModel], list[str]]:
    """Pre-treatment aligned design, reconstruction models, and fit notes.

    Low-frequency donors are reconstructed on pre-treatment observations
    only; higher-frequency donors contribute per-lag blocks (or a fixed
    uniform aggregate under ``uniform_midas``). Covariate rows carry the
    configured scaling, by default 1/sqrt(T0). Passing ``recon_models``
    substitutes externally fitted reconstructions (e.g. pooled across
    units) for the per-unit default.
    """
    T0 = panel.T0
    cs = config.covariate_scale if config.covariate_scale is not None else 1.0 / np.sqrt(T0)

    notes: list[str] = []
    recon_models = dict(recon_models) if recon_models is not None else {}
    for idx in panel.groups()[1]:
        donor = panel.donors[idx]
        if donor.unit_id in recon_models:
            continue
        try:
            recon_models[donor.unit_id] = _fit_reconstruction(donor, config, T0)
        except MfscmError as exc:
            raise type(exc)(f"unit {donor.unit_id!r}: {exc}") from exc
        model = recon_models[donor.unit_id]
        if not model.converged:
            notes.append(
                f"reconstruction for {donor.unit_id!r} stopped at {model.n_iterations} iterations "
                "without meeting the tolerance"
            )
        if model.rank_deficient:
            notes.append(f"reconstruction for {donor.unit_id!r} used a rank-deficient design")
        if config.P > 0:
            notes.append(
                f"reconstruction for {donor.unit_id!r} backfills covariate lags before t=1"
            )

    columns = []
    uniform_cache: dict[int, np.ndarray] = {}
    for j, donor in enumerate(panel.donors):
        cov_rows = _covariate_rows(donor, T0, cs) if panel.Q > 0 else np.empty(0)
        if isinstance(donor.freq, Higher) and not config.uniform_midas:
            columns.append(
                DesignColumn(j, donor.outcomes[:T0], cov_rows, m=donor.freq.m)
            )
        elif isinstance(donor.freq, Higher):
            m = donor.freq.m
            u = uniform_cache.setdefault(m, np.full(m, 1.0 / m))
            columns.append(DesignColumn(j, donor.outcomes[:T0] @ u, cov_rows))
        else:
            col = _aligned_donor_column(donor, None, recon_models.get(donor.unit_id))
            columns.append(DesignColumn(j, col[:T0], cov_rows))

    z1 = np.concatenate(
        [panel.treated.outcomes[:T0], _covariate_rows(panel.treated, T0, cs) if panel.Q > 0 else np.empty(0)]
    )
    design = AlignedDesign(z1, tuple(columns), T0=T0, Q=panel.Q, covariate_scale=cs)
    return design, recon_models, notes


def fit(
    panel: MixedPanel,
    config: FitConfig = FitConfig(),
    recon_models: dict[str, ReconstructionModel] | None = None,
) -> FitResult:
    """Estimate unit weights and aggregation coefficients on pre-treatment data."""
    diags = _validate_for_fit(panel)
    T0 = panel.T0
    basis = LagPolyBasis(config.L)
    design, recon_models, notes = build_design(panel, config, recon_models)
    qp = build_lifted_problem(design, basis, nonneg_midas=config.nonneg_midas)
    sol = solve_joint(qp, tol=config.tol, max_iter=config.max_iter, zeta_threshold=config.zeta_threshold)
    if sol.status != "converged":
        notes.append(
            f"weight solver stopped at max_iter={config.max_iter} with KKT residual {sol.kkt_residual:.2e}"
        )
    if sol.duplicate_columns:
        notes.append(
            "identical donor columns detected; weights within "
            f"groups {sol.duplicate_columns} are not unique"
        )

    weights = {u: float(w) for u, w in zip(panel.donor_ids, sol.w)}
    midas: dict[str, MidasWeights] = {}
    for blk_donor, zeta in sol.zeta.items():
        donor = panel.donors[blk_donor]
        midas[donor.unit_id] = MidasWeights(
            unit_id=donor.unit_id,
            m=donor.freq.m,
            zeta=zeta,
            weights=sol.lag_weights[blk_donor],
        )
    if config.uniform_midas:
        for idx in panel.groups()[2]:
            donor = panel.donors[idx]
            m = donor.freq.m
            midas[donor.unit_id] = build_midas_weights(
                basis.uniform_zeta(m), m, basis, unit_id=donor.unit_id
            )
    degenerate = tuple(panel.donor_ids[i] for i in sol.degenerate_units)
    if degenerate:
        notes.append(f"zero-weight higher-frequency units reported with uniform lag weights: {degenerate}")

    result = FitResult(
        weights=weights,
        midas=midas,
        recon_models=recon_models,
        pre_mse=float("nan"),
        objective=sol.objective,
        diagnostics=diags + notes,
        donor_order=panel.donor_ids,
        config=config,
        T0=T0,
        status=sol.status,
        degenerate_units=degenerate,
    )
    pre = aligned_outcomes(result, panel, np.arange(1, T0 + 1))
    resid = panel.treated.outcomes[:T0] - pre @ sol.w
    result.pre_mse = float(np.mean(resid**2))
    return result


def _validate_for_fit(panel: MixedPanel) -> list[str]:
    from .panel import validate_panel

    diags = validate_panel(panel)
    if diags:
        raise PanelValidationError(diags)
    if not panel.donors:
        raise DomainError("donor pool is empty")
    return []


def _fit_reconstruction(donor, config: FitConfig, T0: int) -> ReconstructionModel:
    if donor.freq.mode == AGGREGATE:
        return fit_low_freq_aggregate(
            donor,
            config.P,
            tol=config.als_tol,
            max_iter=config.als_max_iter,
            t_max=T0,
            nonneg_weights=config.nonneg_agg_weights,
            allow_rank_deficient=config.allow_rank_deficient,
        )
    return fit_low_freq_point_sample(
        donor, config.P, t_max=T0, allow_rank_deficient=config.allow_rank_deficient
    )


def counterfactual(fit_result: FitResult, panel: MixedPanel, times: np.ndarray) -> np.ndarray:
    """Weighted aligned-donor outcome path at the requested periods."""
    aligned = aligned_outcomes(fit_result, panel, np.asarray(times, dtype=int))
    return aligned @ fit_result.weight_vector()


def effects(fit_result: FitResult, panel: MixedPanel) -> EffectSeries:
    """Per-period effects Y_treated - counterfactual on the post-treatment window."""
    if panel.T1 < 1:
        raise DomainError("no post-treatment periods")
    times = np.arange(panel.T0 + 1, panel.T + 1)
    eff = panel.treated.outcomes[panel.T0 :] - counterfactual(fit_result, panel, times)
    return EffectSeries(times=times, effects=eff, ate=float(np.mean(eff)))


def placebo_in_time(
    panel: MixedPanel, pseudo_T0: int, config: FitConfig = FitConfig()
) -> tuple[FitResult, EffectSeries]:
    """Refit with a pseudo treatment date strictly before the true one.

    The panel is truncated to the true pre-treatment window, so post-
    treatment data never enters; pseudo-effects are evaluated on
    (pseudo_T0, T0].
    """
    if not 1 <= pseudo_T0 < panel.T0:
        raise DomainError(f"pseudo_T0 must lie in 1..{panel.T0 - 1}, got {pseudo_T0}")
    sub = truncate_panel(panel, pseudo_T0, panel.T0)
    fit_result = fit(sub, config)
    return fit_result, effects(fit_result, sub)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def fit_result_to_dict(fit_result: FitResult, effect_series: EffectSeries | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "weights": fit_result.weights,
        "midas": {
            u: {"m": mw.m, "zeta": mw.zeta.tolist(), "lag_weights": mw.weights.tolist()}
            for u, mw in fit_result.midas.items()
        },
        "reconstructions": {
            u: {
                "mode": rm.mode,
                "alpha": rm.alpha,
                "beta": rm.beta.tolist(),
                "agg_weights": None if rm.agg_weights is None else rm.agg_weights.tolist(),
                "r_squared": rm.r_squared,
                "iterations": rm.n_iterations,
                "converged": rm.converged,
            }
            for u, rm in fit_result.recon_models.items()
        },
        "pre_mse": fit_result.pre_mse,
        "objective": fit_result.objective,
        "status": fit_result.status,
        "T0": fit_result.T0,
        "diagnostics": fit_result.diagnostics,
    }
    if effect_series is not None:
        doc["effects"] = {
            "t": effect_series.times.tolist(),
            "effect": effect_series.effects.tolist(),
            "ate": effect_series.ate,
        }
    return doc


def fit_result_to_json(fit_result: FitResult, effect_series: EffectSeries | None = None) -> str:
    return json.dumps(fit_result_to_dict(fit_result, effect_series), indent=2)


def effects_to_csv(effect_series: EffectSeries) -> str:
    lines = ["t,effect"]
    for t, e in zip(effect_series.times, effect_series.effects):
        lines.append(f"{int(t)},{repr(float(e))}")
    return "\n".join(lines) + "\n"
