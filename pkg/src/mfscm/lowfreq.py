"""Baseline-frequency reconstruction of low-frequency donor outcomes.

A low-frequency unit's latent baseline outcomes follow a distributed lag
model in its covariates. In point-sample mode the observed values are
direct samples of the latent series and the lag model is fitted by OLS.
In aggregate mode each observation is a weighted sum of the latent
outcomes in its cycle, with unknown aggregation weights summing to one;
the lag coefficients and aggregation weights are then estimated jointly
by alternating least squares, each subproblem being an exact linear
solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IllPosedError, SampleSizeError
from .panel import AGGREGATE, POINT_SAMPLE, Lower, UnitSeries

_COND_LIMIT = 1e12


@dataclass
class ReconstructionModel:
    """Fitted distributed-lag reconstruction for one low-frequency unit."""

    unit_id: str
    alpha: float
    beta: np.ndarray  # (P+1, Q)
    mode: str
    agg_weights: np.ndarray | None = None  # (m_tilde,), aggregate mode only
    r_squared: float = float("nan")
    n_iterations: int = 0
    converged: bool = True
    objective_path: np.ndarray = field(default_factory=lambda: np.empty(0))
    rank_deficient: bool = False

    @property
    def P(self) -> int:
        return self.beta.shape[0] - 1


def _lag_index(times: np.ndarray, p: int) -> np.ndarray:
    """0-based covariate column indices for lag p at the given periods.

    Out-of-range lags (t - p < 1) are backfilled with the first period.
    """
    return np.maximum(np.asarray(times, dtype=int) - p, 1) - 1


def lagged_design(X: np.ndarray, P: int, times: np.ndarray) -> np.ndarray:
    """Rows [1, X_t, X_{t-1}, ..., X_{t-P}] for each requested period."""
    cols = [np.ones(len(times))]
    for p in range(P + 1):
        cols.append(X[:, _lag_index(times, p)].T)
    return np.column_stack(cols)


def _solve_ls(D: np.ndarray, y: np.ndarray, unit_id: str, allow_rank_deficient: bool):
    coef, _, rank, _ = np.linalg.lstsq(D, y, rcond=None)
    deficient = rank < D.shape[1]
    if deficient and not allow_rank_deficient:
        raise IllPosedError(
            f"unit {unit_id!r}: rank-deficient lag design (rank {rank} < {D.shape[1]})"
        )
    return coef, deficient


def fit_low_freq_point_sample(
    series: UnitSeries,
    P: int,
    *,
    t_max: int | None = None,
    allow_rank_deficient: bool = False,
) -> ReconstructionModel:
    """OLS of point-sampled observations on intercept and covariate lags 0..P."""
    freq = _check_lower(series, POINT_SAMPLE)
    X, times, y = _observed(series, t_max)
    Q = X.shape[0]
    if times.size <= (P + 1) * Q + 1 and not allow_rank_deficient:
        raise SampleSizeError(
            f"unit {series.unit_id!r}: {times.size} observations cannot identify "
            f"{(P + 1) * Q + 1} lag-model parameters"
        )
    if times.size < 1:
        raise SampleSizeError(f"unit {series.unit_id!r}: no observations in the fitting window")
    D = lagged_design(X, P, times)
    coef, deficient = _solve_ls(D, y, series.unit_id, allow_rank_deficient)
    alpha, beta = float(coef[0]), coef[1:].reshape(P + 1, Q)
    resid = y - D @ coef
    return ReconstructionModel(
        unit_id=series.unit_id,
        alpha=alpha,
        beta=beta,
        mode=POINT_SAMPLE,
        r_squared=_r_squared(y, resid),
        rank_deficient=deficient,
    )


def fit_low_freq_aggregate(
    series: UnitSeries,
    P: int,
    tol: float = 1e-8,
    max_iter: int = 200,
    *,
    t_max: int | None = None,
    nonneg_weights: bool = False,
    allow_rank_deficient: bool = False,
) -> ReconstructionModel:
    """Alternating least squares for the aggregated distributed-lag model.

    Each observed value at cycle end t is sum_s W_s * latent(t - m_tilde + s)
    with sum_s W_s = 1. Starting from uniform W, the lag coefficients and W
    are re-solved in turn; both half-steps minimize the same sum of squared
    residuals, so the objective is nonincreasing across iterations.
    """
    freq = _check_lower(series, AGGREGATE)
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    mt = freq.m_tilde
    X, times, y = _observed(series, t_max)
    Q = X.shape[0]
    if times.size < (P + 1) * Q + mt and not allow_rank_deficient:
        raise SampleSizeError(
            f"unit {series.unit_id!r}: {times.size} observations for "
            f"{(P + 1) * Q + mt} aggregate-model parameters"
        )
    if times.size < 2:
        raise SampleSizeError(f"unit {series.unit_id!r}: need at least 2 observations, got {times.size}")

    # per-observation lag indices: within-cycle offsets s = 1..mt, lags p = 0..P
    n = times.size
    idx = np.empty((n, mt, P + 1), dtype=int)
    for i, t in enumerate(times):
        for s in range(1, mt + 1):
            idx[i, s - 1] = np.maximum(t - mt + s - np.arange(P + 1), 1) - 1
    Xlag = X[:, idx]  # (Q, n, mt, P+1)

    W = np.full(mt, 1.0 / mt)
    alpha, beta = 0.0, np.zeros((P + 1, Q))
    scale = float(np.mean(y * y)) + 1.0
    path: list[float] = []
    converged = False
    deficient = False
    for _ in range(max_iter):
        # (a) fixed W: OLS on W-aggregated covariate lags
        agg = np.einsum("qnsp,s->npq", Xlag, W)  # (n, P+1, Q)
        D = np.column_stack([np.ones(n), agg.reshape(n, -1)])
        coef, dflag = _solve_ls(D, y, series.unit_id, allow_rank_deficient)
        deficient = deficient or dflag
        alpha, beta = float(coef[0]), coef[1:].reshape(P + 1, Q)
        # (b) fixed (alpha, beta): equality-constrained LS in W
        G = np.einsum("qnsp,pq->ns", Xlag, beta)  # (n, mt)
        W = _solve_weight_step(G, y - alpha, series.unit_id, nonneg_weights, allow_rank_deficient)
        obj = float(np.sum((y - alpha - G @ W) ** 2))
        if path:
            assert obj <= path[-1] * (1.0 + 1e-10) + 1e-12 * scale, "ALS objective increased"
            if (path[-1] - obj) <= tol * max(path[-1], 1e-30):
                path.append(obj)
                converged = True
                break
        path.append(obj)
        if obj <= 1e-16 * scale * max(n, 1):
            converged = True
            break

    resid_var = path[-1] / n if path else float("nan")
    return ReconstructionModel(
        unit_id=series.unit_id,
        alpha=alpha,
        beta=beta,
        mode=AGGREGATE,
        agg_weights=W,
        r_squared=_r_squared(y, y - alpha - G @ W),
        n_iterations=len(path),
        converged=converged,
        objective_path=np.asarray(path),
        rank_deficient=deficient,
    )


def _solve_weight_step(
    G: np.ndarray, r: np.ndarray, unit_id: str, nonneg: bool, allow_rank_deficient: bool
) -> np.ndarray:
    """min ||r - G W||^2 subject to sum(W) = 1 (optionally W >= 0)."""
    mt = G.shape[1]
    active: set[int] = set()
    for _ in range(2 * mt + 2):
        free = [s for s in range(mt) if s not in active]
        W = np.zeros(mt)
        Gf = G[:, free]
        k = len(free)
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = 2.0 * Gf.T @ Gf
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        rhs = np.concatenate([2.0 * Gf.T @ r, [1.0]])
        if np.linalg.cond(K) > _COND_LIMIT:
            if not allow_rank_deficient:
                raise IllPosedError(f"unit {unit_id!r}: singular aggregation-weight subproblem")
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        else:
            sol = np.linalg.solve(K, rhs)
        W[free] = sol[:k]
        if not nonneg:
            return W
        if np.min(W[free], initial=np.inf) >= -1e-12:
            # release check: a clamped weight with negative multiplier can improve
            if active:
                grad = 2.0 * G.T @ (G @ W - r)
                mu = grad + sol[k]  # grad_free = -sol[k] at the KKT point
                worst = min(active, key=lambda s: mu[s])
                if mu[worst] < -1e-10:
                    active.discard(worst)
                    continue
            return W
        active.add(int(free[int(np.argmin(W[free]))]))
    raise IllPosedError(f"unit {unit_id!r}: nonnegative weight step did not terminate")


def fit_low_freq_pooled(
    units: list[UnitSeries],
    P: int,
    tol: float = 1e-8,
    max_iter: int = 200,
    *,
    t_max: int | None = None,
    nonneg_weights: bool = False,
    allow_rank_deficient: bool = False,
) -> dict[str, ReconstructionModel]:
    """Aggregate-mode reconstruction with lag coefficients shared across units.

    Pools every unit's observations into one distributed-lag fit (common
    intercept and lag coefficients, per-unit aggregation weights), the
    shared-coefficient counterpart of :func:`fit_low_freq_aggregate`.
    Useful when the donors plausibly follow one outcome equation and the
    per-unit samples are short.
    """
    if not units:
        raise DomainError("no units to pool")
    data = []
    n_total = 0
    for u in units:
        freq = _check_lower(u, AGGREGATE)
        X, times, y = _observed(u, t_max)
        mt = freq.m_tilde
        idx = np.empty((times.size, mt, P + 1), dtype=int)
        for i, t in enumerate(times):
            for s in range(1, mt + 1):
                idx[i, s - 1] = np.maximum(t - mt + s - np.arange(P + 1), 1) - 1
        data.append((u, X[:, idx], y, mt))
        n_total += times.size
    Q = data[0][1].shape[0]
    n_params = (P + 1) * Q + 1 + sum(d[3] - 1 for d in data)
    if n_total < n_params and not allow_rank_deficient:
        raise SampleSizeError(f"{n_total} pooled observations for {n_params} parameters")

    Ws = [np.full(d[3], 1.0 / d[3]) for d in data]
    alpha, beta = 0.0, np.zeros((P + 1, Q))
    scale = float(np.mean(np.concatenate([d[2] for d in data]) ** 2)) + 1.0
    path: list[float] = []
    converged = False
    deficient = False
    for _ in range(max_iter):
        rows = []
        ys = []
        for (u, Xlag, y, mt), W in zip(data, Ws):
            agg = np.einsum("qnsp,s->npq", Xlag, W)
            rows.append(np.column_stack([np.ones(y.size), agg.reshape(y.size, -1)]))
            ys.append(y)
        D = np.vstack(rows)
        yy = np.concatenate(ys)
        coef, dflag = _solve_ls(D, yy, "pooled", allow_rank_deficient)
        deficient = deficient or dflag
        alpha, beta = float(coef[0]), coef[1:].reshape(P + 1, Q)
        obj = 0.0
        for i, (u, Xlag, y, mt) in enumerate(data):
            G = np.einsum("qnsp,pq->ns", Xlag, beta)
            Ws[i] = _solve_weight_step(G, y - alpha, u.unit_id, nonneg_weights, allow_rank_deficient)
            obj += float(np.sum((y - alpha - G @ Ws[i]) ** 2))
        if path:
            assert obj <= path[-1] * (1.0 + 1e-10) + 1e-12 * scale, "pooled ALS objective increased"
            if (path[-1] - obj) <= tol * max(path[-1], 1e-30):
                path.append(obj)
                converged = True
                break
        path.append(obj)
        if obj <= 1e-16 * scale * max(n_total, 1):
            converged = True
            break

    out = {}
    for (u, Xlag, y, mt), W in zip(data, Ws):
        out[u.unit_id] = ReconstructionModel(
            unit_id=u.unit_id,
            alpha=alpha,
            beta=beta.copy(),
            mode=AGGREGATE,
            agg_weights=W,
            r_squared=float("nan"),
            n_iterations=len(path),
            converged=converged,
            objective_path=np.asarray(path),
            rank_deficient=deficient,
        )
    return out


def reconstruct_baseline(model: ReconstructionModel, series: UnitSeries) -> np.ndarray:
    """Distributed-lag prediction of the latent baseline outcomes at t = 1..T."""
    if model.unit_id != series.unit_id:
        raise DomainError(
            f"reconstruction model for {model.unit_id!r} applied to unit {series.unit_id!r}"
        )
    if series.covariates is None:
        raise DomainError(f"unit {series.unit_id!r} has no covariates to reconstruct from")
    X = series.covariates
    T = X.shape[1]
    out = np.full(T, model.alpha)
    times = np.arange(1, T + 1)
    for p in range(model.beta.shape[0]):
        out += X[:, _lag_index(times, p)].T @ model.beta[p]
    return out


def aggregate_prediction(model: ReconstructionModel, series: UnitSeries) -> np.ndarray:
    """Re-aggregated reconstruction at the unit's observation times (aggregate mode)."""
    if model.mode != AGGREGATE:
        raise DomainError("aggregate_prediction needs an aggregate-mode model")
    freq = _check_lower(series, AGGREGATE)
    latent = reconstruct_baseline(model, series)
    mt = freq.m_tilde
    return np.array([model.agg_weights @ latent[t - mt : t] for t in series.obs_times])


def _check_lower(series: UnitSeries, mode: str) -> Lower:
    if not isinstance(series.freq, Lower):
        raise DomainError(f"unit {series.unit_id!r} is not lower-frequency")
    if series.freq.mode != mode:
        raise DomainError(
            f"unit {series.unit_id!r} is declared {series.freq.mode!r}, not {mode!r}"
        )
    return series.freq


def _observed(series: UnitSeries, t_max: int | None):
    if series.covariates is None:
        raise DomainError(f"unit {series.unit_id!r} has no covariates")
    times = np.asarray(series.obs_times, dtype=int)
    values = series.outcomes
    if t_max is not None:
        keep = times <= t_max
        times, values = times[keep], values[keep]
    return series.covariates, times, values


def _r_squared(y: np.ndarray, resid: np.ndarray) -> float:
    sst = float(np.sum((y - np.mean(y)) ** 2))
    sse = float(np.sum(resid**2))
    if sst <= 0.0:
        return 1.0 if sse <= 1e-12 * (1.0 + float(np.sum(y * y))) else 0.0
    return 1.0 - sse / sst
