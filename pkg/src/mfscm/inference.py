"""Block-subsampling bootstrap confidence intervals for the ATE.

Weight uncertainty is captured by re-estimating the simplex-constrained
weights on contiguous pre-treatment blocks of the aligned outcome
matrix; post-treatment noise is captured by simulating per-period
disturbances from the estimated effect variance. Each bootstrap
replicate combines the two into one statistic, and the interval is read
off the sorted replicates' order statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SampleSizeError
from .estimator import EffectSeries, FitResult, aligned_outcomes
from .optim import solve_simplex_ls
from .panel import MixedPanel

_REPLICATE_KEY = 0x626C6F63  # namespaces per-replicate seed streams


@dataclass(frozen=True)
class BlockRule:
    """Block-size rule: m = floor(T0^a), a fixed m, or max(min_m, floor(T0^a))."""

    kind: str
    a: float | None = None
    m: int | None = None
    min_m: int | None = None

    @classmethod
    def pow(cls, a: float = 0.8) -> "BlockRule":
        if not 0.0 < a < 1.0:
            raise ConfigError(f"block rule exponent must lie in (0,1), got {a}")
        return cls("pow", a=a)

    @classmethod
    def fixed(cls, m: int) -> "BlockRule":
        return cls("fixed", m=int(m))

    @classmethod
    def floor_pow_with_min(cls, a: float, min_m: int) -> "BlockRule":
        if not 0.0 < a < 1.0:
            raise ConfigError(f"block rule exponent must lie in (0,1), got {a}")
        return cls("minpow", a=a, min_m=int(min_m))

    @classmethod
    def parse(cls, text: str) -> "BlockRule":
        """Parse 'pow:A', 'fixed:M', or 'minpow:A:MIN'."""
        parts = text.split(":")
        try:
            if parts[0] == "pow" and len(parts) == 2:
                return cls.pow(float(parts[1]))
            if parts[0] == "fixed" and len(parts) == 2:
                return cls.fixed(int(parts[1]))
            if parts[0] == "minpow" and len(parts) == 3:
                return cls.floor_pow_with_min(float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"bad block rule {text!r}: {exc}")
        raise ConfigError(f"bad block rule {text!r} (expected pow:A, fixed:M, or minpow:A:MIN)")

    def block_size(self, T0: int) -> int:
        if self.kind == "pow":
            m = math.floor(T0**self.a)
        elif self.kind == "fixed":
            m = self.m
        else:
            m = max(self.min_m, math.floor(T0**self.a))
        if not 2 <= m <= T0:
            raise ConfigError(f"block size m={m} outside 2..T0={T0}")
        return m


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings: draw count, block rule, seed, significance level."""

    n_boot: int
    seed: int
    level: float = 0.1  # significance; the interval has confidence 1 - level
    block_rule: BlockRule = field(default_factory=BlockRule.pow)

    def __post_init__(self):
        if self.n_boot < 1:
            raise ConfigError(f"n_boot must be positive, got {self.n_boot}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0,1), got {self.level}")


@dataclass(frozen=True)
class CiResult:
    """ATE point estimate with its bootstrap sample and percentile interval."""

    ate: float
    sigma_v_hat: float
    boot_stats: np.ndarray
    ci_lower: float
    ci_upper: float
    level: float
    n_boot: int
    block_size: int
    seed: int

    def __post_init__(self):
        stats = np.asarray(self.boot_stats, dtype=float)
        stats.setflags(write=False)
        object.__setattr__(self, "boot_stats", stats)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "ate": self.ate,
            "sigma_v_hat": self.sigma_v_hat,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "level": self.level,
            "n_boot": self.n_boot,
            "block_size": self.block_size,
            "seed": self.seed,
        }


def sigma_v_hat(effect_series: EffectSeries) -> float:
    """Mean squared deviation of per-period effects around the ATE."""
    eff = effect_series.effects
    if eff.size < 2:
        raise SampleSizeError(f"need at least 2 post-treatment periods, got {eff.size}")
    dev = eff - effect_series.ate
    return float(np.mean(dev * dev))


def _replicate_rng(seed: int, n: int) -> np.random.Generator:
    """Counter-based per-replicate stream: independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_REPLICATE_KEY, n)))


def bootstrap_statistics(
    panel: MixedPanel,
    fit_result: FitResult,
    effect_series: EffectSeries,
    config: BootstrapConfig,
    solver_tol: float = 1e-10,
    solver_max_iter: int = 50000,
) -> tuple[np.ndarray, float, int]:
    """Unsorted bootstrap statistics plus the variance estimate and block size.

    Replicate n draws a block start uniformly from the overlapping
    pre-treatment blocks, re-estimates the simplex weights on the block's
    aligned outcomes (no covariate rows), simulates post-treatment
    disturbances, and combines both pieces. Identical block starts reuse
    the same solved weights; the per-replicate random streams are
    derived by a counter split, so parallel and serial evaluation orders
    agree bit for bit.
    """
    T0, T1 = panel.T0, panel.T1
    m = config.block_rule.block_size(T0)
    if m >= T0:
        raise ConfigError(f"block size m={m} must be smaller than T0={T0}")
    sv = sigma_v_hat(effect_series)
    sv_sd = math.sqrt(sv)
    w_hat = fit_result.weight_vector()

    pre = aligned_outcomes(fit_result, panel, np.arange(1, T0 + 1))  # (T0, J)
    post_mean = aligned_outcomes(fit_result, panel, np.arange(T0 + 1, panel.T + 1)).mean(axis=0)
    y_pre = panel.treated.outcomes[:T0]

    sqrt_m = math.sqrt(m)
    e1_scale = -math.sqrt(T1 / T0)
    cache: dict[int, np.ndarray] = {}
    stats = np.empty(config.n_boot)
    for n in range(config.n_boot):
        rng = _replicate_rng(config.seed, n)
        b = int(rng.integers(1, T0 - m + 2))
        wb = cache.get(b)
        if wb is None:
            sol = solve_simplex_ls(
                y_pre[b - 1 : b - 1 + m],
                pre[b - 1 : b - 1 + m],
                tol=solver_tol,
                max_iter=solver_max_iter,
            )
            wb = sol.w
            cache[b] = wb
        v_star = rng.normal(0.0, sv_sd, size=T1)
        e1 = e1_scale * float(post_mean @ (sqrt_m * (wb - w_hat)))
        stats[n] = e1 + float(np.sum(v_star)) / math.sqrt(T1)
    return stats, sv, m


def ci_from_stats(ate: float, sorted_stats: np.ndarray, T1: int, level: float) -> tuple[float, float]:
    """Percentile interval from sorted bootstrap statistics.

    Uses the order statistics at ceil(q*N) clamped to 1..N, with
    q = level/2 and 1 - level/2.
    """
    N = sorted_stats.shape[0]

    def order_stat(q: float) -> float:
        idx = min(max(math.ceil(q * N), 1), N)
        return float(sorted_stats[idx - 1])

    rt = math.sqrt(T1)
    lower = ate - order_stat(1.0 - level / 2.0) / rt
    upper = ate - order_stat(level / 2.0) / rt
    return lower, upper


def block_bootstrap_ci(
    panel: MixedPanel,
    fit_result: FitResult,
    effect_series: EffectSeries,
    config: BootstrapConfig,
) -> CiResult:
    """Block-subsampling bootstrap confidence interval for the ATE.

    Deterministic: the same panel, fit, and configuration (including the
    seed) reproduce the result bit for bit.
    """
    stats, sv, m = bootstrap_statistics(panel, fit_result, effect_series, config)
    sorted_stats = np.sort(stats)
    lower, upper = ci_from_stats(effect_series.ate, sorted_stats, panel.T1, config.level)
    return CiResult(
        ate=effect_series.ate,
        sigma_v_hat=sv,
        boot_stats=stats,
        ci_lower=lower,
        ci_upper=upper,
        level=config.level,
        n_boot=config.n_boot,
        block_size=m,
        seed=config.seed,
    )
