"""Dictionary parameterization of within-period lag weights.

High-frequency donors are aligned to the baseline frequency with a
weighted within-period aggregate. The lag-weight function is expressed
in a fixed polynomial dictionary (shifted Legendre on [0, 1]) so that
the weights are linear in the dictionary coefficients, which keeps the
joint weight estimation convex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .panel import Higher, UnitSeries


def basis_eval(ell: int, x: float) -> float:
    """Value of the shifted Legendre polynomial of degree ``ell - 1`` at x in [0, 1].

    The dictionary is 1-indexed: ell = 1 is the constant polynomial 1,
    ell = 2 is 2x - 1, ell = 3 is 6x^2 - 6x + 1, and so on.
    """
    if ell < 1:
        raise DomainError(f"basis index must be >= 1, got {ell}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"basis argument must lie in [0, 1], got {x}")
    coeffs = np.zeros(ell)
    coeffs[-1] = 1.0
    return float(np.polynomial.legendre.legval(2.0 * x - 1.0, coeffs))


@dataclass(frozen=True)
class LagPolyBasis:
    """Shifted-Legendre dictionary of ``degree`` polynomials (degrees 0..degree-1)."""

    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise DomainError(f"basis degree must be >= 1, got {self.degree}")

    def design(self, m: int) -> np.ndarray:
        """(m, degree) matrix with entry [k-1, ell-1] = basis_eval(ell, (k-1)/m)."""
        if m < 1:
            raise DomainError(f"window length m must be >= 1, got {m}")
        x = 2.0 * (np.arange(m) / m) - 1.0
        cols = [np.polynomial.legendre.legval(x, np.eye(self.degree)[ell]) for ell in range(self.degree)]
        return np.column_stack(cols)

    def lag_sums(self, m: int) -> np.ndarray:
        """Column sums of ``design(m)``; maps coefficients to the weight total."""
        return self.design(m).sum(axis=0)

    def uniform_zeta(self, m: int) -> np.ndarray:
        """Coefficients reproducing equal weights 1/m at every lag."""
        zeta = np.zeros(self.degree)
        zeta[0] = 1.0 / m
        return zeta

    def zeta_for_weights(self, weights: np.ndarray) -> np.ndarray:
        """Coefficients whose induced lag weights equal ``weights`` exactly.

        Requires degree == len(weights); the square dictionary design is
        a generalized Vandermonde matrix, hence invertible.
        """
        weights = np.asarray(weights, dtype=float)
        m = weights.shape[0]
        if self.degree != m:
            raise DomainError(f"need degree == m for exact weight interpolation ({self.degree} != {m})")
        return np.linalg.solve(self.design(m), weights)


@dataclass(frozen=True)
class MidasWeights:
    """Dictionary coefficients and the induced per-lag weights for one unit."""

    unit_id: str
    m: int
    zeta: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        z.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "weights", w)


def build_midas_weights(
    zeta: np.ndarray, m: int, basis: LagPolyBasis, unit_id: str = ""
) -> MidasWeights:
    """Per-lag weights induced by dictionary coefficients.

    weights[k-1] = sum_ell zeta[ell-1] * basis_eval(ell, (k-1)/m). The sum
    of the weights is not forced to one here; normalization is imposed as
    a constraint during estimation.
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (basis.degree,):
        raise DomainError(f"zeta must have length {basis.degree}, got shape {zeta.shape}")
    weights = basis.design(m) @ zeta
    return MidasWeights(unit_id=unit_id, m=m, zeta=zeta, weights=weights)


def align_high_freq(series: UnitSeries, w: MidasWeights) -> np.ndarray:
    """Baseline-frequency aggregate of a higher-frequency unit.

    Returns the length-T sequence sum_k weights[k-1] * Y_{t-(k-1)/m};
    all lags stay inside period t because the maximal lag order equals m.
    """
    if not isinstance(series.freq, Higher):
        raise DomainError(f"unit {series.unit_id!r} is not higher-frequency")
    if series.freq.m != w.m:
        raise DomainError(
            f"lag-weight window m={w.m} does not match unit {series.unit_id!r} (m={series.freq.m})"
        )
    return series.outcomes @ w.weights
