"""Likelihoods and information criteria: AIC, AICc, COMIC variants.

The computational criteria add an entropy penalty for the discretization to
the AIC. For a constant sampling volume dV = |Omega|/n the penalty is ln(n)
(up to the constant ln|Omega|); for spatially varying volumes it is the
integral -int c(x) ln(dV(x)) dx approximated by particle-Voronoi quadrature.

Log-fitness follows the reduced convention ln(L) = -ln(SSE/k), i.e. the
maximized iid-Gaussian log-likelihood with all model-independent constants
stripped; the textbook -(k/2)*ln(SSE/k) form is available via the
``convention`` argument but never changes model rankings at fixed k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ObservationSet

__all__ = [
    "DegenerateFitError",
    "FitnessReport",
    "log_fitness_iid",
    "aic",
    "aicc",
    "comic_uniform",
    "comicc_uniform",
    "entropy_integral",
    "comic_integral",
    "weighted_mse",
    "comic_weighted",
    "pointwise_variance_mle",
    "fitness_report_iid",
    "fitness_report_weighted",
]


class DegenerateFitError(ValueError):
    """Raised when residuals vanish identically and the criterion is -inf."""


@dataclass(frozen=True)
class FitnessReport:
    """All criterion values for one scored simulation."""

    neg2lnL: float
    p: int
    k: int
    aic: float
    aicc: float
    comic: float
    comicc: float
    entropy_term: float
    criterion_kind: str

    def __post_init__(self):
        if abs(self.comic - (self.aic + self.entropy_term)) > 1e-9 * max(1.0, abs(self.aic)):
            raise ValueError("comic must equal aic + entropy_term")


def log_fitness_iid(residuals, convention: str = "reduced") -> float:
    """Maximized iid-Gaussian log-likelihood of the residuals.

    Reduced convention: -ln(SSE/k). Full convention: -(k/2)*ln(SSE/k).
    """
    y = np.asarray(residuals, dtype=float)
    if y.size < 1:
        raise ValueError("need at least one residual")
    sse = float(y @ y)
    if sse == 0.0:
        raise DegenerateFitError("all residuals are zero; fit is degenerate")
    value = -np.log(sse / y.size)
    if convention == "reduced":
        return float(value)
    if convention == "full":
        return float(y.size / 2 * value)
    raise ValueError(f"unknown convention {convention!r}")


def aic(log_likelihood: float, p: int) -> float:
    """Akaike information criterion -2*lnL + 2*p."""
    return -2.0 * log_likelihood + 2.0 * p


def aicc(aic_value: float, p: int, k: int) -> float:
    """Small-sample corrected AIC; defined only for k > p + 1."""
    if k <= p + 1:
        raise ValueError(f"AICc correction undefined for k={k}, p={p}")
    return aic_value + (2.0 * p * p + 2.0 * p) / (k - p - 1)


def comic_uniform(aic_value: float, n: int) -> float:
    """COMIC for constant sampling volume: AIC + ln(n)."""
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    return aic_value + np.log(n)


def comicc_uniform(aicc_value: float, n: int) -> float:
    """COMICc for constant sampling volume: AICc + ln(n)."""
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    return aicc_value + np.log(n)


def entropy_integral(concentrations, volumes) -> float:
    """Quadrature of -int c(x) ln(dV(x)) dx over the particle Voronoi cells."""
    c = np.asarray(concentrations, dtype=float)
    dv = np.asarray(volumes, dtype=float)
    if c.shape != dv.shape:
        raise ValueError("concentrations and volumes must have matching shapes")
    if np.any(dv <= 0):
        raise ValueError("local volumes must be positive")
    return float(-np.sum(c * np.log(dv) * dv))


def comic_integral(aic_value: float, concentrations, volumes) -> float:
    """COMIC with spatially varying sampling volume: AIC - int c ln(dV) dx."""
    return aic_value + entropy_integral(concentrations, volumes)


def weighted_mse(
    observations: ObservationSet,
    model_values,
    m_total: float,
    return_excluded: bool = False,
):
    """Weighted mean square error with weights 1/(m_total * c_hat_i).

    Data points with zero observed concentration have undefined weight and
    are excluded; pass ``return_excluded=True`` to also get their count.
    """
    c_hat = observations.values
    c_n = np.asarray(model_values, dtype=float)
    if c_n.shape != c_hat.shape:
        raise ValueError("model values must match the observation count")
    keep = c_hat > 0
    excluded = int(np.count_nonzero(~keep))
    if excluded == c_hat.size:
        raise ValueError("all observed concentrations are zero; criterion undefined")
    w = 1.0 / (m_total * c_hat[keep])
    e = float(np.mean(w * (c_hat[keep] - c_n[keep]) ** 2))
    return (e, excluded) if return_excluded else e


def comic_weighted(e: float, p: int, dv: float) -> float:
    """COMIC for the weighted-MSE criterion: 2*ln(E) + 2*p - ln(dV)."""
    if e < 0:
        raise ValueError(f"weighted MSE must be non-negative, got {e}")
    if e == 0:
        raise DegenerateFitError("weighted MSE is zero; fit is degenerate")
    if dv <= 0:
        raise ValueError(f"sampling volume must be positive, got {dv}")
    return 2.0 * np.log(e) + 2.0 * p - np.log(dv)


def pointwise_variance_mle(residual_samples) -> np.ndarray:
    """Per-point MLE variance from N residual vectors: mean of squares."""
    y = np.atleast_2d(np.asarray(residual_samples, dtype=float))
    if y.shape[0] < 1:
        raise ValueError("need at least one residual sample")
    return np.mean(y * y, axis=0)


def fitness_report_iid(residuals, p: int, n: int, entropy_term: float = None) -> FitnessReport:
    """Score an iid-Gaussian fit; entropy term defaults to ln(n)."""
    y = np.asarray(residuals, dtype=float)
    lnl = log_fitness_iid(y)
    a = aic(lnl, p)
    ac = aicc(a, p, y.size)
    ent = np.log(n) if entropy_term is None else float(entropy_term)
    return FitnessReport(
        neg2lnL=-2.0 * lnl,
        p=p,
        k=y.size,
        aic=a,
        aicc=ac,
        comic=a + ent,
        comicc=ac + ent,
        entropy_term=ent,
        criterion_kind="iid-gaussian",
    )


def fitness_report_weighted(
    e: float, p: int, k: int, n: int, entropy_term: float = None
) -> FitnessReport:
    """Score a weighted-MSE fit; entropy term defaults to ln(n)."""
    if e <= 0:
        raise DegenerateFitError("weighted MSE must be positive")
    base = 2.0 * np.log(e) + 2.0 * p
    corr = (2.0 * p * p + 2.0 * p) / (k - p - 1) if k > p + 1 else np.nan
    ent = np.log(n) if entropy_term is None else float(entropy_term)
    return FitnessReport(
        neg2lnL=2.0 * np.log(e),
        p=p,
        k=k,
        aic=base,
        aicc=base + corr,
        comic=base + ent,
        comicc=base + corr + ent,
        entropy_term=ent,
        criterion_kind="weighted",
    )
