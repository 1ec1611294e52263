"""Heston model parameters and the decorrelating log-price transformation.

The model under the risk-neutral measure:

    dS/S = (r - delta) dt + sqrt(V) dZ_S
    dV   = kappa (theta - V) dt + sigma sqrt(V) dW,   corr(dZ_S, dW) = rho dt

Working coordinate is Y = log S - (rho/sigma) V, whose driving noise is
independent of the variance noise.  Its drift is affine in the variance:

    mu_y(v) = r - delta - v/2 - (rho/sigma) kappa (theta - v)
    mu_v(v) = kappa (theta - v)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HestonParams:
    """Heston model constants.  Immutable; safe to share across workers.

    kappa   mean-reversion rate of the variance (1/years)
    theta   long-run variance level
    sigma   volatility of volatility
    rho     spot/variance correlation, in (-1, 1)
    r       risk-free rate, continuously compounded (1/years)
    delta   continuous dividend rate (1/years)
    s0      initial spot
    v0      initial variance
    """

    kappa: float
    theta: float
    sigma: float
    rho: float
    r: float
    delta: float
    s0: float
    v0: float

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (self.theta > 0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not (self.s0 > 0):
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if not (self.v0 > 0):
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if not (math.isfinite(self.r) and math.isfinite(self.delta)):
            raise ValueError("r and delta must be finite")
        if not self.feller_ok:
            # Pricing still proceeds; the variance process may touch zero.
            warnings.warn(
                f"Feller condition violated: 2*kappa*theta={2 * self.kappa * self.theta:g} "
                f"< sigma^2={self.sigma ** 2:g}",
                stacklevel=2,
            )

    @property
    def rho_bar(self) -> float:
        """sqrt(1 - rho^2), the residual spot-noise loading."""
        return math.sqrt(1.0 - self.rho * self.rho)

    @property
    def feller_ok(self) -> bool:
        """True when 2*kappa*theta >= sigma^2 (variance stays positive)."""
        return 2.0 * self.kappa * self.theta >= self.sigma**2

    @property
    def y0(self) -> float:
        """Initial value of the transformed coordinate."""
        return float(to_y(self, self.s0, self.v0))


def mu_y(params: HestonParams, v):
    """Drift of the transformed log-price at variance level v."""
    return (
        params.r
        - params.delta
        - 0.5 * v
        - (params.rho / params.sigma) * params.kappa * (params.theta - v)
    )


def mu_v(params: HestonParams, v):
    """Drift of the variance process at level v."""
    return params.kappa * (params.theta - v)


def drift_coeffs(params: HestonParams) -> tuple[float, float]:
    """(c0, c1) with mu_y(v) = c0 + c1*v.

    c0 = r - delta - (rho/sigma)*kappa*theta is also mu_y(0); its absolute
    value drives the grid and threshold constraints.
    """
    c0 = params.r - params.delta - (params.rho / params.sigma) * params.kappa * params.theta
    c1 = (params.rho / params.sigma) * params.kappa - 0.5
    return c0, c1


def to_y(params: HestonParams, s, v):
    """Map spot s (at variance v) to the transformed coordinate.

    Accepts scalars or arrays; rejects non-positive spots.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("spot must be positive")
    out = np.log(s) - (params.rho / params.sigma) * v
    return out if out.ndim else float(out)


def s_of(params: HestonParams, y, v):
    """Inverse of :func:`to_y` at fixed variance: s = exp(y + (rho/sigma) v)."""
    out = np.exp(np.asarray(y, dtype=float) + (params.rho / params.sigma) * v)
    return out if out.ndim else float(out)
