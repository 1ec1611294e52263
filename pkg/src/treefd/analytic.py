"""Semi-analytic European benchmark and the convergence-ratio statistic.

European calls are priced from the risk-neutral characteristic function
with the branch-cut-safe log formulation (rotation-count-free), puts by
parity.  The two tail probabilities are integrated adaptively on a
truncated frequency axis that is extended until the tail contribution
falls below tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .model import HestonParams


class QuadratureError(RuntimeError):
    """Integration did not reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class CfQuadrature:
    """Quadrature controls for the characteristic-function integrals.

    abs_tol      absolute tolerance per tail-probability integral
    initial_cut  first truncation point of the frequency axis
    max_cut      hard ceiling for truncation growth
    limit        max subdivisions handed to the adaptive integrator
    """

    abs_tol: float = 1e-10
    initial_cut: float = 200.0
    max_cut: float = 1e5
    limit: int = 200

    def __post_init__(self):
        if not (0 < self.abs_tol <= 1e-8):
            raise ValueError("abs_tol must be in (0, 1e-8]")
        if not (0 < self.initial_cut <= self.max_cut):
            raise ValueError("need 0 < initial_cut <= max_cut")


def _tail_probability(params: HestonParams, strike: float, maturity: float,
                      which: int, q: CfQuadrature) -> tuple[float, float]:
    """P_j = 1/2 + (1/pi) \\int_0^inf Re[exp(-i u ln K) f_j(u) / (i u)] du."""
    x = math.log(params.s0)
    a = params.kappa * params.theta
    sig = params.sigma
    rho = params.rho
    if which == 1:
        u_half, b = 0.5, params.kappa - rho * sig
    else:
        u_half, b = -0.5, params.kappa
    lnk = math.log(strike)
    drift = params.r - params.delta

    def integrand(phi: float) -> float:
        ip = 1j * phi
        d = np.sqrt((rho * sig * ip - b) ** 2 - sig**2 * (2.0 * u_half * ip - phi * phi))
        g = (b - rho * sig * ip - d) / (b - rho * sig * ip + d)
        ed = np.exp(-d * maturity)
        cf = np.exp(
            drift * ip * maturity
            + (a / sig**2) * ((b - rho * sig * ip - d) * maturity
                              - 2.0 * np.log((1.0 - g * ed) / (1.0 - g)))
            + ((b - rho * sig * ip - d) / sig**2) * (1.0 - ed) / (1.0 - g * ed) * params.v0
            + ip * x
        )
        return (np.exp(-ip * lnk) * cf / ip).real

    total, err = quad(integrand, 0.0, q.initial_cut,
                      epsabs=q.abs_tol, epsrel=q.abs_tol, limit=q.limit)
    # extend the truncation until the tail stops contributing
    cut = q.initial_cut
    tail, tail_err = math.inf, 0.0
    while cut < q.max_cut:
        tail, tail_err = quad(integrand, cut, 2.0 * cut,
                              epsabs=q.abs_tol, epsrel=q.abs_tol, limit=q.limit)
        total += tail
        err += tail_err
        cut *= 2.0
        if abs(tail) + tail_err < 0.25 * q.abs_tol:
            break
    else:
        raise QuadratureError("integrand tail did not decay before max_cut", abs(tail))
    return 0.5 + total / math.pi, err


def heston_call_cf(params: HestonParams, strike: float, maturity: float,
                   q: CfQuadrature | None = None) -> float:
    """European call price from the characteristic-function representation."""
    if strike <= 0 or maturity <= 0:
        raise ValueError("strike and maturity must be positive")
    q = q or CfQuadrature()
    p1, e1 = _tail_probability(params, strike, maturity, 1, q)
    p2, e2 = _tail_probability(params, strike, maturity, 2, q)
    err = (e1 + e2) * max(params.s0, strike)
    if err > 1e-6:
        raise QuadratureError("call price integrals did not converge", err)
    return (params.s0 * math.exp(-params.delta * maturity) * p1
            - strike * math.exp(-params.r * maturity) * p2)


def heston_put_cf(params: HestonParams, strike: float, maturity: float,
                  q: CfQuadrature | None = None) -> float:
    """European put price: call minus the forward, by parity."""
    call = heston_call_cf(params, strike, maturity, q)
    forward = (params.s0 * math.exp(-params.delta * maturity)
               - strike * math.exp(-params.r * maturity))
    return call - forward


def black_scholes_put(s0: float, strike: float, maturity: float, r: float,
                      delta: float, vol: float) -> float:
    """Flat-volatility put, used as the vanishing vol-of-vol limit."""
    if vol <= 0 or maturity <= 0:
        raise ValueError("vol and maturity must be positive")
    sq = vol * math.sqrt(maturity)
    d1 = (math.log(s0 / strike) + (r - delta + 0.5 * vol**2) * maturity) / sq
    d2 = d1 - sq
    return (strike * math.exp(-r * maturity) * norm.cdf(-d2)
            - s0 * math.exp(-delta * maturity) * norm.cdf(-d1))


def convergence_ratio(p_quarter: float, p_half: float, p_full: float) -> float:
    """(P_{N/2} - P_{N/4}) / (P_N - P_{N/2}); near 2 means first order."""
    denom = p_full - p_half
    if denom == 0.0:
        raise ZeroDivisionError("successive refinements returned identical prices")
    return (p_half - p_quarter) / denom
