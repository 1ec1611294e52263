"""Log-price grid, tridiagonal transition operators and regime selection.

One backward time step at frozen variance v propagates a value vector on
the uniform grid {y_j = Y0 + j dy, j = -M..M} with one of two operators,
parameterised by

    alpha = h mu_y(v) / (2 dy),      beta = h rho_bar^2 v / (2 dy^2).

* implicit (v above the regime threshold): solve A u = rhs with
  A = tridiag(alpha - beta, 1 + 2 beta, -alpha - beta); A^-1 is a
  stochastic matrix whenever beta > |alpha|.
* explicit (v at or below the threshold): u = C rhs with the upwind stencil
  C = tridiag(beta + 2|alpha| 1{alpha<0}, 1 - 2 beta - 2|alpha|,
  beta + 2|alpha| 1{alpha>0}); C is stochastic iff 2 beta + 2|alpha| <= 1.

Boundary rows either fold the ghost value back onto the interior
(zero-derivative ends) or pin the end values (Dirichlet).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import HestonParams, drift_coeffs, mu_y


class Regime(enum.Enum):
    IMPLICIT = "implicit"
    EXPLICIT = "explicit"


class BoundaryKind(enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


class StabilityViolation(RuntimeError):
    """Operator preconditions failed; the grid/threshold setup is unusable."""

    def __init__(self, regime: Regime, alpha: float, beta: float, v: float | None = None,
                 detail: str = ""):
        self.regime = regime
        self.alpha = alpha
        self.beta = beta
        self.v = v
        msg = (f"{regime.value} scheme unstable: alpha={alpha:g}, beta={beta:g}"
               + (f", v={v:g}" if v is not None else "")
               + (f" ({detail})" if detail else ""))
        super().__init__(msg)


@dataclass(frozen=True)
class Coeffs:
    """Dimensionless advection/diffusion weights of one operator."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("coefficients must be finite")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")


@dataclass(frozen=True)
class GridPolicy:
    """Grid sizing knobs.

    k_width      half-width in conditional standard deviations of the
                 transformed coordinate over the full horizon
    half_width   explicit override of the half-width (skips the formula)
    eps          explicit override of the regime threshold
    adapt        allow shrinking/stretching the half-width when the default
                 leaves no workable regime threshold (see build_grid)
    """

    k_width: float = 5.0
    half_width: float | None = None
    eps: float | None = None
    adapt: bool = True


@dataclass(frozen=True)
class YGrid:
    """Uniform symmetric grid around the initial transformed coordinate."""

    y0: float
    dy: float
    m: int
    eps: float

    def __post_init__(self):
        if self.dy <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.dy}")
        if self.m < 2:
            raise ValueError(f"half-width index must be >= 2, got {self.m}")
        if self.eps <= 0:
            raise ValueError(f"regime threshold must be positive, got {self.eps}")

    @property
    def size(self) -> int:
        return 2 * self.m + 1

    @property
    def points(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(-self.m, self.m + 1)


@dataclass(frozen=True)
class TridiagOperator:
    """Three-band operator with boundary rows, acting on length-2m+1 vectors."""

    regime: Regime
    boundary: BoundaryKind
    m: int
    sub: float
    diag: float
    sup: float
    first: tuple[float, float] = field(default=(0.0, 0.0))  # (diag, off-diag)
    last: tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def size(self) -> int:
        return 2 * self.m + 1

    def banded(self) -> np.ndarray:
        """(3, size) band storage: rows are super/main/sub diagonals."""
        n = self.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.sup
        ab[1, :] = self.diag
        ab[2, :-1] = self.sub
        ab[1, 0], ab[0, 1] = self.first
        ab[1, -1], ab[2, -2] = self.last
        return ab


def coeffs(params: HestonParams, v: float, h: float, dy: float) -> Coeffs:
    """Advection/diffusion weights for variance level v."""
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v}")
    if h <= 0 or dy <= 0:
        raise ValueError("time step and grid spacing must be positive")
    alpha = h * mu_y(params, v) / (2.0 * dy)
    beta = h * params.rho_bar**2 * v / (2.0 * dy**2)
    return Coeffs(alpha=alpha, beta=beta)


def select_regime(v: float, eps: float) -> Regime:
    """Implicit strictly above the threshold, explicit at or below it."""
    if eps <= 0:
        raise ValueError(f"threshold must be positive, got {eps}")
    return Regime.IMPLICIT if v > eps else Regime.EXPLICIT


def build_operator(c: Coeffs, m: int, regime: Regime,
                   boundary: BoundaryKind = BoundaryKind.NEUMANN,
                   v: float | None = None) -> TridiagOperator:
    """Assemble the stepping operator, enforcing its stochasticity condition."""
    a, b = c.alpha, c.beta
    if regime is Regime.IMPLICIT:
        if not b > abs(a):
            raise StabilityViolation(regime, a, b, v, "requires beta > |alpha|")
        sub, diag, sup = a - b, 1.0 + 2.0 * b, -a - b
        if boundary is BoundaryKind.NEUMANN:
            first = (1.0 + 2.0 * b, -2.0 * b)
            last = (1.0 + 2.0 * b, -2.0 * b)
        else:
            first = (1.0, 0.0)
            last = (1.0, 0.0)
    else:
        if 2.0 * b + 2.0 * abs(a) > 1.0:
            raise StabilityViolation(regime, a, b, v, "requires 2 beta + 2|alpha| <= 1")
        sub = b + 2.0 * abs(a) * (a < 0)
        diag = 1.0 - 2.0 * b - 2.0 * abs(a)
        sup = b + 2.0 * abs(a) * (a > 0)
        if boundary is BoundaryKind.NEUMANN:
            first = (diag, 2.0 * b + 2.0 * abs(a))
            last = (diag, 2.0 * b + 2.0 * abs(a))
        else:
            first = (1.0, 0.0)
            last = (1.0, 0.0)
    return TridiagOperator(regime=regime, boundary=boundary, m=m,
                           sub=sub, diag=diag, sup=sup, first=first, last=last)


def thomas_solve(op: TridiagOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve A u = rhs by forward elimination / back substitution.

    Requires an implicit operator.  Diagonal dominance guarantees positive
    pivots; a nonpositive pivot therefore signals an internal invariant
    failure rather than a user error.
    """
    if op.regime is not Regime.IMPLICIT:
        raise ValueError("thomas_solve needs an implicit operator")
    n = op.size
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},), got {rhs.shape}")
    ab = op.banded()
    sup, diag, sub = ab[0], ab[1], ab[2]

    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if piv <= 0:
        raise RuntimeError("pivot breakdown in tridiagonal elimination (row 0)")
    cp[0] = sup[1] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        lo = sub[i - 1]
        piv = diag[i] - lo * cp[i - 1]
        if piv <= 0:
            raise RuntimeError(f"pivot breakdown in tridiagonal elimination (row {i})")
        cp[i] = sup[i + 1] / piv if i + 1 < n else 0.0
        dp[i] = (rhs[i] - lo * dp[i - 1]) / piv
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def apply_explicit(op: TridiagOperator, values: np.ndarray) -> np.ndarray:
    """Apply the explicit stencil C to a value vector."""
    if op.regime is not Regime.EXPLICIT:
        raise ValueError("apply_explicit needs an explicit operator")
    n = op.size
    values = np.asarray(values, dtype=float)
    if values.shape != (n,):
        raise ValueError(f"values must have shape ({n},), got {values.shape}")
    out = np.empty(n)
    out[1:-1] = op.sub * values[:-2] + op.diag * values[1:-1] + op.sup * values[2:]
    out[0] = op.first[0] * values[0] + op.first[1] * values[1]
    out[-1] = op.last[0] * values[-1] + op.last[1] * values[-2]
    return out


# ---------------------------------------------------------------------------
# Regime threshold selection
# ---------------------------------------------------------------------------
#
# Operationally the threshold eps must split the variance range [0, v_top]
# visited by the lattice so that the implicit condition beta > |alpha| holds
# strictly above it and the explicit condition 2 beta + 2|alpha| <= 1 holds
# at or below it.  Both conditions are piecewise linear in v (the drift is
# affine), so the admissible window can be computed exactly.


def _bad_intervals(slopes_and_consts, lo: float, hi: float, kink: float | None):
    """Intervals of [lo, hi] where a piecewise-linear g(v) is <= 0.

    slopes_and_consts yields g restricted to each segment as (a, b) with
    g(v) = a v + b; segments are split at the kink of |mu_y|.
    """
    breaks = [lo, hi]
    if kink is not None and lo < kink < hi:
        breaks.insert(1, kink)
    bad = []
    for (a, b), (x0, x1) in zip(slopes_and_consts, zip(breaks[:-1], breaks[1:])):
        g0 = a * x0 + b
        g1 = a * x1 + b
        if g0 <= 0 and g1 <= 0:
            bad.append((x0, x1))
        elif g0 <= 0 or g1 <= 0:
            root = -b / a
            bad.append((x0, root) if g0 <= 0 else (root, x1))
    return bad


def _segment_forms(params: HestonParams, kink: float | None, lo: float, hi: float,
                   scale_v: float, scale_mu: float, shift: float):
    """Linear forms of scale_v*v - scale_mu*|mu_y(v)| + shift per segment."""
    c0, c1 = drift_coeffs(params)
    breaks = [lo, hi]
    if kink is not None and lo < kink < hi:
        breaks.insert(1, kink)
    forms = []
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (x0 + x1)
        sgn = 1.0 if c0 + c1 * mid >= 0 else -1.0
        forms.append((scale_v - scale_mu * sgn * c1, -scale_mu * sgn * c0 + shift))
    return forms


def feasible_eps_window(params: HestonParams, h: float, dy: float,
                        v_top: float) -> tuple[float, float]:
    """Admissible threshold range (lo, hi) over the variance interval.

    lo is the supremum of variance levels violating the implicit condition;
    hi the infimum violating the explicit one (inf when none does).  Any
    eps with lo <= eps < hi keeps both schemes stochastic on [0, v_top].
    """
    c0, c1 = drift_coeffs(params)
    kink = -c0 / c1 if c1 != 0 else None
    rb2 = params.rho_bar**2

    # implicit: rb2*v - dy*|mu(v)| > 0 ; bad where <= 0
    forms_i = _segment_forms(params, kink, 0.0, v_top, rb2, dy, 0.0)
    bad_i = _bad_intervals(forms_i, 0.0, v_top, kink)
    eps_lo = max((iv[1] for iv in bad_i), default=0.0)

    # explicit: 1 - (h/dy^2)*rb2*v - (h/dy)*|mu(v)| >= 0 ; bad where < 0
    forms_e = _segment_forms(params, kink, 0.0, v_top, -h * rb2 / dy**2, h / dy, 1.0)
    bad_e = _bad_intervals(forms_e, 0.0, v_top, kink)
    eps_hi = min((iv[0] for iv in bad_e), default=math.inf)
    return eps_lo, eps_hi


def lattice_feasible(params: HestonParams, h: float, dy: float, eps: float,
                     variances: np.ndarray) -> bool:
    """Exact regime-precondition check on a concrete set of variance levels."""
    c0, c1 = drift_coeffs(params)
    v = np.asarray(variances, dtype=float)
    absmu = np.abs(c0 + c1 * v)
    rb2 = params.rho_bar**2
    impl = v > eps
    expl = ~impl
    ok_impl = np.all(rb2 * v[impl] > dy * absmu[impl])
    ok_expl = np.all((h / dy**2) * rb2 * v[expl] + (h / dy) * absmu[expl] <= 1.0)
    return bool(ok_impl and ok_expl)


def _lattice_variances(params: HestonParams, h: float, n_steps: int) -> np.ndarray:
    off = np.arange(-n_steps, n_steps + 1)
    root = np.sqrt(params.v0) + 0.5 * params.sigma * off * np.sqrt(h)
    return np.where(root > 0.0, root * root, 0.0)


def default_thresholds(params: HestonParams, h: float, dy: float,
                       maturity: float) -> float:
    """Pick the regime threshold for a sized grid.

    Preference order: the closed-form value 4 dy |mu_y(0)| / rho_bar^2
    + sigma^2 h (a factor-2 margin over the asymptotic constraint on the
    threshold constant, with a positive floor), then the midpoint of the
    exact admissible window, then its lower edge.  Every candidate is
    verified against the variance levels the lattice actually visits; if
    none survives the configuration is rejected.
    """
    n_steps = max(1, int(round(maturity / h)))
    variances = _lattice_variances(params, h, n_steps)
    v_top = float(variances[-1])
    c0, _ = drift_coeffs(params)
    rb2 = params.rho_bar**2

    eps_formula = 4.0 * dy * abs(c0) / rb2 + params.sigma**2 * h
    eps_lo, eps_hi = feasible_eps_window(params, h, dy, v_top)
    hi_cap = eps_hi if math.isfinite(eps_hi) else max(2.0 * v_top, 2.0 * eps_lo, eps_formula)

    candidates = [eps_formula]
    if eps_lo > 0.0:
        candidates.append(math.sqrt(eps_lo * hi_cap))
    elif math.isfinite(eps_hi):
        candidates.append(min(eps_formula, 0.5 * eps_hi))
    candidates.append(eps_lo + 1e-12 * max(1.0, eps_lo))

    for eps in candidates:
        if eps > 0 and lattice_feasible(params, h, dy, eps, variances):
            return float(eps)
    alpha = h * abs(mu_y(params, v_top)) / (2 * dy)
    beta = h * rb2 * v_top / (2 * dy**2)
    raise StabilityViolation(Regime.IMPLICIT, alpha, beta, v_top,
                             f"no admissible threshold for dy={dy:g}, h={h:g}")


def build_grid(n_space: int, h: float, params: HestonParams, maturity: float,
               policy: GridPolicy | None = None) -> YGrid:
    """Size the log-price grid and pick its regime threshold.

    Default half-width: k_width conditional standard deviations of the
    transformed coordinate, k_width * rho_bar * sqrt(v_ref T) with
    v_ref = max(v0, theta), plus a drift allowance
    max(|mu_y(0)|, |mu_y(v_ref)|) * T.  When no regime threshold works at
    that width (strong convection), the width is scanned downwards toward
    the diffusion core, then upwards, until thresholds become admissible.
    """
    if policy is None:
        policy = GridPolicy()
    if n_space < 4 or n_space % 2 != 0:
        raise ValueError(f"n_space must be even and >= 4, got {n_space}")
    if h <= 0 or maturity <= 0:
        raise ValueError("time step and maturity must be positive")

    m = n_space // 2
    v_ref = max(params.v0, params.theta)
    core = policy.k_width * params.rho_bar * math.sqrt(v_ref * maturity)
    drift_pad = max(abs(mu_y(params, 0.0)), abs(mu_y(params, v_ref))) * maturity

    def make(half_width: float) -> YGrid:
        dy = 2.0 * half_width / n_space
        eps = policy.eps if policy.eps is not None else default_thresholds(
            params, h, dy, maturity)
        return YGrid(y0=params.y0, dy=dy, m=m, eps=eps)

    if policy.half_width is not None:
        return make(policy.half_width)

    base = core + drift_pad
    widths = [base]
    if policy.adapt:
        # interpolate the drift allowance toward the diffusion core, then
        # try a few stretched grids
        widths += [core + drift_pad * f for f in np.linspace(0.9, 0.0, 10)]
        widths += [base * f for f in (1.25, 1.5, 2.0)]
    err: StabilityViolation | None = None
    for w in widths:
        try:
            return make(w)
        except StabilityViolation as exc:
            err = exc
    assert err is not None
    raise err
