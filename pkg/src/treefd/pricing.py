"""Backward induction over the joint (variance node, log-price grid) state.

Each step n mixes the two matched variance successors of every node, pushes
the mixed vector through the node's transition operator, discounts, applies
the early-exercise obstacle (American) and the knockout rule (barrier), and
reads the price off the root state (Y0, V0) after the final step.

Up-and-out handling: states at or beyond the barrier are worthless; the
per-step knockout projects onto the alive region with a cell-averaged
weight (the fraction of each grid cell below the cut) against a cut pulled
down by exp(-0.5826 sqrt(v h)), the standard continuity correction mapping
per-step monitoring onto a continuously monitored contract.  For American
contracts the dead zone carries the exercise value at the barrier instead
of zero: a continuously exercisable holder stops at the barrier rather
than forfeiting, so the knocked value plateaus at payoff(H).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fd import (
    BoundaryKind,
    GridPolicy,
    Regime,
    YGrid,
    apply_explicit,
    build_grid,
    build_operator,
    coeffs,
    select_regime,
    thomas_solve,
)
from .model import HestonParams, s_of
from .vol_tree import VolLattice, build_lattice

BARRIER_SHIFT_COEF = 0.5826  # zeta(1/2)/sqrt(2 pi), discrete-to-continuous barrier shift


class OptionKind(enum.Enum):
    PUT = "put"
    CALL = "call"


class ExerciseStyle(enum.Enum):
    EUROPEAN = "european"
    AMERICAN = "american"


@dataclass(frozen=True)
class UpOutBarrier:
    """Knock-out once the spot trades at or above ``level``."""

    level: float

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError(f"barrier level must be positive, got {self.level}")


@dataclass(frozen=True)
class OptionSpec:
    kind: OptionKind
    style: ExerciseStyle
    strike: float
    maturity: float
    barrier: UpOutBarrier | None = None

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")

    def payoff(self, s):
        if self.kind is OptionKind.PUT:
            return np.maximum(self.strike - s, 0.0)
        return np.maximum(s - self.strike, 0.0)


@dataclass
class ValueSurface:
    """Option values at one time step: rows are variance nodes k = 0..n."""

    step: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[0] != self.step + 1:
            raise ValueError("surface must have step+1 variance rows")


@dataclass(frozen=True)
class PriceResult:
    price: float
    n_steps: int
    implicit_nodes: int
    explicit_nodes: int
    stability_margin: float
    eps: float
    dy: float
    half_width: float
    backend: str


def obstacle(y: float, v: float, spec: OptionSpec, params: HestonParams) -> float:
    """Exercise value at a transformed state, zero at/beyond the barrier."""
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v}")
    s = s_of(params, y, v)
    if spec.barrier is not None and s >= spec.barrier.level:
        return 0.0
    return float(spec.payoff(s))


def _obstacle_row(ys: np.ndarray, v: float, spec: OptionSpec,
                  params: HestonParams) -> np.ndarray:
    s = s_of(params, ys, v)
    pay = spec.payoff(s)
    if spec.barrier is not None:
        pay = np.where(s >= spec.barrier.level, 0.0, pay)
    return pay


def _barrier_rebate(spec: OptionSpec) -> float:
    """Dead-zone value: payoff at the barrier for American, zero otherwise."""
    if spec.barrier is None:
        return 0.0
    if spec.style is ExerciseStyle.AMERICAN:
        return float(spec.payoff(np.float64(spec.barrier.level)))
    return 0.0


def _alive_fraction(ys: np.ndarray, dy: float, v: float, spec: OptionSpec,
                    params: HestonParams, h: float, shifted: bool) -> np.ndarray:
    """Per-cell weight in [0, 1]: fraction of the dy-cell below the cut."""
    assert spec.barrier is not None
    y_cut = math.log(spec.barrier.level) - (params.rho / params.sigma) * v
    if shifted:
        y_cut -= BARRIER_SHIFT_COEF * math.sqrt(max(v, 0.0) * h)
    return np.clip((y_cut - ys) / dy + 0.5, 0.0, 1.0)


def _knockout(vals: np.ndarray, ys: np.ndarray, dy: float, v: float,
              spec: OptionSpec, params: HestonParams, h: float,
              shifted: bool) -> np.ndarray:
    theta = _alive_fraction(ys, dy, v, spec, params, h, shifted)
    return theta * vals + (1.0 - theta) * _barrier_rebate(spec)


def terminal_surface(lattice: VolLattice, grid: YGrid, params: HestonParams,
                     spec: OptionSpec) -> ValueSurface:
    """Option values at maturity on every terminal variance node."""
    n = lattice.n_steps
    ys = grid.points
    vals = np.empty((n + 1, grid.size))
    for k in range(n + 1):
        v = lattice.value(n, k)
        row = _obstacle_row(ys, v, spec, params)
        if spec.barrier is not None:
            row = _knockout(row, ys, grid.dy, v, spec, params, lattice.h, shifted=False)
        vals[k] = row
    return ValueSurface(step=n, values=vals)


def backward_step(surface_next: ValueSurface, lattice: VolLattice, grid: YGrid,
                  params: HestonParams, spec: OptionSpec, n: int,
                  boundary: BoundaryKind = BoundaryKind.NEUMANN) -> ValueSurface:
    """Reference one-step rollback from step n+1 to step n.

    Mix-then-propagate: the two successor slices are combined with the jump
    probabilities first, so each node costs a single operator application.
    """
    if surface_next.step != n + 1:
        raise ValueError(f"expected surface at step {n + 1}, got {surface_next.step}")
    h = lattice.h
    ys = grid.points
    disc = math.exp(-params.r * h)
    out = np.empty((n + 1, grid.size))
    for k in range(n + 1):
        v = lattice.value(n, k)
        match = lattice.match_node(n, k)
        mixed = (match.p_u * surface_next.values[match.k_u]
                 + match.p_d * surface_next.values[match.k_d])
        c = coeffs(params, v, h, grid.dy)
        regime = select_regime(v, grid.eps)
        op = build_operator(c, grid.m, regime, boundary, v=v)
        u = thomas_solve(op, mixed) if regime is Regime.IMPLICIT else apply_explicit(op, mixed)
        cand = disc * u
        if spec.style is ExerciseStyle.AMERICAN:
            cand = np.maximum(_obstacle_row(ys, v, spec, params), cand)
        if spec.barrier is not None:
            cand = _knockout(cand, ys, grid.dy, v, spec, params, h, shifted=True)
        out[k] = cand
    return ValueSurface(step=n, values=out)


def _build_tables(lattice: VolLattice, grid: YGrid, params: HestonParams,
                  spec: OptionSpec, boundary: BoundaryKind, backend: str):
    """Assemble per-offset operator/obstacle/knockout tables for the kernels."""
    n = lattice.n_steps
    v_all = lattice.values_by_offset
    n_off = v_all.shape[0]
    w = grid.size
    ys = grid.points

    regime = np.zeros(n_off, dtype=np.uint8)
    banded = np.zeros((n_off, 3, w))
    expl_rows = np.zeros((n_off, 7))
    margin = math.inf
    n_impl_off = 0
    for i, v in enumerate(v_all):
        # offsets +-n only occur on the terminal row, where no operator acts
        if abs(i - n) > n - 1:
            continue
        c = coeffs(params, float(v), lattice.h, grid.dy)
        reg = select_regime(float(v), grid.eps)
        op = build_operator(c, grid.m, reg, boundary, v=float(v))
        if reg is Regime.IMPLICIT:
            regime[i] = 1
            banded[i] = op.banded()
            node_margin = c.beta - abs(c.alpha)
            n_impl_off += 1
        else:
            expl_rows[i] = (op.sub, op.diag, op.sup, *op.first, *op.last)
            node_margin = 1.0 - 2.0 * c.beta - 2.0 * abs(c.alpha)
        margin = min(margin, node_margin)

    tables = _kernels.StepTables(regime, banded if n_impl_off else None,
                                 expl_rows, w, backend)

    need_obstacle = spec.style is ExerciseStyle.AMERICAN
    obst = None
    if need_obstacle:
        obst = np.empty((n_off, w))
        for i, v in enumerate(v_all):
            obst[i] = _obstacle_row(ys, float(v), spec, params)

    theta = None
    if spec.barrier is not None:
        theta = np.empty((n_off, w))
        for i, v in enumerate(v_all):
            theta[i] = _alive_fraction(ys, grid.dy, float(v), spec, params,
                                       lattice.h, shifted=True)
    return tables, obst, theta, margin


def price(params: HestonParams, spec: OptionSpec, n_time: int, n_space: int,
          boundary: BoundaryKind = BoundaryKind.NEUMANN,
          policy: GridPolicy | None = None, backend: str | None = None,
          threads: int = 0) -> PriceResult:
    """Price an option with n_time tree steps and n_space grid intervals."""
    if n_time < 1:
        raise ValueError(f"n_time must be >= 1, got {n_time}")
    backend = _kernels.resolve_backend(backend)
    if backend == "numba" and threads > 0:
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))

    h = spec.maturity / n_time
    lattice = build_lattice(params, h, n_time)
    grid = build_grid(n_space, h, params, spec.maturity, policy)
    n = n_time

    tables, obst, theta, margin = _build_tables(lattice, grid, params, spec,
                                                boundary, backend)
    kd_all, ku_all, pu_all = lattice.match_table()
    rebate = _barrier_rebate(spec)
    disc = math.exp(-params.r * h)

    buf_a = terminal_surface(lattice, grid, params, spec).values
    buf_b = np.empty_like(buf_a)
    implicit_nodes = 0
    explicit_nodes = 0
    for step in range(n - 1, -1, -1):
        lo = step * (step + 1) // 2
        hi = lo + step + 1
        mi = (2 * np.arange(step + 1) - step) + n
        _kernels.run_step(tables, buf_a[: step + 2], buf_b[: step + 1],
                          kd_all[lo:hi], ku_all[lo:hi], pu_all[lo:hi], mi,
                          obst, theta, rebate, disc)
        n_impl = int(np.count_nonzero(tables.regime[mi]))
        implicit_nodes += n_impl
        explicit_nodes += step + 1 - n_impl
        buf_a, buf_b = buf_b, buf_a

    root = float(buf_a[0, grid.m])
    # the root state is a point, not a cell: a contract already at or beyond
    # the barrier is void regardless of the dead-zone plateau
    if spec.barrier is not None and params.s0 >= spec.barrier.level:
        root = 0.0
    return PriceResult(price=root, n_steps=n, implicit_nodes=implicit_nodes,
                       explicit_nodes=explicit_nodes, stability_margin=margin,
                       eps=grid.eps, dy=grid.dy,
                       half_width=grid.dy * grid.m, backend=backend)
