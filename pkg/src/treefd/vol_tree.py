"""Binomial lattice for the square-root variance process.

Node values at row n are

    v[n, k] = (sqrt(V0) + (sigma/2) (2k - n) sqrt(h))^2   if the root is > 0
            = 0                                            otherwise,

so a node depends on (n, k) only through the offset m = 2k - n, and the
whole tree lives on 2N+1 distinct variance levels.  Successors implement
multiple jumps: from (n, k) the chain moves to row n+1 indices k_d <= k and
k_u >= k+1 chosen so the one-step mean matches the drift v + mu_v(v) h,
with the up-probability clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import HestonParams, mu_v


class DegenerateLatticeError(ValueError):
    """Both matched successors collapsed onto the same variance value."""


@dataclass(frozen=True)
class NodeMatch:
    """Successor indices and jump probabilities for one lattice node."""

    k_d: int
    k_u: int
    p_u: float

    @property
    def p_d(self) -> float:
        return 1.0 - self.p_u


class VolLattice:
    """Triangular array of variance nodes, indexed by row n and 0 <= k <= n."""

    def __init__(self, params: HestonParams, h: float, n_steps: int):
        if h <= 0:
            raise ValueError(f"time step must be positive, got {h}")
        if n_steps < 1:
            raise ValueError(f"need at least one step, got {n_steps}")
        self.params = params
        self.h = float(h)
        self.n_steps = int(n_steps)
        offsets = np.arange(-n_steps, n_steps + 1)
        root = np.sqrt(params.v0) + 0.5 * params.sigma * offsets * np.sqrt(h)
        # values_by_offset[m + n_steps] is the node value at offset m = 2k - n
        self.values_by_offset = np.where(root > 0.0, root * root, 0.0)
        self._matches: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @property
    def top(self) -> float:
        """Largest variance value anywhere on the lattice."""
        return float(self.values_by_offset[-1])

    def value(self, n: int, k: int) -> float:
        self._check_node(n, k, self.n_steps)
        return float(self.values_by_offset[2 * k - n + self.n_steps])

    def row(self, n: int) -> np.ndarray:
        """All n+1 node values of row n, nondecreasing in k."""
        if not 0 <= n <= self.n_steps:
            raise IndexError(f"row {n} outside 0..{self.n_steps}")
        k = np.arange(n + 1)
        return self.values_by_offset[2 * k - n + self.n_steps]

    def _check_node(self, n: int, k: int, max_row: int) -> None:
        if not 0 <= n <= max_row:
            raise IndexError(f"row {n} outside 0..{max_row}")
        if not 0 <= k <= n:
            raise IndexError(f"index {k} outside 0..{n} in row {n}")

    def match_node(self, n: int, k: int, drift: Callable[[float], float] | None = None) -> NodeMatch:
        """Match node (n, k) to its row-(n+1) successors.

        k_d is the largest k* <= k whose successor value lies at or below the
        drift target v + mu_v(v) h (0 if none); k_u is the smallest k* >= k+1
        at or above it (n+1 if none).  The up-probability makes the one-step
        mean exact whenever no clamping occurs.
        """
        self._check_node(n, k, self.n_steps - 1)
        if drift is None:
            drift = lambda v: mu_v(self.params, v)
        v = self.value(n, k)
        target = v + drift(v) * self.h
        nxt = self.row(n + 1)

        # rows are nondecreasing, so both searches are binary
        i = int(np.searchsorted(nxt[: k + 1], target, side="right")) - 1
        k_d = i if i >= 0 else 0
        j = int(np.searchsorted(nxt[k + 1 :], target, side="left"))
        k_u = k + 1 + j if j < n + 1 - k else n + 1

        lo, hi = nxt[k_d], nxt[k_u]
        if hi <= lo:
            raise DegenerateLatticeError(
                f"successors of node ({n}, {k}) collapse: v={v:g}, target={target:g}, "
                f"both matched values equal {lo:g}"
            )
        p_u = min(max((target - lo) / (hi - lo), 0.0), 1.0)
        return NodeMatch(k_d=k_d, k_u=k_u, p_u=p_u)

    def match_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Precompute matches for every node; cached after the first call.

        Returns (k_d, k_u, p_u) as flat arrays over nodes ordered row by row;
        row n starts at offset n*(n+1)//2.
        """
        if self._matches is not None:
            return self._matches
        n_nodes = self.n_steps * (self.n_steps + 1) // 2
        kd = np.empty(n_nodes, dtype=np.int64)
        ku = np.empty(n_nodes, dtype=np.int64)
        pu = np.empty(n_nodes, dtype=np.float64)
        pos = 0
        for n in range(self.n_steps):
            for k in range(n + 1):
                m = self.match_node(n, k)
                kd[pos], ku[pos], pu[pos] = m.k_d, m.k_u, m.p_u
                pos += 1
        self._matches = (kd, ku, pu)
        return self._matches


def build_lattice(params: HestonParams, h: float, n_steps: int) -> VolLattice:
    """Construct the variance lattice for time step h and n_steps rows."""
    return VolLattice(params, h, n_steps)
