"""Hot loops of the backward induction.

Two interchangeable backends run the per-node work of one time step
(branch mixing, tridiagonal solve or explicit stencil, discount, obstacle
max, knockout blend):

* ``numba``: JIT-compiled kernel, parallel over variance nodes;
* ``numpy``: vectorised stencils plus LAPACK banded solves via scipy.

Select with the ``TREEFD_BACKEND`` environment variable or per call;
default is numba when importable.  Results agree to solver round-off.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import solve_banded

BACKEND_ENV = "TREEFD_BACKEND"

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(fn):
            return fn

        return wrap

    prange = range  # type: ignore


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def resolve_backend(name: str | None = None) -> str:
    """Pick the backend: explicit argument, then env var, then best available."""
    chosen = name or os.environ.get(BACKEND_ENV) or ("numba" if HAS_NUMBA else "numpy")
    chosen = chosen.lower()
    if chosen not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {chosen!r}; use 'numba' or 'numpy'")
    if chosen == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return chosen


@njit(cache=True, parallel=True)
def _step_numba(nxt, out, kd, ku, pu, mi, regime,
                sub, ipiv, cp,
                elo, edi, eup, efd, efo, eld, elf,
                obst, use_obst, theta, use_theta, rebate, disc):  # pragma: no cover - compiled
    n1, w = out.shape
    for k in prange(n1):
        m = mi[k]
        a = pu[k]
        b = 1.0 - a
        rowu = nxt[ku[k]]
        rowd = nxt[kd[k]]
        mixed = np.empty(w)
        for j in range(w):
            mixed[j] = a * rowu[j] + b * rowd[j]
        u = np.empty(w)
        if regime[m] == 1:
            # forward elimination / back substitution with cached factors
            dp = np.empty(w)
            dp[0] = mixed[0] * ipiv[m, 0]
            for i in range(1, w):
                dp[i] = (mixed[i] - sub[m, i] * dp[i - 1]) * ipiv[m, i]
            u[w - 1] = dp[w - 1]
            for i in range(w - 2, -1, -1):
                u[i] = dp[i] - cp[m, i] * u[i + 1]
        else:
            lo = elo[m]
            di = edi[m]
            up = eup[m]
            for j in range(1, w - 1):
                u[j] = lo * mixed[j - 1] + di * mixed[j] + up * mixed[j + 1]
            u[0] = efd[m] * mixed[0] + efo[m] * mixed[1]
            u[w - 1] = eld[m] * mixed[w - 1] + elf[m] * mixed[w - 2]
        for j in range(w):
            c = disc * u[j]
            if use_obst:
                o = obst[m, j]
                if o > c:
                    c = o
            if use_theta:
                th = theta[m, j]
                c = th * c + (1.0 - th) * rebate
            out[k, j] = c


def _step_numpy(nxt, out, kd, ku, pu, mi, regime,
                banded, elo, edi, eup, efd, efo, eld, elf,
                obst, use_obst, theta, use_theta, rebate, disc):
    mixed = pu[:, None] * nxt[ku] + (1.0 - pu)[:, None] * nxt[kd]
    u = np.empty_like(mixed)
    node_regime = regime[mi]

    impl = np.nonzero(node_regime == 1)[0]
    for k in impl:
        u[k] = solve_banded((1, 1), banded[mi[k]], mixed[k],
                            check_finite=False, overwrite_b=False)

    expl = np.nonzero(node_regime == 0)[0]
    if expl.size:
        me = mi[expl]
        blk = mixed[expl]
        ue = np.empty_like(blk)
        ue[:, 1:-1] = (elo[me, None] * blk[:, :-2] + edi[me, None] * blk[:, 1:-1]
                       + eup[me, None] * blk[:, 2:])
        ue[:, 0] = efd[me] * blk[:, 0] + efo[me] * blk[:, 1]
        ue[:, -1] = eld[me] * blk[:, -1] + elf[me] * blk[:, -2]
        u[expl] = ue

    cand = disc * u
    if use_obst:
        np.maximum(obst[mi], cand, out=cand)
    if use_theta:
        th = theta[mi]
        cand = th * cand + (1.0 - th) * rebate
    out[:] = cand


class StepTables:
    """Per-offset operator data shared by every backward step.

    A lattice with N rows visits at most 2N+1 distinct variance levels,
    indexed by the offset m = 2k - n; all per-level quantities (regime,
    solver factors, stencil weights, obstacle rows, knockout weights) are
    precomputed once against that axis.
    """

    def __init__(self, regime: np.ndarray, banded: np.ndarray | None,
                 expl_rows: np.ndarray, width: int, backend: str):
        self.regime = regime.astype(np.uint8)
        self.backend = backend
        self.width = width
        n_off = regime.shape[0]
        # explicit stencil scalars: lo, diag, up, first row, last row
        self.elo, self.edi, self.eup, self.efd, self.efo, self.eld, self.elf = (
            np.ascontiguousarray(expl_rows[:, i]) for i in range(7))
        self.banded = banded
        if backend == "numba":
            self.sub = np.zeros((n_off, width))
            self.ipiv = np.ones((n_off, width))
            self.cp = np.zeros((n_off, width))
            if banded is not None:
                self._factorise_all(banded)
            self.banded = None

    def _factorise_all(self, banded: np.ndarray) -> None:
        """Cache elimination factors for every implicit offset at once.

        The forward recurrence is sequential along the grid but independent
        across offsets, so it runs vectorised over them.
        """
        idx = np.nonzero(self.regime == 1)[0]
        if idx.size == 0:
            return
        w = self.width
        ab = banded[idx]
        sup, diag, sub = ab[:, 0, :], ab[:, 1, :], ab[:, 2, :]
        cp = np.zeros((idx.size, w))
        ipiv = np.empty((idx.size, w))
        subk = np.zeros((idx.size, w))
        piv = diag[:, 0].copy()
        if np.any(piv <= 0):
            raise RuntimeError("pivot breakdown while caching solver factors")
        ipiv[:, 0] = 1.0 / piv
        cp[:, 0] = sup[:, 1] * ipiv[:, 0]
        for i in range(1, w):
            subk[:, i] = sub[:, i - 1]
            piv = diag[:, i] - sub[:, i - 1] * cp[:, i - 1]
            if np.any(piv <= 0):
                raise RuntimeError("pivot breakdown while caching solver factors")
            ipiv[:, i] = 1.0 / piv
            cp[:, i] = sup[:, i + 1] * ipiv[:, i] if i + 1 < w else 0.0
        self.sub[idx] = subk
        self.ipiv[idx] = ipiv
        self.cp[idx] = cp


def run_step(tables: StepTables, nxt: np.ndarray, out: np.ndarray,
             kd: np.ndarray, ku: np.ndarray, pu: np.ndarray, mi: np.ndarray,
             obst: np.ndarray | None, theta: np.ndarray | None,
             rebate: float, disc: float) -> None:
    """Advance one backward step, writing the n-row surface into ``out``."""
    w = tables.width
    dummy = _EMPTY_CACHE.setdefault(w, np.zeros((1, w)))
    use_obst = obst is not None
    use_theta = theta is not None
    if tables.backend == "numba":
        _step_numba(nxt, out, kd, ku, pu, mi, tables.regime,
                    tables.sub, tables.ipiv, tables.cp,
                    tables.elo, tables.edi, tables.eup,
                    tables.efd, tables.efo, tables.eld, tables.elf,
                    obst if use_obst else dummy, use_obst,
                    theta if use_theta else dummy, use_theta,
                    rebate, disc)
    else:
        _step_numpy(nxt, out, kd, ku, pu, mi, tables.regime,
                    tables.banded, tables.elo, tables.edi, tables.eup,
                    tables.efd, tables.efo, tables.eld, tables.elf,
                    obst if use_obst else dummy, use_obst,
                    theta if use_theta else dummy, use_theta,
                    rebate, disc)


_EMPTY_CACHE: dict[int, np.ndarray] = {}
