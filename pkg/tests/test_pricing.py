import math

import numpy as np
import pytest

from treefd import (
    BoundaryKind,
    ExerciseStyle,
    GridPolicy,
    OptionKind,
    OptionSpec,
    Regime,
    UpOutBarrier,
    backward_step,
    build_grid,
    build_lattice,
    build_operator,
    coeffs,
    mu_v,
    obstacle,
    price,
    select_regime,
    terminal_surface,
    thomas_solve,
    to_y,
)
from treefd._kernels import available_backends
from treefd.pricing import ValueSurface

from conftest import barrier_params, table1_params, up_out_call, vanilla_put


# ---------------------------------------------------------------------------
# dense brute-force oracle: explicit matrix inverses, explicit successor
# search, full path enumeration for the European case
# ---------------------------------------------------------------------------

def _oracle_lattice_value(params, h, n, k):
    root = math.sqrt(params.v0) + 0.5 * params.sigma * (2 * k - n) * math.sqrt(h)
    return root * root if root > 0 else 0.0


def _oracle_match(params, h, n, k):
    v = _oracle_lattice_value(params, h, n, k)
    target = v + mu_v(params, v) * h
    nxt = [_oracle_lattice_value(params, h, n + 1, j) for j in range(n + 2)]
    down = [j for j in range(k + 1) if target >= nxt[j]]
    up = [j for j in range(k + 1, n + 2) if target <= nxt[j]]
    k_d = max(down) if down else 0
    k_u = min(up) if up else n + 1
    p_u = min(max((target - nxt[k_d]) / (nxt[k_u] - nxt[k_d]), 0.0), 1.0)
    return k_d, k_u, p_u


def _oracle_transition(params, grid, h, v):
    m = grid.m
    n = 2 * m + 1
    c = coeffs(params, v, h, grid.dy)
    a, b = c.alpha, c.beta
    if select_regime(v, grid.eps) is Regime.IMPLICIT:
        mat = np.zeros((n, n))
        for j in range(1, n - 1):
            mat[j, j - 1] = a - b
            mat[j, j] = 1 + 2 * b
            mat[j, j + 1] = -a - b
        mat[0, 0], mat[0, 1] = 1 + 2 * b, -2 * b
        mat[-1, -1], mat[-1, -2] = 1 + 2 * b, -2 * b
        return np.linalg.inv(mat)
    mat = np.zeros((n, n))
    lo = b + 2 * abs(a) * (a < 0)
    up = b + 2 * abs(a) * (a > 0)
    d = 1 - 2 * b - 2 * abs(a)
    for j in range(1, n - 1):
        mat[j, j - 1], mat[j, j], mat[j, j + 1] = lo, d, up
    mat[0, 0], mat[0, 1] = d, 2 * b + 2 * abs(a)
    mat[-1, -1], mat[-1, -2] = d, 2 * b + 2 * abs(a)
    return mat


def dense_oracle_price(params, spec, n_time, n_space, policy):
    h = spec.maturity / n_time
    grid = build_grid(n_space, h, params, spec.maturity, policy)
    ys = grid.points
    disc = math.exp(-params.r * h)

    def payoff_row(v):
        s = np.exp(ys + (params.rho / params.sigma) * v)
        return np.maximum(spec.strike - s, 0.0) if spec.kind is OptionKind.PUT \
            else np.maximum(s - spec.strike, 0.0)

    surf = [payoff_row(_oracle_lattice_value(params, h, n_time, k))
            for k in range(n_time + 1)]
    for n in range(n_time - 1, -1, -1):
        new = []
        for k in range(n + 1):
            v = _oracle_lattice_value(params, h, n, k)
            k_d, k_u, p_u = _oracle_match(params, h, n, k)
            mixed = p_u * surf[k_u] + (1 - p_u) * surf[k_d]
            cand = disc * (_oracle_transition(params, grid, h, v) @ mixed)
            if spec.style is ExerciseStyle.AMERICAN:
                cand = np.maximum(payoff_row(v), cand)
            new.append(cand)
        surf = new
    return float(surf[0][grid.m])


def dense_oracle_path_enumeration(params, spec, n_space, policy):
    """European price over two steps by explicit tree-path enumeration."""
    n_time = 2
    h = spec.maturity / n_time
    grid = build_grid(n_space, h, params, spec.maturity, policy)
    ys = grid.points
    disc = math.exp(-params.r * h)

    def payoff_row(v):
        s = np.exp(ys + (params.rho / params.sigma) * v)
        return np.maximum(spec.strike - s, 0.0)

    pi0 = _oracle_transition(params, grid, h, _oracle_lattice_value(params, h, 0, 0))
    kd0, ku0, pu0 = _oracle_match(params, h, 0, 0)
    total = np.zeros(grid.size)
    for k1, w1 in ((ku0, pu0), (kd0, 1 - pu0)):
        pi1 = _oracle_transition(params, grid, h, _oracle_lattice_value(params, h, 1, k1))
        kd1, ku1, pu1 = _oracle_match(params, h, 1, k1)
        for k2, w2 in ((ku1, pu1), (kd1, 1 - pu1)):
            term = payoff_row(_oracle_lattice_value(params, h, 2, k2))
            total += w1 * w2 * disc**2 * (pi0 @ (pi1 @ term))
    return float(total[grid.m])


# on the M=2 toy grid the coarse spacing admits no implicit node, so the
# M=2 cases run all-explicit (eps above the lattice top) and the mixed
# implicit/explicit coverage comes from M=4 with a low threshold
TOY_CASES = [(1, 4, GridPolicy(eps=0.05)),    # implicit root
             (1, 4, GridPolicy(eps=0.25)),
             (2, 4, GridPolicy(eps=0.25)),    # all-explicit two-step
             (2, 8, GridPolicy(eps=0.05))]    # both regimes in one run


@pytest.mark.parametrize("style", [ExerciseStyle.EUROPEAN, ExerciseStyle.AMERICAN])
@pytest.mark.parametrize("n_time,n_space,policy", TOY_CASES)
@pytest.mark.parametrize("backend", available_backends())
def test_price_matches_dense_oracle(params_half, style, n_time, n_space, policy, backend):
    spec = vanilla_put(style)
    want = dense_oracle_price(params_half, spec, n_time, n_space, policy)
    got = price(params_half, spec, n_time, n_space, policy=policy, backend=backend)
    assert got.price == pytest.approx(want, abs=1e-12)


def test_two_step_mixed_case_uses_both_regimes(params_half):
    h = 0.5
    grid = build_grid(8, h, params_half, 1.0, GridPolicy(eps=0.05))
    lattice = build_lattice(params_half, h, 2)
    regimes = {select_regime(lattice.value(n, k), grid.eps)
               for n in range(2) for k in range(n + 1)}
    assert regimes == {Regime.IMPLICIT, Regime.EXPLICIT}


@pytest.mark.parametrize("n_space,policy", [(4, GridPolicy(eps=0.25)),
                                            (8, GridPolicy(eps=0.05))])
def test_path_enumeration_agrees_with_backward_induction(params_half, n_space, policy):
    spec = vanilla_put(ExerciseStyle.EUROPEAN)
    via_paths = dense_oracle_path_enumeration(params_half, spec, n_space, policy)
    via_engine = price(params_half, spec, 2, n_space, policy=policy)
    assert via_engine.price == pytest.approx(via_paths, abs=1e-12)


# ---------------------------------------------------------------------------
# obstacle
# ---------------------------------------------------------------------------

def test_obstacle_values(params_half):
    # at the money both payoffs vanish (up to the exp/log roundtrip of the
    # coordinate change, one ulp on the spot)
    v = 0.1
    y_atm = to_y(params_half, 100.0, v)
    assert obstacle(y_atm, v, vanilla_put(), params_half) == pytest.approx(0.0, abs=1e-12)
    call = OptionSpec(kind=OptionKind.CALL, style=ExerciseStyle.EUROPEAN,
                      strike=100.0, maturity=1.0)
    assert obstacle(y_atm, v, call, params_half) == pytest.approx(0.0, abs=1e-12)
    y80 = to_y(params_half, 80.0, v)
    assert obstacle(y80, v, vanilla_put(), params_half) == pytest.approx(20.0, rel=1e-12)


def test_obstacle_barrier_inclusive(params_half):
    # knocked out from the barrier level upwards (s >= H convention)
    spec = OptionSpec(kind=OptionKind.CALL, style=ExerciseStyle.EUROPEAN,
                      strike=100.0, maturity=1.0, barrier=UpOutBarrier(130.0))
    v = 0.1
    y_at = math.log(130.0) - (params_half.rho / params_half.sigma) * v
    assert obstacle(y_at + 1e-12, v, spec, params_half) == 0.0
    assert obstacle(to_y(params_half, 140.0, v), v, spec, params_half) == 0.0
    assert obstacle(to_y(params_half, 129.0, v), v, spec, params_half) == pytest.approx(29.0, rel=1e-12)


# ---------------------------------------------------------------------------
# structural properties of the induction
# ---------------------------------------------------------------------------

def test_constant_surface_discounts(params_half):
    # transition operators are stochastic, so a flat surface just discounts
    n_time, n_space = 8, 16
    h = 1.0 / n_time
    lattice = build_lattice(params_half, h, n_time)
    grid = build_grid(n_space, h, params_half, 1.0)
    spec = vanilla_put(ExerciseStyle.EUROPEAN)
    surf = ValueSurface(n_time, np.full((n_time + 1, grid.size), 3.0))
    for n in range(n_time - 1, -1, -1):
        surf = backward_step(surf, lattice, grid, params_half, spec, n)
    want = 3.0 * math.exp(-params_half.r * 1.0)
    np.testing.assert_allclose(surf.values, want, rtol=1e-10)


def test_american_dominates_european_entrywise(params_half):
    n_time, n_space = 6, 12
    h = 1.0 / n_time
    lattice = build_lattice(params_half, h, n_time)
    grid = build_grid(n_space, h, params_half, 1.0)
    eu = terminal_surface(lattice, grid, params_half, vanilla_put())
    am = terminal_surface(lattice, grid, params_half, vanilla_put(ExerciseStyle.AMERICAN))
    for n in range(n_time - 1, -1, -1):
        eu = backward_step(eu, lattice, grid, params_half, vanilla_put(), n)
        am = backward_step(am, lattice, grid, params_half,
                           vanilla_put(ExerciseStyle.AMERICAN), n)
        assert np.all(am.values >= eu.values - 1e-14)


def test_barrier_dominated_by_vanilla_entrywise():
    params = barrier_params(100.0)
    n_time, n_space = 6, 12
    h = 0.5 / n_time
    lattice = build_lattice(params, h, n_time)
    grid = build_grid(n_space, h, params, 0.5)
    call = OptionSpec(kind=OptionKind.CALL, style=ExerciseStyle.EUROPEAN,
                      strike=100.0, maturity=0.5)
    uoc = up_out_call()
    plain = terminal_surface(lattice, grid, params, call)
    knocked = terminal_surface(lattice, grid, params, uoc)
    for n in range(n_time - 1, -1, -1):
        plain = backward_step(plain, lattice, grid, params, call, n)
        knocked = backward_step(knocked, lattice, grid, params, uoc, n)
        assert np.all(knocked.values <= plain.values + 1e-12)
        assert np.all(knocked.values >= 0.0)


def test_mixing_commutes_with_operator(params_half):
    # exact linearity: operator of (p u + (1-p) w) equals the mixture of the
    # operator actions
    rng = np.random.default_rng(3)
    m = 12
    for regime, c in ((Regime.IMPLICIT, coeffs(params_half, 0.1, 0.01, 0.05)),
                      (Regime.EXPLICIT, coeffs(params_half, 0.01, 0.01, 0.05))):
        op = build_operator(c, m, regime)
        u, w = rng.uniform(0, 10, (2, op.size))
        p = 0.37
        if regime is Regime.IMPLICIT:
            lhs = thomas_solve(op, p * u + (1 - p) * w)
            rhs = p * thomas_solve(op, u) + (1 - p) * thomas_solve(op, w)
        else:
            from treefd import apply_explicit

            lhs = apply_explicit(op, p * u + (1 - p) * w)
            rhs = p * apply_explicit(op, u) + (1 - p) * apply_explicit(op, w)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("backend", available_backends())
@pytest.mark.parametrize("spec_maker,param_maker", [
    (lambda: vanilla_put(ExerciseStyle.AMERICAN), lambda: table1_params(0.5)),
    (lambda: up_out_call(ExerciseStyle.AMERICAN), lambda: barrier_params(110.0)),
    (lambda: up_out_call(ExerciseStyle.EUROPEAN), lambda: barrier_params(90.0)),
])
def test_engine_matches_reference_steps(backend, spec_maker, param_maker):
    # the batched kernels must reproduce the readable reference rollback
    params = param_maker()
    spec = spec_maker()
    n_time, n_space = 8, 12
    h = spec.maturity / n_time
    lattice = build_lattice(params, h, n_time)
    grid = build_grid(n_space, h, params, spec.maturity)
    surf = terminal_surface(lattice, grid, params, spec)
    for n in range(n_time - 1, -1, -1):
        surf = backward_step(surf, lattice, grid, params, spec, n)
    res = price(params, spec, n_time, n_space, backend=backend)
    assert res.price == pytest.approx(float(surf.values[0, grid.m]), abs=1e-12)


def test_backward_step_validates_surface(params_half):
    lattice = build_lattice(params_half, 0.25, 4)
    grid = build_grid(8, 0.25, params_half, 1.0)
    wrong = ValueSurface(2, np.zeros((3, grid.size)))
    with pytest.raises(ValueError):
        backward_step(wrong, lattice, grid, params_half, vanilla_put(), 3)


def test_price_result_diagnostics(params_half):
    res = price(params_half, vanilla_put(), 20, 20)
    assert res.n_steps == 20
    assert res.implicit_nodes + res.explicit_nodes == 20 * 21 // 2
    assert res.stability_margin > 0
    assert res.eps > 0 and res.dy > 0


def test_price_deterministic(params_half):
    a = price(params_half, vanilla_put(), 30, 30)
    b = price(params_half, vanilla_put(), 30, 30)
    assert a.price == b.price


def test_price_rejects_bad_steps(params_half):
    with pytest.raises(ValueError):
        price(params_half, vanilla_put(), 0, 8)


def test_dirichlet_boundary_close_to_neumann_inside(params_half):
    # boundary treatment must not move the root value materially on a wide grid
    pn = price(params_half, vanilla_put(), 50, 100, boundary=BoundaryKind.NEUMANN)
    pd = price(params_half, vanilla_put(), 50, 100, boundary=BoundaryKind.DIRICHLET)
    assert pd.price == pytest.approx(pn.price, rel=5e-3)


@pytest.mark.parametrize("backend", available_backends())
def test_engine_matches_reference_steps_dirichlet(backend):
    params = barrier_params(105.0)
    spec = up_out_call(ExerciseStyle.AMERICAN)
    n_time, n_space = 6, 10
    h = spec.maturity / n_time
    lattice = build_lattice(params, h, n_time)
    grid = build_grid(n_space, h, params, spec.maturity)
    surf = terminal_surface(lattice, grid, params, spec)
    for n in range(n_time - 1, -1, -1):
        surf = backward_step(surf, lattice, grid, params, spec, n,
                             boundary=BoundaryKind.DIRICHLET)
    res = price(params, spec, n_time, n_space, boundary=BoundaryKind.DIRICHLET,
                backend=backend)
    assert res.price == pytest.approx(float(surf.values[0, grid.m]), abs=1e-12)


def test_thread_count_does_not_change_result(params_half):
    if "numba" not in available_backends():
        pytest.skip("needs the numba backend")
    spec = vanilla_put(ExerciseStyle.AMERICAN)
    one = price(params_half, spec, 60, 60, backend="numba", threads=1)
    many = price(params_half, spec, 60, 60, backend="numba", threads=4)
    assert one.price == many.price


@pytest.mark.parametrize("style", [ExerciseStyle.EUROPEAN, ExerciseStyle.AMERICAN])
def test_knocked_at_inception_is_worthless(style):
    params = barrier_params(131.0)   # spot already beyond the barrier
    res = price(params, up_out_call(style), 20, 20)
    assert res.price == 0.0


def test_engine_put_call_parity(params_half):
    # European engine prices must satisfy parity against the forward up to
    # discretisation error
    n = 200
    call = OptionSpec(kind=OptionKind.CALL, style=ExerciseStyle.EUROPEAN,
                      strike=100.0, maturity=1.0)
    c = price(params_half, call, n, n).price
    p = price(params_half, vanilla_put(), n, n).price
    forward = params_half.s0 - 100.0 * math.exp(-params_half.r)
    assert c - p == pytest.approx(forward, abs=0.05)
