"""Acceptance criteria, one printed pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
Benchmarks are external anchors (closed form, Monte Carlo regression,
penalty-method finite differences, method of lines); tolerances are fixed
here, not tuned.
"""

import math
import time

import numpy as np
import pytest

from treefd import (
    ExerciseStyle,
    GridPolicy,
    OptionKind,
    OptionSpec,
    backward_step,
    build_grid,
    build_lattice,
    convergence_ratio,
    heston_put_cf,
    mu_v,
    price,
)
from treefd import benchmarks_data as data
from treefd.checks import (
    columns_decreasing,
    local_moments,
    moment_convergence_scan,
    stochasticity_report,
)
from treefd.fd import Regime, _lattice_variances
from treefd.pricing import ValueSurface

from conftest import barrier_params, set2_params, table1_params, up_out_call, vanilla_put

CF = {0.04: 7.994716, 0.5: 7.8318540, 1.0: 7.2313083}
MC_LS = {0.04: 9.074102, 0.5: 8.904514, 1.0: 8.277985}
ZFV = {8.0: 2.0784, 9.0: 1.3337, 10.0: 0.7961, 11.0: 0.4483, 12.0: 0.2428}
MOL_EU = {80.0: 0.9029, 100.0: 2.5908, 120.0: 1.4782}
MOL_AM = {80.0: 1.4012, 100.0: 8.3003, 120.0: 21.8216}


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


@pytest.fixture(scope="module")
def set2_prices():
    """American set-2 prices on the 200/400/800 ladder, shared by 4 and 5."""
    out = {}
    for s0 in ZFV:
        spec = vanilla_put(ExerciseStyle.AMERICAN, strike=10.0, maturity=0.25)
        params = set2_params(s0)
        out[s0] = {n: price(params, spec, n, n).price for n in (200, 400, 800)}
    return out


def test_criterion_1_european_put_vs_closed_form():
    worst = 0.0
    slowest = 0.0
    for sigma, ref in CF.items():
        t0 = time.perf_counter()
        res = price(table1_params(sigma), vanilla_put(), 400, 400)
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, abs(res.price - ref) / ref)
    _report("1 european put vs CF", worst <= 3e-3 and slowest < 10.0,
            f"max rel err {worst:.2%} (tol 0.30%), slowest price {slowest:.1f}s")


def test_criterion_2_closed_form_self_check():
    worst = max(abs(heston_put_cf(table1_params(sig), 100.0, 1.0) - ref)
                for sig, ref in CF.items())
    _report("2 closed-form self-check", worst <= 1e-4,
            f"max abs err {worst:.2e} (tol 1e-4)")


def test_criterion_3_american_put_vs_mc():
    worst = 0.0
    for sigma, ref in MC_LS.items():
        res = price(table1_params(sigma), vanilla_put(ExerciseStyle.AMERICAN), 400, 400)
        worst = max(worst, abs(res.price - ref) / ref)
    _report("3 american put vs MC benchmark", worst <= 1e-2,
            f"max rel err {worst:.2%} (tol 1%)")


def test_criterion_4_american_put_vs_fd_references(set2_prices):
    worst = max(abs(set2_prices[s0][800] - ref) / ref for s0, ref in ZFV.items())
    _report("4 american put vs penalty-FD refs", worst <= 1e-2,
            f"max rel err {worst:.2%} (tol 1%) at N=800")


def test_criterion_5_convergence_ratio(set2_prices):
    ratios = {s0: convergence_ratio(p[200], p[400], p[800])
              for s0, p in set2_prices.items()}
    ok = all(1.5 <= r <= 3.5 for r in ratios.values())
    _report("5 convergence ratio in [1.5, 3.5]", ok,
            "ratios " + ", ".join(f"{s0:g}: {r:.3f}" for s0, r in ratios.items()))


def test_criterion_6_barrier_options_vs_mol():
    worst = 0.0
    for style, refs in ((ExerciseStyle.EUROPEAN, MOL_EU), (ExerciseStyle.AMERICAN, MOL_AM)):
        for s0, ref in refs.items():
            res = price(barrier_params(s0), up_out_call(style), 400, 400)
            worst = max(worst, abs(res.price - ref) / ref)
    _report("6 up-and-out calls vs MOL", worst <= 1e-2,
            f"max rel err {worst:.2%} (tol 1%)")


def _reference_cases():
    yield table1_params(0.04), 1.0
    yield table1_params(0.5), 1.0
    yield table1_params(1.0), 1.0
    yield set2_params(10.0), 0.25
    yield barrier_params(100.0), 0.5


def test_criterion_7a_stochasticity_everywhere():
    checked = 0
    for params, maturity in _reference_cases():
        for n in (50, 100):
            h = maturity / n
            grid = build_grid(n, h, params, maturity)
            variances = np.unique(_lattice_variances(params, h, n)[1:-1])
            rows = stochasticity_report(params, h, grid, variances, seed=n)
            assert all(r.passed for r in rows), \
                [r.name for r in rows if not r.passed]
            checked += len(rows)
    _report("7a stochastic transition kernels", True,
            f"{checked} kernel checks across reference configurations")


def test_criterion_7b_moment_identities():
    n_expl = n_impl = 0
    for params, maturity in _reference_cases():
        n = 100
        h = maturity / n
        grid = build_grid(n, h, params, maturity)
        variances = np.unique(_lattice_variances(params, h, n)[1:-1])
        # a spread of interior indices, |i| <= M/2
        for v in variances[:: max(1, variances.size // 8)]:
            for i in (0, grid.m // 2, -grid.m // 2):
                report = local_moments(float(v), grid, h, params, i=i)
                bad = [e for e in report.entries if not e.passed]
                assert not bad, (params.sigma, float(v), i,
                                 [(e.name, e.measured, e.reference, e.tolerance)
                                  for e in bad])
                if report.regime is Regime.IMPLICIT:
                    n_impl += 1
                else:
                    n_expl += 1
    _report("7b local moment identities", n_expl > 0 and n_impl > 0,
            f"{n_expl} explicit (exact) + {n_impl} implicit (within decay bound)")


def test_criterion_7c_variance_chain_first_moment():
    worst = 0.0
    for params, maturity in _reference_cases():
        n = 100
        h = maturity / n
        lattice = build_lattice(params, h, n)
        for row in range(n):
            nxt = lattice.row(row + 1)
            for k in range(row + 1):
                m = lattice.match_node(row, k)
                v = lattice.value(row, k)
                target = v + mu_v(params, v) * h
                if nxt[m.k_d] <= target <= nxt[m.k_u]:
                    got = m.p_u * nxt[m.k_u] + m.p_d * nxt[m.k_d]
                    worst = max(worst, abs(got - target))
    _report("7c variance-chain drift matching", worst <= 1e-12,
            f"max interior first-moment error {worst:.2e} (tol 1e-12)")


def test_criterion_7d_ordering_properties():
    margins = []
    for sigma in (0.04, 0.5, 1.0):
        eu = price(table1_params(sigma), vanilla_put(), 200, 200).price
        am = price(table1_params(sigma), vanilla_put(ExerciseStyle.AMERICAN), 200, 200).price
        margins.append(am - eu)
    plain_call = OptionSpec(kind=OptionKind.CALL, style=ExerciseStyle.EUROPEAN,
                            strike=100.0, maturity=0.5)
    for s0 in (80.0, 100.0, 120.0):
        vanilla = price(barrier_params(s0), plain_call, 200, 200).price
        knocked = price(barrier_params(s0), up_out_call(), 200, 200).price
        margins.append(vanilla - knocked)
    ok = all(m >= -1e-12 for m in margins)
    _report("7d ordering (american >= european, knocked <= vanilla)", ok,
            f"min margin {min(margins):.3e}")


def test_criterion_7e_unit_payoff_discounts():
    params = table1_params(0.5)
    n_time, n_space = 64, 64
    h = 1.0 / n_time
    lattice = build_lattice(params, h, n_time)
    grid = build_grid(n_space, h, params, 1.0)
    surf = ValueSurface(n_time, np.ones((n_time + 1, grid.size)))
    for n in range(n_time - 1, -1, -1):
        surf = backward_step(surf, lattice, grid, params, vanilla_put(), n)
    err = abs(float(surf.values[0, grid.m]) - math.exp(-params.r))
    _report("7e unit payoff discounts to exp(-rT)", err <= 1e-10,
            f"error {err:.2e} (tol 1e-10)")


def test_criterion_7f_moment_convergence_scan():
    rows = moment_convergence_scan(table1_params(0.5),
                                   [1.0 / 50, 1.0 / 100, 1.0 / 200, 1.0 / 400])
    ok = columns_decreasing(rows)
    tail = rows[-1]
    _report("7f moment scan sups decreasing", ok,
            f"final sups: drift {tail.drift_err:.1e}, diffusion {tail.diffusion_err:.1e}, "
            f"fourth {tail.fourth:.1e}, cross {tail.cross:.1e}")


def test_criterion_8_dense_oracle_equivalence(params_half):
    from test_pricing import dense_oracle_price

    worst = 0.0
    for style in (ExerciseStyle.EUROPEAN, ExerciseStyle.AMERICAN):
        spec = vanilla_put(style)
        # M=2, N=2 as stated, plus the finer toy that exercises both regimes
        for n_space, policy in ((4, GridPolicy(eps=0.25)), (8, GridPolicy(eps=0.05))):
            want = dense_oracle_price(params_half, spec, 2, n_space, policy)
            got = price(params_half, spec, 2, n_space, policy=policy).price
            worst = max(worst, abs(got - want))
    _report("8 dense brute-force oracle equivalence", worst <= 1e-12,
            f"max abs diff {worst:.2e} (tol 1e-12)")


def test_benchmark_data_matches_frozen_constants():
    # the shipped data file must carry exactly these anchors
    assert data.EURO_PUT_CF == CF
    assert data.AMERICAN_PUT_MC_LS == MC_LS
    assert data.AMERICAN_PUT_ZFV == ZFV
    assert data.EURO_UP_OUT_CALL_MOL == MOL_EU
    assert data.AMERICAN_UP_OUT_CALL_MOL == MOL_AM
