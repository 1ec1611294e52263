"""Published reference values used by the table command and acceptance tests.

Each block records the benchmark method the numbers come from; they are
external anchors, not outputs of this package.  Versioned so downstream
golden files can pin what they compared against.
"""

DATA_VERSION = 1

# European puts: Heston closed-form (characteristic-function integration).
# S0=K=100, T=1, r=log(1.1), delta=0, v0=theta=0.1, kappa=2, rho=-0.5.
EURO_PUT_PARAMS = dict(kappa=2.0, theta=0.1, rho=-0.5, r=0.09531017980432486,
                       delta=0.0, s0=100.0, v0=0.1, strike=100.0, maturity=1.0)
EURO_PUT_CF = {
    0.04: 7.994716,
    0.50: 7.8318540,
    1.00: 7.2313083,
}

# American puts, same parameters: Longstaff-Schwartz Monte Carlo benchmark
# (1e6 paths, weak second-order variance discretisation).
AMERICAN_PUT_MC_LS = {
    0.04: 9.074102,
    0.50: 8.904514,
    1.00: 8.277985,
}

# American puts, fast-reverting set: kappa=5, theta=0.16, sigma=0.9, rho=0.1,
# r=0.1, delta=0, v0=0.25, K=10, T=0.25.  Benchmark: penalty-method finite
# differences (Zvan-Forsyth-Vetzal test set).
AMERICAN_PUT_SET2_PARAMS = dict(kappa=5.0, theta=0.16, sigma=0.9, rho=0.1,
                                r=0.10, delta=0.0, v0=0.25, strike=10.0,
                                maturity=0.25)
AMERICAN_PUT_ZFV = {
    8.0: 2.0784,
    9.0: 1.3337,
    10.0: 0.7961,
    11.0: 0.4483,
    12.0: 0.2428,
}

# Up-and-out calls: method-of-lines benchmark (Chiarella-Kang test set),
# continuously monitored.  K=100, H=130, T=0.5, r=0.03, delta=0.05,
# v0=theta=0.1, kappa=2, rho=-0.5.  The benchmark's vol-of-vol is 0.1
# (confirmed against Monte Carlo with barrier-crossing correction).
BARRIER_PARAMS = dict(kappa=2.0, theta=0.1, sigma=0.1, rho=-0.5, r=0.03,
                      delta=0.05, v0=0.1, strike=100.0, maturity=0.5,
                      barrier=130.0)
EURO_UP_OUT_CALL_MOL = {
    80.0: 0.9029,
    100.0: 2.5908,
    120.0: 1.4782,
}
AMERICAN_UP_OUT_CALL_MOL = {
    80.0: 1.4012,
    100.0: 8.3003,
    120.0: 21.8216,
}
