import math

import pytest

from treefd import ExerciseStyle, HestonParams, OptionKind, OptionSpec, UpOutBarrier

LOG11 = math.log(1.1)


def table1_params(sigma: float) -> HestonParams:
    """European/American vanilla test set: S0=K=100, T=1, r=log(1.1)."""
    return HestonParams(kappa=2.0, theta=0.1, sigma=sigma, rho=-0.5,
                        r=LOG11, delta=0.0, s0=100.0, v0=0.1)


def set2_params(s0: float) -> HestonParams:
    """Fast-reverting American test set: K=10, T=0.25."""
    return HestonParams(kappa=5.0, theta=0.16, sigma=0.9, rho=0.1,
                        r=0.10, delta=0.0, s0=s0, v0=0.25)


def barrier_params(s0: float) -> HestonParams:
    """Up-and-out test set: K=100, H=130, T=0.5."""
    return HestonParams(kappa=2.0, theta=0.1, sigma=0.1, rho=-0.5,
                        r=0.03, delta=0.05, s0=s0, v0=0.1)


def vanilla_put(style=ExerciseStyle.EUROPEAN, strike=100.0, maturity=1.0) -> OptionSpec:
    return OptionSpec(kind=OptionKind.PUT, style=style, strike=strike, maturity=maturity)


def up_out_call(style=ExerciseStyle.EUROPEAN) -> OptionSpec:
    return OptionSpec(kind=OptionKind.CALL, style=style, strike=100.0,
                      maturity=0.5, barrier=UpOutBarrier(130.0))


@pytest.fixture
def params_half() -> HestonParams:
    return table1_params(0.5)
