"""Shared fixtures and test-only generators."""

import numpy as np
import pytest

from gradplay import run_scenario
from gradplay.games import PolymatrixGame


def random_mixed_ne_game(rng, n=None, dims=None, singular=False):
    """Random polymatrix game with a known completely mixed equilibrium.

    Draw random pair matrices, then shift one matrix per player by a rank-one
    correction so that the player's payoff vector at the chosen interior
    profile is constant; a constant payoff makes every strategy a best
    response, so the profile is a completely mixed equilibrium by
    construction.  With singular=True player 0 receives no payoffs at all,
    which zeroes a block row of the reduced coupling matrix.
    """
    if n is None:
        n = int(rng.integers(2, 5))
    if dims is None:
        dims = [int(rng.integers(2, 5)) for _ in range(n)]
    profile = []
    for k in dims:
        x = rng.random(k) + 0.2
        profile.append(x / x.sum())
    mats = {}
    for i in range(n):
        if singular and i == 0:
            continue
        opponents = [j for j in range(n) if j != i]
        chosen = [j for j in opponents if rng.random() < 0.7]
        if not chosen:
            chosen = [opponents[int(rng.integers(len(opponents)))]]
        for j in chosen:
            mats[(i, j)] = rng.normal(size=(dims[i], dims[j]))
        r = sum(mats[(i, j)] @ profile[j] for j in chosen)
        c = r - np.mean(r)
        j0 = chosen[0]
        mats[(i, j0)] = mats[(i, j0)] - np.outer(c, np.ones(dims[j0]))
    return PolymatrixGame(tuple(dims), mats), profile


@pytest.fixture(scope="session")
def jordan_single_result():
    return run_scenario("jordan-single")


@pytest.fixture(scope="session")
def jordan_random_result():
    return run_scenario("jordan-random")


@pytest.fixture(scope="session")
def jordan_diagonal_small_result():
    return run_scenario("jordan-diagonal")


@pytest.fixture(scope="session")
def jordan_diagonal_large_result():
    return run_scenario(
        "jordan-diagonal", {"deltas": (0.8831, 0.4259, 0.7546), "horizon": 60.0}
    )


@pytest.fixture(scope="session")
def jordan_rescaled_results():
    return {
        1.0: run_scenario("jordan-rescaled"),
        5.0: run_scenario("jordan-rescaled", {"mu": 5.0, "horizon": 30.0}),
        0.1: run_scenario("jordan-rescaled", {"mu": 0.1, "horizon": 60.0}),
    }


@pytest.fixture(scope="session")
def coordination_stabilize_result():
    return run_scenario("coordination-stabilize")


@pytest.fixture(scope="session")
def coordination_openloop_result():
    return run_scenario("coordination-openloop")
