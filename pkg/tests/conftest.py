from pathlib import Path

import numpy as np
import pytest

from trafficltl import build_gridded, load_network

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "trafficltl" / "configs"

CASE_FORMULA = (
    "G F sig(v1) == {5,6} & G F sig(v2) == {7} & G F sig(v3) == {8} & G F sig(v4) == {9,10}"
    " & F G (x[1] <= 30 & x[2] <= 30 & x[3] <= 30 & x[4] <= 30)"
    " & G (!sig(v4) == {4} & X sig(v4) == {4} -> X X sig(v4) == {4})"
    " & G (!sig(v4) == {9,10} & X sig(v4) == {9,10} -> X X sig(v4) == {9,10})"
)
CASE_CUTS = {
    "1": [0, 10, 20, 30, 40],
    "2": [0, 10, 20, 30, 40, 50],
    "3": [0, 10, 20, 30, 40, 50],
    "4": [0, 10, 20, 30, 40, 50],
}


@pytest.fixture(scope="session")
def case_net():
    return load_network(CONFIGS / "casestudy_network.json")


@pytest.fixture(scope="session")
def chain():
    return load_network(CONFIGS / "two_link_chain.json")


@pytest.fixture(scope="session")
def one_link():
    return load_network(CONFIGS / "one_link_network.json")


@pytest.fixture(scope="session")
def case_partition(case_net):
    return build_gridded(case_net, CASE_CUTS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
