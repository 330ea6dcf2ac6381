from __future__ import annotations

import pytest

from helpers import WHEATSTONE_EDGES
from routelearn.network import RoutingNetwork, validate_network


@pytest.fixture
def wheatstone():
    return validate_network(RoutingNetwork.from_edges(WHEATSTONE_EDGES))


@pytest.fixture
def parallel2():
    return validate_network(RoutingNetwork.from_edges([("e1", "O", "D"), ("e2", "O", "D")]))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
