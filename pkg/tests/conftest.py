"""Shared fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from nhanes_multiview.ingest import Response
from nhanes_multiview.synthetic import synthetic_study


def pytest_addoption(parser):
    parser.addoption(
        "--run-network",
        action="store_true",
        default=False,
        help="Run tests that download from the public NHANES repository.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-network"):
        return
    skip = pytest.mark.skip(reason="needs --run-network")
    for item in items:
        if "network" in item.keywords:
            item.add_marker(skip)


class StubTransport:
    """Transport serving canned bodies by URL suffix and recording requests."""

    def __init__(self, bodies=None, default_status=404):
        self.bodies = dict(bodies or {})
        self.default_status = default_status
        self.requests = []

    def get(self, url):
        self.requests.append(url)
        for suffix, body in self.bodies.items():
            if url.endswith(suffix):
                if isinstance(body, Exception):
                    raise body
                if isinstance(body, Response):
                    return body
                return Response(200, body)
        return Response(self.default_status, b"")


@pytest.fixture
def stub_transport():
    return StubTransport


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_study():
    return synthetic_study(1500, seed=3)
