from __future__ import annotations

import pytest

from dagvet import load_bundled_network, network_skeleton


@pytest.fixture(scope="session")
def cancer_net():
    return load_bundled_network("cancer")


@pytest.fixture(scope="session")
def asia_net():
    return load_bundled_network("asia")


@pytest.fixture(scope="session")
def asia_truth(asia_net):
    return network_skeleton(asia_net)
