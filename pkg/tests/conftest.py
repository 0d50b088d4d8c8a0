import pytest

from evhc.feeder import Branch, Household, Node, build_feeder, bundled_baseline_profiles, bundled_feeder


@pytest.fixture(scope="session")
def feeder():
    return bundled_feeder()


@pytest.fixture(scope="session")
def profiles():
    return bundled_baseline_profiles()


@pytest.fixture(scope="session")
def two_node_feeder():
    """Slack + one load node over a single known branch."""
    return build_feeder(
        nodes=(Node("tx", is_slack=True), Node("n1")),
        branches=(Branch("tx", "n1", 0.3, 0.1, 200.0),),
        households=(Household("h1", "n1"),),
        transformer_kva=100.0,
        base_voltage_v=230.0,
    )


@pytest.fixture(scope="session")
def strong_feeder():
    """Trivially short lines and huge ampacity: nothing ever binds."""
    return build_feeder(
        nodes=(Node("tx", is_slack=True), Node("n1"), Node("n2"), Node("n3")),
        branches=(
            Branch("tx", "n1", 0.0005, 0.0002, 10000.0),
            Branch("n1", "n2", 0.0005, 0.0002, 10000.0),
            Branch("n2", "n3", 0.0005, 0.0002, 10000.0),
        ),
        households=(Household("h1", "n1"), Household("h2", "n2"), Household("h3", "n3")),
        transformer_kva=1000.0,
        base_voltage_v=230.0,
    )


@pytest.fixture(scope="session")
def flat_profiles():
    """Constant 0.2 kW baseline for the strong feeder's three households."""
    from evhc.feeder import BaselineLoadProfile

    return tuple(
        BaselineLoadProfile(h, tuple([0.2] * 96)) for h in ("h1", "h2", "h3")
    )
