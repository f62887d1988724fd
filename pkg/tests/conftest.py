import pytest

from setrograde.core import Player, PartitionKey, Shape, Trump
from setrograde.retro import RetroStore, build_retro_depth
from setrograde.setdb import SetStore
from setrograde.setro import build_depth, required_partitions


def build_chain(top, store=None, retro=None):
    """Build ``top`` and everything below it in memory; returns (set store, retro store, reports)."""
    store = store if store is not None else SetStore()
    plan = required_partitions(top)
    reports = {}
    for depth in sorted(plan):
        for report in build_depth(plan[depth], store):
            reports[report.partition] = report
        if retro is not None:
            build_retro_depth(plan[depth], retro)
    return store, retro, reports


def single_suit(d, leader=Player.E, trump=Trump.NT):
    return PartitionKey(Shape.single_suit(d), leader, trump)


@pytest.fixture(scope="session")
def single_suit_8():
    """Set and retro databases for 8 spades, East on lead at the top depth."""
    return build_chain([single_suit(2)], retro=RetroStore())


@pytest.fixture(scope="session")
def single_suit_12():
    return build_chain([single_suit(3)])
