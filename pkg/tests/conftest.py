"""Shared fixtures: the synthetic suite, the pool and the knowledge base learned from them.

Learning the knowledge base runs every pool component on every synthetic case, so
it happens once per test session.
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from component_pool import ExecutionLimits, pool_roster  # noqa: E402
from desk_datasets import bundled_names, load_bundled  # noqa: E402
from knowledge_base import learn_knowledge_base  # noqa: E402
from synthetic_datasets import generate_suite  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running benchmark reproductions')


def pytest_collection_modifyitems(config, items):
    if 'slow' in (config.getoption('markexpr') or ''):
        return
    skip = pytest.mark.skip(reason='slow; run with -m slow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope='session')
def pool():
    return pool_roster()


@pytest.fixture(scope='session')
def suite():
    return generate_suite(rows=16, seed=0)


@pytest.fixture(scope='session')
def kb(pool, suite):
    return learn_knowledge_base(pool, suite, ExecutionLimits(timeout=30.0, seed=0))


@pytest.fixture(scope='session')
def desk():
    return {name: load_bundled(name) for name in bundled_names()}
