from __future__ import annotations

import random

import pytest

from mortar.catalog import seed_catalog
from mortar.composer import ComposerConfig
from mortar.generators import ValidationConfig


@pytest.fixture(scope="session")
def catalog():
    return seed_catalog()


@pytest.fixture(scope="session")
def by_name(catalog):
    return {m.name: m for m in catalog}


@pytest.fixture()
def rng():
    return random.Random(1234)


@pytest.fixture()
def tiny_validation():
    # cheap probe settings for tests that vet many candidates
    return ValidationConfig(probes=2, probe_agent_iters=40, probe_steps=30)


@pytest.fixture()
def tiny_composer():
    return ComposerConfig(iterations=5, max_steps=40)
