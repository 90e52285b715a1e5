import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'CspSched'))

import numpy as np
import pytest

from factories import random_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_random():
    """Seeded generator instances: make_random(seed, n=5, m=1, ...)."""
    return random_instance


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    # A developer's .env must not change caps under test.
    for name in ('CSP_SCHED_MEM_CAP', 'CSP_SCHED_ORACLE_BUDGET',
                 'CSP_SCHED_PTAS_GUESS_CAP', 'CSP_SCHED_MAX_SLOTS'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setattr('file_manager.load_dotenv', lambda *a, **k: False)
