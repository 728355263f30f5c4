import numpy as np
import pytest


def random_physical_distribution(rng, cutoff, tail_decay=0.55):
    """Random normalized physical distribution with geometrically damped tail.

    The damping (plus a hard cap on the top entry) keeps mass away from the
    cutoff so forward channels with dark counts stay within the
    truncation-leakage tolerance of apply_channel.
    """
    while True:
        raw = rng.dirichlet(np.ones(cutoff + 1)) * tail_decay ** np.arange(cutoff + 1)
        p = raw / raw.sum()
        if p[-1] <= 0.01:
            return p


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
