import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_confusion(rng, n_classes, interior=False):
    """Random valid K x K confusion; ``interior`` keeps entries well away
    from zero so finite differences stay inside the domain."""
    raw = rng.dirichlet(np.ones(n_classes * n_classes)).reshape(n_classes, n_classes)
    if interior:
        uniform = np.full_like(raw, 1.0 / raw.size)
        raw = 0.8 * raw + 0.2 * uniform
    return raw


def random_labels(rng, n_samples, n_outputs, n_classes):
    return rng.integers(1, n_classes + 1, size=(n_samples, n_outputs))


def random_prob_rows(rng, n_samples, n_outputs, n_classes):
    raw = rng.dirichlet(np.ones(n_classes), size=(n_samples, n_outputs))
    return raw
