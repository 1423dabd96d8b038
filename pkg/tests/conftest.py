"""Shared fixtures: the bundled six-node instance and random-instance helpers."""

from __future__ import annotations

import numpy as np
import pytest

from chancenet import example_network
from chancenet.instgen import GenSpec, generate


@pytest.fixture(scope="session")
def sixnode():
    return example_network()


def random_instance(n: int, regime: str, seed: int, beta: float = 0.4, omega: float = 2.0):
    """One generated instance; small wrapper so tests read compactly."""
    return generate(GenSpec(n=n, omega=omega, beta=beta, regime=regime, seed=seed))


def random_fractional(instance, rng: np.random.Generator) -> np.ndarray:
    """A point in the unit box, biased toward the interesting middle."""
    return rng.beta(2.0, 2.0, size=instance.n_arcs)
