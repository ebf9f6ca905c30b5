"""Shared pytest fixtures for SWAP tests."""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from swapreg.datagen import CovarianceSpec, OnePerBlock, exact_gram_design, synthesize
from swapreg.design import CoefficientVector, SupportSet

from tests.oracles import gaussian_design


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(20240611)


@pytest.fixture
def small_design():
    """30×8 Gaussian design."""
    return gaussian_design(30, 8, seed=1)


@pytest.fixture
def noisy_instance():
    """Block-correlated instance: p = 12, k = 3, n = 20, σ = 0.5."""
    spec = CovarianceSpec("block", p=12, a=0.5, block_size=4)
    return synthesize(spec, n=20, k=3, sigma=0.5, layout=OnePerBlock(), seed=7)


@pytest.fixture
def bordered_fixture():
    """Exact-Gram bordered design: p = 12, k = 4, a = 0.4, β* = 1 on S*, noiseless."""
    spec = CovarianceSpec("bordered", p=12, a=0.4, k=4)
    X = exact_gram_design(spec)
    S_star = SupportSet(tuple(range(4)))
    beta = CoefficientVector.from_support(12, S_star, np.ones(4))
    y = X.data @ beta.values
    return X, y, beta, S_star
