import numpy as np
import pytest

import _ckpt_factory


@pytest.fixture(scope="session")
def conj_ckpt():
    """Checkpoint trained on the conjugate Normal-Normal prior (cached)."""
    return _ckpt_factory.get_checkpoint("conjugate")


@pytest.fixture(scope="session")
def scm_ckpt():
    """Checkpoint trained on the default SCM prior (cached)."""
    return _ckpt_factory.get_checkpoint("scm")


@pytest.fixture(scope="session")
def tiny_ckpt_path():
    """Barely trained checkpoint for driver/CLI plumbing tests (cached)."""
    return _ckpt_factory.get_checkpoint_path("tiny")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
