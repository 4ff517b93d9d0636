from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hdll import corpus


@pytest.fixture(scope="session")
def acceptance_corpus(tmp_path_factory) -> list[Path]:
    """The full 12-image 256x256 synthetic corpus (acceptance scale)."""
    out = tmp_path_factory.mktemp("corpus256")
    return corpus.make_corpus(out, seed=0, size=256)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory) -> list[Path]:
    """A small 48x48 corpus for fast CLI/container tests."""
    out = tmp_path_factory.mktemp("corpus48")
    return corpus.make_corpus(out, seed=11, size=48)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
