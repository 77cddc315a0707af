from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

import cases
from r1c import PartialTensor

settings.register_profile("suite", derandomize=True, deadline=None)
settings.load_profile("suite")


@pytest.fixture
def cube() -> PartialTensor:
    return cases.tensor(cases.CUBE_DIMS, cases.CUBE_ENTRIES)


@pytest.fixture
def extractable_matrix() -> PartialTensor:
    return cases.tensor(cases.EXTRACTABLE_MATRIX_DIMS, cases.EXTRACTABLE_MATRIX_ENTRIES)


@pytest.fixture
def rational_4d() -> PartialTensor:
    return cases.tensor(cases.RATIONAL_4D_DIMS, cases.RATIONAL_4D_ENTRIES)


@pytest.fixture
def noisy_3x5x7() -> PartialTensor:
    return cases.tensor(cases.NOISY_3X5X7_DIMS, cases.NOISY_3X5X7_ENTRIES)


@pytest.fixture
def noisy_5d() -> PartialTensor:
    return cases.tensor(cases.NOISY_5D_DIMS, cases.NOISY_5D_ENTRIES)


@pytest.fixture
def all_ones_5d() -> PartialTensor:
    return cases.tensor(cases.ALL_ONES_5D_DIMS, cases.ALL_ONES_5D_ENTRIES)
