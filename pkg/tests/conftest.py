from pathlib import Path

import pytest

from conceptevo.kb import load_kb_file
from conceptevo.retrieval import LearningProblem

FAMILY_MINI = Path(__file__).resolve().parents[1] / "src" / "conceptevo" / "data" / "family-mini.txt"


@pytest.fixture(scope="session")
def family_mini_path():
    return str(FAMILY_MINI)


@pytest.fixture(scope="session")
def mini():
    return load_kb_file(str(FAMILY_MINI))


@pytest.fixture
def males_problem():
    return LearningProblem({"bob", "dan"}, {"ann", "cat"})


@pytest.fixture
def age_problem():
    return LearningProblem({"ann", "bob"}, {"cat", "dan"})
