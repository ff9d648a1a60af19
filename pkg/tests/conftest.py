import pytest

from mpoxsldnet.synthetic import generate_synthetic_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """20 images per class at 48 px, enough for pipeline and CLI tests."""
    root = tmp_path_factory.mktemp("corpus-small")
    return generate_synthetic_corpus(root, per_class=20, size=48, seed=7)


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    """200 images per class, the desk-scale learnability corpus."""
    root = tmp_path_factory.mktemp("corpus-desk")
    return generate_synthetic_corpus(root, per_class=200, size=80, seed=11)
