import pytest

from sarclass.classifiers import ClassifierSpec
from sarclass.pipeline import train_on_dataset
from sarclass.synthetic import binary_corpus, multiclass_corpus


@pytest.fixture(scope="session")
def binary_data():
    return binary_corpus(1000, 1000, 42)


@pytest.fixture(scope="session")
def multiclass_data():
    return multiclass_corpus(300, 42)


@pytest.fixture(scope="session")
def small_binary():
    return binary_corpus(150, 150, 7)


@pytest.fixture(scope="session")
def binary_model(binary_data):
    return train_on_dataset(binary_data, ClassifierSpec("lr", {}, 42))


@pytest.fixture(scope="session")
def multiclass_model(multiclass_data):
    return train_on_dataset(multiclass_data, ClassifierSpec("lr", {}, 42))


@pytest.fixture(scope="session")
def binary_model_file(binary_model, tmp_path_factory):
    from sarclass.classifiers import save_model

    path = tmp_path_factory.mktemp("models") / "binary.json"
    save_model(binary_model, path)
    return path
