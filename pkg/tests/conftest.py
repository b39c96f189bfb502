import pytest

from metaret.encoder import DeterministicEncoder
from metaret.synthetic import ablation_corpus, disambiguation_corpus, random_corpus


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\n[acceptance] {status}: {name}", flush=True)
    elif report.when == "setup" and report.skipped:
        print(f"\n[acceptance] SKIP: {name}", flush=True)


@pytest.fixture(scope="session")
def encoder():
    return DeterministicEncoder(dim=256)


@pytest.fixture(scope="session")
def wide_encoder():
    return DeterministicEncoder(dim=1024)


@pytest.fixture(scope="session")
def synthetic():
    return disambiguation_corpus()


@pytest.fixture(scope="session")
def synthetic_ablation():
    return ablation_corpus()


@pytest.fixture(scope="session")
def small_random():
    return random_corpus(n_chunks=120, n_docs=8, n_queries=16, seed=7)
