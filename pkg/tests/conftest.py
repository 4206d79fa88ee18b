import pytest

from goalfuzz import data_path, load_bundled_seeds, load_grammar
from goalfuzz.subjects import euclid_subject, json_flatten_subject

# Filled by tests/test_acceptance.py; printed once at the end of the session.
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def euclid_grammar():
    return load_grammar(data_path("euclid.bnf").read_text())


@pytest.fixture(scope="session")
def euclid_seeds():
    return load_bundled_seeds("euclid_seeds")


@pytest.fixture(scope="session")
def json_grammar():
    return load_grammar(data_path("json.bnf").read_text())


@pytest.fixture(scope="session")
def json_seeds():
    return load_bundled_seeds("json_seeds")


@pytest.fixture
def euclid():
    return euclid_subject()


@pytest.fixture
def json_subject():
    return json_flatten_subject()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")
