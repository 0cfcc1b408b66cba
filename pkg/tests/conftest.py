import pytest

from kgcondense.kg import KnowledgeGraph

DIAMOND = [("s", "r", "a"), ("a", "r", "t"), ("s", "r", "b"), ("b", "r", "t"), ("a", "r", "c")]

_acceptance: dict[str, str] = {}


@pytest.fixture
def diamond():
    kg = KnowledgeGraph.from_triples(DIAMOND)
    return kg, kg.entity_id("s"), kg.entity_id("t")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if rep.failed:
        _acceptance[label] = "FAIL"
    elif rep.when == "call" and rep.passed:
        _acceptance.setdefault(label, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _acceptance.items():
        terminalreporter.write_line(f"{status}  {label}")
