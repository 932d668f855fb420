import pytest

from cosearch.config import bundled
from cosearch.corpus import build_graph, load_corpus, load_ontology
from cosearch.gat import ModelConfig
from cosearch.train import TrainConfig, train


@pytest.fixture(scope="session")
def household():
    """(ontology, graph) from the bundled corpus."""
    onto = load_ontology(bundled("ontology.tsv"))
    triples = load_corpus(bundled("corpus.tsv"), onto)
    return onto, build_graph(triples, onto)


@pytest.fixture(scope="session")
def trained_model(household):
    _, graph = household
    model, _ = train(graph, TrainConfig(), ModelConfig())
    return model


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    lines = [v for k, v in report.user_properties if k == "acceptance"]
    if not lines:
        lines = [f"FAIL  {report.nodeid.split('::')[-1]}: raised before reporting"]
    _ACCEPTANCE.extend(lines)


_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])
                           if "criterion " in s else 99):
            terminalreporter.write_line(line)
