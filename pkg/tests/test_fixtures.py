import pytest

from seqignore.ci import check_statement
from seqignore.diagram import implied_ci
from seqignore.fixtures import NAMES, PAIRED_DIAGRAM, UnknownFixture, fixture, verify_fixture

ALL = [n for n in NAMES if n != "cts(N)"] + ["cts(2)", "cts(10)", "cts(100)"]


@pytest.mark.parametrize("name", ALL)
def test_fixture_reproduces(name):
    report = verify_fixture(name)
    bad = [(r.label, r.expected, r.actual) for r in report.rows if not r.passed]
    assert not bad
    assert report.rows


@pytest.mark.parametrize("name", ["discretesi", "appb", "hiv-toy", "xor", "cts(3)"])
def test_paired_diagram_statements_hold(name):
    fx = fixture(name)
    assert fx.paired is not None
    implied = implied_ci(fx.paired)
    assert implied
    for stmt in implied:
        assert check_statement(fx.model, stmt, ("o", "s")), stmt


def test_pairing_table_covers_the_models():
    assert set(PAIRED_DIAGRAM) == {"discretesi", "cts", "appb", "hiv-toy", "xor"}


def test_unknown_names():
    for bad in ["nope", "cts(1)", "cts(x)", "fig6"]:
        with pytest.raises(UnknownFixture):
            fixture(bad)
