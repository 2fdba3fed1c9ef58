import pytest

from tempfade.recipes import RECIPES, run_recipe

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number, ok, detail):
        _CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok
    return record


@pytest.fixture(scope="session")
def recipe_runs(tmp_path_factory):
    """Every recipe run twice into separate directories (reports of the first run kept)."""
    root = tmp_path_factory.mktemp("recipes")
    reports = {}
    for name in RECIPES:
        reports[name] = run_recipe(name, root / "a" / name)
        run_recipe(name, root / "b" / name)
    return root, reports


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
