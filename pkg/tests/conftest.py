from pathlib import Path

import pytest

from sketchsynth.family import parse_family
from sketchsynth.lang import parse_sketch

DATA = Path(__file__).parent / "data"
BENCH = Path(__file__).parents[1] / "src" / "sketchsynth" / "benchmarks"

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rex_text():
    return (BENCH / "rex" / "rex.sk").read_text()


@pytest.fixture(scope="session")
def rex(rex_text):
    return parse_sketch(rex_text)


@pytest.fixture(scope="session")
def family():
    return parse_family((DATA / "family_ex1.fam").read_text())


@pytest.fixture(scope="session")
def fam_members(family):
    """Realizations r1..r4 of the five-state family, keyed 1..4."""
    from sketchsynth.family import enumerate_family, family_instantiate
    return {i + 1: family_instantiate(family, r) for i, r in enumerate(enumerate_family(family))}


BUNDLES = {
    "rex": ("rex/rex.sk", "rex/safe.props", 3, "s=3", "max"),
    "dpm": ("dpm/dpm.sk", "dpm/dpm.props", None, "t=8 & fail=0", "max"),
    "grid": ("grid/grid.sk", "grid/grid.props", None, "x=3 & y=3", "max"),
    "intrusion": ("intrusion/intrusion.sk", "intrusion/intrusion.props", 6, "h=7", "min"),
}


@pytest.fixture(scope="session", params=sorted(BUNDLES))
def bundle(request):
    """(sketch, properties, budget, goal, mode) of one bundled benchmark."""
    from sketchsynth.lang import parse_goal, parse_properties
    sk_path, props_path, budget, goal, mode = BUNDLES[request.param]
    sketch = parse_sketch((BENCH / sk_path).read_text())
    spec = parse_properties((BENCH / props_path).read_text(), sketch)
    return sketch, spec, budget, parse_goal(goal, sketch), mode
