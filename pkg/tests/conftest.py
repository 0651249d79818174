import numpy as np
import pytest

from tagsysid.genotype import derive
from tagsysid.grammar import validate_derived, validate_provenance


def sources(grammar, genotype):
    """Instance id -> elementary tree, matching the ids used by ``derive``."""
    return {i: node.elementary(grammar) for i, (_, node) in enumerate(genotype.root.walk())}


def check_genotype(grammar, genotype):
    tree = derive(grammar, genotype)
    validate_derived(tree, grammar)
    validate_provenance(tree, sources(grammar, genotype))
    return tree


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number, title, passed, detail):
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
    line = f"[{status}] criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
