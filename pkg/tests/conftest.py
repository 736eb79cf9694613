import pytest

from dhot.modmath import ProtocolParams, generate_params

# 23 = 2*11 + 1; the order-11 subgroup is the quadratic residues
P23 = ProtocolParams(p=23, q=11, bases=(2, 3), k=16, r=3)
P23_M3 = ProtocolParams(p=23, q=11, bases=(2, 3, 4), k=16, r=3)
# arithmetic-only context: 19 is not a safe prime, so this fails validation on purpose
P19 = ProtocolParams(p=19, q=9, bases=(3, 7), k=14, r=2)


@pytest.fixture
def p23():
    return P23


@pytest.fixture
def p19():
    return P19


@pytest.fixture(scope="session")
def params16():
    return generate_params(16, 2, r_choice=3, seed=11)


@pytest.fixture(scope="session")
def params64():
    return generate_params(64, 2, seed=64)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
