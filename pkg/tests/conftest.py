import pytest

from pmlab.twopattern import Params2P, generate_2fp, generate_2p, generate_fp

# small parameters that pass every acceptance check in well under a second
SMALL = dict(sigma_bits=3, trailing_bits=2, doc_count=512, ell=7, beta=6, seed=3)
# the default desk scale: sigma=6, p=3, D=2^12 with ell=8, beta=6
DEFAULT = dict(sigma_bits=6, trailing_bits=3, doc_count=4096, ell=8, beta=6, seed=1)


@pytest.fixture(scope="session")
def small_2p():
    return generate_2p(Params2P(**SMALL))


@pytest.fixture(scope="session")
def small_fp():
    return generate_fp(Params2P(**SMALL))


@pytest.fixture(scope="session")
def small_2fp():
    return generate_2fp(Params2P(**SMALL))


@pytest.fixture(scope="session")
def default_2p():
    """Accepted instance at the default scale (about a minute to build)."""
    return generate_2p(Params2P(**DEFAULT))


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(n, name, ok, detail)."""

    def record(n, name, ok, detail=""):
        line = f"criterion {str(n):>2} {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        _CRITERIA.append(((int(str(n).rstrip("b")), str(n)), line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA, key=lambda x: x[0]):
        terminalreporter.write_line(line)
