import pytest

from gmctail.field import DomainSpec, Grid, KernelSpec

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the criterion under test and return the verdict."""
    def record(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        print(line)
        return ok
    return record


@pytest.fixture
def unit_kernel():
    def make(gamma=2**-0.5, n_points=64, f=0.0, epsilon=None):
        kernel = KernelSpec(DomainSpec.cube(0.0, 1.0), f=f, gamma=gamma, epsilon=epsilon)
        return kernel, Grid.uniform(kernel.domain, n_points)
    return make
