import numpy as np
import pytest

from compressed_pca.model import make_spiked

REFERENCE_SPIKES = [50.0, 40.0, 30.0, 20.0, 10.0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_model():
    return make_spiked(3, [2.0])


@pytest.fixture
def reference_model():
    return make_spiked(10000, REFERENCE_SPIKES)


@pytest.fixture
def acceptance_log(request):
    """Collects one line per acceptance check for the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
