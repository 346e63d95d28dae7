import numpy as np
import pytest

from pqrst.synth import SynthConfig, synth_components, synth_ecg
from pqrst.wavelet import default_kernel

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def kernel():
    return default_kernel()


@pytest.fixture(scope="session")
def clean_record():
    return synth_ecg(SynthConfig(duration_s=30.0, hr_bpm=60.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
