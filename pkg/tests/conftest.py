import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def small_universe():
    from prejump.synthetic import JumpSpec, PrejumpPattern, generate_synthetic_universe

    pattern = PrejumpPattern(volume_factor=3.0, volume_onset=12, volume_shape="step")
    return generate_synthetic_universe(4, 90, JumpSpec(rate_per_day=0.2), seed=3, patterns=pattern)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import lines

    rows = lines()
    if rows:
        terminalreporter.section("acceptance criteria")
        for row in rows:
            terminalreporter.write_line(row)
