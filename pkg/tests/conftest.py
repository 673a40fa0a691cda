import numpy as np
import pytest

from angio3d.camera import CArmPose, build_projection


@pytest.fixture(scope="session")
def pa_pose():
    return CArmPose(0.0, 0.0)


@pytest.fixture(scope="session")
def lao30_pose():
    return CArmPose(30.0, 0.0)


@pytest.fixture(scope="session")
def models(pa_pose, lao30_pose):
    return build_projection(pa_pose), build_projection(lao30_pose)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
