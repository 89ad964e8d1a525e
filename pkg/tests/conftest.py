import numpy as np
import pytest

from motionedit.codec import Motion, canonicalize
from motionedit.rotations import random_rotations
from motionedit.skeleton import default_skeleton


def random_motion(rng, n_frames=None, fps=20.0, canonical=True):
    n = int(n_frames or rng.integers(2, 101))
    trans = np.cumsum(rng.normal(scale=0.05, size=(n, 3)), axis=0) + rng.normal(size=3)
    root = random_rotations(n, rng)
    pose = random_rotations(n * 21, rng).reshape(n, 21, 3, 3)
    m = Motion(trans, root, pose, fps)
    return canonicalize(m) if canonical else m


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def skeleton():
    return default_skeleton()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
