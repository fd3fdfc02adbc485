from pathlib import Path

import numpy as np
import pytest

from objmark import EmbedConfig, embed, load_object

DATA = Path(__file__).parent / "data"
REF_IMAGE = DATA / "reference.pgm"
REF_MASK = DATA / "reference_mask.pgm"
REF_KEY = 42


@pytest.fixture(scope="session")
def reference():
    return load_object(REF_IMAGE, REF_MASK)


@pytest.fixture(scope="session")
def embedded(reference):
    wm, rep = embed(reference, REF_KEY, EmbedConfig())
    return wm, rep


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_mask(rng, h, w, kind=None):
    """Blobby masks: ellipses, random rectangles unions, or noise."""
    kind = kind or rng.choice(["ellipse", "rects", "noise", "full"])
    yy, xx = np.mgrid[:h, :w]
    if kind == "ellipse":
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(2, h), rng.uniform(2, w)
        m = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 < 1
    elif kind == "rects":
        m = np.zeros((h, w), bool)
        for _ in range(rng.integers(1, 5)):
            r0, c0 = rng.integers(0, h), rng.integers(0, w)
            m[r0:r0 + rng.integers(1, h + 1), c0:c0 + rng.integers(1, w + 1)] = True
    elif kind == "noise":
        m = rng.random((h, w)) < rng.uniform(0.2, 0.9)
    else:
        m = np.ones((h, w), bool)
    if not m.any():
        m[rng.integers(0, h), rng.integers(0, w)] = True
    return m


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
