import numpy as np
import pytest

from inrpam.core import ImageGrid, PsfKernel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h, w, low=0.0, high=1.0):
    return ImageGrid(rng.uniform(low, high, size=(h, w)))


def random_kernel(rng, size):
    return PsfKernel.normalized(rng.uniform(0.0, 1.0, size=(size, size)))


def brute_force_correlate(img, weights, boundary="reflect"):
    """Nested-loop oracle for the correlation-style blur."""
    h, w = img.shape
    size = weights.shape[0]
    half = size // 2
    out = np.zeros((h, w))

    def fetch(y, x):
        if boundary == "reflect":
            y = -y - 1 if y < 0 else (2 * h - y - 1 if y >= h else y)
            x = -x - 1 if x < 0 else (2 * w - x - 1 if x >= w else x)
            return img[y, x]
        if 0 <= y < h and 0 <= x < w:
            return img[y, x]
        return 0.0

    for y in range(h):
        for x in range(w):
            acc = 0.0
            for a in range(size):
                for b in range(size):
                    acc += weights[a, b] * fetch(y + a - half, x + b - half)
            out[y, x] = acc
    return out


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance check, printed at session end."""

    def _report(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] acceptance {number:>2}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance summary")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("acceptance")[1].split(":")[0])):
            terminalreporter.write_line(line)
