import numpy as np
import pytest

from boundsafe.config import GenConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_config():
    """48³ scenes: same pipeline as the defaults, fast enough for unit tests."""
    return GenConfig(domain_shape=(48, 48, 48), size_range=(8.0, 20.0), count=4)


def brute_force_sq_edt(mask):
    """O(n²) squared distance from each foreground voxel to the nearest background voxel."""
    fg = np.argwhere(mask)
    bg = np.argwhere(~mask)
    out = np.zeros(mask.shape, dtype=np.int64)
    if len(fg) == 0:
        return out
    d2 = ((fg[:, None, :] - bg[None, :, :]) ** 2).sum(-1).min(1)
    out[tuple(fg.T)] = d2
    return out


_VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
