import numpy as np
import pytest

from melmask.toys import lowpass_denoiser_model, random_model

# (criterion name, passed) in execution order
_ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): exit-criterion test, printed as PASS/FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        _ACCEPTANCE_RESULTS.append((marker.args[0], rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")


@pytest.fixture(scope="session")
def toy_model():
    return random_model(seed=11)


@pytest.fixture(scope="session")
def lowpass_model():
    return lowpass_denoiser_model()


@pytest.fixture(scope="session")
def speechish():
    """A second-long band-limited pseudo-speech signal at 16 kHz."""
    rng = np.random.default_rng(42)
    t = np.arange(16000) / 16000
    sig = sum(np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) / k
              for k, f in enumerate((180, 360, 540, 900, 1300), start=1))
    env = 0.5 + 0.5 * np.sin(2 * np.pi * 2.7 * t) ** 2
    return 0.2 * sig * env
