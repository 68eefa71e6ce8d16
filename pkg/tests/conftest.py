import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lipext.spaces import FiniteMetricSpace, PartialFunction, SpaceDescriptor

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")

ALL_DESCRIPTORS = [
    SpaceDescriptor.real_sup(1),
    SpaceDescriptor.real_sup(3),
    SpaceDescriptor.real_euclid(2),
    SpaceDescriptor.real_euclid(4),
    SpaceDescriptor.complex_plane(),
    SpaceDescriptor.seq_sup_complex(3),
    SpaceDescriptor.matrix_full(2),
    SpaceDescriptor.matrix_full(3),
    SpaceDescriptor.matrix_sa(2),
    SpaceDescriptor.matrix_sa(3),
]


def random_elements(desc: SpaceDescriptor, count: int, rng: np.random.Generator) -> np.ndarray:
    shape = (count,) + desc.shape
    x = rng.standard_normal(shape)
    if not desc.is_real:
        x = x + 1j * rng.standard_normal(shape)
    if desc.kind == "mn-sa":
        x = 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))
    return x


def random_scalar_instance(rng: np.random.Generator, max_points: int = 12) -> PartialFunction:
    m = int(rng.integers(2, max_points + 1))
    dim = int(rng.integers(1, 4))
    space = FiniteMetricSpace.from_points(rng.standard_normal((m, dim)))
    k = int(rng.integers(1, m + 1))
    subset = tuple(sorted(rng.choice(m, size=k, replace=False)))
    values = rng.uniform(-3, 3, size=(k, 1))
    return PartialFunction(space, subset, values, SpaceDescriptor.real_sup(1))


def line_instance() -> PartialFunction:
    """Z = {0, 1, 2} on the line, f(0) = 0, f(2) = 1."""
    return PartialFunction(FiniteMetricSpace.line(3), (0, 2), [[0.0], [1.0]], SpaceDescriptor.real_sup(1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# --- acceptance summary ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    status = "PASS" if report.passed else "FAIL"
    if number not in _CRITERIA or status == "FAIL":
        _CRITERIA[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"C{number:02d} {status} {title}: {detail}")
