import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

MIPLIB = Path(__file__).resolve().parent.parent / "data" / "miplib"


def miplib_path(name: str) -> Path:
    return MIPLIB / f"{name}.mps.gz"


@pytest.fixture
def miplib():
    def get(name):
        path = miplib_path(name)
        if not path.exists():
            pytest.skip(f"benchmark file {path.name} not available")
        return path

    return get


@pytest.fixture(scope="session")
def crafted_with_optima():
    from crafted import crafted_instances, enumerate_optimum

    return [(p, *enumerate_optimum(p)) for p in crafted_instances()]


VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Context manager recording PASS/FAIL/SKIP for a numbered acceptance criterion."""
    from contextlib import contextmanager

    verdicts = request.config.stash.setdefault(VERDICTS, {})

    @contextmanager
    def check(number, label):
        try:
            yield
        except pytest.skip.Exception as exc:
            verdicts[number] = ("SKIP", f"{label} ({exc.msg})")
            raise
        except BaseException as exc:
            verdicts[number] = ("FAIL", f"{label}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        verdicts[number] = ("PASS", label)

    return check


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(VERDICTS, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        status, text = verdicts[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {text}")
