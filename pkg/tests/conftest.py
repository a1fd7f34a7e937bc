import numpy as np
import pytest

from rcpanel import _backend


@pytest.fixture(params=["compiled", "python"])
def backend(request):
    """Run a test under each available backend."""
    if request.param == "compiled" and not _backend.compiled_available():
        pytest.skip("compiled kernels not built")
    with _backend.use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, collected by ``test_acceptance``."""
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        parts = ACCEPTANCE[cid]
        ok = all(p[0] for p in parts.values())
        detail = "; ".join(f"{k.strip()} {'' if v[0] else 'FAIL '}{v[1]}".strip()
                           if k.strip() else v[1] for k, v in parts.items())
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}: {detail}")
