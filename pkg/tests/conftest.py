import time

import pytest

from platoon_hinf import (
    PlatoonConfig,
    SynthOptions,
    default_weights,
    synthesize_multiobj,
    synthesize_traditional,
)


class Design:
    def __init__(self, cfg, result, elapsed):
        self.cfg = cfg
        self.result = result
        self.controller = result.controller
        self.elapsed = elapsed


def _design(solver, **flat):
    cfg = PlatoonConfig.from_flat(**flat)
    t0 = time.perf_counter()
    res = solver(cfg, default_weights(cfg.ts), SynthOptions())
    return Design(cfg, res, time.perf_counter() - t0)


# Full-budget designs (10 restarts) shared by every test module.
@pytest.fixture(scope="session")
def acc_design():
    return _design(synthesize_multiobj, mode="ACC", h=1.0)


@pytest.fixture(scope="session")
def cacc_design():
    return _design(synthesize_multiobj, mode="CACC", h=0.5)


@pytest.fixture(scope="session")
def trad_design():
    return _design(synthesize_traditional, mode="ACC", h=1.0)


_VERDICTS = {}


@pytest.fixture(scope="session")
def verdicts():
    """Criterion id -> (passed, detail); printed in the terminal summary."""
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS, key=lambda k: int(k.split()[0])):
        ok, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
