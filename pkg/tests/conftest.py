import os
from pathlib import Path

import numpy as np
import pytest

from deepmpc import FixedConfig
from deepmpc.backend import EmulatorBackend, MPCBackend
from deepmpc.data import DATA_ENV
from deepmpc.transport import run_parties

MNIST_DIR = Path(os.environ.get(DATA_ENV, Path.home() / "data" / "mnist"))


def have_mnist() -> bool:
    return (MNIST_DIR / "train-images-idx3-ubyte").exists()


needs_mnist = pytest.mark.skipif(not have_mnist(), reason=f"MNIST not found in {MNIST_DIR}")


def mpc(fn, *args, cfg=None, rounding="prob", seed=1, **kw):
    """Run fn(backend, *args) as three parties; returns the three results."""
    cfg = cfg or FixedConfig()

    def party(session):
        return fn(MPCBackend(session, cfg, rounding, seed), *args, **kw)

    return run_parties(party, session_seed=seed.to_bytes(32, "little"))


def mpc0(fn, *args, **kw):
    return mpc(fn, *args, **kw)[0]


def emu(rounding="nearest", cfg=None, seed=0):
    return EmulatorBackend(cfg or FixedConfig(), rounding, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA: list[str] = []


def report(number, ok: bool, detail: str) -> bool:
    CRITERIA.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
