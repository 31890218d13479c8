"""Session fixtures: the three 256-cell reference sweeps.

These are the expensive shared instances (a few seconds each); everything
that needs a full warm-started schedule reads them from here so the suite
solves each family exactly once.
"""

import time

import pytest

from fraclap.domain_grid import DomainSpec, build_grid, build_kernel
from fraclap.experiments import RunConfig, run_sweep


class SweepCase:
    def __init__(self, radius, h, label):
        self.config = RunConfig(
            domain=DomainSpec(1, "interval", (-radius, radius), h),
            s=0.5,
            label=label,
        )
        self.radius = radius
        start = time.perf_counter()
        self.table = run_sweep(self.config)
        self.seconds = time.perf_counter() - start
        self.grid = build_grid(self.config.domain)
        self.kernel_1 = build_kernel(self.grid, 1.5)


@pytest.fixture(scope="session")
def van16():
    """Subcritical interval: half-width 16, Cheeger constant above 1."""
    return SweepCase(16.0, 0.125, "van16")


@pytest.fixture(scope="session")
def crit32():
    """Calibrable interval: half-width 32, Cheeger constant exactly 1."""
    return SweepCase(32.0, 0.25, "crit32")


@pytest.fixture(scope="session")
def blow64():
    """Supercritical interval: half-width 64, Cheeger constant below 1."""
    return SweepCase(64.0, 0.5, "blow64")
