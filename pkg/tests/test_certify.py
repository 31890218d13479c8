"""Certificate construction and verification for the nonsmooth problem."""

import numpy as np
import pytest

from fraclap.certify import (
    build_certificate,
    equal_pair_mass,
    plateau_measure,
    verify_certificate,
)
from fraclap.domain_grid import DomainSpec, build_grid, build_kernel
from fraclap.energy import LoadField, load_from_array


@pytest.fixture(scope="module")
def cell1():
    grid = build_grid(DomainSpec(1, "interval", (0.0, 1.0), 1.0))
    kern = build_kernel(grid, 1.5)  # n + s with s = 0.5
    return grid, kern


@pytest.fixture(scope="module")
def interval16():
    grid = build_grid(DomainSpec(1, "interval", (-1.0, 1.0), 0.125))
    kern = build_kernel(grid, 1.5)
    return grid, kern


# ---------------------------------------------------------------------------
# one-cell trichotomy
# ---------------------------------------------------------------------------


def test_one_cell_subcritical_feasible(cell1):
    grid, kern = cell1
    t0 = kern.t[0]
    f = load_from_array(np.array([4.0]))  # f m < t
    cert = build_certificate(np.zeros(1), f, kern)
    assert cert.feasible
    assert cert.max_residual <= 1e-8 * cert.scale
    assert abs(cert.zbar[0] - 4.0 / t0) < 1e-6


def test_one_cell_critical_saturates(cell1):
    grid, kern = cell1
    t0 = kern.t[0]
    f = load_from_array(np.array([t0]))  # f m = t exactly
    cert = build_certificate(np.zeros(1), f, kern)
    assert cert.feasible
    assert abs(cert.zbar[0] - 1.0) < 1e-6


def test_one_cell_critical_certificate_is_shared(cell1):
    grid, kern = cell1
    t0 = kern.t[0]
    f = load_from_array(np.array([t0]))
    # both multiples of the indicator carry the same saturated sign field
    cert = build_certificate(np.ones(1), f, kern)
    assert cert.feasible
    assert cert.zbar[0] == 1.0
    for scale in (1.0, 2.0):
        rep = verify_certificate(scale * np.ones(1), cert, f, kern)
        assert rep.passed


def test_one_cell_supercritical_infeasible(cell1):
    grid, kern = cell1
    t0 = kern.t[0]
    f = load_from_array(np.array([2.0 * t0]))  # f m > t
    cert = build_certificate(np.zeros(1), f, kern)
    assert not cert.feasible
    # best effort saturates the box and leaves exactly the mass excess
    assert cert.zbar[0] == 1.0
    assert abs(cert.max_residual - t0) < 1e-9


# ---------------------------------------------------------------------------
# multi-cell instances
# ---------------------------------------------------------------------------


def test_round_trip_indicator(interval16):
    grid, kern = interval16
    u = np.ones(grid.ncells)
    f = LoadField(values=kern.t / kern.m, nonnegative=True)
    cert = build_certificate(u, f, kern)
    assert cert.feasible
    assert cert.max_residual <= 1e-12 * cert.scale
    assert np.all(cert.z == 0.0)  # ties stay unsigned: balance is exact
    rep = verify_certificate(u, cert, f, kern)
    assert rep.passed


def test_overloaded_instance_reports_infeasible(interval16):
    grid, kern = interval16
    u = np.ones(grid.ncells)
    row = np.sum(kern.w, axis=1)
    values = (kern.t + row) / kern.m
    values[3] += 1.0 / kern.m[3]  # exceeds the total sign budget at cell 3
    f = LoadField(values=values, nonnegative=True)
    cert = build_certificate(u, f, kern)
    assert not cert.feasible
    # summed balances cancel the pair terms, so at least 1.0 of defect
    # must survive somewhere no matter how the free signs are chosen
    assert cert.max_residual >= 1.0 / grid.ncells
    assert not verify_certificate(u, cert, f, kern).passed


def test_residual_history_monotone(interval16):
    grid, kern = interval16
    u = np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 1.0, 1.0] * 2)
    f = load_from_array(np.ones(grid.ncells))
    cert = build_certificate(u, f, kern)
    hist = np.asarray(cert.residual_history)
    assert hist.size >= 2
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])


def test_residual_matches_recomputed_balance(interval16):
    grid, kern = interval16
    rng = np.random.default_rng(7)
    u = rng.normal(size=grid.ncells).round(1)  # rounding forces real ties
    f = load_from_array(rng.uniform(0.5, 1.5, size=grid.ncells))
    cert = build_certificate(u, f, kern)
    fm = f.values * kern.m
    r = np.sum(kern.w * cert.z, axis=1) + kern.t * cert.zbar - fm
    assert np.max(np.abs(r - cert.residual)) <= 1e-10 * cert.scale
    assert np.max(np.abs(cert.z + cert.z.T)) == 0.0
    assert np.max(np.abs(cert.z)) <= 1.0
    assert np.max(np.abs(cert.zbar)) <= 1.0


def test_verify_flags_sign_tampering(interval16):
    grid, kern = interval16
    u = np.linspace(0.1, 1.6, grid.ncells)
    f = load_from_array(np.ones(grid.ncells))
    cert = build_certificate(u, f, kern)
    z2 = cert.z.copy()
    z2[0, 1] = -z2[0, 1]
    z2[1, 0] = -z2[1, 0]
    bad = cert.__class__(
        z=z2,
        zbar=cert.zbar,
        residual=cert.residual,
        max_residual=cert.max_residual,
        scale=cert.scale,
        feasible=cert.feasible,
        iterations=cert.iterations,
        residual_history=cert.residual_history,
    )
    rep = verify_certificate(u, bad, f, kern)
    assert not rep.passed
    assert rep.sign_violation == 2.0
    assert rep.antisymmetry_violation == 0.0


def test_verify_flags_box_violation(interval16):
    grid, kern = interval16
    u = np.zeros(grid.ncells)
    f = load_from_array(np.zeros(grid.ncells))
    cert = build_certificate(u, f, kern)
    zbar2 = cert.zbar.copy()
    zbar2[0] = 1.5
    bad = cert.__class__(
        z=cert.z,
        zbar=zbar2,
        residual=cert.residual,
        max_residual=cert.max_residual,
        scale=cert.scale,
        feasible=cert.feasible,
        iterations=cert.iterations,
        residual_history=cert.residual_history,
    )
    rep = verify_certificate(u, bad, f, kern)
    assert not rep.passed
    assert abs(rep.box_violation - 0.5) < 1e-15


# ---------------------------------------------------------------------------
# flatness measures
# ---------------------------------------------------------------------------


def test_plateau_constant_field(interval16):
    grid, kern = interval16
    res = plateau_measure(np.ones(grid.ncells), kern, tau_rel=0.01)
    assert res.fraction == 1.0
    assert abs(res.measure - 2.0) < 1e-12
    assert not res.degenerate


def test_plateau_zero_field_degenerate(interval16):
    grid, kern = interval16
    res = plateau_measure(np.zeros(grid.ncells), kern, tau_rel=0.01)
    assert res.degenerate
    assert res.fraction == 1.0


def test_plateau_single_peak(interval16):
    grid, kern = interval16
    u = np.full(grid.ncells, 0.5)
    u[5] = 1.0
    res = plateau_measure(u, kern, tau_rel=0.01)
    assert abs(res.measure - 0.125) < 1e-12
    assert abs(res.fraction - 1.0 / 16.0) < 1e-12


def test_plateau_rejects_bad_tolerance(interval16):
    grid, kern = interval16
    with pytest.raises(ValueError, match="relative tolerance"):
        plateau_measure(np.ones(grid.ncells), kern, tau_rel=1.0)


def test_equal_pair_mass_constant(interval16):
    grid, kern = interval16
    res = equal_pair_mass(np.ones(grid.ncells), kern)
    assert res.interior_fraction == 1.0
    assert res.exterior_fraction == 0.0


def test_equal_pair_mass_strictly_increasing(interval16):
    grid, kern = interval16
    u = np.arange(1.0, grid.ncells + 1.0)
    res = equal_pair_mass(u, kern)
    assert res.interior_fraction == 0.0
    assert res.exterior_fraction == 0.0
    assert res.fraction == 0.0


def test_equal_pair_mass_zero_field(interval16):
    grid, kern = interval16
    res = equal_pair_mass(np.zeros(grid.ncells), kern)
    assert res.fraction == 1.0


def test_equal_pair_mass_two_plateaus():
    grid = build_grid(DomainSpec(1, "interval", (0.0, 2.0), 0.5))
    kern = build_kernel(grid, 1.5)
    res = equal_pair_mass(np.array([1.0, 1.0, 2.0, 2.0]), kern)
    # 4 of the 12 ordered interior pairs are ties
    assert abs(res.interior_fraction - 1.0 / 3.0) < 1e-12
    assert res.exterior_fraction == 0.0
