import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avgtransfer.field import SQRT10
from avgtransfer.flow import (CSV_HEADER, FlowConfig, Region, StopCondition, classify, integrate,
                              trace_manifolds)
from avgtransfer.hamiltonian import ControlMode

FULL, TAN = ControlMode.FULL, ControlMode.TANGENTIAL


@pytest.fixture(scope="module")
def full_manifolds():
    return trace_manifolds(FULL)


@pytest.fixture(scope="module")
def tan_manifolds():
    return trace_manifolds(TAN)


@pytest.mark.parametrize("mode", [FULL, TAN])
def test_constant_solutions(mode):
    tr = integrate((0.0, 0.0), n0=2.0, mode=mode, stop=StopCondition(tau_max=3.0))
    assert np.allclose(tr.psi, 0.0, atol=1e-12) and np.allclose(tr.phi, 0.0, atol=1e-12)
    assert np.allclose(tr.lam, tr.tau, atol=1e-10)
    assert np.allclose(tr.n, 2.0 * np.exp(3.0 * tr.tau), rtol=1e-9)
    tr = integrate((math.pi, 0.0), mode=mode, stop=StopCondition(tau_max=2.0))
    assert np.allclose(tr.lam, -tr.tau, atol=1e-10)


def test_step_halving_oracle():
    # from (0.2, -0.5) b < 0 and phi runs to the boundary; psi = 1.2 crosses phi = 0.5
    stop = StopCondition.at_phi(0.5)
    a = integrate((1.2, -0.5), stop=stop)
    b = integrate((1.2, -0.5), stop=stop, config=FlowConfig(max_step=0.025, rtol=1e-12,
                                                            atol=1e-14))
    assert a.reason == b.reason == "target"
    assert abs(a.final.phi - 0.5) < 1e-12
    assert abs(a.final.psi - b.final.psi) < 1e-7
    assert abs(a.final.tau - b.final.tau) < 1e-7


@settings(max_examples=8)
@given(psi=st.floats(-math.pi, math.pi), phi=st.floats(-1.2, 1.2),
       mode=st.sampled_from([FULL, TAN]), sign=st.sampled_from([1.0, -1.0]))
def test_hamiltonian_conserved(psi, phi, mode, sign):
    tr = integrate((psi, phi), n0=1.3, mode=mode, stop=StopCondition(tau_max=sign * 5.0))
    assert tr.hamiltonian_drift() < 1e-6


def test_time_closed_form_matches_quadrature():
    tr = integrate((0.9, -0.3), stop=StopCondition(tau_max=2.0))
    assert tr.time_residual() < 1e-8


def test_sharp_symmetry_of_flow():
    stop = StopCondition(tau_max=1.5)
    a = integrate((0.7, 0.4), stop=stop)
    b = integrate((-0.7, -0.4), stop=stop)
    assert b.final.psi == pytest.approx(-a.final.psi, abs=1e-9)
    assert b.final.phi == pytest.approx(-a.final.phi, abs=1e-9)
    assert b.lam[-1] == pytest.approx(a.lam[-1], abs=1e-9)


def test_manifold_slopes(full_manifolds, tan_manifolds):
    phi = 1e-3
    assert full_manifolds.U0(phi) / phi == pytest.approx(SQRT10 - 3, abs=2e-3)
    assert tan_manifolds.U0(phi) / phi == pytest.approx(1.0 / 6.0, abs=2e-3)
    # the tangential stable branch leaves the phi axis at -arctan(1/2)
    assert tan_manifolds.S0(1e-6) == pytest.approx(-math.atan(0.5), abs=1e-3)


def test_manifolds_are_invariant(full_manifolds):
    # an orbit started on U0 stays on it
    phi0 = 0.3
    start = (full_manifolds.exact("U0", phi0), phi0)
    tr = integrate(start, stop=StopCondition.at_phi(0.9))
    assert tr.reason == "target"
    assert tr.final.psi == pytest.approx(full_manifolds.exact("U0", 0.9), abs=1e-6)


def test_exact_matches_graph(full_manifolds):
    for phi in (0.2, 0.8, 1.3):
        assert full_manifolds.exact("S0", phi) == pytest.approx(full_manifolds.S0(phi), abs=1e-6)
        assert full_manifolds.exact("Spi", -phi) == pytest.approx(full_manifolds.Spi(-phi),
                                                                  abs=1e-6)


def test_classify_examples(full_manifolds):
    m = full_manifolds
    assert classify((0.01, 0.3), m) is Region.F
    assert classify((math.pi, 0.3), m) is Region.F_PLUS
    assert classify((m.U0(0.3) + 1.0, 0.3), m) is Region.E
    assert classify((-0.01, -0.3), m) is Region.F_SHARP
    assert classify((m.U0(0.3), 0.3), m) is Region.ON_MANIFOLD
    assert classify((0.0, 0.0), m) is Region.ON_MANIFOLD


def test_csv_header(tmp_path):
    tr = integrate((0.3, 0.1), stop=StopCondition(tau_max=0.5))
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "tau,psi,phi,n,rho,t_phys"
    assert len(lines) == len(tr) + 1


def test_boundary_reason():
    tr = integrate((1.5, 1.2), stop=StopCondition(tau_max=200.0))
    assert tr.reason in ("boundary", "tau_max")
    assert np.all(np.abs(tr.phi) < math.pi / 2)
