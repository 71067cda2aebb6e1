import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve

from avgtransfer.energy import (C_ENERGY, MAX_DPHI, R_SCALE, THETA_MAX, FlatPoint, G_t,
                                G_t_from_metric, curvature_grid, energy_field, energy_geodesic,
                                energy_phase_flow, energy_reachable, first_integral, from_flat,
                                heteroclinic_dphi, metric, tangential_phi_coefficient, to_flat)
from avgtransfer.errors import DomainError, OutOfSector


def test_to_flat_examples():
    p = to_flat(1.0, 0.0)
    assert p.x == 0.0 and p.z == pytest.approx(2 ** 1.5 / 5)
    q = to_flat(1.0, math.sin(C_ENERGY * math.pi / 4))
    assert q.theta == pytest.approx(math.pi / 4) and q.r == pytest.approx(R_SCALE)


@given(n=st.floats(0.05, 20.0), e=st.floats(-0.999, 0.999))
def test_flat_round_trip(n, e):
    back = from_flat(to_flat(n, e))
    assert back.n == pytest.approx(n, rel=1e-12) and back.e == pytest.approx(e, abs=1e-12)


def test_out_of_sector():
    with pytest.raises(OutOfSector):
        from_flat(FlatPoint(-0.01, -1.0))
    with pytest.raises(DomainError):
        to_flat(1.0, 1.0)


@given(n=st.floats(0.1, 10.0), e=st.floats(-0.95, 0.95), dn=st.floats(-1, 1),
       de=st.floats(-1, 1))
def test_flat_map_is_isometry_up_to_scale(n, e, dn, de):
    # pulled-back Euclidean length = (2^(3/2)/5 / (2/5))^2 times the metric length
    h = 1e-6
    a, b = to_flat(n, e), to_flat(n + h * dn, e + h * de)
    flat = ((b.x - a.x) ** 2 + (b.z - a.z) ** 2) / h ** 2
    gn, ge = metric(n, e)
    g = gn * dn ** 2 + ge * de ** 2
    k = (R_SCALE / 0.4) ** 2
    assert flat == pytest.approx(k * g, rel=1e-4, abs=1e-10)


def test_curvature_vanishes():
    K = curvature_grid(np.linspace(0.3, 3.0, 6), np.linspace(-0.8, 0.8, 5))
    assert np.max(np.abs(K)) < 1e-6


def _shoot(n0, phi0, n1, phi1):
    def rhs(_, y):
        n, phi, dn, dphi = y
        return [dn, dphi, dn * dn / (6 * n) + 3 * n * dphi * dphi, -5.0 / 3.0 * dn * dphi / n]

    def end(v):
        sol = solve_ivp(rhs, (0, 1), [n0, phi0, *v], rtol=1e-12, atol=1e-13)
        return [sol.y[0, -1] - n1, sol.y[1, -1] - phi1]

    v = fsolve(end, [n1 - n0, phi1 - phi0], xtol=1e-13)
    return solve_ivp(rhs, (0, 1), [n0, phi0, *v], rtol=1e-12, atol=1e-13, dense_output=True)


def test_geodesic_matches_shooting_oracle():
    g = energy_geodesic((1.0, 0.0), (2.0, 0.1), num=201)
    assert g.reachable and g.residual < 1e-6
    ref = _shoot(1.0, 0.0, 2.0, math.asin(0.1))
    y = ref.sol(g.s)
    assert np.max(np.abs(g.n - y[0])) < 1e-5
    assert np.max(np.abs(g.e - np.sin(y[1]))) < 1e-5


def test_degenerate_geodesic():
    g = energy_geodesic((1.0, 0.2), (1.0, 0.2))
    assert g.reachable and len(g.s) == 1


def test_geodesic_leaves_sector():
    e = math.sin(0.95 * THETA_MAX * C_ENERGY)
    g = energy_geodesic((1.0, -e), (1.0, e))
    assert not g.reachable
    assert abs(g.witness.theta) == pytest.approx(THETA_MAX, abs=1e-9)
    assert not energy_reachable(-math.asin(e), math.asin(e))


def test_example_pair_at_099_is_inside():
    # |dphi| = 0.99 sqrt(2/5) pi, just under the bound: the chord stays in the sector
    e = math.sin(C_ENERGY * math.pi / 2 * 0.99)
    g = energy_geodesic((1.0, -e), (1.0, e))
    assert g.reachable == energy_reachable(-math.asin(e), math.asin(e)) is True


def test_reachability_examples():
    assert not energy_reachable(-1.5, 0.6)
    assert energy_reachable(0.3, 0.3)
    assert energy_reachable(-0.5, 0.5)
    with pytest.raises(DomainError):
        energy_reachable(-math.pi / 2, 0.0)


@given(phi0=st.floats(-1.5, 1.5), phi1=st.floats(-1.5, 1.5))
def test_reachability_agrees_with_chord(phi0, phi1):
    if abs(abs(phi1 - phi0) - MAX_DPHI) < 1e-9:
        return
    g = energy_geodesic((1.0, math.sin(phi0)), (1.3, math.sin(phi1)), num=3)
    assert g.reachable == energy_reachable(phi0, phi1)


def test_equilibria_lines():
    for psi in (0.0, math.pi):
        a, b = energy_field(psi)
        assert abs(a) < 1e-15 and abs(b) < 1e-15
    tr = energy_phase_flow(0.0, 0.4, 5.0)
    assert np.allclose(tr.phi, 0.4)


@given(psi0=st.floats(-3.1, 3.1), phi0=st.floats(-1.0, 1.0))
def test_first_integral_conserved(psi0, phi0):
    tr = energy_phase_flow(psi0, phi0, 8.0)
    assert tr.drift() < 1e-8


def test_first_integral_branch_is_continuous():
    psi = np.linspace(-2 * math.pi, 2 * math.pi, 4001)
    f = first_integral(psi, 0.0)
    assert np.max(np.abs(np.diff(f))) < 0.01


def test_heteroclinic_variation():
    assert heteroclinic_dphi() == pytest.approx(MAX_DPHI, abs=1e-3)


def test_tangential_normal_form():
    phi = np.linspace(0.05, 1.4, 30)
    assert np.allclose(G_t_from_metric(phi), G_t(phi), rtol=1e-7)
    assert np.allclose(tangential_phi_coefficient(phi), 1.0, atol=1e-6)
