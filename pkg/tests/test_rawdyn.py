import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avgtransfer.errors import CircularSingularity, DomainError
from avgtransfer.hamiltonian import ControlMode
from avgtransfer.rawdyn import (CSV_HEADER, FrozenCostate, GaussState, averaging_check,
                                equinoctial_rhs, free_period, gauss_rhs, omega_rate,
                                orbit_increment, propagate)


# ---- Cartesian oracle (mu = 1): elements as functions of (r, v)

def _cartesian(n, e, omega, l):
    a = n ** (-2.0 / 3.0)
    p = a * (1 - e * e)
    v = l - omega
    r = p / (1 + e * math.cos(v))
    pos = r * np.array([math.cos(l), math.sin(l)])
    vel = math.sqrt(1 / p) * np.array([-math.sin(l) - e * math.sin(omega),
                                       math.cos(l) + e * math.cos(omega)])
    return pos, vel


def _elements(pos, vel):
    r = np.linalg.norm(pos)
    h = pos[0] * vel[1] - pos[1] * vel[0]
    energy = 0.5 * vel @ vel - 1 / r
    n = (-2 * energy) ** 1.5
    evec = np.array([vel[1] * h, -vel[0] * h]) - pos / r
    return np.array([n, evec[0], evec[1], math.atan2(pos[1], pos[0])])


def _oracle_rates(n, e, omega, l, u_t, u_n, h=1e-6):
    pos, vel = _cartesian(n, e, omega, l)
    t = vel / np.linalg.norm(vel)
    f = u_t * t + u_n * np.array([-t[1], t[0]])

    def flow(s):
        r = np.linalg.norm(pos)
        # second-order Taylor step of the controlled two-body motion
        acc = -pos / r ** 3 + f
        return pos + s * vel + 0.5 * s * s * acc, vel + s * acc

    plus, minus = _elements(*flow(h)), _elements(*flow(-h))
    d = (plus - minus) / (2 * h)
    d[3] = math.remainder(plus[3] - minus[3], 2 * math.pi) / (2 * h)
    return d


@settings(max_examples=25)
@given(n=st.floats(0.5, 3.0), e=st.floats(0.05, 0.8), omega=st.floats(-3, 3),
       l=st.floats(-3, 3), u_t=st.floats(-1, 1), u_n=st.floats(-1, 1))
def test_charts_agree_with_cartesian_oracle(n, e, omega, l, u_t, u_n):
    ref = _oracle_rates(n, e, omega, l, u_t, u_n)
    y = np.array([n, e * math.cos(omega), e * math.sin(omega), l])
    eq = equinoctial_rhs(y, u_t, u_n)
    scale = max(1.0, float(np.max(np.abs(ref))))
    assert np.allclose(eq, ref, atol=1e-6 * scale)
    kep = gauss_rhs(GaussState(n, e, omega, l), u_t, u_n)
    # (e, omega) rates from the (e_x, e_y) ones
    de = math.cos(omega) * eq[1] + math.sin(omega) * eq[2]
    dw = (math.cos(omega) * eq[2] - math.sin(omega) * eq[1]) / e
    assert np.allclose(kep, [eq[0], de, dw, eq[3]], atol=1e-9 * scale)


def test_free_rates():
    r = gauss_rhs(GaussState(1.0, 0.3, 0.0, 0.4), 0.0, 0.0)
    assert r[:3].tolist() == [0.0, 0.0, 0.0]
    assert r[3] == pytest.approx((1 + 0.3 * math.cos(0.4)) ** 2 / 0.91 ** 1.5)
    assert omega_rate(2.0, 0.0, 1.0) == 2.0
    with pytest.raises(CircularSingularity):
        gauss_rhs(GaussState(1.0, 0.0), 0.1, 0.0)


def test_free_period():
    assert free_period(GaussState(2.0, 0.0)) == pytest.approx(math.pi, rel=1e-12)
    assert free_period(GaussState(1.0, 0.5, 0.3, 1.0)) == pytest.approx(2 * math.pi, rel=1e-11)


def test_free_motion_conserves_elements():
    tr = propagate(GaussState(1.0, 0.4, 0.7, 0.0), orbits=20)
    assert np.allclose(tr.n, 1.0, rtol=1e-13) and np.allclose(tr.e, 0.4, rtol=1e-13)
    assert np.allclose(tr.omega, 0.7, atol=1e-13)
    assert tr.t[-1] == pytest.approx(40 * math.pi, rel=1e-10)


def test_zero_epsilon_has_no_drift():
    rep = averaging_check(GaussState(1.0, 0.2), epsilon=0.0, horizon_orbits=5)
    assert rep.deviation == 0.0


def test_epsilon_bound():
    with pytest.raises(DomainError):
        averaging_check(GaussState(1.0, 0.2), epsilon=0.1)


def test_chart_switch_through_circular():
    # p_e < 0 drives e down through zero and out again with the opposite sign
    cs = FrozenCostate(1.0 / 3.0, -1.0, ControlMode.FULL, 1e-2, 0.0)
    tr = propagate(GaussState(1.0, 0.06), costate=cs, orbits=30)
    assert [c for c, _ in tr.charts] == ["keplerian", "equinoctial", "keplerian"]
    es = tr.signed_e()
    assert es[0] > 0 and es[-1] < 0
    assert np.all(np.abs(np.diff(es)) < 5e-3)


@pytest.mark.parametrize("mode", [ControlMode.FULL, ControlMode.TANGENTIAL])
def test_one_orbit_increment(mode):
    d_raw, d_avg = orbit_increment(GaussState(1.0, 0.2), mode, 1e-2)
    assert np.all(np.abs(d_raw - d_avg) <= 0.2 * np.abs(d_avg))


def test_averaging_trend_full():
    start = GaussState(1.0, 0.2)
    coarse = averaging_check(start, epsilon=1e-2, horizon_orbits=20)
    fine = averaging_check(start, epsilon=1e-3, horizon_orbits=20)
    assert fine.deviation < coarse.deviation


def test_csv(tmp_path):
    tr = propagate(GaussState(1.0, 0.1), orbits=1, samples_per_orbit=8)
    p = tmp_path / "raw.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == CSV_HEADER == "t,n,e,omega,l" and len(lines) == 10
