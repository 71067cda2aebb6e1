import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from avgtransfer import _kernels as K
from avgtransfer.errors import DomainError, SingularCircular
from avgtransfer.hamiltonian import (ControlMode, ExtremalState, eval_L, eval_M, eval_density,
                                     ham_energy, ham_energy_polar, ham_time_direct,
                                     integrand_I, integrand_J, region, trapezoid_density)

FULL, TAN = ControlMode.FULL, ControlMode.TANGENTIAL
psis = st.floats(-math.pi, math.pi)
phis = st.floats(-1.4, 1.4)
modes = st.sampled_from([FULL, TAN])


@pytest.mark.parametrize("mode", [FULL, TAN])
@pytest.mark.parametrize("psi", [0.0, math.pi])
def test_equilibrium_values(mode, psi):
    assert eval_density(mode, (psi, 0.0)).value == pytest.approx(1.0, abs=1e-12)


def test_M_matches_trapezoid_oracle():
    v = eval_M((math.pi / 2, math.pi / 3), 1e-12).value
    assert v == pytest.approx(trapezoid_density(TAN, (math.pi / 2, math.pi / 3)), abs=1e-8)


@pytest.mark.parametrize("point", [(0.3, 0.4), (2.0, -1.1), (-1.2, 0.9), (0.6, 0.3)])
def test_L_matches_trapezoid_oracle(point):
    assert eval_L(point, 1e-12).value == pytest.approx(trapezoid_density(FULL, point), abs=1e-8)


def test_direct_hamiltonian_examples():
    assert ham_time_direct(ExtremalState(1.0, 0.0, 1.0 / 3.0, 0.0)) == pytest.approx(1.0, abs=1e-10)
    assert ham_time_direct(ExtremalState(8.0, 0.0, 1.0 / 24.0, 0.0)) == pytest.approx(0.5, abs=1e-10)
    st_ = ExtremalState(1.0, 0.5, 0.2, 0.3)
    n, phi, psi, rho = st_.polar()
    expect = rho * n ** (-1.0 / 3.0) * eval_M((psi, phi), 1e-12).value
    assert ham_time_direct(st_, TAN) == pytest.approx(expect, abs=1e-8)


@given(n=st.floats(0.2, 5.0), e=st.floats(-0.9, 0.9), pn=st.floats(-2, 2), pe=st.floats(-2, 2),
       mode=modes)
def test_polar_factorisation_matches_direct_quadrature(n, e, pn, pe, mode):
    if abs(3 * n * pn) + abs(pe) < 1e-3:
        return
    s = ExtremalState(n, e, pn, pe)
    n_, phi, psi, rho = s.polar()
    polar = rho * n_ ** (-1.0 / 3.0) * eval_density(mode, (psi, phi), 1e-12).value
    assert ham_time_direct(s, mode) == pytest.approx(polar, abs=1e-8 * max(1.0, polar))


def test_energy_hamiltonian_examples():
    assert ham_energy(ExtremalState(1.0, 0.0, 1.0, 0.0)) == pytest.approx(18.0)
    assert ham_energy(ExtremalState(1.0, 0.0, 0.0, 1.0)) == pytest.approx(5.0)
    s = ExtremalState(2.0, 0.6, 0.1, 0.2)
    extra = (5.0 - 4.0 * 0.36) / 0.36 * 0.3 ** 2 * 2.0 ** (-5.0 / 3.0)
    assert ham_energy(s, 0.3) == pytest.approx(ham_energy(s) + extra, rel=1e-12)
    with pytest.raises(SingularCircular):
        ham_energy(ExtremalState(1.0, 0.0, 1.0, 1.0), 0.1)


@given(n=st.floats(0.2, 5.0), phi=phis, psi=psis, rho=st.floats(0.1, 3.0))
def test_energy_polar_form(n, phi, psi, rho):
    s = ExtremalState.from_polar(n, phi, psi, rho)
    assert ham_energy(s) == pytest.approx(ham_energy_polar(n, phi, psi, rho), rel=1e-10)


@given(psi=psis, phi=phis, mode=modes)
def test_symmetries(psi, phi, mode):
    h = eval_density(mode, (psi, phi)).value
    assert eval_density(mode, (psi + math.pi, phi)).value == pytest.approx(h, abs=1e-9)
    assert eval_density(mode, (-psi, -phi)).value == pytest.approx(h, abs=1e-9)


@given(psi=psis, phi=phis, E=st.floats(0.0, math.pi))
def test_dominance_of_full_integrand(psi, phi, E):
    assert integrand_I((psi, phi), E) - integrand_J((psi, phi), E) ** 2 >= -1e-12


def test_L_dominates_M_and_both_positive():
    for psi in np.linspace(-math.pi, math.pi, 25):
        for phi in np.linspace(-1.4, 1.4, 15):
            L = eval_L((psi, phi)).value
            M = eval_M((psi, phi)).value
            assert M > 0.0 and L >= M - 1e-8


def test_integrands_match_explicit_forms():
    rng = np.random.default_rng(5)
    for _ in range(200):
        psi, phi, E = rng.uniform(-3, 3), rng.uniform(-1.4, 1.4), rng.uniform(0, math.pi)
        C, S, s, cp, x = math.cos(psi), math.sin(psi), math.sin(phi), math.cos(phi), math.cos(E)
        a11 = 1 - s * s * x * x
        a12 = -2 * cp * (1 - s * x) * x
        a22 = (1 - s * x) * (1 - 3 * s * x + 3 * x * x - s * x ** 3)
        w = math.sqrt((1 - s * x) / (1 + s * x))
        quad = a11 * C * C + 2 * a12 * C * S + a22 * S * S
        assert integrand_I((psi, phi), E) == pytest.approx(quad, abs=1e-12)
        assert integrand_J((psi, phi), E) == pytest.approx(w * ((2 * cp * S - s * C) * x - C),
                                                           abs=1e-12)


@given(psi=psis, phi=st.floats(-1.3, 1.3), mode=modes)
def test_partials_match_finite_differences(psi, phi, mode):
    if abs(abs(region((psi, phi)).distance)) < 0.1 or math.isinf(region((psi, phi)).distance):
        return
    h = 1e-6
    e = eval_density(mode, (psi, phi), 1e-13)
    fp = (eval_density(mode, (psi + h, phi), 1e-13).value
          - eval_density(mode, (psi - h, phi), 1e-13).value) / (2 * h)
    ff = (eval_density(mode, (psi, phi + h), 1e-13).value
          - eval_density(mode, (psi, phi - h), 1e-13).value) / (2 * h)
    scale = max(1.0, abs(e.d_psi), abs(e.d_phi))
    assert abs(e.d_psi - fp) <= 1e-5 * scale
    assert abs(e.d_phi - ff) <= 1e-5 * scale


def _on_S(phi, sign=1):
    return math.atan((sign + math.sin(phi)) / (2 * math.cos(phi)))


@pytest.mark.parametrize("phi", [0.3, -0.6])
def test_M_continuous_across_S(phi):
    psi = _on_S(phi)
    jumps = [abs(eval_M((psi + d, phi)).value - eval_M((psi - d, phi)).value)
             for d in (1e-2, 1e-3, 1e-4)]
    assert jumps[0] > jumps[1] > jumps[2] and jumps[2] < 1e-3


def test_region_tags():
    assert region((0.0, 0.0)).kind == "R1"
    assert region((math.pi / 2, 0.0)).kind == "R2"
    assert region((_on_S(0.3), 0.3)).kind == "NearS"


def test_bad_tolerance_rejected():
    with pytest.raises(DomainError):
        eval_L((0.1, 0.1), 0.0)


def test_density_status_ok_next_to_boundary():
    out = K.density(K.FULL, 0.7, math.pi / 2 - 1e-6, 1e-10)
    assert out[4] == K.OK and out[0] > 0.0
