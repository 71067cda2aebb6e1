"""Unaveraged controlled Kepler dynamics (Gauss equations).

Two charts are used: Keplerian elements (n, e, omega, l), singular at e = 0,
and equinoctial elements (n, e_x, e_y, l).  The propagator switches to the
equinoctial chart when e drops below 0.05 and back above 0.06.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import CircularSingularity, DomainError, EscapeDomain, StepFailure
from .hamiltonian import TWO_PI, ControlMode, _h1_roots, _h12

CSV_HEADER = "t,n,e,omega,l"
E_CIRCULAR = 1e-8
E_SWITCH = 0.05
HYSTERESIS = 0.01


@dataclass(frozen=True)
class GaussState:
    n: float
    e: float
    omega: float = 0.0
    l: float = 0.0

    def __post_init__(self):
        if not self.n > 0.0:
            raise DomainError(f"n must be positive, got {self.n}")
        if not 0.0 <= self.e < 1.0:
            raise DomainError(f"e must lie in [0, 1), got {self.e}")

    @property
    def v(self) -> float:
        return self.l - self.omega

    @property
    def energy(self) -> float:
        return -0.5 * self.n ** (2.0 / 3.0)

    def eccentric_anomaly(self) -> float:
        v, e = self.v, self.e
        return 2.0 * math.atan2(math.sqrt(1.0 - e) * math.sin(v / 2), math.sqrt(1.0 + e) * math.cos(v / 2))

    def equinoctial(self) -> np.ndarray:
        return np.array([self.n, self.e * math.cos(self.omega), self.e * math.sin(self.omega), self.l])

    @classmethod
    def from_equinoctial(cls, y) -> "GaussState":
        n, ex, ey, l = map(float, y)
        e = math.hypot(ex, ey)
        return cls(n, e, math.atan2(ey, ex) if e > 0.0 else 0.0, l)


def omega_rate(n: float, e: float, v: float) -> float:
    """Free-motion rate of the longitude."""
    return n * (1.0 + e * math.cos(v)) ** 2 / (1.0 - e * e) ** 1.5


def gauss_rhs(state: GaussState, u_t: float, u_n: float) -> np.ndarray:
    """(n', e', omega', l') in the Keplerian chart."""
    n, e, v = state.n, state.e, state.v
    if e < E_CIRCULAR:
        raise CircularSingularity("the Keplerian chart is singular at e = 0")
    cv, sv = math.cos(v), math.sin(v)
    q = math.sqrt(1.0 - e * e)
    g = math.sqrt(1.0 + 2.0 * e * cv + e * e)
    k = 1.0 + e * cv
    m = n ** (-1.0 / 3.0)
    dn = -3.0 * n ** (2.0 / 3.0) / q * g * u_t
    de = q * m / g * (2.0 * (e + cv) * u_t - sv * (1.0 - e * e) / k * u_n)
    dw = q * m / (e * g) * (2.0 * sv * u_t + (2.0 * e + cv + e * e * cv) / k * u_n)
    return np.array([dn, de, dw, omega_rate(n, e, v)])


def equinoctial_rhs(y, u_t: float, u_n: float) -> np.ndarray:
    """(n', e_x', e_y', l') in the equinoctial chart; regular at e = 0.

    The normal-thrust terms are divided by 1 + e_x cos l + e_y sin l and the
    e_y one enters with a plus sign, which is what the Keplerian chart and
    the Cartesian equations of motion both give.
    """
    n, ex, ey, l = y
    cl, sl = math.cos(l), math.sin(l)
    e2 = ex * ex + ey * ey
    q = math.sqrt(1.0 - e2)
    g = math.sqrt(1.0 + 2.0 * (ex * cl + ey * sl) + e2)
    m = n ** (-1.0 / 3.0)
    dn = -3.0 * n ** (2.0 / 3.0) * g / q * u_t
    k = 1.0 + ex * cl + ey * sl
    fx = 2.0 * (cl + ex) * u_t - (sl + 2 * ey + 2 * ex * ey * cl - (ex * ex - ey * ey) * sl) / k * u_n
    fy = 2.0 * (sl + ey) * u_t + (cl + 2 * ex + (ex * ex - ey * ey) * cl + 2 * ex * ey * sl) / k * u_n
    dl = n * (1.0 + ex * cl + ey * sl) ** 2 / (1.0 - e2) ** 1.5
    return np.array([dn, q * m / g * fx, q * m / g * fy, dl])


# ---------------------------------------------------------------- control

@dataclass(frozen=True)
class FrozenCostate:
    """Extremal control from a fixed costate, scaled by epsilon.

    The eccentricity costate acts on the signed eccentricity along the fixed
    direction ``omega0``, i.e. on (e_x, e_y) through
    p_e (cos omega0, sin omega0).  This keeps the control smooth when the
    eccentricity vector passes through zero.
    """

    p_n: float
    p_e: float
    mode: ControlMode = ControlMode.FULL
    epsilon: float = 0.0
    omega0: float = 0.0

    def _direction(self, h1, h2):
        if self.mode is ControlMode.TANGENTIAL:
            return (math.copysign(self.epsilon, h1) if h1 != 0.0 else 0.0), 0.0
        h = math.hypot(h1, h2)
        if h == 0.0:
            return 0.0, 0.0
        return self.epsilon * h1 / h, self.epsilon * h2 / h

    def control(self, n: float, e: float, v: float) -> tuple[float, float]:
        """Control at signed eccentricity e and true anomaly v from omega0."""
        if self.epsilon == 0.0:
            return 0.0, 0.0
        return self._direction(*_h12(n, e, self.p_n, self.p_e, v))

    def control_eq(self, y) -> tuple[float, float]:
        """Control at an equinoctial state (n, e_x, e_y, l)."""
        if self.epsilon == 0.0:
            return 0.0, 0.0
        cw, sw = math.cos(self.omega0), math.sin(self.omega0)
        ft = equinoctial_rhs(y, 1.0, 0.0)
        fn = equinoctial_rhs(y, 0.0, 1.0)
        h1 = self.p_n * ft[0] + self.p_e * (cw * ft[1] + sw * ft[2])
        h2 = self.p_n * fn[0] + self.p_e * (cw * fn[1] + sw * fn[2])
        return self._direction(h1, h2)


def averaged_rate(n: float, e: float, costate: FrozenCostate, tol: float = 1e-11) -> np.ndarray:
    """Time average over one orbit of (n', e') under the frozen control."""
    if costate.epsilon == 0.0:
        return np.zeros(2)

    def comp(i):
        def f(v):
            u_t, u_n = costate.control(n, e, v)
            q = math.sqrt(1.0 - e * e)
            g = math.sqrt(1.0 + 2.0 * e * math.cos(v) + e * e)
            k = 1.0 + e * math.cos(v)
            if i == 0:
                val = -3.0 * n ** (2.0 / 3.0) / q * g * u_t
            else:
                val = q / (g * n ** (1.0 / 3.0)) * (2.0 * (e + math.cos(v)) * u_t
                                                   - math.sin(v) * (1.0 - e * e) / k * u_n)
            return val / k ** 2
        return f

    pts = sorted(set(_h1_roots(n, e, costate.p_n, costate.p_e) + [math.pi]))
    edges = [0.0] + pts + [TWO_PI]
    out = np.zeros(2)
    for i in range(2):
        f = comp(i)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                out[i] += integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=400)[0]
    return (1.0 - e * e) ** 1.5 / TWO_PI * out


# ---------------------------------------------------------------- propagation

@dataclass
class RawTrajectory:
    t: np.ndarray
    n: np.ndarray
    e: np.ndarray
    omega: np.ndarray
    l: np.ndarray
    charts: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.t, self.n, self.e, self.omega, self.l])
        np.savetxt(path, data, delimiter=",", header=CSV_HEADER, comments="", fmt="%.17g")

    def signed_e(self, omega0: float = 0.0) -> np.ndarray:
        return self.e * np.cos(self.omega - omega0)

    @property
    def final(self) -> GaussState:
        return GaussState(float(self.n[-1]), float(self.e[-1]), float(self.omega[-1]),
                          float(self.l[-1]))


def _kepler_fun(costate):
    # longitude is the independent variable; y = (n, e, omega, t)
    def rhs(l, y):
        s = GaussState(y[0], abs(y[1]), y[2], l)
        d = gauss_rhs(s, *costate.control_eq(s.equinoctial()))
        return np.array([d[0], d[1], d[2], 1.0]) / d[3]
    return rhs


def _equinox_fun(costate):
    # y = (n, e_x, e_y, t)
    def rhs(l, y):
        z = (y[0], y[1], y[2], l)
        d = equinoctial_rhs(z, *costate.control_eq(z))
        return np.array([d[0], d[1], d[2], 1.0]) / d[3]
    return rhs


def propagate(start: GaussState, t_end: float | None = None,
              costate: FrozenCostate | None = None, orbits: float | None = None,
              rtol: float = 1e-12, atol: float = 1e-13, samples_per_orbit: int = 64,
              max_step: float = TWO_PI / 64) -> RawTrajectory:
    """Integrate the Gauss equations, switching charts as needed.

    The longitude is the independent variable, so the step bound is a fixed
    fraction of an orbit whatever n does.  Stops after ``orbits`` turns of l
    or at time ``t_end``, whichever comes first.
    """
    costate = costate or FrozenCostate(0.0, 0.0)
    if t_end is None and orbits is None:
        raise DomainError("give t_end or orbits")
    if orbits is None:
        # generous bound; the time event stops first
        orbits = 4.0 * t_end * start.n / TWO_PI + 4.0
    l_end = start.l + TWO_PI * orbits
    grid = np.linspace(start.l, l_end, max(2, int(math.ceil(samples_per_orbit * orbits)) + 1))

    def at_time(_, y):
        return y[3] - t_end if t_end is not None else 1.0

    at_time.terminal = True
    guard_n = (1e-3 * start.n, 1e3 * start.n)

    kepler = start.e >= E_SWITCH
    l0, state, t0 = start.l, start, 0.0
    ts, rows, charts = [], [], []
    while True:
        if kepler:
            y0 = np.array([state.n, state.e, state.omega, t0])
            fun = _kepler_fun(costate)

            def sw(_, y):
                return y[1] - E_SWITCH

            def guard(_, y):
                return min(y[0] - guard_n[0], guard_n[1] - y[0], 0.999 - abs(y[1]))
        else:
            y0 = np.array([state.n, *state.equinoctial()[1:3], t0])
            fun = _equinox_fun(costate)

            def sw(_, y):
                return math.hypot(y[1], y[2]) - (E_SWITCH + HYSTERESIS)

            def guard(_, y):
                return min(y[0] - guard_n[0], guard_n[1] - y[0])
        sw.terminal = True
        sw.direction = -1 if kepler else 1
        guard.terminal = True
        l_eval = grid[(grid >= l0) & (grid <= l_end)]
        sol = integrate.solve_ivp(fun, (l0, l_end), y0, method="DOP853", rtol=rtol, atol=atol,
                                  t_eval=l_eval, events=[sw, at_time, guard], max_step=max_step)
        if sol.status < 0:
            raise StepFailure(sol.message)
        charts.append(("keplerian" if kepler else "equinoctial", t0))

        def unpack(l, y):
            if kepler:
                return GaussState(y[0], abs(y[1]), y[2], l), y[3]
            return GaussState.from_equinoctial((y[0], y[1], y[2], l)), y[3]

        for k in range(sol.t.size):
            s, t = unpack(sol.t[k], sol.y[:, k])
            if ts and t <= ts[-1]:
                continue
            ts.append(t)
            rows.append((s.n, s.e, s.omega, s.l))
        if sol.status != 1:
            break
        if sol.t_events[2].size:
            raise EscapeDomain(f"raw propagation left the domain at l = {sol.t_events[2][0]:.6g}")
        if sol.t_events[1].size:
            s, t = unpack(sol.t_events[1][0], sol.y_events[1][0])
            if t > ts[-1]:
                ts.append(t)
                rows.append((s.n, s.e, s.omega, s.l))
            break
        l0 = float(sol.t_events[0][0])
        state, t0 = unpack(l0, sol.y_events[0][0])
        kepler = not kepler
    arr = np.array(rows)
    return RawTrajectory(np.array(ts), arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], charts)


def free_period(start: GaussState, rtol: float = 1e-13) -> float:
    """Time for l to advance by 2 pi under free motion."""
    target = start.l + TWO_PI

    def rhs(_, y):
        return [omega_rate(start.n, start.e, y[0] - start.omega)]

    def hit(_, y):
        return y[0] - target

    hit.terminal = True
    sol = integrate.solve_ivp(rhs, (0.0, 2.0 * TWO_PI / start.n), [start.l], method="DOP853",
                              rtol=rtol, atol=1e-14, events=hit)
    return float(sol.t_events[0][0])


# ---------------------------------------------------------------- averaging check

@dataclass
class AveragingReport:
    epsilon: float
    mode: str
    orbits: int
    max_rel_dev_n: float
    max_rel_dev_e: float
    raw_final: tuple
    avg_final: tuple

    @property
    def deviation(self) -> float:
        return max(self.max_rel_dev_n, self.max_rel_dev_e)

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "mode": self.mode, "orbits": self.orbits,
                "max_rel_dev_n": self.max_rel_dev_n, "max_rel_dev_e": self.max_rel_dev_e,
                "deviation": self.deviation, "raw_final": list(self.raw_final),
                "avg_final": list(self.avg_final)}


def averaged_path(start: GaussState, costate: FrozenCostate, ts: np.ndarray) -> np.ndarray:
    """(n, e) of the averaged system with the same frozen costate."""
    if costate.epsilon == 0.0:
        return np.tile([start.n, start.e], (ts.size, 1))

    def rhs(_, y):
        return averaged_rate(y[0], y[1], costate)

    sol = integrate.solve_ivp(rhs, (ts[0], ts[-1]), [start.n, start.e], method="DOP853",
                              rtol=1e-10, atol=1e-12, t_eval=ts)
    if sol.status < 0:
        raise StepFailure(sol.message)
    return sol.y.T


def averaging_check(start: GaussState, mode=ControlMode.FULL, epsilon: float = 1e-2,
                    horizon_orbits: int = 50, p_n: float | None = None,
                    p_e: float = -1.0) -> AveragingReport:
    """Compare the raw (n, e) with the averaged prediction over a horizon.

    The deviation is relative for n and absolute for the signed eccentricity
    along the initial pericenter direction, which may pass through zero.
    """
    if epsilon > 1e-2:
        raise DomainError("epsilon must be <= 1e-2")
    mode = ControlMode.parse(mode)
    if p_n is None:
        p_n = 1.0 / (3.0 * start.n)
    costate = FrozenCostate(p_n, p_e, mode, epsilon, start.omega)
    raw = propagate(start, costate=costate, orbits=horizon_orbits)
    avg = averaged_path(start, costate, raw.t)
    es = raw.signed_e(start.omega)
    dn = np.max(np.abs(raw.n - avg[:, 0]) / avg[:, 0])
    de = np.max(np.abs(es - avg[:, 1]))
    return AveragingReport(epsilon, mode.value, horizon_orbits, float(dn), float(de),
                           (float(raw.n[-1]), float(es[-1])),
                           (float(avg[-1, 0]), float(avg[-1, 1])))


def orbit_increment(start: GaussState, mode=ControlMode.FULL, epsilon: float = 1e-2,
                    p_n: float | None = None, p_e: float = -1.0):
    """(raw, averaged) change of (n, e) over one free period from start."""
    mode = ControlMode.parse(mode)
    if p_n is None:
        p_n = 1.0 / (3.0 * start.n)
    costate = FrozenCostate(p_n, p_e, mode, epsilon, start.omega)
    t_end = TWO_PI / start.n
    raw = propagate(start, t_end, costate)
    avg = averaged_path(start, costate, np.array([0.0, raw.t[-1]]))
    d_raw = np.array([raw.n[-1] - start.n, raw.signed_e(start.omega)[-1] - start.e])
    d_avg = avg[-1] - avg[0]
    return d_raw, d_avg
