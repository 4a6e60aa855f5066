"""Saddle passages: integrate from the entry leaf y = eta to the exit leaf x = zeta0.

The planar flow is integrated in logarithmic coordinates ``(log x, log y)``.
On the open quadrant this is the same flow, but relative accuracy in x and y
becomes absolute accuracy in the state, which keeps passages that start at
``xi ~ 1e-9`` and end at ``omega ~ 1e-9`` well conditioned.  The scheme is the
Dormand-Prince 5(4) pair with PI step control and its quartic continuous
extension; section crossings are located by bisection on that interpolant.

A third state component accumulates ``int w(x, y) dt`` (by default
``w = r^rho``) at the same order as the trajectory itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

from . import quadrature as quad
from .errors import (
    InvalidConfig,
    LeftDomain,
    MaxStepsExceeded,
    NoConvergence,
    TTooSmall,
)
from .saddle_model import (
    Exponents,
    SaddleParams,
    field_eval,
    first_integral,
    log_abs_first_integral,
    validate,
)


class PhasePoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class SectionConfig:
    eta: float = 1.0
    zeta0: float = 1.0
    eta_range: tuple[float, float] = (1.0, 1.4)
    box_factor: float = 2.0  # validity box [0, f*zeta0] x [0, f*eta1]

    def __post_init__(self):
        eta0, eta1 = self.eta_range
        if not (self.eta > 0 and self.zeta0 > 0 and 0 < eta0 <= eta1):
            raise InvalidConfig(f"invalid sections {self}")
        if self.eta > self.y_max or self.zeta0 >= self.x_max:
            raise InvalidConfig("sections must lie inside the validity box")

    @property
    def x_max(self) -> float:
        return self.box_factor * self.zeta0

    @property
    def y_max(self) -> float:
        return self.box_factor * max(self.eta_range[1], self.eta)

    def at_eta(self, eta: float) -> "SectionConfig":
        return replace(self, eta=float(eta))

    def to_dict(self) -> dict:
        return {"eta": self.eta, "zeta0": self.zeta0,
                "eta_range": list(self.eta_range), "box_factor": self.box_factor}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SectionConfig":
        d = dict(d or {})
        if "eta_range" in d:
            d["eta_range"] = tuple(float(v) for v in d["eta_range"])
        return cls(**d)


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances apply to (log x, log y), i.e. they are relative in x and y."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_steps: int = 200_000
    event_tol: float = 1e-12
    max_bisections: int = 200
    backend: str = "rk"  # "rk" or "m_quadrature"
    fixed_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rel_tol >= 1e-13 and self.abs_tol > 0 and self.event_tol > 0
                and self.max_steps > 0 and self.max_bisections > 0):
            raise InvalidConfig(f"invalid integrator settings {self}")
        if self.backend not in ("rk", "m_quadrature"):
            raise InvalidConfig(f"unknown backend {self.backend!r}")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise InvalidConfig("fixed_step must be positive")

    def to_dict(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "max_steps": self.max_steps, "event_tol": self.event_tol,
                "max_bisections": self.max_bisections, "backend": self.backend}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "IntegratorSettings":
        return cls(**(d or {}))


@dataclass(frozen=True)
class DulacRecord:
    eta: float
    xi: float
    omega: float
    T: float
    L_drift: float
    steps: int
    theta: Optional[float] = None
    arc_length: float = 0.0


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)
# Shampine's quartic continuous extension: row k gives the coefficients of
# theta, theta^2, theta^3, theta^4 multiplying stage k.
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_BETA_PI = 0.04
_ALPHA_PI = 0.2 - 0.75 * _BETA_PI


class _Step(NamedTuple):
    t: float
    h: float
    y0: tuple
    k: tuple  # seven stage derivatives


def _interp(step: _Step, theta: float) -> list:
    """Dense output at t + theta*h."""
    t2 = theta * theta
    t3 = t2 * theta
    t4 = t3 * theta
    w = [p[0] * theta + p[1] * t2 + p[2] * t3 + p[3] * t4 for p in _P]
    h = step.h
    return [y + h * sum(w[i] * step.k[i][j] for i in (0, 2, 3, 4, 5, 6))
            for j, y in enumerate(step.y0)]


def _rk_step(f, t, y, h, k1):
    n = len(y)
    k2 = f(t + h / 5, [y[i] + h * _A21 * k1[i] for i in range(n)])
    k3 = f(t + 3 * h / 10, [y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(n)])
    k4 = f(t + 4 * h / 5, [y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
                           for i in range(n)])
    k5 = f(t + 8 * h / 9, [y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                                       + _A54 * k4[i]) for i in range(n)])
    k6 = f(t + h, [y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                               + _A64 * k4[i] + _A65 * k5[i]) for i in range(n)])
    ynew = [y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                        + _B6 * k6[i]) for i in range(n)]
    k7 = f(t + h, ynew)
    err = [h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                + _E6 * k6[i] + _E7 * k7[i]) for i in range(n)]
    return ynew, err, (k1, k2, k3, k4, k5, k6, k7)


def _err_norm(err, y, ynew, settings) -> float:
    acc = 0.0
    for e, a, b in zip(err, y, ynew):
        sc = settings.abs_tol + settings.rel_tol * max(abs(a), abs(b))
        acc += (e / sc) ** 2
    return math.sqrt(acc / len(err))


def _initial_step(f, t, y, f0, direction, settings) -> float:
    n = len(y)
    sc = [settings.abs_tol + settings.rel_tol * abs(v) for v in y]
    d0 = math.sqrt(sum((y[i] / sc[i]) ** 2 for i in range(n)) / n)
    d1 = math.sqrt(sum((f0[i] / sc[i]) ** 2 for i in range(n)) / n)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [y[i] + direction * h0 * f0[i] for i in range(n)]
    f1 = f(t + direction * h0, y1)
    d2 = math.sqrt(sum(((f1[i] - f0[i]) / sc[i]) ** 2 for i in range(n)) / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(f: Callable, t0: float, y0, settings: IntegratorSettings, *,
              t_end: Optional[float] = None,
              event: Optional[Callable] = None,
              step_cap: Optional[Callable] = None,
              guard: Optional[Callable] = None,
              on_step: Optional[Callable] = None,
              direction: float = 1.0):
    """Generic DP5(4) driver on a small list-valued state.

    Stops at ``t_end`` or at the first sign change of ``event(y)`` from
    negative to non-negative, whichever comes first.  ``guard(y)`` may raise
    to abort (domain checks).  Returns ``(t, y, steps, hit_event)``.
    """
    if t_end is not None:
        direction = 1.0 if t_end >= t0 else -1.0
    t, y = t0, list(y0)
    k1 = f(t, y)
    if settings.fixed_step is not None:
        h_abs = settings.fixed_step
    else:
        h_abs = _initial_step(f, t, y, k1, direction, settings)
    err_prev = 1e-4
    steps = 0
    g_prev = event(y) if event is not None else None
    while True:
        if t_end is not None and direction * (t_end - t) <= 0:
            return t, y, steps, False
        if steps >= settings.max_steps:
            raise MaxStepsExceeded(
                f"no exit after {steps} steps (t = {t:.6g}); entry too close to "
                "the stable manifold for this budget", t_reached=abs(t - t0))
        if step_cap is not None:
            h_abs = min(h_abs, step_cap(y))
        last = False
        if t_end is not None and h_abs >= direction * (t_end - t):
            h_abs = direction * (t_end - t)
            last = True
        h = direction * h_abs
        ynew, err, ks = _rk_step(f, t, y, h, k1)
        if settings.fixed_step is None:
            en = _err_norm(err, y, ynew, settings)
            if not math.isfinite(en):
                h_abs *= _MIN_FACTOR
                continue
            if en > 1.0:
                h_abs *= max(_MIN_FACTOR, _SAFETY * en ** -0.2)
                continue
            if en == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * en ** -_ALPHA_PI * err_prev ** _BETA_PI
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(en, 1e-4)
        steps += 1
        step = _Step(t, h, tuple(y), ks)
        if guard is not None:
            guard(ynew)
        if event is not None:
            g_new = event(ynew)
            if g_prev < 0 <= g_new:
                th = _bisect_event(step, event, settings)
                yev = _interp(step, th)
                if on_step is not None:
                    on_step(step, th)
                return t + th * h, yev, steps, True
            g_prev = g_new
        if on_step is not None:
            on_step(step, 1.0)
        t = t + h if not last else t_end
        y = ynew
        k1 = ks[6]
        if settings.fixed_step is None:
            h_abs *= factor


def _bisect_event(step: _Step, event: Callable, settings: IntegratorSettings) -> float:
    lo, hi = 0.0, 1.0
    h = abs(step.h)
    for _ in range(settings.max_bisections):
        if (hi - lo) * h <= settings.event_tol:
            break
        mid = 0.5 * (lo + hi)
        if event(_interp(step, mid)) < 0:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# The planar flow in log coordinates
# ---------------------------------------------------------------------------

def _make_rhs(params: SaddleParams, perturbed: bool, rho: Optional[float],
              weight: Optional[Callable]):
    a0, a1, a2, b0, b1, b2 = params.coeffs
    pert = params.perturbation if perturbed else None
    half = None if rho is None else 0.5 * rho
    exp = math.exp

    def rhs(t, s):
        x = exp(s[0])
        y = exp(s[1])
        xx, xy, yy = x * x, x * y, y * y
        dp = a0 * xx + a1 * xy + a2 * yy
        dq = -(b0 * xx + b1 * xy + b2 * yy)
        if pert is not None:
            rx, ry = pert(x, y)
            dp += rx / x
            dq += ry / y
        if weight is not None:
            return [dp, dq, weight(x, y)]
        if half is None:
            return [dp, dq]
        if half == 0.0:
            return [dp, dq, 1.0]
        return [dp, dq, (xx + yy) ** half]

    return rhs


def _speed_cap(params: SaddleParams, perturbed: bool):
    def cap(s):
        x, y = math.exp(s[0]), math.exp(s[1])
        fx, fy = field_eval(params, x, y, perturbed)
        sp = math.hypot(fx, fy)
        return math.inf if sp == 0.0 else 0.1 / sp

    return cap


def _guard(sections: SectionConfig):
    ly_max = math.log(sections.y_max)
    lx_max = math.log(sections.x_max)

    def guard(s):
        if not (math.isfinite(s[0]) and math.isfinite(s[1])):
            raise LeftDomain("trajectory reached a coordinate axis or diverged")
        if s[1] > ly_max or s[0] > lx_max:
            raise LeftDomain(
                f"trajectory left the validity box at ({math.exp(s[0]):.4g}, "
                f"{math.exp(s[1]):.4g}) before reaching x = zeta0")

    return guard


def passage(params: SaddleParams, sections: SectionConfig, entry_xi: float,
            settings: IntegratorSettings = IntegratorSettings(),
            perturbed: bool = False, rho: Optional[float] = None,
            weight: Optional[Callable] = None,
            on_step: Optional[Callable] = None,
            exp: Optional[Exponents] = None) -> DulacRecord:
    """One Dulac passage from (entry_xi, eta) to the first crossing of x = zeta0.

    With ``rho`` (or ``weight``) given, ``theta`` holds int r^rho dt (or
    int weight dt) along the passage.
    """
    exp = exp or validate(params)
    eta, zeta0 = sections.eta, sections.zeta0
    if not (0.0 < entry_xi < zeta0):
        raise InvalidConfig(f"need 0 < xi < zeta0, got xi={entry_xi}")
    if settings.backend == "m_quadrature":
        if perturbed and params.perturbation.bound != 0.0:
            raise InvalidConfig("the M-quadrature backend only covers the unperturbed field")
        T, omega = quad.dulac_time_m(exp, entry_xi, eta, zeta0)
        theta = None
        if rho is not None:
            theta = theta_m(exp, entry_xi, eta, zeta0, omega, rho)
        return DulacRecord(eta=eta, xi=entry_xi, omega=omega, T=T, L_drift=0.0,
                           steps=0, theta=theta)

    rhs = _make_rhs(params, perturbed, rho, weight)
    s0 = [math.log(entry_xi), math.log(eta)]
    if rho is not None or weight is not None:
        s0.append(0.0)
    lz = math.log(zeta0)
    arc = [0.0]

    def track(step, th):
        y_end = _interp(step, th) if th < 1.0 else None
        if y_end is None:
            # endpoint of a full step is recomputed cheaply from the interpolant
            y_end = _interp(step, 1.0)
        x0, y0 = math.exp(step.y0[0]), math.exp(step.y0[1])
        x1, y1 = math.exp(y_end[0]), math.exp(y_end[1])
        arc[0] += math.hypot(x1 - x0, y1 - y0)
        if on_step is not None:
            on_step(step, th)

    t, s, steps, hit = integrate(
        rhs, 0.0, s0, settings,
        event=lambda s: s[0] - lz,
        step_cap=_speed_cap(params, perturbed),
        guard=_guard(sections),
        on_step=track,
    )
    x_out, omega = math.exp(s[0]), math.exp(s[1])
    l_in = log_abs_first_integral(params, entry_xi, eta, exp)
    l_out = log_abs_first_integral(params, x_out, omega, exp)
    drift = abs(math.expm1(l_out - l_in))
    theta = s[2] if len(s) > 2 else None
    return DulacRecord(eta=eta, xi=entry_xi, omega=omega, T=t, L_drift=drift,
                       steps=steps, theta=theta, arc_length=arc[0])


def theta_m(exp: Exponents, xi: float, eta: float, zeta0: float, omega: float,
            rho: float) -> float:
    """int r^rho dt along the unperturbed passage via the M-substitution."""
    G = quad.G_eval(exp, xi, eta)
    return G ** (0.5 * rho - 1.0) * quad.theta_integral_m(exp, omega / zeta0, eta / xi, rho)


def flow_for_time(params: SaddleParams, start: PhasePoint, duration: float,
                  settings: IntegratorSettings = IntegratorSettings(),
                  perturbed: bool = False) -> PhasePoint:
    """Flow a point of the open quadrant for ``duration`` (negative: backwards)."""
    if not (start.x > 0 and start.y > 0):
        raise InvalidConfig("start point must lie in the open first quadrant")
    rhs = _make_rhs(params, perturbed, None, None)
    t, s, _, _ = integrate(rhs, 0.0, [math.log(start.x), math.log(start.y)],
                           settings, t_end=duration,
                           step_cap=_speed_cap(params, perturbed))
    return PhasePoint(math.exp(s[0]), math.exp(s[1]))


def trajectory_polyline(params: SaddleParams, sections: SectionConfig,
                        start: PhasePoint,
                        settings: IntegratorSettings = IntegratorSettings(),
                        perturbed: bool = False, per_step: int = 4) -> list:
    """Dense samples ``(t, PhasePoint)`` of the passage that starts at ``start``.

    The entry height is taken from ``start.y``; each accepted step contributes
    ``per_step`` points from the continuous extension.
    """
    if settings.backend != "rk":
        settings = replace(settings, backend="rk")
    pts = [(0.0, PhasePoint(start.x, start.y))]

    def collect(step, th):
        for i in range(1, per_step + 1):
            frac = th * i / per_step
            s = _interp(step, frac)
            pts.append((step.t + frac * step.h,
                        PhasePoint(math.exp(s[0]), math.exp(s[1]))))

    passage(params, sections.at_eta(start.y), start.x, settings, perturbed,
            on_step=collect)
    return pts


def polyline_rows(params: SaddleParams, pts: list) -> list:
    """Rows (t, x, y, L) for CSV export of a trajectory."""
    exp = validate(params)
    return [(t, p.x, p.y, first_integral(params, p.x, p.y, exp)) for t, p in pts]


# ---------------------------------------------------------------------------
# Inverting the Dulac time
# ---------------------------------------------------------------------------

def min_passage_time(params: SaddleParams, sections: SectionConfig,
                     settings: IntegratorSettings = IntegratorSettings(),
                     perturbed: bool = False) -> float:
    """Passage time of the entry closest to the exit section we admit."""
    xi_hi = sections.zeta0 * (1.0 - 1e-9)
    return passage(params, sections, xi_hi, settings, perturbed).T


def invert_dulac_time(params: SaddleParams, sections: SectionConfig, T: float,
                      settings: IntegratorSettings = IntegratorSettings(),
                      perturbed: bool = False,
                      exp: Optional[Exponents] = None) -> float:
    """Entry abscissa xi whose passage takes time T.

    T(xi) is strictly decreasing, so a bracketing iteration (Illinois regula
    falsi, with bisection whenever it stalls) on log xi converges.  The
    unperturbed M-quadrature solution seeds the bracket.
    """
    exp = exp or validate(params)
    zeta0 = sections.zeta0
    xi_hi = zeta0 * (1.0 - 1e-9)
    tol = max(settings.event_tol, settings.rel_tol * T)

    def time_of(log_xi):
        return passage(params, sections, math.exp(log_xi), settings, perturbed, exp=exp).T

    T_min = time_of(math.log(xi_hi))
    if not T > T_min:
        raise TTooSmall(f"T = {T} is below the minimal passage time {T_min:.6g}")

    guess = _xi_guess_m(exp, sections, T)
    lo = hi = math.log(min(guess, xi_hi))
    f_lo = f_hi = time_of(lo) - T
    if abs(f_lo) <= tol:
        return math.exp(lo)
    width = 1e-6 if not perturbed else 0.05
    # T decreases in xi: f(lo) > 0 > f(hi)
    for _ in range(200):
        if f_lo > 0:
            break
        lo -= width
        width *= 4.0
        f_lo = time_of(lo) - T
    else:
        raise NoConvergence("could not bracket xi from below")
    width = 1e-6 if not perturbed else 0.05
    for _ in range(200):
        if f_hi < 0:
            break
        hi = min(hi + width, math.log(xi_hi))
        width *= 4.0
        f_hi = time_of(hi) - T
        if hi == math.log(xi_hi) and f_hi >= 0:
            raise TTooSmall(f"T = {T} is not reachable")
    else:
        raise NoConvergence("could not bracket xi from above")

    side = 0
    for _ in range(settings.max_bisections):
        if f_lo != f_hi:
            mid = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        else:
            mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            mid = 0.5 * (lo + hi)
        f_mid = time_of(mid) - T
        if abs(f_mid) <= tol:
            return math.exp(mid)
        if f_mid > 0:
            lo, f_lo = mid, f_mid
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = mid, f_mid
            if side == 1:
                f_lo *= 0.5
            side = 1
        if hi - lo <= 4e-16 * max(1.0, abs(lo)):
            return math.exp(0.5 * (lo + hi))
    raise NoConvergence(f"Dulac time inversion for T = {T} did not converge")


def _xi_guess_m(exp: Exponents, sections: SectionConfig, T: float) -> float:
    """Unperturbed xi(T) from the M-quadrature route (bracket seed)."""
    eta, zeta0 = sections.eta, sections.zeta0
    lx_hi = math.log(zeta0 * (1.0 - 1e-9))
    log_T = math.log(T)

    def g(lx):
        return math.log(quad.dulac_time_m(exp, math.exp(lx), eta, zeta0)[0]) - log_T

    if g(lx_hi) >= 0:
        return math.exp(lx_hi)
    # leading-order seed xi0 T^-beta2; log T is nearly affine in log xi
    I = quad.m_integral(exp, 0.0, math.inf, "xi")
    lx0 = (-math.log(exp.c2) / exp.u - (2.0 * exp.beta2 - 1.0) * math.log(eta)
           + exp.beta2 * math.log(I) - exp.beta2 * log_T)
    a = b = min(lx0, lx_hi)
    fa = fb = g(a)
    step = 0.5
    while fa <= 0:
        b, fb = a, fa
        a -= step
        step *= 2.0
        fa = g(a)
    step = 0.5
    while fb > 0:
        a, fa = b, fb
        b = min(b + step, lx_hi)
        step *= 2.0
        fb = g(b)
    for _ in range(200):
        m = b - fb * (b - a) / (fb - fa)
        if not (a < m < b):
            m = 0.5 * (a + b)
        fm = g(m)
        if fm > 0:
            a, fa = m, fm
        else:
            b, fb = m, fm
        if abs(fm) <= 1e-14 or b - a < 1e-15:
            return math.exp(m)
    return math.exp(0.5 * (a + b))
