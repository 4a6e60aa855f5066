"""Passage integrals Theta = int r^rho dt and their growth in the passage time."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import quadrature as quad
from .dulac_analysis import AsymptoticCoeffs, asymptotic_omega, asymptotic_xi, fit_loglog
from .errors import InvalidConfig
from .flow_integrator import (
    IntegratorSettings,
    SectionConfig,
    _guard,
    _make_rhs,
    _speed_cap,
    _xi_guess_m,
    integrate,
    invert_dulac_time,
    passage,
)
from .parallel import parallel_map
from .saddle_model import Exponents, SaddleParams, validate

TRAJECTORY = "trajectory_quadrature"
M_SUBSTITUTION = "m_substitution"


@dataclass(frozen=True)
class PassageIntegral:
    rho: float
    T: float
    theta: float
    method: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScalingFit:
    rho: float
    regime: str  # "power", "log" or "bounded"
    exponent: float
    log_slope: Optional[float]
    r2: float
    T_grid: tuple
    thetas: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["T_grid"] = list(self.T_grid)
        d["thetas"] = list(self.thetas)
        return d


def radial_weight(rho: float) -> Callable[[float, float], float]:
    half = 0.5 * rho
    return lambda x, y: (x * x + y * y) ** half


def theta_trajectory(params: SaddleParams, sections: SectionConfig, T: float,
                     rho: float, settings: IntegratorSettings = IntegratorSettings(),
                     perturbed: bool = False,
                     weight: Optional[Callable[[float, float], float]] = None
                     ) -> PassageIntegral:
    """Integrate r^rho (or ``weight``) along the passage of duration T.

    The integral is carried as an extra state of the Runge-Kutta scheme, so
    it inherits the integrator's order and dense-output event location.
    """
    quad.check_rho(rho)
    if not T >= 10.0:
        raise InvalidConfig(f"theta needs T >= 10, got {T}")
    if settings.backend != "rk":
        settings = IntegratorSettings(**{**settings.to_dict(), "backend": "rk"})
    exp = validate(params)
    xi = invert_dulac_time(params, sections, T, settings, perturbed, exp=exp)
    rec = passage(params, sections, xi, settings, perturbed, rho=rho,
                  weight=weight, exp=exp)
    return PassageIntegral(rho=rho, T=rec.T, theta=rec.theta, method=TRAJECTORY)


def theta_weighted(params: SaddleParams, sections: SectionConfig, T: float,
                   weight: Optional[Callable[[float, float], float]] = None,
                   settings: IntegratorSettings = IntegratorSettings()) -> float:
    """int w(x, y) dt over a passage; w defaults to r^2."""
    w = weight or radial_weight(2.0)
    return theta_trajectory(params, sections, T, 2.0, settings, weight=w).theta


def exact_endpoints(exp: Exponents, eta: float, zeta0: float, T: float) -> tuple[float, float]:
    """(xi, omega) of the unperturbed passage of duration T, without integrating."""
    sections = SectionConfig(eta=eta, zeta0=zeta0, eta_range=(min(eta, 1.0), max(eta, 1.4)))
    xi = _xi_guess_m(exp, sections, T)
    omega = float(quad.omega_level_set(exp, xi, eta, zeta0))
    return xi, omega


def theta_m_form(exp: Exponents, coeffs: Optional[AsymptoticCoeffs], eta: float,
                 zeta0: float, T: float, rho: float, endpoints: str = "exact",
                 xi: Optional[float] = None, omega: Optional[float] = None) -> float:
    """Theta through the M-substitution.

    Endpoints are either supplied (``xi``/``omega``, e.g. measured), solved
    exactly from the quadrature form of the Dulac time (``"exact"``), or taken
    from the two-term asymptotics (``"asymptotic"``, needs ``coeffs``).
    """
    quad.check_rho(rho)
    if xi is None or omega is None:
        if endpoints == "exact":
            xi, omega = exact_endpoints(exp, eta, zeta0, T)
        elif endpoints == "asymptotic":
            if coeffs is None:
                raise InvalidConfig("asymptotic endpoints need coefficients")
            xi, omega = asymptotic_xi(coeffs, T), asymptotic_omega(coeffs, T)
        else:
            raise InvalidConfig(f"unknown endpoint mode {endpoints!r}")
    G = quad.G_eval(exp, xi, eta)
    return G ** (0.5 * rho - 1.0) * quad.theta_integral_m(exp, omega / zeta0, eta / xi, rho)


def theta_halves(params: SaddleParams, sections: SectionConfig, xi: float,
                 rho: float, settings: IntegratorSettings = IntegratorSettings()
                 ) -> tuple[float, float, float]:
    """Theta before and after the diagonal crossing, and over the whole passage."""
    quad.check_rho(rho)
    rhs = _make_rhs(params, False, rho, None)
    cap = _speed_cap(params, False)
    guard = _guard(sections)
    s0 = [math.log(xi), math.log(sections.eta), 0.0]
    _, s1, _, hit = integrate(rhs, 0.0, s0, settings, event=lambda s: s[0] - s[1],
                              step_cap=cap, guard=guard)
    if not hit:
        raise InvalidConfig("passage does not cross the diagonal")
    lz = math.log(sections.zeta0)
    _, s2, _, _ = integrate(rhs, 0.0, [s1[0], s1[1], 0.0], settings,
                            event=lambda s: s[0] - lz, step_cap=cap, guard=guard)
    whole = passage(params, sections, xi, settings, rho=rho).theta
    return s1[2], s2[2], whole


def _theta_point(args):
    params, sections, T, rho, method, settings = args
    if method == TRAJECTORY:
        return theta_trajectory(params, sections, T, rho, settings)
    exp = validate(params)
    xi, omega = exact_endpoints(exp, sections.eta, sections.zeta0, T)
    th = theta_m_form(exp, None, sections.eta, sections.zeta0, T, rho, xi=xi, omega=omega)
    return PassageIntegral(rho=rho, T=T, theta=th, method=M_SUBSTITUTION)


def theta_series(params: SaddleParams, sections: SectionConfig, rho: float,
                 T_grid: Sequence[float], method: str = TRAJECTORY,
                 settings: IntegratorSettings = IntegratorSettings(),
                 threads: int = 1) -> list:
    if method not in (TRAJECTORY, M_SUBSTITUTION):
        raise InvalidConfig(f"unknown theta method {method!r}")
    return parallel_map(_theta_point, [(params, sections, float(T), rho, method, settings)
                                       for T in T_grid], threads)


def scaling_fit(params: SaddleParams, sections: SectionConfig, rho: float,
                T_grid: Sequence[float], method: str = TRAJECTORY,
                settings: IntegratorSettings = IntegratorSettings(),
                threads: int = 1) -> ScalingFit:
    """Growth of Theta in T.

    Below rho = 2 Theta is a power of T, at rho = 2 it grows like log T and
    above it stays bounded; the regime is read off rho, and the fitted
    exponent (slope of log Theta against log T) is reported in every case.
    At rho = 2 the slope of Theta against log T is reported as well.
    """
    quad.check_rho(rho)
    T_grid = sorted(float(T) for T in T_grid)
    if len(T_grid) < 3 or T_grid[-1] / T_grid[0] < 100.0 * (1 - 1e-12):
        raise InvalidConfig("scaling fit needs a grid spanning at least two decades")
    pts = theta_series(params, sections, rho, T_grid, method, settings, threads)
    Ts = [p.T for p in pts]
    th = [p.theta for p in pts]
    exponent, _, r2 = fit_loglog(Ts, th)
    log_slope = None
    if rho == 2.0:
        regime = "log"
        log_slope = float(np.polyfit(np.log(Ts), th, 1)[0])
    elif rho < 2.0:
        regime = "power"
    else:
        regime = "bounded"
    return ScalingFit(rho=rho, regime=regime, exponent=exponent, log_slope=log_slope,
                      r2=r2, T_grid=tuple(Ts), thetas=tuple(th))


def log_slope_theory(exp: Exponents) -> float:
    """Coefficient of log T in Theta at rho = 2."""
    return (exp.beta0 + exp.beta2) / exp.c0
