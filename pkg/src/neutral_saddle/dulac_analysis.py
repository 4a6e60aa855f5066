"""Closed-form Dulac asymptotics and their comparison with measured passages."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidConfig, TTooSmall
from .flow_integrator import (
    IntegratorSettings,
    SectionConfig,
    invert_dulac_time,
    passage,
)
from .parallel import parallel_map
from .quadrature import G_eval, m_integral
from .saddle_model import Exponents, SaddleParams, validate

__all__ = [
    "AsymptoticCoeffs", "ConvergenceReport", "G_eval", "m_integral",
    "coefficients", "asymptotic_xi", "asymptotic_omega", "dulac_map_asymptotic",
    "omega0_footnote", "flux_coefficient", "convergence_study",
]


@dataclass(frozen=True)
class AsymptoticCoeffs:
    xi0: float
    xi1: float
    omega0: float
    omega1: float
    eta: float
    zeta0: float
    beta0: float
    beta2: float

    def to_dict(self) -> dict:
        return asdict(self)


def _a0_b2(exp: Exponents) -> tuple[float, float]:
    # c0 = a0 + b0 = 2 a0 beta0 and c2 = a2 + b2 = 2 b2 beta2
    return exp.c0 / (2.0 * exp.beta0), exp.c2 / (2.0 * exp.beta2)


def coefficients(exp: Exponents, eta: float, zeta0: float) -> AsymptoticCoeffs:
    """xi0, xi1, omega0, omega1 for the sections y = eta and x = zeta0.

    omega1 is the image of xi1 under the time reversal that swaps
    (a0, a2, eta) with (b2, b0, zeta0).
    """
    if not (eta > 0 and zeta0 > 0):
        raise InvalidConfig("eta and zeta0 must be positive")
    a0, b2 = _a0_b2(exp)
    a2_b2 = 2.0 * exp.beta2 - 1.0
    b0_a0 = 2.0 * exp.beta0 - 1.0
    I = m_integral(exp, 0.0, math.inf, "xi")
    J = m_integral(exp, 0.0, math.inf, "omega")
    xi0 = exp.c2 ** (-1.0 / exp.u) * eta ** (-a2_b2) * I ** exp.beta2
    omega0 = exp.c0 ** (-1.0 / exp.v) * zeta0 ** (-b0_a0) * J ** exp.beta0
    xi1 = 0.5 * exp.beta2 * (1.0 / (a0 * zeta0 ** 2) + 1.0 / (b2 * eta ** 2))
    omega1 = 0.5 * exp.beta0 * (1.0 / (b2 * eta ** 2) + 1.0 / (a0 * zeta0 ** 2))
    return AsymptoticCoeffs(xi0=xi0, xi1=xi1, omega0=omega0, omega1=omega1,
                            eta=eta, zeta0=zeta0, beta0=exp.beta0, beta2=exp.beta2)


def omega0_footnote(exp: Exponents, coeffs: AsymptoticCoeffs) -> float:
    """omega0 from the level-set limit relation instead of its own integral."""
    eta, zeta0 = coeffs.eta, coeffs.zeta0
    return (coeffs.xi0 ** (exp.beta0 / exp.beta2) * eta ** (1.0 + 2.0 / exp.v)
            * zeta0 ** (-(2.0 * exp.beta0 - 1.0)) * (exp.c2 / exp.c0) ** (1.0 / exp.v))


def _check_T(T: float, c1: float) -> None:
    if not T > max(1.0, 2.0 * c1):
        raise TTooSmall(f"T = {T} must exceed max(1, {2.0 * c1:.6g})")


def asymptotic_xi(coeffs: AsymptoticCoeffs, T: float) -> float:
    _check_T(T, coeffs.xi1)
    return coeffs.xi0 * T ** (-coeffs.beta2) * (1.0 - coeffs.xi1 / T)


def asymptotic_omega(coeffs: AsymptoticCoeffs, T: float) -> float:
    _check_T(T, coeffs.omega1)
    return coeffs.omega0 * T ** (-coeffs.beta0) * (1.0 - coeffs.omega1 / T)


def dulac_map_asymptotic(coeffs: AsymptoticCoeffs, exp: Exponents, xi: float) -> float:
    """Leading term of the Dulac map D(xi)."""
    r = exp.beta0 / exp.beta2
    return coeffs.omega0 * coeffs.xi0 ** (-r) * xi ** r


def flux_coefficient(params: SaddleParams, eta: float, zeta0: float) -> float:
    """|X(0, eta)| / |X(zeta0, 0)|, the linear Dulac coefficient when div X = 0."""
    return params.b2 * eta ** 3 / (params.a0 * zeta0 ** 3)


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    T_grid: list
    xi_measured: list
    xi_asymptotic: list
    rel_errors: list
    omega_measured: list
    omega_asymptotic: list
    omega_rel_errors: list
    fitted_leading_exponent: float
    fitted_omega_exponent: float
    fitted_error_exponent: float
    regression_r2: float
    perturbed: bool
    coeffs: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        for k in ("T_grid", "xi_measured", "xi_asymptotic", "rel_errors",
                  "omega_measured", "omega_asymptotic", "omega_rel_errors"):
            d.pop(k)
        d["n_points"] = len(self.T_grid)
        return d

    def csv_rows(self) -> list:
        return list(zip(self.T_grid, self.xi_measured, self.xi_asymptotic,
                        self.rel_errors, self.omega_measured,
                        self.omega_asymptotic, self.omega_rel_errors))

    CSV_HEADER = ("T", "xi_measured", "xi_asymptotic", "rel_error",
                  "omega_measured", "omega_asymptotic", "omega_rel_error")


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), min(1.0, max(0.0, r2))


def _measure(args):
    params, sections, T, settings, perturbed = args
    exp = validate(params)
    xi = invert_dulac_time(params, sections, T, settings, perturbed, exp=exp)
    rec = passage(params, sections, xi, settings, perturbed, exp=exp)
    return xi, rec.omega, rec.T


def convergence_study(params: SaddleParams, sections: SectionConfig,
                      T_grid: Sequence[float], perturbed: bool = False,
                      settings: IntegratorSettings = IntegratorSettings(),
                      threads: int = 1) -> ConvergenceReport:
    """Measured xi(eta, T), omega(eta, T) on a grid against the two-term asymptotics.

    The error exponent is the least-squares slope of log rel_error against
    log T with the first grid point dropped.  Times are the measured passage
    times of the returned entries.
    """
    T_grid = [float(T) for T in T_grid]
    if len(T_grid) < 3:
        raise InvalidConfig("convergence_study needs at least three grid points")
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise InvalidConfig("T grid must be strictly ascending")
    if T_grid[0] < 100.0:
        raise InvalidConfig("T grid must start at T >= 100")
    exp = validate(params)
    coeffs = coefficients(exp, sections.eta, sections.zeta0)
    if perturbed and params.perturbation.bound == 0.0:
        perturbed = False  # a zero remainder is the unperturbed field

    results = parallel_map(_measure, [(params, sections, T, settings, perturbed)
                                      for T in T_grid], threads)
    xi_m = [r[0] for r in results]
    om_m = [r[1] for r in results]
    T_m = [r[2] for r in results]
    xi_a = [asymptotic_xi(coeffs, T) for T in T_m]
    om_a = [asymptotic_omega(coeffs, T) for T in T_m]
    rel = [abs(m / a - 1.0) for m, a in zip(xi_m, xi_a)]
    om_rel = [abs(m / a - 1.0) for m, a in zip(om_m, om_a)]

    lead, _, _ = fit_loglog(T_m, xi_m)
    om_lead, _, _ = fit_loglog(T_m, om_m)
    # rel errors can touch zero at round-off; floor them at double precision
    floored = [max(r, 1e-16) for r in rel[1:]]
    err_slope, _, r2 = fit_loglog(T_m[1:], floored)
    return ConvergenceReport(
        T_grid=T_m, xi_measured=xi_m, xi_asymptotic=xi_a, rel_errors=rel,
        omega_measured=om_m, omega_asymptotic=om_a, omega_rel_errors=om_rel,
        fitted_leading_exponent=lead, fitted_omega_exponent=om_lead,
        fitted_error_exponent=err_slope, regression_r2=r2, perturbed=perturbed,
        coeffs=coeffs.to_dict(),
    )
