"""Singular M-integrals behind the Dulac time and the passage observables.

Along an unperturbed passage the slope ``M = y / x`` decreases monotonically
and time is a quadrature in ``M``:

    G(xi, eta) T = int_{omega/zeta0}^{eta/xi} M^(1/beta0 - 1) Q(M)^(-e) dM,
    Q(M) = c0 + c1 M + c2 M^2,  e = 1/(2 beta0) + 1/(2 beta2).

Scalar evaluations use adaptive quadrature after substitutions that remove
the algebraic endpoint behaviour.  ``AntiderivativeTable`` serves the Monte
Carlo layer, where millions of passages need the same integrand between
different limits.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidConfig, NonIntegrable
from .saddle_model import Exponents

QUAD_REL = 1e-12
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _check_exponents(exp: Exponents) -> None:
    for name in ("beta0", "beta2"):
        b = getattr(exp, name)
        if not (math.isfinite(b) and b > 0.0):
            raise NonIntegrable(f"{name} = {b}: integrand is not integrable")
    if not exp.e > 0.0:
        raise NonIntegrable(f"integrand exponent e = {exp.e} must be positive")


def _piece_head(ba, q0, q1, q2, e, lo, hi):
    """int_lo^hi M^(1/ba - 1) (q0 + q1 M + q2 M^2)^(-e) dM on 0 <= lo < hi <= 1.

    M = s^ba turns the integrand into ba * Q(s^ba)^(-e).
    """
    if hi <= lo:
        return 0.0
    s_lo, s_hi = lo ** (1.0 / ba), hi ** (1.0 / ba)

    def f(s):
        m = s ** ba
        return ba * (q0 + q1 * m + q2 * m * m) ** (-e)

    return integrate.quad(f, s_lo, s_hi, epsabs=0.0, epsrel=QUAD_REL, limit=200)[0]


def _piece_tail(bb, q0, q1, q2, e, lo, hi):
    """Same integrand on 1 <= lo < hi <= inf.

    M = t^(-bb) gives bb * (q0 t^(2 bb) + q1 t^bb + q2)^(-e) on t in [0, 1].
    """
    if hi <= lo:
        return 0.0
    t_lo = 0.0 if math.isinf(hi) else hi ** (-1.0 / bb)
    t_hi = lo ** (-1.0 / bb)

    def f(t):
        w = t ** bb
        return bb * (q0 * w * w + q1 * w + q2) ** (-e)

    return integrate.quad(f, t_lo, t_hi, epsabs=0.0, epsrel=QUAD_REL, limit=200)[0]


def m_integral(exp: Exponents, lower: float, upper: float, variant: str = "xi") -> float:
    """Dulac-time integral between ``lower`` and ``upper`` (``upper`` may be inf).

    ``variant="xi"`` integrates M^(1/beta0 - 1) (c0 + c1 M + c2 M^2)^(-e);
    ``variant="omega"`` integrates M^(1/beta2 - 1) (c0 M^2 + c1 M + c2)^(-e),
    the same integral after M -> 1/M.
    """
    _check_exponents(exp)
    if not lower >= 0.0:
        raise InvalidConfig(f"lower limit must be >= 0, got {lower}")
    if upper < lower:
        raise InvalidConfig(f"need lower <= upper, got [{lower}, {upper}]")
    if upper == lower:
        return 0.0
    if variant == "xi":
        ba, bb, q = exp.beta0, exp.beta2, (exp.c0, exp.c1, exp.c2)
    elif variant == "omega":
        ba, bb, q = exp.beta2, exp.beta0, (exp.c2, exp.c1, exp.c0)
    else:
        raise InvalidConfig(f"variant must be 'xi' or 'omega', got {variant!r}")
    e = exp.e
    head = _piece_head(ba, *q, e, min(lower, 1.0), min(upper, 1.0))
    tail = _piece_tail(bb, *q, e, max(lower, 1.0), max(upper, 1.0))
    return head + tail


def G_eval(exp: Exponents, xi, eta):
    """xi^(1/beta2) eta^(1/beta0) (c0 xi^2 + c1 xi eta + c2 eta^2)^(1 - e)."""
    q = exp.c0 * xi * xi + exp.c1 * xi * eta + exp.c2 * eta * eta
    return xi ** (1.0 / exp.beta2) * eta ** (1.0 / exp.beta0) * q ** (1.0 - exp.e)


# ---------------------------------------------------------------------------
# Level set of the first integral on the exit section
# ---------------------------------------------------------------------------

def omega_level_set(exp: Exponents, xi, eta, zeta0: float, iters: int = 60):
    """Exit height omega on x = zeta0 of the level set through (xi, eta).

    Solves xi^u eta^v Q(xi, eta) = zeta0^u omega^v Q(zeta0, omega) by Newton
    iteration in log(omega).  Works elementwise on arrays.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    u, v, c0, c1, c2 = exp.u, exp.v, exp.c0, exp.c1, exp.c2
    rhs = (u * np.log(xi) + v * np.log(eta)
           + np.log(c0 * xi * xi + c1 * xi * eta + c2 * eta * eta)
           - u * math.log(zeta0))
    z2 = zeta0 * zeta0
    w = (rhs - math.log(c0 * z2)) / v
    # start no higher than the entry height: the orbit moves toward the x-axis
    w = np.minimum(w, np.log(eta))
    for _ in range(iters):
        ew = np.exp(w)
        q = c0 * z2 + c1 * zeta0 * ew + c2 * ew * ew
        g = v * w + np.log(q) - rhs
        dg = v + (c1 * zeta0 * ew + 2.0 * c2 * ew * ew) / q
        step = g / dg
        step = np.clip(step, -5.0, 5.0)
        w = w - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(w))):
            break
    out = np.exp(w)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Scalar passage quantities via the M-substitution
# ---------------------------------------------------------------------------

def dulac_time_m(exp: Exponents, xi: float, eta: float, zeta0: float) -> tuple[float, float]:
    """(T, omega) of the unperturbed passage from (xi, eta) to x = zeta0."""
    if not (0.0 < xi < zeta0):
        raise InvalidConfig(f"need 0 < xi < zeta0, got xi={xi}, zeta0={zeta0}")
    omega = omega_level_set(exp, xi, eta, zeta0)
    I = m_integral(exp, omega / zeta0, eta / xi, "xi")
    return I / G_eval(exp, xi, eta), omega


def psi_integrand(exp: Exponents, rho: float) -> Callable:
    """Integrand of the passage observable int r^rho dt in the M variable."""
    s = exp.uv2
    p_m = 1.0 / exp.beta0 - 1.0 - rho * exp.v / s
    p_q = -rho / s - exp.e
    half = 0.5 * rho
    c0, c1, c2 = exp.c0, exp.c1, exp.c2

    def f(m):
        return m ** p_m * (c0 + c1 * m + c2 * m * m) ** p_q * (1.0 + m * m) ** half

    return f


def check_rho(rho: float) -> None:
    if not (-2.0 < rho <= 4.0):
        raise NonIntegrable(f"rho must lie in (-2, 4], got {rho}")


def theta_integral_m(exp: Exponents, lower: float, upper: float, rho: float) -> float:
    """int_lower^upper of the r^rho passage integrand, done in s = log M."""
    check_rho(rho)
    if upper <= lower:
        return 0.0
    f = psi_integrand(exp, rho)

    def h(s):
        m = math.exp(s)
        return m * f(m)

    a, b = math.log(lower), math.log(upper)
    # split where the integrand peaks (near s = 0) and in unit-scale chunks
    scale = 4.0 * max(exp.beta0, exp.beta2, 1.0)
    cuts = [a]
    for c in np.arange(-40 * scale, 40 * scale + 1e-9, scale):
        if a < c < b:
            cuts.append(float(c))
    cuts.append(b)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += integrate.quad(h, lo, hi, epsabs=0.0, epsrel=QUAD_REL, limit=200)[0]
    return total


# ---------------------------------------------------------------------------
# Vectorised antiderivative in s = log M
# ---------------------------------------------------------------------------

class AntiderivativeTable:
    """F(s) = int h(s') ds' on a uniform grid, evaluated by cubic Hermite.

    ``h`` must be vectorised.  ``kappa_lo`` / ``kappa_hi`` are the exponential
    rates of h beyond the grid (h ~ exp(kappa_lo s) as s -> -inf, and
    h ~ exp(kappa_hi s) as s -> +inf); a positive ``kappa_lo`` and negative
    ``kappa_hi`` allow analytic extension of F past the ends.  F is anchored
    at F(-inf) = 0 when ``kappa_lo > 0``, otherwise at the left grid end.
    """

    def __init__(self, h: Callable, s_lo: float, s_hi: float, step: float,
                 kappa_lo: float, kappa_hi: float):
        n = int(math.ceil((s_hi - s_lo) / step))
        self.s_lo = s_lo
        self.step = (s_hi - s_lo) / n
        self.s_hi = s_hi
        self.kappa_lo = kappa_lo
        self.kappa_hi = kappa_hi
        grid = s_lo + self.step * np.arange(n + 1)
        self.h = h(grid)
        mid = 0.5 * (grid[:-1] + grid[1:])
        nodes = mid[:, None] + 0.5 * self.step * _GL_X[None, :]
        cells = 0.5 * self.step * (h(nodes) @ _GL_W)
        base = self.h[0] / kappa_lo if kappa_lo > 0 else 0.0
        self.F = base + np.concatenate(([0.0], np.cumsum(cells)))
        self._h = h

    @property
    def total(self) -> float:
        """F(+inf); only finite when kappa_hi < 0."""
        if not self.kappa_hi < 0:
            return math.inf
        return float(self.F[-1] + self.h[-1] / (-self.kappa_hi))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        lo = s < self.s_lo
        hi = s > self.s_hi
        mid = ~(lo | hi)
        if np.any(lo):
            if not self.kappa_lo > 0:
                raise NonIntegrable("evaluation below the table range")
            out[lo] = self.h[0] / self.kappa_lo * np.exp(self.kappa_lo * (s[lo] - self.s_lo))
        if np.any(hi):
            if not self.kappa_hi < 0:
                raise NonIntegrable("evaluation above the table range")
            k = -self.kappa_hi
            out[hi] = self.F[-1] + self.h[-1] / k * (1.0 - np.exp(-k * (s[hi] - self.s_hi)))
        if np.any(mid):
            sm = s[mid]
            pos = (sm - self.s_lo) / self.step
            j = np.minimum(pos.astype(np.int64), len(self.F) - 2)
            t = pos - j
            t2 = t * t
            t3 = t2 * t
            h00 = 2 * t3 - 3 * t2 + 1
            h10 = t3 - 2 * t2 + t
            h01 = -2 * t3 + 3 * t2
            h11 = t3 - t2
            out[mid] = (h00 * self.F[j] + h01 * self.F[j + 1]
                        + self.step * (h10 * self.h[j] + h11 * self.h[j + 1]))
        return out if out.ndim else float(out)


def _table_range(exp: Exponents):
    b = max(exp.beta0, exp.beta2, 1.0)
    return -60.0 * b, 60.0 * b, 0.01 * min(exp.beta0, exp.beta2, 1.0)


def dulac_time_table(exp: Exponents) -> AntiderivativeTable:
    """Table of the Dulac-time integrand in s = log M."""
    _check_exponents(exp)
    c0, c1, c2, e, ib0 = exp.c0, exp.c1, exp.c2, exp.e, 1.0 / exp.beta0

    def h(s):
        m = np.exp(s)
        return m ** ib0 * (c0 + c1 * m + c2 * m * m) ** (-e)

    lo, hi, step = _table_range(exp)
    return AntiderivativeTable(h, lo, hi, step, ib0, -1.0 / exp.beta2)


def theta_table(exp: Exponents, rho: float) -> AntiderivativeTable:
    """Table of the r^rho passage integrand in s = log M (rho < 2 only)."""
    check_rho(rho)
    if not rho < 2.0:
        raise NonIntegrable(f"tabulated passage integrals need rho < 2, got {rho}")
    f = psi_integrand(exp, rho)

    def h(s):
        m = np.exp(s)
        return m * f(m)

    lo, hi, step = _table_range(exp)
    k = 1.0 - 0.5 * rho
    return AntiderivativeTable(h, lo, hi, step, k / exp.beta0, -k / exp.beta2)
