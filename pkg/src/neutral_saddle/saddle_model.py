"""Cubic neutral saddle family, its admissibility rules and first integral.

The planar field is

    x' =  x (a0 x^2 + a1 x y + a2 y^2) + R1(x, y)
    y' = -y (b0 x^2 + b1 x y + b2 y^2) + R2(x, y)

with an optional quartic remainder ``R = (R1, R2)`` bounded by
``K (x^2 + y^2)^2``.  Everything downstream reads the coefficients through
``SaddleParams`` and the derived exponents through ``Exponents``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    DegenerateDelta,
    DegenerateExponent,
    EllipticityViolation,
    GammaOutOfRange,
    InvalidConfig,
    MixedTermMismatch,
    NegativeCoefficient,
    NonPositivePoint,
)

REL_TOL = 1e-12


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------

class Perturbation:
    """Quartic remainder added to the cubic field.

    Subclasses implement ``__call__(x, y) -> (R1, R2)`` and declare ``bound``,
    a constant K with ``|R(x, y)| <= K (x^2 + y^2)^2``.  Instances must be
    picklable so passages can be farmed out to worker processes.
    """

    name = "custom"
    bound = 0.0

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.name, "K": self.bound}


class ZeroPerturbation(Perturbation):
    name = "zero"
    bound = 0.0

    def __call__(self, x, y):
        return 0.0, 0.0

    def __eq__(self, other):
        return isinstance(other, ZeroPerturbation)

    def __hash__(self):
        return hash("zero")


class QuarticPerturbation(Perturbation):
    """R = (K x^4, -K y^4).

    Vanishes on the axes to fourth order, so both axes stay invariant, and
    reinforces the saddle (extra repulsion along x, extra attraction along y).
    """

    name = "quartic"

    def __init__(self, K: float = 0.5):
        if not K >= 0.0:
            raise InvalidConfig(f"perturbation constant must be >= 0, got {K}")
        self.bound = float(K)

    def __call__(self, x, y):
        K = self.bound
        x2 = x * x
        y2 = y * y
        return K * x2 * x2, -K * y2 * y2

    def __eq__(self, other):
        return isinstance(other, QuarticPerturbation) and other.bound == self.bound

    def __hash__(self):
        return hash(("quartic", self.bound))

    def __repr__(self):
        return f"QuarticPerturbation(K={self.bound})"


class AxisFlatPerturbation(Perturbation):
    """R = (K x^3 y, -K x y^3).

    Vanishes on both axes, so the passage geometry at the sections is
    unchanged to leading order; used to separate that effect from the
    error order of the remainder itself.
    """

    name = "axis_flat"

    def __init__(self, K: float = 0.5):
        if not K >= 0.0:
            raise InvalidConfig(f"perturbation constant must be >= 0, got {K}")
        self.bound = float(K)

    def __call__(self, x, y):
        K = self.bound
        xy = x * y
        return K * xy * x * x, -K * xy * y * y

    def __eq__(self, other):
        return isinstance(other, AxisFlatPerturbation) and other.bound == self.bound

    def __hash__(self):
        return hash(("axis_flat", self.bound))

    def __repr__(self):
        return f"AxisFlatPerturbation(K={self.bound})"


class CallablePerturbation(Perturbation):
    """Wrap two user functions ``fx(x, y)``, ``fy(x, y)``."""

    def __init__(self, fx: Callable[[float, float], float],
                 fy: Callable[[float, float], float], bound: float,
                 name: str = "custom"):
        self.fx = fx
        self.fy = fy
        self.bound = float(bound)
        self.name = name

    def __call__(self, x, y):
        return self.fx(x, y), self.fy(x, y)


def perturbation_from_dict(d: Optional[dict]) -> Perturbation:
    if d is None:
        return ZeroPerturbation()
    kind = d.get("kind", "quartic")
    if kind == "zero":
        return ZeroPerturbation()
    if kind == "quartic":
        return QuarticPerturbation(float(d.get("K", 0.5)))
    if kind == "axis_flat":
        return AxisFlatPerturbation(float(d.get("K", 0.5)))
    raise InvalidConfig(f"unknown perturbation kind {kind!r}")


# ---------------------------------------------------------------------------
# Parameters and exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleParams:
    a0: float
    a1: float
    a2: float
    b0: float
    b1: float
    b2: float
    perturbation: Perturbation = field(default_factory=ZeroPerturbation,
                                       compare=True)

    @property
    def coeffs(self) -> tuple[float, float, float, float, float, float]:
        return (self.a0, self.a1, self.a2, self.b0, self.b1, self.b2)

    def with_perturbation(self, pert: Perturbation) -> "SaddleParams":
        return SaddleParams(*self.coeffs, perturbation=pert)

    def to_dict(self) -> dict:
        d = dict(zip(("a0", "a1", "a2", "b0", "b1", "b2"), self.coeffs))
        d["perturbation"] = self.perturbation.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SaddleParams":
        try:
            coeffs = [float(d[k]) for k in ("a0", "a1", "a2", "b0", "b1", "b2")]
        except KeyError as exc:
            raise InvalidConfig(f"missing saddle coefficient {exc.args[0]}") from None
        return cls(*coeffs, perturbation=perturbation_from_dict(d.get("perturbation")))


@dataclass(frozen=True)
class Exponents:
    u: float
    v: float
    Delta: float
    c0: float
    c1: float
    c2: float
    beta0: float
    beta2: float
    beta_star: float
    mixed: float  # coefficient of x*y inside the first integral

    @property
    def e(self) -> float:
        """Power of c0 + c1 M + c2 M^2 in the Dulac-time integrand."""
        return 0.5 / self.beta0 + 0.5 / self.beta2

    @property
    def uv2(self) -> float:
        return self.u + self.v + 2.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("u", "v", "Delta", "c0", "c1", "c2", "beta0", "beta2", "beta_star")}


def _close(a: float, b: float, rel: float = REL_TOL) -> bool:
    scale = max(abs(a), abs(b))
    return abs(a - b) <= rel * scale


def validate(params: SaddleParams) -> Exponents:
    """Check the admissibility rules and return the derived exponents."""
    a0, a1, a2, b0, b1, b2 = params.coeffs
    for name, val in (("a0", a0), ("a2", a2), ("b0", b0), ("b2", b2)):
        if not val >= 0.0:
            raise NegativeCoefficient(f"{name} must be >= 0, got {val}")
    for name, val in (("a1", a1), ("b1", b1)):
        if not math.isfinite(val):
            raise InvalidConfig(f"{name} must be finite, got {val}")

    Delta = a2 * b0 - a0 * b2
    if Delta == 0.0 or abs(Delta) <= REL_TOL * max(a2 * b0, a0 * b2):
        raise DegenerateDelta(f"Delta = a2*b0 - a0*b2 = {Delta} vanishes")
    if a0 == 0.0 or b2 == 0.0:
        raise DegenerateExponent("a0 and b2 must be strictly positive")

    c0, c1, c2 = a0 + b0, a1 + b1, a2 + b2
    if not c1 * c1 < 4.0 * c0 * c2:
        raise EllipticityViolation(
            f"c1^2 = {c1 * c1} must be < 4 c0 c2 = {4.0 * c0 * c2}")

    u = 2.0 * b2 * c0 / Delta
    v = 2.0 * a0 * c2 / Delta
    # a1/(v+1) = b1/(u+1), cross-multiplied so v = -1 or u = -1 is harmless
    lhs, rhs = a1 * (u + 1.0), b1 * (v + 1.0)
    if not (lhs == rhs or _close(lhs, rhs)):
        raise MixedTermMismatch(
            f"a1/(v+1) = {a1}/({v + 1}) differs from b1/(u+1) = {b1}/({u + 1})")

    beta0 = (a0 + b0) / (2.0 * a0)
    beta2 = (a2 + b2) / (2.0 * b2)
    beta_star = 0.5 * min(1.0, a2 / b2, b0 / a0)
    if v + 1.0 != 0.0:
        mixed = a1 / (v + 1.0)
    elif u + 1.0 != 0.0:
        mixed = b1 / (u + 1.0)
    else:
        mixed = Delta * c1 / (2.0 * c0 * c2)
    return Exponents(u=u, v=v, Delta=Delta, c0=c0, c1=c1, c2=c2,
                     beta0=beta0, beta2=beta2, beta_star=beta_star, mixed=mixed)


def reduced_family(gamma: float, perturbation: Optional[Perturbation] = None) -> SaddleParams:
    """Volume-preserving normal form (1, g, 3, 3, g, 1); needs |g| < 4."""
    gamma = float(gamma)
    if not -4.0 < gamma < 4.0:
        raise GammaOutOfRange(f"gamma must lie in (-4, 4), got {gamma}")
    return SaddleParams(1.0, gamma, 3.0, 3.0, gamma, 1.0,
                        perturbation=perturbation or ZeroPerturbation())


def is_divergence_free(params: SaddleParams) -> bool:
    a0, a1, a2, b0, b1, b2 = params.coeffs
    scale = max(abs(c) for c in params.coeffs)
    tol = REL_TOL * scale
    return (abs(3 * a0 - b0) <= tol and abs(a2 - 3 * b2) <= tol
            and abs(a1 - b1) <= tol)


# ---------------------------------------------------------------------------
# Field, divergence, first integral
# ---------------------------------------------------------------------------

def field_eval(params: SaddleParams, x: float, y: float,
               perturbed: bool = False) -> tuple[float, float]:
    a0, a1, a2, b0, b1, b2 = params.coeffs
    xx, xy, yy = x * x, x * y, y * y
    fx = x * (a0 * xx + a1 * xy + a2 * yy)
    fy = -y * (b0 * xx + b1 * xy + b2 * yy)
    if perturbed:
        rx, ry = params.perturbation(x, y)
        fx += rx
        fy += ry
    return fx, fy


def divergence(params: SaddleParams, x: float, y: float) -> float:
    """Analytic divergence of the cubic part."""
    a0, a1, a2, b0, b1, b2 = params.coeffs
    return ((3 * a0 - b0) * x * x + 2 * (a1 - b1) * x * y
            + (a2 - 3 * b2) * y * y)


def first_integral(params: SaddleParams, x: float, y: float,
                   exp: Optional[Exponents] = None) -> float:
    """L(x, y) for the unperturbed field on the open first quadrant.

    For Delta < 0 the reciprocal of the Delta > 0 expression is returned; it
    is a first integral because any function of one is.
    """
    if not (x > 0.0 and y > 0.0):
        raise NonPositivePoint(f"first integral needs x, y > 0, got ({x}, {y})")
    exp = exp or validate(params)
    q = (params.a0 / exp.v) * x * x + exp.mixed * x * y + (params.b2 / exp.u) * y * y
    val = x ** exp.u * y ** exp.v * q
    return val if exp.Delta > 0 else 1.0 / val


def log_abs_first_integral(params: SaddleParams, x: float, y: float,
                           exp: Exponents) -> float:
    """log|x^u y^v Q(x, y)| computed without under/overflow of the powers.

    Both branches of L are monotone functions of this quantity, so relative
    drift of L along an orbit equals the drift of this value up to sign.
    """
    q = (params.a0 / exp.v) * x * x + exp.mixed * x * y + (params.b2 / exp.u) * y * y
    return exp.u * math.log(x) + exp.v * math.log(y) + math.log(abs(q))


def level_set_quadratic(exp: Exponents, x: float, y: float) -> float:
    """c0 x^2 + c1 x y + c2 y^2, positive off the origin."""
    return exp.c0 * x * x + exp.c1 * x * y + exp.c2 * y * y
