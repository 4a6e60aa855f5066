import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from neutral_saddle.errors import (
    InvalidConfig,
    LeftDomain,
    MaxStepsExceeded,
    NoConvergence,
    TTooSmall,
)
from neutral_saddle.flow_integrator import (
    IntegratorSettings,
    PhasePoint,
    SectionConfig,
    flow_for_time,
    integrate,
    invert_dulac_time,
    min_passage_time,
    passage,
    polyline_rows,
    trajectory_polyline,
)
from neutral_saddle.dulac_analysis import coefficients
from neutral_saddle.saddle_model import (
    CallablePerturbation,
    QuarticPerturbation,
    SaddleParams,
    level_set_quadratic,
    reduced_family,
    validate,
)

SEC = SectionConfig()


def test_passage_gamma0_level_set_oracle():
    rec = passage(reduced_family(0.0), SEC, 0.2)
    # L(xi, 1) = L(1, omega): xi (xi^2 + 1) = omega (1 + omega^2)
    target = 0.2 * (0.2 ** 2 + 1)
    omega = brentq(lambda w: w * (1 + w * w) - target, 1e-12, 1.0, xtol=1e-15)
    assert rec.omega == pytest.approx(omega, rel=1e-9)
    assert rec.L_drift <= 1e-10
    assert rec.T > 0 and rec.steps > 0


def test_near_trivial_passage():
    rec = passage(reduced_family(0.0), SectionConfig(eta=0.05), 1.0 - 1e-9)
    assert rec.T < 1e-6
    assert rec.omega == pytest.approx(0.05, rel=1e-6)


def test_monotonicity_probe():
    p = reduced_family(0.0)
    assert passage(p, SEC, 0.1).T > passage(p, SEC, 0.2).T


@pytest.mark.parametrize("params", [reduced_family(0.0), reduced_family(-2.5),
                                    SaddleParams(1.0, 0.0, 2.0, 1.0, 0.0, 1.0)])
def test_monotone_grid(params):
    xis = np.geomspace(1e-4, 0.95, 50)
    recs = [passage(params, SEC, float(x)) for x in xis]
    T = np.array([r.T for r in recs])
    w = np.array([r.omega for r in recs])
    assert np.all(np.diff(T) < 0)
    assert np.all(np.diff(w) > 0)


@settings(max_examples=25)
@given(st.floats(-3.9, 3.9), st.floats(1e-5, 0.9), st.floats(0.6, 1.4))
def test_conservation(gamma, xi, eta):
    st_ = IntegratorSettings()
    rec = passage(reduced_family(gamma), SectionConfig(eta=eta), xi, st_)
    assert rec.L_drift <= 10 * st_.rel_tol * (1 + rec.arc_length)


@settings(max_examples=20)
@given(st.floats(-3.9, 3.9), st.floats(1e-5, 0.9), st.floats(0.6, 1.4), st.floats(0.6, 1.2))
def test_level_set_exit_identity(gamma, xi, eta, zeta0):
    p = reduced_family(gamma)
    exp = validate(p)
    rec = passage(p, SectionConfig(eta=eta, zeta0=zeta0), xi * zeta0)
    xi = xi * zeta0
    lhs = math.log(xi) * exp.u + math.log(eta) * exp.v + math.log(level_set_quadratic(exp, xi, eta))
    rhs = (math.log(zeta0) * exp.u + math.log(rec.omega) * exp.v
           + math.log(level_set_quadratic(exp, zeta0, rec.omega)))
    assert math.expm1(lhs - rhs) == pytest.approx(0.0, abs=1e-8)


def test_level_set_exit_identity_nonpreserving():
    base = validate(SaddleParams(1.0, 0.0, 2.0, 1.0, 0.0, 1.0))
    a1 = 0.4
    p = SaddleParams(1.0, a1, 2.0, 1.0, a1 * (base.u + 1) / (base.v + 1), 1.0)
    exp = validate(p)
    for xi in (1e-3, 0.05, 0.5):
        rec = passage(p, SEC, xi)
        lhs = xi ** exp.u * level_set_quadratic(exp, xi, 1.0)
        rhs = rec.omega ** exp.v * level_set_quadratic(exp, 1.0, rec.omega)
        assert lhs == pytest.approx(rhs, rel=1e-8)


@pytest.mark.parametrize("gamma", [0.0, 2.0, -3.0])
def test_time_reversal(gamma):
    p = reduced_family(gamma)
    for xi in (1e-3, 0.2):
        rec = passage(p, SEC, xi)
        back = flow_for_time(p, PhasePoint(SEC.zeta0, rec.omega), -rec.T)
        assert back.x == pytest.approx(xi, rel=1e-6)
        assert back.y == pytest.approx(SEC.eta, rel=1e-6)


def test_tolerance_convergence():
    p = reduced_family(0.5)
    ref = passage(p, SEC, 0.01, IntegratorSettings(rel_tol=1e-13, abs_tol=1e-13))
    errs, drifts = [], []
    for tol in (1e-6, 5e-7, 2.5e-7, 1.25e-7):
        r = passage(p, SEC, 0.01, IntegratorSettings(rel_tol=tol, abs_tol=tol))
        errs.append(abs(r.T - ref.T))
        drifts.append(r.L_drift)
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert drifts[-1] < drifts[0]


def test_step_halving_order():
    # fixed steps on a smooth problem: a fifth-order method gains ~32 per halving
    f = lambda t, y: [y[1], -y[0]]
    errs = []
    for h in (0.2, 0.1, 0.05):
        s = IntegratorSettings(fixed_step=h)
        t, y, _, _ = integrate(f, 0.0, [0.0, 1.0], s, t_end=2.0)
        errs.append(abs(y[0] - math.sin(2.0)))
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_m_quadrature_backend_agrees():
    p = reduced_family(1.0)
    fast = IntegratorSettings(backend="m_quadrature")
    for xi in (1e-4, 0.01, 0.3):
        a = passage(p, SEC, xi)
        b = passage(p, SEC, xi, fast)
        assert b.T == pytest.approx(a.T, rel=1e-8)
        assert b.omega == pytest.approx(a.omega, rel=1e-8)


def test_m_quadrature_rejects_perturbed():
    p = reduced_family(0.0, QuarticPerturbation(0.5))
    with pytest.raises(InvalidConfig):
        passage(p, SEC, 0.1, IntegratorSettings(backend="m_quadrature"), perturbed=True)


def test_passage_preconditions():
    p = reduced_family(0.0)
    for xi in (0.0, -0.1, 1.0, 1.5):
        with pytest.raises(InvalidConfig):
            passage(p, SEC, xi)


def test_max_steps_exceeded():
    with pytest.raises(MaxStepsExceeded):
        passage(reduced_family(0.0), SEC, 1e-6, IntegratorSettings(max_steps=20))


def test_left_domain():
    # a strongly repelling remainder pushes the orbit out through the top of the box
    q = reduced_family(0.0).with_perturbation(CallablePerturbation(lambda x, y: 0.0, lambda x, y: 50 * y ** 4, 50))
    with pytest.raises(LeftDomain):
        passage(q, SectionConfig(eta=1.0, eta_range=(1.0, 1.0)), 1e-3, perturbed=True)


def test_settings_validation():
    with pytest.raises(InvalidConfig):
        IntegratorSettings(rel_tol=1e-14)
    with pytest.raises(InvalidConfig):
        IntegratorSettings(backend="euler")
    with pytest.raises(InvalidConfig):
        SectionConfig(eta=-1.0)
    with pytest.raises(InvalidConfig):
        SectionConfig(zeta0=1.0, box_factor=0.9)
    s = IntegratorSettings(rel_tol=1e-9)
    assert IntegratorSettings.from_dict(s.to_dict()) == s
    assert SectionConfig.from_dict(SEC.to_dict()) == SEC


def test_invert_dulac_time_T100():
    p = reduced_family(0.0)
    xi = invert_dulac_time(p, SEC, 100.0)
    c = coefficients(validate(p), 1.0, 1.0)
    assert xi == pytest.approx(c.xi0 * 100.0 ** -2 * (1 - c.xi1 / 100), rel=0.01)
    settings_ = IntegratorSettings()
    assert abs(passage(p, SEC, xi).T - 100.0) <= max(settings_.event_tol, settings_.rel_tol * 100)


@settings(max_examples=10)
@given(st.floats(-3.5, 3.5), st.floats(1e-4, 0.5))
def test_invert_roundtrip(gamma, xi_star):
    p = reduced_family(gamma)
    T = passage(p, SEC, xi_star).T
    assert invert_dulac_time(p, SEC, T) == pytest.approx(xi_star, rel=1e-7)


def test_invert_roundtrip_perturbed():
    p = reduced_family(0.0, QuarticPerturbation(0.5))
    T = passage(p, SEC, 3e-3, perturbed=True).T
    assert invert_dulac_time(p, SEC, T, perturbed=True) == pytest.approx(3e-3, rel=1e-7)


def test_invert_too_small():
    p = reduced_family(0.0)
    assert min_passage_time(p, SEC) < 1e-6
    with pytest.raises(TTooSmall):
        invert_dulac_time(p, SEC, 0.0)
    with pytest.raises(TTooSmall):
        invert_dulac_time(p, SectionConfig(eta=1.0, zeta0=1.0), 1e-12)


def test_invert_no_convergence():
    with pytest.raises(NoConvergence):
        invert_dulac_time(reduced_family(0.0), SEC, 1e3,
                          IntegratorSettings(max_bisections=1, rel_tol=1e-13, event_tol=1e-300))


@pytest.mark.parametrize("gamma, xi", [(0.0, 0.2), (2.0, 1e-3), (-3.0, 0.05)])
def test_trajectory_polyline(gamma, xi):
    p = reduced_family(gamma)
    pts = trajectory_polyline(p, SEC, PhasePoint(xi, 1.0))
    ts = [t for t, _ in pts]
    assert ts[0] == 0.0 and all(b >= a for a, b in zip(ts, ts[1:]))
    rec = passage(p, SEC, xi)
    assert ts[-1] == pytest.approx(rec.T, rel=1e-12)
    assert pts[-1][1].x == pytest.approx(1.0, rel=1e-10)
    rows = polyline_rows(p, pts)
    L = np.array([r[3] for r in rows])
    assert np.ptp(L) <= 1e-8 * abs(L[0])


def test_settings_do_not_matter_for_determinism():
    p = reduced_family(0.7)
    a = passage(p, SEC, 0.013)
    b = passage(p, SEC, 0.013)
    assert a == b


def test_event_tol_respected():
    p = reduced_family(0.0)
    rec = passage(p, SEC, 0.05, replace(IntegratorSettings(), event_tol=1e-13))
    # the exit is on x = zeta0 to the bisection tolerance in log x
    pts = trajectory_polyline(p, SEC, PhasePoint(0.05, 1.0))
    assert abs(math.log(pts[-1][1].x)) <= 1e-10
    assert rec.T == pytest.approx(pts[-1][0], rel=1e-12)
