import math

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from neutral_saddle.errors import InvalidConfig
from neutral_saddle.saddle_model import SaddleParams, validate

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow,
                                                 HealthCheck.filter_too_much])
settings.load_profile("default")


@st.composite
def admissible_params(draw, positive_delta=None):
    """Random admissible cubic saddles: b1 is solved from a1 so the mixed-term rule holds."""
    a0 = draw(st.floats(0.2, 5.0))
    a2 = draw(st.floats(0.2, 5.0))
    b0 = draw(st.floats(0.2, 5.0))
    b2 = draw(st.floats(0.2, 5.0))
    delta = a2 * b0 - a0 * b2
    if abs(delta) < 0.05 * max(a2 * b0, a0 * b2):
        a2 = a2 * 2.5 if delta >= 0 else a2 / 2.5
        delta = a2 * b0 - a0 * b2
    if positive_delta is not None and (delta > 0) != positive_delta:
        a0, a2, b0, b2 = b0, b2, a0, a2  # reverses the sign of delta
    c0, c2 = a0 + b0, a2 + b2
    delta = a2 * b0 - a0 * b2
    u, v = 2 * b2 * c0 / delta, 2 * a0 * c2 / delta
    frac = draw(st.floats(-0.9, 0.9))
    ratio = (u + 1) / (v + 1)
    # a1 + b1 = a1 (1 + ratio); pick it inside the ellipticity window
    c1 = frac * 2 * math.sqrt(c0 * c2)
    if abs(1 + ratio) < 1e-3:
        a1 = b1 = 0.0
    else:
        a1 = c1 / (1 + ratio)
        b1 = a1 * ratio
    p = SaddleParams(a0, a1, a2, b0, b1, b2)
    try:
        validate(p)
    except InvalidConfig:
        p = SaddleParams(a0, 0.0, a2, b0, 0.0, b2)
    return p


@pytest.fixture
def gamma0():
    from neutral_saddle.saddle_model import reduced_family
    return reduced_family(0.0)
