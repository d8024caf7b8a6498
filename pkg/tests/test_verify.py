import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughwave.model import MediumParams
from roughwave.verify import (GrazingIncidenceError, SegmentTooLowError, convergence_suite,
                              fresnel_flat, inverse_discrimination_demo)


def _params(kp, km, mu):
    return MediumParams(kp, km, mu, -1.0, 1.0)


def test_fresnel_normal_incidence_values():
    s = fresnel_flat(_params(3.0, 1.0, 2.0), (0.0, -1.0))
    assert (s.alpha, s.beta) == (3.0, 1.0)
    assert s.R == pytest.approx(0.2, abs=1e-15) and s.T == pytest.approx(1.2, abs=1e-15)
    assert abs(s.alpha * (1 - abs(s.R) ** 2) - 2.0 * s.beta.real * abs(s.T) ** 2) <= 1e-12


def test_fresnel_without_contrast():
    d = (np.sin(0.4), -np.cos(0.4))
    s = fresnel_flat(_params(2.0, 2.0, 1.0), d)
    assert abs(s.R) <= 1e-15 and abs(s.T - 1) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(kp=st.floats(0.2, 10), km=st.floats(0.2, 10), mu=st.floats(0.1, 10), ang=st.floats(-1.4, 1.4))
def test_fresnel_matching_conditions(kp, km, mu, ang):
    s = fresnel_flat(_params(kp, km, mu), (np.sin(ang), -np.cos(ang)))
    assert abs(1 + s.R - s.T) <= 1e-12 * max(1, abs(s.T))
    assert abs(s.alpha * (1 - s.R) - mu * s.beta * s.T) <= 1e-12 * max(1, s.alpha, abs(mu * s.beta * s.T))
    assert s.beta.imag >= 0
    if not s.evanescent:
        scale = max(1.0, s.alpha)
        assert abs(s.alpha * (1 - abs(s.R) ** 2) - mu * s.beta.real * abs(s.T) ** 2) <= 1e-12 * scale


def test_evanescent_transmission_decays():
    s = fresnel_flat(_params(3.0, 1.0, 2.0), (np.sin(1.0), -np.cos(1.0)))
    assert s.evanescent and s.beta.imag > 0
    amp = np.abs(s.field(np.array([[0.0, -0.5], [0.0, -1.0], [0.0, -2.0]])))
    assert amp[0] > amp[1] > amp[2]


def test_grazing_incidence_rejected():
    with pytest.raises(GrazingIncidenceError):
        fresnel_flat(_params(3.0, 1.0, 2.0), (1.0, -1e-14))


def test_inverse_segment_must_clear_profiles(bump, flat):
    p = MediumParams.for_profile(bump, 3.0, 1.0, 2.0)
    with pytest.raises(SegmentTooLowError):
        inverse_discrimination_demo(bump, flat, p, segment=(0.2, 10.0))


def test_density_self_convergence():
    res = convergence_suite()
    assert res.passed, res.checks
