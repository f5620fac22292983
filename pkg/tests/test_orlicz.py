import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core.errors import DomainError
from core.tools.orlicz import YoungFunction, orlicz_norm

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False).filter(lambda v: v == 0 or abs(v) > 1e-6)
samples = st.lists(finite, min_size=1, max_size=50).map(np.array)


@given(h=samples, scale=st.floats(1e-3, 1e3))
@settings(max_examples=100, deadline=None)
def test_orlicz_norm_is_homogeneous(h, scale):
    phi = YoungFunction.talagrand()
    assert math.isclose(orlicz_norm(scale * h, phi), scale * orlicz_norm(h, phi), rel_tol=1e-6, abs_tol=1e-300)


@given(h=samples)
@settings(max_examples=100, deadline=None)
def test_power_young_function_gives_lp_norm(h):
    expected = float(np.mean(np.abs(h) ** 2)) ** 0.5
    assert math.isclose(orlicz_norm(h, YoungFunction.power(2.0)), expected, rel_tol=1e-6, abs_tol=1e-300)


def test_norm_of_constant_sample():
    # 𝔼φ(1/λ) = 1 at the root
    value = orlicz_norm(np.ones(10), YoungFunction.talagrand())
    phi = YoungFunction.talagrand()
    assert float(phi(1.0 / value)) == pytest.approx(1.0, rel=1e-6)


def test_zero_sample_has_zero_norm():
    assert orlicz_norm(np.zeros(5), YoungFunction.talagrand()) == 0.0


def test_table_young_function_interpolates_and_extends():
    psi = YoungFunction.table(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 3.0]))
    assert float(psi(1.5)) == pytest.approx(2.0)
    assert float(psi(4.0)) == pytest.approx(7.0)
    assert orlicz_norm(np.ones(4), psi) == pytest.approx(1.0)


def test_rejects_invalid_inputs():
    with pytest.raises(DomainError):
        YoungFunction.power(0.5)
    with pytest.raises(DomainError):
        YoungFunction.table(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 3.0]))
    with pytest.raises(DomainError):
        YoungFunction.table(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        orlicz_norm(np.array([]), YoungFunction.talagrand())
    with pytest.raises(DomainError):
        orlicz_norm(np.array([1.0, np.inf]), YoungFunction.talagrand())
