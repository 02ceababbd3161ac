import numpy as np
import pytest
from hypothesis import given, strategies as st

from blowup.remote_region import (ConfigurationError, FunctionClassTag, class_tag, in_omega,
                                  radiation_profile, solve_remote_recurrence)


@given(st.integers(0, 6), st.integers(1, 4), st.integers(-4, 4), st.integers(0, 2))
def test_omega_parity_and_range(q, j, k, l):
    key = (q, j, k, l)
    if in_omega(key, 1):
        assert (q - k) % 2 == 0 and -min(j, q) <= k and l <= 1


def test_class_tags():
    assert class_tag((1, 1, -1, 0)) == FunctionClassTag("B", 1)
    assert str(class_tag((2, 3, 0, 0))) == "A_0"


def test_profile_validation():
    with pytest.raises(ConfigurationError):
        radiation_profile(0.7, 0, {(0, 0): 1.0}, np.sqrt(2), 1.0)
    with pytest.raises(ConfigurationError):
        radiation_profile(0.1, 2, {(0, 0): 1.0}, np.sqrt(2), 1.0)
    with pytest.raises(ConfigurationError):
        radiation_profile(0.1, 0, {(0, 0): np.nan}, np.sqrt(2), 1.0)


def test_layer_cap(ctx):
    beta, bt, _ = ctx.radiation
    prof = radiation_profile(0.1, 0, {(0, 0): beta[(0, 0)]}, ctx.p.nu, ctx.p.alpha0)
    with pytest.raises(ConfigurationError):
        solve_remote_recurrence(prof, {(0, 0): bt[(0, 0)]}, J_max=4)


def test_overlap_ladder(ctx):
    from blowup.remote_region import consistency_selfsimilar_remote
    tab = ctx.remote_table(2, 3, cut=True)
    sv = ctx.p.s_values()
    slopes = [consistency_selfsimilar_remote(ctx.hierarchy, tab, sv, N2, 0.45)[1] for N2 in (0, 1, 2)]
    assert all(s > 0 for s in slopes) and slopes[0] < slopes[1] < slopes[2]
