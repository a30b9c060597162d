"""Property-based checks for the small algebraic helpers."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from forcemanip.mdp import cos_between
from forcemanip.td3 import clip_action_norm

finite_vec = st.lists(
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=3, max_size=3)


@given(finite_vec)
@settings(max_examples=200, deadline=None)
def test_clip_action_norm_bound_and_direction(v):
    a = np.asarray(v)
    clipped = clip_action_norm(a, 0.02)[0]
    assert np.linalg.norm(clipped) <= 0.02 + 1e-15
    n = np.linalg.norm(a)
    if n <= 0.02:
        np.testing.assert_array_equal(clipped, a)
    elif n > 0:
        # clipping preserves direction
        cross = np.cross(clipped, a)
        assert np.linalg.norm(cross) <= 1e-9 * n
        assert clipped @ a >= 0

@given(finite_vec, finite_vec)
@settings(max_examples=200, deadline=None)
def test_cos_between_bounds_and_symmetry(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    c = cos_between(u, v)
    assert -1.0 - 1e-12 <= c <= 1.0 + 1e-12
    assert c == cos_between(v, u)
    if np.linalg.norm(u) == 0 or np.linalg.norm(v) == 0:
        assert c == 0.0
