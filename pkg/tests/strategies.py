"""Hypothesis strategies shared by the property tests."""

import numpy as np
from hypothesis import strategies as st

from vtolnav.liegroup import quat_to_rot

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
mat3 = st.tuples(vec3, vec3, vec3).map(np.array)


@st.composite
def rotations(draw):
    q = np.array(draw(st.tuples(finite, finite, finite, finite)))
    n = np.linalg.norm(q)
    if n < 1e-3:
        q, n = np.array([1.0, 0.0, 0.0, 0.0]), 1.0
    return quat_to_rot(q / n)
