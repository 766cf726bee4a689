"""Property tests of the module invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from mdmx.lifetable import e0_from_qx
from mdmx.numerics import savitzky_golay, thin_svd
from mdmx.tucker import select_rank


@given(
    rows=st.integers(2, 40),
    cols=st.integers(2, 40),
    seed=st.integers(0, 2**31 - 1),
)
@settings(max_examples=40, deadline=None)
def test_svd_round_trip(rows, cols, seed):
    m = np.random.default_rng(seed).normal(size=(rows, cols))
    u, s, v = thin_svd(m)
    err = np.linalg.norm(u @ np.diag(s) @ v.T - m) / max(np.linalg.norm(m), 1e-300)
    assert err <= 1e-10
    assert np.all(np.diff(s) <= 1e-12)


@given(
    sv=st.lists(st.floats(1e-6, 1e3), min_size=1, max_size=20),
    tau=st.floats(0.01, 1.0),
)
@settings(max_examples=80, deadline=None)
def test_select_rank_is_minimal(sv, tau):
    sv = np.sort(np.array(sv))[::-1]
    r = select_rank(sv, tau)
    total = (sv**2).sum()
    cum = np.cumsum(sv**2) / total
    assert cum[r - 1] >= tau - 1e-9
    if r > 1:
        assert cum[r - 2] < tau + 1e-9


@given(
    seed=st.integers(0, 2**31 - 1),
    age=st.integers(0, 59),
    bump=st.floats(0.01, 0.3),
)
@settings(max_examples=50, deadline=None)
def test_e0_strictly_decreasing_in_any_qx(seed, age, bump):
    rng = np.random.default_rng(seed)
    qx = rng.uniform(0.001, 0.3, size=60)
    higher = qx.copy()
    higher[age] = min(0.95, higher[age] + bump)
    assert e0_from_qx(higher) < e0_from_qx(qx)


@given(
    degree=st.integers(0, 3),
    seed=st.integers(0, 2**31 - 1),
)
@settings(max_examples=40, deadline=None)
def test_savgol_reproduces_low_degree_polynomials(degree, seed):
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1, 1, size=degree + 1)
    x = np.arange(25.0)
    y = sum(c * (x / 10.0) ** p for p, c in enumerate(coeffs))
    out = savitzky_golay(np.asarray(y, dtype=float), window=9, degree=3)
    assert np.max(np.abs(out - y)) <= 1e-9
