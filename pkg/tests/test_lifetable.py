import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdmx.errors import DomainError, InvalidInput
from mdmx.lifetable import (
    TransformConfig,
    e0_from_qx,
    expit,
    floor_and_logit,
    forward_e0,
    forward_e0_pair,
    lifetable_from_mx_ax,
    lifetable_from_qx,
    logit,
    mx_from_qx,
)


def brute_force_e0(qx, steps_per_year=365):
    """Day-by-day discrete survival: independent oracle for e0."""
    alive = 1.0
    total = 0.0
    for q in qx:
        p_step = 1.0 - (1.0 - q) ** (1.0 / steps_per_year)
        for _ in range(steps_per_year):
            total += alive / steps_per_year
            alive *= 1.0 - p_step
    return total


class TestLogitExpit:
    def test_logit_half_is_zero(self):
        assert logit(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_additive_shift_doubles_odds(self):
        q = 0.2
        q2 = expit(logit(q) + np.log(2.0))
        odds_ratio = (q2 / (1 - q2)) / (q / (1 - q))
        assert odds_ratio == pytest.approx(2.0, abs=1e-12)

    def test_round_trip_tiny(self):
        q = 1e-8
        assert expit(logit(q)) == pytest.approx(q, rel=1e-12)

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DomainError):
                logit(bad)

    @given(st.floats(min_value=1e-8, max_value=1 - 1e-8))
    @settings(max_examples=200)
    def test_round_trip_property(self, q):
        assert expit(logit(q)) == pytest.approx(q, rel=1e-12)


class TestFloorAndLogit:
    def test_zero_floored(self):
        cfg = TransformConfig(q_min=1e-8)
        out = floor_and_logit(np.array([0.0, 0.5]), cfg)
        assert out[0] == pytest.approx(np.log(1e-8 / (1 - 1e-8)), abs=1e-10)
        assert out[0] == pytest.approx(-18.42, abs=0.01)

    def test_half_maps_to_zero(self):
        out = floor_and_logit(np.full(5, 0.5))
        assert np.allclose(out, 0.0)

    def test_qmin_insensitive_without_zeros(self):
        qx = np.linspace(0.001, 0.4, 20)
        a = floor_and_logit(qx, TransformConfig(q_min=1e-8))
        b = floor_and_logit(qx, TransformConfig(q_min=1e-5))
        assert np.array_equal(a, b)

    def test_qx_at_one_rejected(self):
        with pytest.raises(DomainError):
            floor_and_logit(np.array([0.5, 1.0]))


class TestE0:
    def test_constant_half_closed_form(self):
        qx = np.full(110, 0.5)
        expected = 0.65 + 0.75 * (1.0 - 2.0**-109)
        assert e0_from_qx(qx) == pytest.approx(expected, abs=1e-10)

    def test_minimal_mortality(self):
        # survival ~ 1 at every age: person-years approach the full span
        qx = np.full(110, 1e-8)
        e0 = e0_from_qx(qx)
        assert 109.99 < e0 < 110.0

    def test_monotone_in_each_qx(self):
        rng = np.random.default_rng(70)
        qx = rng.uniform(0.001, 0.2, size=110)
        base = e0_from_qx(qx)
        for age in (0, 30, 80):
            bumped = qx.copy()
            bumped[age] = min(0.99, bumped[age] + 0.05)
            assert e0_from_qx(bumped) < base

    def test_against_brute_force_simulation(self):
        rng = np.random.default_rng(71)
        for _ in range(100):
            # random but mortality-like schedule
            base = np.sort(rng.uniform(0.0005, 0.4, size=60))
            qx = np.concatenate([rng.uniform(0.0005, 0.05, size=50), base])
            assert abs(e0_from_qx(qx) - brute_force_e0(qx)) <= 0.51


class TestLifetableFromMxAx:
    def test_zero_mx_zero_qx(self):
        mx = np.array([0.0, 0.1, 0.2])
        ax = np.full(3, 0.5)
        lt = lifetable_from_mx_ax(mx, ax)
        assert lt.qx[0] == 0.0

    def test_identity_arithmetic(self):
        lt = lifetable_from_mx_ax(np.array([1.0]), np.array([0.5]))
        assert lt.qx[0] == pytest.approx(1.0 / 1.5, abs=1e-12)

    def test_round_trip_through_mx(self):
        rng = np.random.default_rng(72)
        qx = rng.uniform(0.001, 0.5, size=50)
        ax = np.full(50, 0.5)
        mx = mx_from_qx(qx, ax)
        lt = lifetable_from_mx_ax(mx, ax)
        assert np.allclose(lt.qx, qx, atol=1e-10)

    def test_dx_sums_to_radix_when_closed(self):
        mx = np.concatenate([np.full(20, 0.05), np.full(5, 50.0)])
        ax = np.full(25, 0.5)
        lt = lifetable_from_mx_ax(mx, ax)
        assert lt.dx.sum() == pytest.approx(1.0, abs=1e-10)
        assert lt.Tx[0] == pytest.approx(lt.e0)

    def test_tx_non_increasing(self):
        rng = np.random.default_rng(73)
        lt = lifetable_from_mx_ax(rng.uniform(0.01, 0.3, 40), np.full(40, 0.5))
        assert np.all(np.diff(lt.Tx) <= 1e-12)

    def test_negative_mx_rejected(self):
        with pytest.raises(DomainError):
            lifetable_from_mx_ax(np.array([-0.1]), np.array([0.5]))

    def test_full_table_consistency_from_qx(self):
        rng = np.random.default_rng(74)
        qx = rng.uniform(0.001, 0.3, size=30)
        lt = lifetable_from_qx(qx)
        assert np.allclose(lt.dx, lt.lx - np.append(lt.lx[1:], lt.lx[-1] * (1 - qx[-1])))
        assert lt.e0 == pytest.approx(e0_from_qx(qx), abs=1e-12)


class TestForwardE0:
    def test_constant_half_mean(self):
        z = np.zeros(220)  # logit(0.5) both sexes
        expected = 0.65 + 0.75 * (1.0 - 2.0**-109)
        assert forward_e0(z, "mean") == pytest.approx(expected, abs=1e-10)

    def test_female_advantage(self):
        z = np.concatenate([np.full(110, -4.0), np.full(110, -3.0)])
        ef, em = forward_e0_pair(z)
        assert ef > em
        assert forward_e0(z, "female") == ef
        assert forward_e0(z, "male") == em

    def test_mean_is_average(self):
        rng = np.random.default_rng(75)
        z = rng.normal(-3, 1, size=220)
        ef, em = forward_e0_pair(z)
        assert forward_e0(z, "mean") == pytest.approx(0.5 * (ef + em), abs=1e-12)

    def test_bad_summary(self):
        with pytest.raises(InvalidInput):
            forward_e0(np.zeros(20), "median")

    def test_odd_length_rejected(self):
        with pytest.raises(InvalidInput):
            forward_e0(np.zeros(21), "mean")
