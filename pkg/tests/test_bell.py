import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermalbell import bell
from thermalbell.bell import AngleSet, BellModel, Bound

SQRT2 = math.sqrt(2.0)


class TestCh74Middle:
    def test_all_zero(self):
        assert bell.ch74_middle(0, 0, 0, 0, (0, 0, 0, 0)) == 0.0

    def test_independent_events(self):
        value = bell.ch74_middle(0.5, 0.5, 0.5, 0.5, (0.25, 0.25, 0.25, 0.25))
        assert value == pytest.approx(-0.5)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            bell.ch74_middle(1.2, 0.5, 0.5, 0.5, (0.25, 0.25, 0.25, 0.25))
        with pytest.raises(ValueError):
            bell.ch74_middle(0.5, 0.5, 0.5, 0.5, (0.25, -0.1, 0.25, 0.25))

    def test_matches_statistic_at_ideal_spe(self):
        # joints (1 +- cos t_i)/4 with marginals 1/2 reproduce the closed form
        angles = bell.UPPER_ANGLES
        joints = tuple((1 + s * math.cos(t)) / 4 for s, t in
                       zip((1, 1, 1, 1), angles.arguments))
        value = bell.ch74_middle(0.5, 0.5, 0.5, 0.5,
                                 (joints[0], joints[1], joints[2], joints[3]))
        want = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 1.0, angles).statistic
        assert value == pytest.approx(want, abs=1e-12)


class TestDefaultAngles:
    def test_upper_arguments(self):
        assert bell.default_angles(Bound.UPPER).arguments == (
            math.pi / 4, 3 * math.pi / 4, math.pi / 4, math.pi / 4)

    def test_brackets_extremal(self):
        assert bell.default_angles(Bound.UPPER).bracket() == pytest.approx(2 * SQRT2)
        assert bell.default_angles(Bound.LOWER).bracket() == pytest.approx(-2 * SQRT2)

    def test_brackets_opposite(self):
        up = bell.default_angles(Bound.UPPER).bracket()
        lo = bell.default_angles(Bound.LOWER).bracket()
        assert up == pytest.approx(-lo, abs=1e-14)


class TestStatistic:
    def test_six_term_ideal_spe(self):
        report = bell.bell_statistic(BellModel.SIX_TERM_SPE, 1.0, bell.UPPER_ANGLES)
        assert report.statistic == pytest.approx((SQRT2 - 1) / 2, abs=1e-12)
        assert report.violates_upper
        assert not report.violates_lower

    def test_four_term_m5(self):
        report = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 5 / 7, bell.UPPER_ANGLES)
        assert report.statistic == pytest.approx((5 / 28) * 2 * SQRT2 - 0.5, abs=1e-12)
        assert report.statistic == pytest.approx(0.0050763, abs=1e-6)
        assert report.violates_upper

    def test_four_term_zero_visibility(self):
        report = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 0.0, bell.LOWER_ANGLES)
        assert report.statistic == pytest.approx(-0.5)
        assert not (report.violates_upper or report.violates_lower)

    def test_six_and_four_agree_at_unit_visibility(self):
        for angles in (bell.UPPER_ANGLES, bell.LOWER_ANGLES,
                       AngleSet(0.3, 1.0, -2.0, 0.9)):
            six = bell.bell_statistic(BellModel.SIX_TERM_TLS, 1.0, angles)
            four = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 1.0, angles)
            assert six.statistic == pytest.approx(four.statistic, abs=1e-12)

    def test_rejects_bad_visibility(self):
        with pytest.raises(ValueError):
            bell.bell_statistic(BellModel.FOUR_TERM_TLS, 1.5, bell.UPPER_ANGLES)

    @given(v1=st.floats(0.0, 1.0), v2=st.floats(0.0, 1.0))
    @settings(max_examples=200)
    def test_upper_statistic_monotone_in_visibility(self, v1, v2):
        lo, hi = sorted((v1, v2))
        for tag in (BellModel.SIX_TERM_TLS, BellModel.FOUR_TERM_TLS):
            s_lo = bell.bell_statistic(tag, lo, bell.UPPER_ANGLES).statistic
            s_hi = bell.bell_statistic(tag, hi, bell.UPPER_ANGLES).statistic
            assert s_hi >= s_lo - 1e-15

    @given(vis=st.floats(0.0, 1.0),
           phases=st.tuples(*[st.floats(-7.0, 7.0)] * 4))
    @settings(max_examples=300)
    def test_six_statistic_within_cosine_bounds(self, vis, phases):
        # realizable tuples only: the 2*sqrt(2) bracket bound presumes the
        # arguments arise as differences of four detector phases
        d1, d1p, d2, d2p = phases
        angles = AngleSet(d1 - d2, d1 - d2p, d1p - d2, d1p - d2p)
        stat = bell.bell_statistic(BellModel.SIX_TERM_TLS, vis, angles).statistic
        lo = (-2 * SQRT2 * vis + 2) / (6 - 2 * vis) - 1
        hi = (2 * SQRT2 * vis + 2) / (6 - 2 * vis) - 1
        assert lo - 1e-12 <= stat <= hi + 1e-12


class TestThresholds:
    def test_six_term_values(self):
        assert bell.threshold_visibility(BellModel.SIX_TERM_TLS, Bound.UPPER) == \
            pytest.approx(2 / (1 + SQRT2), abs=1e-15)
        assert bell.threshold_visibility(BellModel.SIX_TERM_SPE, Bound.LOWER) == \
            pytest.approx(1 / SQRT2, abs=1e-15)

    def test_four_term_same_both_bounds(self):
        up = bell.threshold_visibility(BellModel.FOUR_TERM_TLS, Bound.UPPER)
        lo = bell.threshold_visibility(BellModel.FOUR_TERM_TLS, Bound.LOWER)
        assert up == lo == pytest.approx(1 / SQRT2, abs=1e-15)

    @pytest.mark.parametrize("tag,bound", [
        (BellModel.SIX_TERM_TLS, Bound.UPPER),
        (BellModel.SIX_TERM_TLS, Bound.LOWER),
        (BellModel.FOUR_TERM_TLS, Bound.UPPER),
        (BellModel.FOUR_TERM_TLS, Bound.LOWER),
    ])
    def test_threshold_straddles_bound(self, tag, bound):
        vth = bell.threshold_visibility(tag, bound)
        angles = bell.default_angles(bound)
        above = bell.bell_statistic(tag, vth + 1e-9, angles)
        below = bell.bell_statistic(tag, vth - 1e-9, angles)
        if bound is Bound.UPPER:
            assert above.violates_upper and not below.violates_upper
        else:
            assert above.violates_lower and not below.violates_lower


class TestMinViolatingM:
    def test_value(self):
        assert bell.min_violating_m() == 5

    def test_m4_does_not_violate(self):
        report = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 4 / 6, bell.UPPER_ANGLES)
        assert not report.violates_upper
        assert report.statistic < 0

    def test_m5_statistic_positive(self):
        report = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 5 / 7, bell.UPPER_ANGLES)
        assert report.statistic > 0


class TestAngleScan:
    def test_extrema_match_canonical(self):
        (amax, smax), (amin, smin) = bell.angle_scan(
            BellModel.FOUR_TERM_TLS, 1.0, math.pi / 12)
        canonical_hi = bell.bell_statistic(
            BellModel.FOUR_TERM_TLS, 1.0, bell.UPPER_ANGLES).statistic
        canonical_lo = bell.bell_statistic(
            BellModel.FOUR_TERM_TLS, 1.0, bell.LOWER_ANGLES).statistic
        assert smax == pytest.approx(canonical_hi, abs=1e-12)
        assert smin == pytest.approx(canonical_lo, abs=1e-12)
        assert amax.bracket() == pytest.approx(2 * SQRT2, abs=1e-12)
        assert amin.bracket() == pytest.approx(-2 * SQRT2, abs=1e-12)

    def test_bracket_never_exceeds_bound(self):
        (_, smax), _ = bell.angle_scan(BellModel.FOUR_TERM_TLS, 0.63, math.pi / 7)
        assert smax <= 0.63 * 2 * SQRT2 / 4 - 0.5 + 1e-12

    def test_flat_at_zero_visibility(self):
        (_, smax), (_, smin) = bell.angle_scan(BellModel.FOUR_TERM_TLS, 0.0, math.pi / 6)
        assert smax == pytest.approx(-0.5)
        assert smin == pytest.approx(-0.5)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            bell.angle_scan(BellModel.FOUR_TERM_TLS, 0.5, 0.0)


class TestDetectorPhases:
    @pytest.mark.parametrize("angles", [
        bell.UPPER_ANGLES,
        bell.LOWER_ANGLES,
        AngleSet(0.5, 1.1, 0.2, 0.8),   # consistent: 0.5 - 1.1 - 0.2 + 0.8 = 0
    ])
    def test_realization_reproduces_cosines(self, angles):
        d1, d1p, d2, d2p = bell.detector_phases(angles)
        realized = (d1 - d2, d1 - d2p, d1p - d2, d1p - d2p)
        for r, t in zip(realized, angles.arguments):
            assert math.cos(r) == pytest.approx(math.cos(t), abs=1e-9)

    def test_report_serializes(self):
        report = bell.bell_statistic(BellModel.FOUR_TERM_TLS, 0.75, bell.UPPER_ANGLES)
        payload = report.to_dict()
        assert payload["model_tag"] == "four_term_tls"
        assert payload["violates_upper"] is True
        assert np.isfinite(payload["statistic"])
