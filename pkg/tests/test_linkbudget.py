"""Link budget unit tests: conversions, geometry, SNR scaling, detection."""

import math
from statistics import NormalDist

import pytest
from hypothesis import given, strategies as st

from beamplan.linkbudget import (
    DetectionSpec,
    RadioConfig,
    achievable_rate,
    beam_angles,
    dbm_to_watt,
    detection_snr,
    gamma_factor,
    min_bt_power,
    qfunc,
    qfunc_inv,
    total_power,
    watt_to_dbm,
)

SPEED_OF_LIGHT = 299_792_458.0


def default_radio(**overrides) -> RadioConfig:
    kw = dict(
        theta_rad=math.radians(120.0),
        d0_m=10.0,
        num_sublinks=10,
        w_tot_hz=400e6,
        fc_hz=60e9,
        xi=1.0,
        n0_dbm_hz=-174.0,
        delta_t_s=1e-5,
    )
    kw.update(overrides)
    return RadioConfig(**kw)


class TestPowerConversions:
    def test_known_points(self):
        assert watt_to_dbm(1e-3) == pytest.approx(0.0)
        assert watt_to_dbm(1.0) == pytest.approx(30.0)
        assert dbm_to_watt(10.0) == pytest.approx(0.01)
        assert dbm_to_watt(-174.0) == pytest.approx(10.0 ** (-17.4) * 1e-3)

    @given(st.floats(min_value=-200.0, max_value=100.0))
    def test_round_trip(self, dbm):
        assert watt_to_dbm(dbm_to_watt(dbm)) == pytest.approx(dbm, abs=1e-9)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            watt_to_dbm(0.0)
        with pytest.raises(ValueError):
            watt_to_dbm(-1.0)


class TestQFunction:
    def test_against_normal_dist(self):
        nd = NormalDist()
        for x in (-3.0, -1.0, 0.0, 0.5, 1.0, 2.5, 4.0):
            assert qfunc(x) == pytest.approx(1.0 - nd.cdf(x), rel=1e-12)

    def test_inverse_against_normal_dist(self):
        nd = NormalDist()
        for p in (1e-6, 1e-3, 0.01, 0.5, 0.9, 0.999):
            assert qfunc_inv(p) == pytest.approx(nd.inv_cdf(1.0 - p), rel=1e-9)

    @given(st.floats(min_value=1e-9, max_value=1.0 - 1e-9))
    def test_round_trip(self, p):
        assert qfunc(qfunc_inv(p)) == pytest.approx(p, rel=1e-6)

    def test_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                qfunc_inv(bad)


class TestGeometry:
    def test_sublink_length(self):
        # Road span 2 * 10 * tan(60 deg) split into 10 segments.
        cfg = default_radio()
        expected = 2.0 * 10.0 * math.tan(math.radians(60.0)) / 10.0
        assert cfg.delta_s_m == pytest.approx(expected)
        assert cfg.delta_s_m == pytest.approx(3.46410161514, rel=1e-9)

    def test_beam_angles_two_sublinks(self):
        cfg = default_radio(num_sublinks=2)
        lo, hi = beam_angles(cfg, 1)
        assert lo == pytest.approx(math.radians(-60.0))
        assert hi == pytest.approx(0.0, abs=1e-12)
        lo2, hi2 = beam_angles(cfg, 2)
        assert lo2 == pytest.approx(0.0, abs=1e-12)
        assert hi2 == pytest.approx(math.radians(60.0))

    def test_beam_angles_tile_the_sector(self):
        cfg = default_radio()
        prev_hi = -cfg.theta_rad / 2.0
        for s in range(1, cfg.num_sublinks + 1):
            lo, hi = beam_angles(cfg, s)
            assert lo == pytest.approx(prev_hi, abs=1e-12)
            assert hi > lo
            prev_hi = hi
        assert prev_hi == pytest.approx(cfg.theta_rad / 2.0)

    def test_beam_angles_range_checked(self):
        cfg = default_radio()
        with pytest.raises(ValueError):
            beam_angles(cfg, 0)
        with pytest.raises(ValueError):
            beam_angles(cfg, 11)


class TestSnrScaling:
    def test_gamma_factor_oracle(self):
        cfg = default_radio()
        lam = SPEED_OF_LIGHT / 60e9
        n0 = 10.0 ** (-174.0 / 10.0) * 1e-3
        expected = lam * lam * 1.0 / (8.0 * math.pi * n0 * 400e6)
        assert gamma_factor(cfg) == pytest.approx(expected, rel=1e-12)
        assert gamma_factor(cfg) == pytest.approx(6.2383e5, rel=1e-4)

    def test_total_power_linear(self):
        cfg = default_radio()
        p1 = total_power(cfg, 10.0, 1)
        assert total_power(cfg, 20.0, 1) == pytest.approx(2.0 * p1)
        assert total_power(cfg, 10.0, 4) == pytest.approx(4.0 * p1)

    def test_rate_power_inverse(self):
        cfg = default_radio()
        for snr in (0.5, 38.0, 1e4):
            for n in (1, 3, 10):
                p = total_power(cfg, snr, n)
                rate = achievable_rate(cfg, p, n)
                assert rate == pytest.approx(cfg.w_tot_hz * math.log2(1.0 + snr))

    def test_reference_rates(self):
        # Single-beam rates at the three configured transmit powers.
        cfg = default_radio()
        assert achievable_rate(cfg, 0.01, 1) == pytest.approx(3.00e9, rel=0.01)
        assert achievable_rate(cfg, 0.1, 1) == pytest.approx(4.33e9, rel=0.01)
        assert achievable_rate(cfg, 1.0, 1) == pytest.approx(5.66e9, rel=0.01)

    def test_zero_power_zero_rate(self):
        assert achievable_rate(default_radio(), 0.0, 1) == 0.0

    def test_validation(self):
        cfg = default_radio()
        with pytest.raises(ValueError):
            total_power(cfg, -1.0, 1)
        with pytest.raises(ValueError):
            total_power(cfg, 1.0, 11)
        with pytest.raises(ValueError):
            achievable_rate(cfg, -0.1, 1)


class TestDetection:
    def test_symmetric_spec(self):
        spec = DetectionSpec.symmetric(0.001)
        assert spec.p_fa == spec.p_md == 0.001

    def test_spec_domain(self):
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(ValueError):
                DetectionSpec.symmetric(bad)

    def test_detection_snr_oracle(self):
        # Symmetric epsilon: SNR = (Qinv(eps) - Qinv(1 - eps))^2 = (2 Qinv(eps))^2.
        nd = NormalDist()
        for eps in (0.001, 0.01, 0.1):
            spec = DetectionSpec.symmetric(eps)
            z = nd.inv_cdf(1.0 - eps)
            assert detection_snr(spec) == pytest.approx((2.0 * z) ** 2, rel=1e-9)
        assert detection_snr(DetectionSpec.symmetric(0.001)) == pytest.approx(
            38.19, rel=1e-3
        )

    def test_min_bt_power_default(self):
        cfg = default_radio()
        spec = DetectionSpec.symmetric(0.001)
        p = min_bt_power(cfg, spec)
        expected = detection_snr(spec) * cfg.delta_s_m * cfg.d0_m / gamma_factor(cfg)
        assert p == pytest.approx(expected, rel=1e-12)
        assert watt_to_dbm(p) == pytest.approx(3.27, abs=0.01)

    def test_larger_epsilon_needs_less_power(self):
        cfg = default_radio()
        p_strict = min_bt_power(cfg, DetectionSpec.symmetric(0.001))
        p_loose = min_bt_power(cfg, DetectionSpec.symmetric(0.1))
        assert p_loose < p_strict


class TestRadioConfigValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            default_radio(theta_rad=0.0)
        with pytest.raises(ValueError):
            default_radio(theta_rad=math.pi)
        with pytest.raises(ValueError):
            default_radio(d0_m=-1.0)
        with pytest.raises(ValueError):
            default_radio(num_sublinks=0)
        with pytest.raises(ValueError):
            default_radio(xi=0.0)
        with pytest.raises(ValueError):
            default_radio(xi=1.5)
        with pytest.raises(ValueError):
            default_radio(delta_t_s=0.0)
