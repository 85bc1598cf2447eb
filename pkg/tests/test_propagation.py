import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetpower.errors import ConfigurationError
from hetpower.propagation import (
    PropagationParams,
    gain_from_loss,
    link_gain,
    link_loss_dB,
    macro_path_loss_dB,
    macro_path_loss_general_dB,
    micro_path_loss_dB,
    micro_path_loss_general_dB,
    sector_antenna_gain_dB,
)


class TestMacroPathLoss:
    def test_reference_1km(self):
        assert macro_path_loss_dB(1.0) == pytest.approx(128.15, abs=1e-12)

    def test_10km(self):
        # 37.6*log10(10) + 128.15
        assert macro_path_loss_dB(10.0) == pytest.approx(165.75, abs=1e-9)

    def test_general_form_reduces(self):
        # general form at 15 m above rooftop, 2 GHz must match the reduced
        # constants: slope 40*(1-0.06)=37.6 and intercept at 1 km
        assert macro_path_loss_general_dB(1.0, 15.0, 2000.0) == pytest.approx(
            128.15, abs=0.05
        )
        slope = macro_path_loss_general_dB(10.0, 15.0, 2000.0) - macro_path_loss_general_dB(1.0, 15.0, 2000.0)
        assert slope == pytest.approx(37.6, abs=1e-9)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_domain_error(self, bad):
        with pytest.raises(ValueError):
            macro_path_loss_dB(bad)
        with pytest.raises(ValueError):
            macro_path_loss_general_dB(bad)


class TestMicroPathLoss:
    def test_reference_1km(self):
        assert micro_path_loss_dB(1.0) == pytest.approx(148.0, abs=1e-12)

    def test_100m(self):
        assert micro_path_loss_dB(0.1) == pytest.approx(108.0, abs=1e-9)

    def test_general_form_reduces(self):
        # 49 + 30*log10(2000) = 148.03, the published rounding is 148
        val = micro_path_loss_general_dB(1.0, 2000.0)
        assert val == pytest.approx(49.0 + 30.0 * math.log10(2000.0), abs=1e-12)
        assert val == pytest.approx(148.0, abs=0.05)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            micro_path_loss_dB(0.0)

    def test_monotone_in_distance(self):
        rng = np.random.default_rng(7)
        d = np.sort(rng.uniform(0.01, 5.0, size=100))
        for fn in (micro_path_loss_dB, macro_path_loss_dB):
            losses = fn(d)
            assert np.all(np.diff(losses) > 0)


class TestAntennaPattern:
    @pytest.mark.parametrize(
        "theta,expected",
        [(0.0, 0.0), (65.0, -12.0), (180.0, -20.0), (-65.0, -12.0)],
    )
    def test_reference_points(self, theta, expected):
        assert sector_antenna_gain_dB(theta) == pytest.approx(expected, abs=1e-12)

    @given(st.floats(min_value=-720.0, max_value=720.0))
    @settings(max_examples=200, deadline=None)
    def test_even_and_bounded(self, theta):
        g = sector_antenna_gain_dB(theta)
        assert -20.0 <= g <= 0.0
        assert g == pytest.approx(sector_antenna_gain_dB(-theta), abs=1e-9)

    def test_normalization_wraps(self):
        assert sector_antenna_gain_dB(360.0) == pytest.approx(0.0, abs=1e-12)


class TestLinkGain:
    def test_mcl_clamp(self, params):
        # strong short link: PL + shadow - gains far below the macro MCL
        lg = link_gain("macro", 0.001, 0.0, params, theta_deg=0.0)
        assert lg.mcl_applied
        assert lg.loss_dB == pytest.approx(70.0)
        assert lg.gain_linear == pytest.approx(1e-7)

    def test_micro_100m(self, params):
        lg = link_gain("micro", 0.1, 0.0, params)
        # 108 dB path loss minus 11 dBi leaves 97 dB, above the 53 dB MCL
        assert not lg.mcl_applied
        assert lg.loss_dB == pytest.approx(97.0)
        assert lg.gain_linear == pytest.approx(10 ** -9.7)

    def test_macro_boresight_1km(self, params):
        lg = link_gain("macro", 1.0, 0.0, params, theta_deg=0.0)
        assert lg.loss_dB == pytest.approx(128.15 - 11.0, abs=1e-9)

    def test_recomposition_exact(self, params):
        rng = np.random.default_rng(3)
        for _ in range(50):
            layer = rng.choice(["macro", "micro"])
            theta = rng.uniform(-180, 180) if layer == "macro" else None
            lg = link_gain(layer, rng.uniform(0.001, 3.0), rng.normal(0, 10), params, theta_deg=theta)
            recomposed = lg.path_loss_dB + lg.shadow_dB - lg.antenna_dBi
            if lg.mcl_applied:
                assert lg.loss_dB == params.mcl_dB(layer)
                assert recomposed < lg.loss_dB
            else:
                assert lg.loss_dB == recomposed

    def test_coincident_positions_finite(self, params):
        lg = link_gain("micro", 0.0, 0.0, params)
        assert np.isfinite(lg.loss_dB) and lg.loss_dB == params.mcl_micro_dB

    def test_gain_never_exceeds_mcl_bound(self, params):
        rng = np.random.default_rng(11)
        d = rng.uniform(1e-6, 2.0, size=200)
        shadow = rng.normal(0, 10, size=200)
        for layer in ("macro", "micro", "pico"):
            theta = rng.uniform(-180, 180, size=200) if layer == "macro" else None
            loss = link_loss_dB(layer, d, shadow, params, theta_deg=theta)
            gains = gain_from_loss(loss)
            assert np.all(gains <= 10 ** (-params.mcl_dB(layer) / 10.0) + 1e-18)
            assert np.all(gains > 0)

    def test_zero_sigma_deterministic(self, params):
        a = link_gain("macro", 0.7, 0.0, params, theta_deg=12.0)
        b = link_gain("macro", 0.7, 0.0, params, theta_deg=12.0)
        assert a == b

    def test_pico_offset(self, params):
        shifted = dataclasses.replace(params, pico_offset_dB=7.0)
        base = link_gain("micro", 0.2, 0.0, shifted)
        pico = link_gain("pico", 0.2, 0.0, shifted)
        assert pico.loss_dB == pytest.approx(base.loss_dB + 7.0)

    def test_unknown_layer(self, params):
        with pytest.raises(ConfigurationError):
            link_gain("femto", 0.1, 0.0, params)

    def test_macro_requires_angle(self, params):
        with pytest.raises(ValueError):
            link_gain("macro", 0.5, 0.0, params)


class TestParamsValidation:
    def test_defaults_pass(self, params):
        params.validate()

    def test_inconsistent_intercept_rejected(self, params):
        bad = dataclasses.replace(params, macro_intercept_dB=130.0)
        with pytest.raises(ConfigurationError, match="macro_intercept_dB"):
            bad.validate()

    def test_frequency_change_requires_new_constants(self, params):
        bad = dataclasses.replace(params, carrier_MHz=900.0)
        with pytest.raises(ConfigurationError):
            bad.validate()

    def test_negative_sigma_rejected(self, params):
        bad = dataclasses.replace(params, shadow_sigma_dB=-1.0)
        with pytest.raises(ConfigurationError, match="shadow_sigma_dB"):
            bad.validate()
