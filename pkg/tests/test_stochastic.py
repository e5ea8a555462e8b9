import math

import numpy as np
import pytest

from modesim.stochastic import PerturbationModel, RateConstants, export_path_csv, rates, sample_path


# --- independent Dawson-function oracle -------------------------------------
#
# F(x) = exp(-x^2) * integral_0^x exp(t^2) dt via the Maclaurin series
# F(x) = sum_n (-1)^n 2^n x^(2n+1) / (1*3*5*...*(2n+1)); converges fast for
# the |x| <= 2 range used here.  Never calls scipy.

def dawson_series(x):
    term = x
    total = x
    for n in range(1, 200):
        term *= -2.0 * x * x / (2 * n + 1)
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-30):
            return total
    raise AssertionError("Dawson series did not converge")


DAWSON_AT_ONE = 0.5380795069127684  # frozen from the series oracle


class TestSamplePath:
    def test_zero_sigma_gives_zero_path(self):
        model = PerturbationModel(0.0, 50e-6, 100.0)
        path = sample_path(model, 50e-6 / 8, 200, seed=3)
        assert np.all(path.values == 0.0)

    def test_bit_reproducible(self, default_model):
        dz = default_model.corr_length / 8
        a = sample_path(default_model, dz, 300, seed=11)
        b = sample_path(default_model, dz, 300, seed=11)
        assert np.array_equal(a.values, b.values)

    def test_different_seeds_differ(self, default_model):
        dz = default_model.corr_length / 8
        a = sample_path(default_model, dz, 300, seed=11)
        b = sample_path(default_model, dz, 300, seed=12)
        assert not np.array_equal(a.values, b.values)

    def test_step_too_coarse_rejected(self, default_model):
        with pytest.raises(ValueError, match="resolve"):
            sample_path(default_model, default_model.corr_length / 4, 400, seed=0)

    def test_window_too_short_rejected(self, default_model):
        dz = default_model.corr_length / 8
        with pytest.raises(ValueError, match="short"):
            sample_path(default_model, dz, 100, seed=0)

    def test_lag_zero_variance(self):
        # Monte Carlo estimate of <f^2> against sigma^2 (5% tolerance)
        model = PerturbationModel(0.01, 50e-6, 100.0)
        dz = model.corr_length / 8
        total = 0.0
        n_paths = 2000
        for i in range(n_paths):
            values = sample_path(model, dz, 400, seed=1000 + i).values
            total += float(np.mean(values * values))
        estimate = total / n_paths
        assert abs(estimate - model.sigma ** 2) / model.sigma ** 2 < 0.05

    def test_lag_d_autocovariance(self):
        # Monte Carlo estimate of <f(z) f(z-D)> against sigma^2 e^{-1} (10%)
        model = PerturbationModel(0.01, 50e-6, 100.0)
        dz = model.corr_length / 8
        lag = round(model.corr_length / dz)
        total = 0.0
        n_paths = 2000
        for i in range(n_paths):
            values = sample_path(model, dz, 400, seed=5000 + i).values
            total += float(np.mean(values[lag:] * values[:-lag]))
        estimate = total / n_paths
        target = model.sigma ** 2 * math.exp(-1.0)
        assert abs(estimate - target) / target < 0.10

    def test_length_property(self, default_model):
        dz = default_model.corr_length / 8
        path = sample_path(default_model, dz, 256, seed=1)
        assert path.count == 256
        assert abs(path.length - 256 * dz) < 1e-18


class TestRates:
    def test_zero_delta_beta(self, default_model):
        rate = rates(default_model, 0.0)
        expected_gamma = (math.sqrt(math.pi) * default_model.sigma ** 2
                          * default_model.corr_length * abs(default_model.k_ab) ** 2)
        assert abs(rate.gamma - expected_gamma) < 1e-12 * expected_gamma
        assert rate.kappa == 0.0
        assert not rate.regime_ok

    def test_zero_sigma(self):
        model = PerturbationModel(0.0, 100e-6, 500.0)
        rate = rates(model, 2e4)
        assert rate.gamma == 0.0
        assert rate.kappa == 0.0
        assert rate.regime_ok

    def test_dawson_point_against_series_oracle(self, default_model):
        # D dbeta / 2 = 1: gamma = sqrt(pi) sigma^2 D e^{-1} |K|^2 and
        # kappa = 2 sigma^2 D F(1) |K|^2 with F(1) from the series oracle
        dbeta = 2.0 / default_model.corr_length
        rate = rates(default_model, dbeta)
        scale = default_model.sigma ** 2 * default_model.corr_length * abs(default_model.k_ab) ** 2
        gamma_expected = math.sqrt(math.pi) * math.exp(-1.0) * scale
        kappa_expected = 2.0 * DAWSON_AT_ONE * scale
        assert abs(rate.gamma - gamma_expected) < 1e-12 * gamma_expected
        assert abs(rate.kappa - kappa_expected) < 1e-12 * kappa_expected
        assert abs(dawson_series(1.0) - DAWSON_AT_ONE) < 1e-15

    def test_dawson_matches_series_on_grid(self, default_model):
        # the closed form uses scipy's Dawson function; the series is an
        # independent route and both must agree to 1e-12
        scale = 2.0 * default_model.sigma ** 2 * default_model.corr_length * abs(default_model.k_ab) ** 2
        for x in np.linspace(-2.0, 2.0, 41):
            dbeta = 2.0 * x / default_model.corr_length
            rate = rates(default_model, dbeta)
            expected = scale * dawson_series(float(x))
            assert abs(rate.kappa - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_gamma_even_and_decreasing(self, default_model):
        magnitudes = np.linspace(0.0, 4.0, 9) / default_model.corr_length
        gammas = [rates(default_model, m).gamma for m in magnitudes]
        assert all(g1 >= g2 for g1, g2 in zip(gammas, gammas[1:]))
        for m in magnitudes:
            assert rates(default_model, m).gamma == rates(default_model, -m).gamma

    def test_kappa_odd(self, default_model):
        for m in np.linspace(0.1, 4.0, 7) / default_model.corr_length:
            assert rates(default_model, m).kappa == -rates(default_model, -m).kappa

    def test_regime_flag(self, default_model):
        assert rates(default_model, 2.0 / default_model.corr_length).regime_ok
        strong = PerturbationModel(0.5, 100e-6, 50000.0)
        assert not rates(strong, 100.0).regime_ok

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            RateConstants(gamma=-1.0, kappa=0.0)


class TestValidation:
    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            PerturbationModel(-0.1, 50e-6, 100.0)

    def test_nonpositive_corr_length_rejected(self):
        with pytest.raises(ValueError):
            PerturbationModel(0.1, 0.0, 100.0)

    def test_complex_coupling_accepted(self):
        model = PerturbationModel(0.05, 100e-6, 300.0 + 400.0j)
        rate = rates(model, 2e4)
        reference = rates(PerturbationModel(0.05, 100e-6, 500.0), 2e4)
        assert abs(rate.gamma - reference.gamma) < 1e-12 * reference.gamma


def test_export_path_csv(tmp_path, default_model):
    dz = default_model.corr_length / 8
    path = sample_path(default_model, dz, 200, seed=9)
    target = tmp_path / "path.csv"
    export_path_csv(path, target)
    lines = target.read_text().splitlines()
    assert lines[0] == "z_m,f"
    assert len(lines) == 201
    z1, f1 = (float(v) for v in lines[2].split(","))
    assert abs(z1 - dz) < 1e-18
    assert f1 == path.values[1]
