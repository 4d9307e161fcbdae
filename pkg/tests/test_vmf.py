from __future__ import annotations

import numpy as np
import pytest
from oracles import circle_quadrature_s1, finite_difference_scalar, sphere_quadrature_s2

from geomotion.vmf import (
    VmfParams,
    antipodal_vmf_log_density,
    bessel_ratio,
    log_vmf_normalizer,
    uniform_log_density,
    vmf_log_density,
)


def random_unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


class TestVmfLogDensity:
    def test_s2_closed_form_at_mode(self):
        # C_3(kappa) = kappa / (4 pi sinh kappa), evaluated at kappa = 1, q = mu
        mu = np.array([0.0, 0.0, 1.0])
        expected = np.log(1.0 / (4.0 * np.pi * np.sinh(1.0))) + 1.0
        value = vmf_log_density(mu, VmfParams(mu, 1.0))
        assert abs(value - expected) < 1e-12

    def test_s2_quadrature_normalization_at_mode_parameters(self):
        mu = np.array([0.3, -0.5, np.sqrt(1 - 0.09 - 0.25)])
        params = VmfParams(mu, 1.0)
        integral = sphere_quadrature_s2(lambda q: vmf_log_density(q, params))
        assert abs(integral - 1.0) < 1e-6

    def test_density_extremal_at_mode_and_antimode(self, rng):
        for _ in range(10):
            mu = random_unit(rng, 3)
            kappa = rng.uniform(0.2, 30.0)
            params = VmfParams(mu, kappa)
            at_mode = vmf_log_density(mu, params)
            at_anti = vmf_log_density(-mu, params)
            for _ in range(10):
                q = random_unit(rng, 3)
                v = vmf_log_density(q, params)
                assert at_anti - 1e-12 <= v <= at_mode + 1e-12

    def test_small_kappa_limit_is_uniform(self):
        mu = np.array([1.0, 0.0, 0.0])
        value = vmf_log_density(mu, VmfParams(mu, 1e-8))
        assert abs(value - (-np.log(4 * np.pi))) < 1e-7
        assert abs(uniform_log_density(3) - (-np.log(4 * np.pi))) < 1e-14

    def test_normalization_across_kappas_s1_and_s2(self):
        for kappa in (0.1, 1.0, 10.0, 100.0):
            mu2 = np.array([np.cos(0.3), np.sin(0.3)])
            p2 = VmfParams(mu2, kappa)
            assert abs(circle_quadrature_s1(lambda q: vmf_log_density(q, p2)) - 1.0) < 1e-4
            mu3 = np.array([0.0, 0.6, 0.8])
            p3 = VmfParams(mu3, kappa)
            assert abs(sphere_quadrature_s2(lambda q: vmf_log_density(q, p3)) - 1.0) < 1e-4

    def test_stable_over_kappa_range(self):
        mu = np.array([0.0, 1.0, 0.0, 0.0])
        for kappa in 10.0 ** np.linspace(-6, 4, 21):
            v = vmf_log_density(mu, VmfParams(mu, kappa))
            assert np.isfinite(v)

    def test_rejects_bad_inputs(self):
        mu = np.array([1.0, 0.0, 0.0])
        with pytest.raises(ValueError, match="unit"):
            vmf_log_density(np.array([1.1, 0.0, 0.0]), VmfParams(mu, 1.0))
        with pytest.raises(ValueError, match="concentration"):
            VmfParams(mu, 0.0)
        with pytest.raises(ValueError, match="concentration"):
            VmfParams(mu, -1.0)


class TestAntipodalMixture:
    def test_exact_symmetry(self, rng):
        for _ in range(300):
            dim = rng.choice([2, 3, 4])
            q = random_unit(rng, dim)
            mu = random_unit(rng, dim)
            kappa = float(rng.uniform(1e-3, 200.0))
            assert antipodal_vmf_log_density(q, mu, kappa) == antipodal_vmf_log_density(-q, mu, kappa)

    def test_zero_concentration_is_uniform(self, rng):
        for dim in (2, 3, 4):
            mu = random_unit(rng, dim)
            q = random_unit(rng, dim)
            assert antipodal_vmf_log_density(q, mu, 0.0) == pytest.approx(uniform_log_density(dim), abs=1e-14)

    def test_large_kappa_approaches_single_component(self, rng):
        # two-term oracle at kappa = 50: the antipodal term is negligible at the mode
        mu = random_unit(rng, 4)
        kappa = 50.0
        mixture = antipodal_vmf_log_density(mu, mu, kappa)
        single = np.log(0.5) + vmf_log_density(mu, VmfParams(mu, kappa))
        two_term = np.logaddexp(
            np.log(0.5) + vmf_log_density(mu, VmfParams(mu, kappa)),
            np.log(0.5) + vmf_log_density(mu, VmfParams(-mu, kappa)),
        )
        assert abs(mixture - two_term) < 1e-12
        assert abs(mixture - single) < 1e-9

    def test_mixture_normalizes_on_s2(self, rng):
        mu = random_unit(rng, 3)
        integral = sphere_quadrature_s2(lambda q: antipodal_vmf_log_density(q, mu, 5.0))
        assert abs(integral - 1.0) < 1e-4


class TestNormalizerDerivative:
    def test_dkappa_sign_matches_mean_resultant(self, rng):
        # d/dkappa [kappa * t + log C_D(kappa)] = t - A_D(kappa)
        for dim in (2, 3, 4):
            for kappa in np.linspace(0.05, 40.0, 20):
                t = float(rng.uniform(-1, 1))
                fd = finite_difference_scalar(lambda k: k * t + log_vmf_normalizer(k, dim), kappa)
                predicted = t - bessel_ratio(kappa, dim)
                assert abs(fd - predicted) < 1e-6
                if abs(predicted) > 1e-6:
                    assert np.sign(fd) == np.sign(predicted)

    def test_bessel_ratio_limits(self):
        assert bessel_ratio(0.0, 4) == 0.0
        assert bessel_ratio(1e-9, 3) < 1e-8
        assert 0.99 < bessel_ratio(1e4, 4) < 1.0
