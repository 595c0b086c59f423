"""Likelihood-kernel evaluation: series truncation, closed forms, Hankel
cross-checks, self-convolution bounds, and parameter derivatives."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import j0

from dppmle import families as F
from dppmle import spectral as S
from dppmle.errors import QuadratureFailure, SaturatedSpectrum

from oracles import fd1, fd2, fd_cross

GAUSS = F.KernelModel("gauss", 100.0, 0.05)
BESSEL = F.KernelModel("bessel", 100.0, 0.05)
CAUCHY = F.KernelModel("cauchy", 100.0, 0.03)
WHITTLE = F.KernelModel("whittle", 100.0, 0.015, sigma=2.0)

# 2*pi*int s*density(s)^n ds, from scipy.integrate.quad on the closed-form
# densities (regenerated alongside tests/oracles.py outputs)
CONVOLUTION_AT_ZERO = {
    ("gauss", 2): 39.26990817,
    ("gauss", 3): 20.56167584,
    ("gauss", 4): 12.11182683,
    ("cauchy", 2): 14.13716694,
    ("cauchy", 3): 3.553057584,
    ("cauchy", 4): 1.130178785,
    ("whittle", 2): 22.61946711,
    ("whittle", 3): 7.994379565,
    ("whittle", 4): 3.287792829,
}
MODELS = {"gauss": GAUSS, "bessel": BESSEL, "cauchy": CAUCHY,
          "whittle": WHITTLE}


def tight_profile(model):
    return S.SpectralProfile(model, rel_tol=1e-9, max_terms=400)


class TestSpectralRatio:
    def test_zero_density_maps_to_zero(self):
        outside = F.bessel_support_radius(0.05) * 1.5
        assert S.spectral_ratio(BESSEL, outside) == 0.0

    def test_gauss_value_at_origin(self):
        peak = 0.785398163
        assert S.spectral_ratio(GAUSS, 0.0) == pytest.approx(
            peak / (1 - peak), abs=1e-6)
        assert S.spectral_ratio(GAUSS, 0.0) == pytest.approx(3.659792,
                                                             abs=1e-5)

    def test_bessel_ratio_is_scaled_indicator(self):
        peak = BESSEL.spectral_peak
        level = peak / (1.0 - peak)
        cut = F.bessel_support_radius(0.05)
        r = np.array([0.0, 0.4 * cut, 0.99 * cut, 1.01 * cut])
        got = S.spectral_ratio(BESSEL, r)
        assert np.allclose(got, [level, level, level, 0.0], rtol=1e-12)

    def test_saturation_raises(self):
        at_cap = F.KernelModel("gauss", F.max_intensity("gauss", 0.05), 0.05)
        with pytest.raises(SaturatedSpectrum):
            S.spectral_ratio(at_cap, 0.0)
        with pytest.raises(SaturatedSpectrum):
            S.SpectralProfile(at_cap)


class TestTruncationRule:
    def test_small_alpha_needs_few_terms(self):
        p = S.SpectralProfile(F.KernelModel("gauss", 100.0, 0.01))
        assert p.n_terms == 3
        assert p.rule_met

    def test_regime_boundaries(self):
        rho = 100.0
        amax = F.alpha_max("gauss", rho)
        mild = S.SpectralProfile(F.KernelModel("gauss", rho, 0.7 * amax))
        assert mild.n_terms <= 10
        near = S.SpectralProfile(F.KernelModel("gauss", rho, 0.9 * amax))
        assert near.rule_met and near.n_terms < 50
        extreme = S.SpectralProfile(F.KernelModel("gauss", rho, 0.96 * amax))
        assert extreme.n_terms == 50 and not extreme.rule_met

    def test_dropped_terms_below_tolerance(self):
        for m in (GAUSS, CAUCHY, WHITTLE):
            p = S.SpectralProfile(m)
            t = p._terms_at_zero(np.arange(1, p.n_terms + 30))
            assert p.rule_met
            assert np.all(t[p.n_terms:] < p.rel_tol * t[0])
            # retention is minimal: the last kept term's successor witnesses
            assert t[p.n_terms] < p.rel_tol * t[0]

    def test_terms_at_zero_positive_decreasing(self):
        for m in (GAUSS, CAUCHY, WHITTLE):
            t = S.SpectralProfile(m).term_values_at_zero()
            assert np.all(t > 0)
            assert np.all(np.diff(t) < 0)


class TestClosedForms:
    def test_bessel_value_at_zero(self):
        p = S.SpectralProfile(BESSEL)
        expect = 100.0 / (1.0 - BESSEL.spectral_peak)
        assert p.value(np.asarray(0.0)) == pytest.approx(expect, rel=1e-13)

    def test_value_dominates_kernel(self):
        # positive-kernel families: every series term beyond n=1 adds mass
        for m in (GAUSS, CAUCHY, WHITTLE):
            p = S.SpectralProfile(m)
            r = np.linspace(0.0, 4 * m.alpha, 50)
            assert np.all(p.value(r) >= np.asarray(F.kernel_radial(m, r)))
        for m in MODELS.values():
            p = S.SpectralProfile(m)
            assert float(p.value(np.asarray(0.0))) > F.kernel_radial(m, 0.0)

    def test_more_terms_increase_value(self):
        for m in (GAUSS, CAUCHY, WHITTLE):
            r = np.linspace(0.0, 3 * m.alpha, 20)
            loose = S.SpectralProfile(m, rel_tol=1e-2)
            tight = tight_profile(m)
            assert tight.n_terms > loose.n_terms
            assert np.all(tight.value(r) >= loose.value(r))

    def test_sorted_fast_path_matches(self):
        rng = np.random.default_rng(3)
        r = np.sort(rng.uniform(0.0, 6 * 0.05, size=500))
        for m in (GAUSS, CAUCHY):
            p = S.SpectralProfile(m)
            plain = p.value(r)
            fast = p.value(r, assume_sorted=True)
            assert np.allclose(plain, fast, rtol=0, atol=1e-12 * plain[0])


class TestHankelRoute:
    @pytest.mark.parametrize("m", [BESSEL, GAUSS], ids=["bessel", "gauss"])
    def test_matches_series_at_pinned_radii(self, m):
        p = tight_profile(m)
        for r in (0.0, m.alpha / 2, m.alpha, 2 * m.alpha):
            got = S.likelihood_kernel_hankel(m, r)
            assert float(p.value(np.asarray(r))) == pytest.approx(got,
                                                                  rel=1e-6)

    @pytest.mark.parametrize("m", [CAUCHY, WHITTLE], ids=["cauchy", "whittle"])
    def test_matches_series_other_families(self, m):
        p = tight_profile(m)
        for r in (0.0, 1.5 * m.alpha):
            got = S.likelihood_kernel_hankel(m, r)
            assert float(p.value(np.asarray(r))) == pytest.approx(got,
                                                                  rel=1e-5)

    def test_total_mass_at_zero(self):
        # J(0)=1 reduces the transform to the radial total mass of the ratio
        got = S.likelihood_kernel_hankel(GAUSS, 0.0)
        mass, _ = integrate.quad(
            lambda s: 2 * math.pi * s * float(S.spectral_ratio(GAUSS, s)),
            0.0, 40.0, limit=300)
        assert got == pytest.approx(mass, rel=1e-10)

    def test_unsupported_dimension_raises(self):
        m3 = F.KernelModel("gauss", 10.0, 0.05, dim=3)
        with pytest.raises(QuadratureFailure):
            S.likelihood_kernel_hankel(m3, 0.1)


class TestConvolutionBound:
    def test_first_order_is_intensity(self):
        for m in MODELS.values():
            assert S.convolution_power_bound(m, 1) == pytest.approx(m.rho)

    def test_gauss_third_order(self):
        assert S.convolution_power_bound(GAUSS, 3) == pytest.approx(
            100.0 * 0.785398 ** 2, abs=1e-3)

    @pytest.mark.parametrize("key", sorted(CONVOLUTION_AT_ZERO))
    def test_bound_dominates_quadrature(self, key):
        name, n = key
        m = MODELS[name]
        assert S.convolution_power_bound(m, n) >= CONVOLUTION_AT_ZERO[key]

    @pytest.mark.parametrize("key", sorted(CONVOLUTION_AT_ZERO))
    def test_series_term_equals_convolution(self, key):
        name, n = key
        p = S.SpectralProfile(MODELS[name])
        assert p.term_values_at_zero()[n - 1] == pytest.approx(
            CONVOLUTION_AT_ZERO[key], rel=1e-9)


class TestSpectralIdentity:
    def test_forward_transform_within_budget(self):
        p = S.SpectralProfile(GAUSS)
        peak = GAUSS.spectral_peak
        for t in (0.0, 1.7):
            val, _ = integrate.quad(
                lambda r: 2 * math.pi * r * float(p.value(np.asarray(r)))
                * j0(2 * math.pi * t * r),
                0.0, 1.2, epsabs=1e-10, limit=400)
            ratio = float(S.spectral_ratio(GAUSS, t))
            spectral_tail = peak ** (p.n_terms + 1) / (1.0 - peak)
            assert abs(val - ratio) <= spectral_tail + 1e-7
            assert abs(val - ratio) <= p.truncation_budget


class TestDerivatives:
    CASES = [
        ("gauss", 100.0, 0.045, None),
        ("cauchy", 100.0, 0.03, None),
        ("whittle", 100.0, 0.015, 2.0),
        ("whittle", 80.0, 0.02, 1.4),
        ("bessel", 100.0, 0.05, None),
    ]

    @staticmethod
    def _value(family, rho, alpha, sigma, r):
        m = F.KernelModel(family, rho, alpha, sigma)
        prof = S.SpectralProfile(m, rel_tol=1e-11, max_terms=400)
        return float(prof.value(np.asarray(r)))

    @pytest.mark.parametrize("case", CASES, ids=[c[0] + str(i) for i, c in
                                                 enumerate(CASES)])
    def test_against_finite_differences(self, case):
        family, rho, alpha, sigma = case
        m = F.KernelModel(family, rho, alpha, sigma)
        p = S.SpectralProfile(m, rel_tol=1e-11, max_terms=400)
        for r in (0.0, 0.4 * alpha, 1.3 * alpha, 3.1 * alpha):
            g = p.derivatives(np.asarray(r))
            val = abs(float(g.value))
            fr = lambda x: self._value(family, x, alpha, sigma, r)
            fa = lambda x: self._value(family, rho, x, sigma, r)
            fb = lambda x, y: self._value(family, x, y, sigma, r)
            pairs = [
                (float(g.d_rho), fd1(fr, rho, 1e-5 * rho)),
                (float(g.d_alpha), fd1(fa, alpha, 1e-6 * alpha)),
                (float(g.d_rho_rho), fd2(fr, rho, 1e-3 * rho)),
                (float(g.d_rho_alpha),
                 fd_cross(fb, rho, alpha, 1e-4 * rho, 1e-4 * alpha)),
                (float(g.d_alpha_alpha), fd2(fa, alpha, 1e-3 * alpha)),
            ]
            for analytic, numeric in pairs:
                scale = max(abs(numeric), 1e-6 * val + 1e-9)
                assert abs(analytic - numeric) <= 1e-4 * scale

    def test_single_term_alpha_free_at_origin(self):
        # the n=1 gauss term at lag 0 is rho: no alpha dependence
        p = S.SpectralProfile(F.KernelModel("gauss", 100.0, 0.01),
                              max_terms=1)
        assert p.n_terms == 1
        g = p.derivatives(np.asarray(0.0))
        assert float(g.d_alpha) == 0.0
        assert float(g.value) == pytest.approx(100.0)

    def test_bessel_rho_derivative_closed_form(self):
        # L(0) = rho/(1 - rho*c) with c = pi*alpha^2 in d=2
        c = math.pi * 0.05 ** 2
        p = S.SpectralProfile(BESSEL)
        g = p.derivatives(np.asarray(0.0))
        assert float(g.d_rho) == pytest.approx(1.0 / (1.0 - 100.0 * c) ** 2,
                                               rel=1e-12)
