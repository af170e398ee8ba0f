"""
Unit tests for input densities, push-forward densities and the density catalog
"""
import math

import numpy as np
import pytest
from scipy import integrate, stats

from infoloss.core.exceptions import (
    DensityError,
    InvalidParameterError,
    MissingParameterError,
    SupportMismatchError,
    UnknownCatalogEntryError,
)
from infoloss.core.reference import gaussian_q
from infoloss.densities.base import (
    NormalDensity,
    TableDensity,
    UniformDensity,
    pushforward,
    truncated_support,
)
from infoloss.densities.factory import DensityFactory, builtin
from infoloss.functions.base import Interval
from infoloss.functions.factory import catalog


class TestUniformDensity:

    def test_pdf_cdf_quantile(self, unit_uniform):
        assert unit_uniform.pdf(0.3) == 0.5
        assert unit_uniform.pdf(1.5) == 0.0
        assert unit_uniform.cdf(0.0) == 0.5
        assert unit_uniform.quantile(0.75) == 0.5
        assert unit_uniform.mass(-0.5, 0.5) == pytest.approx(0.5)

    def test_unbounded_rejected(self):
        with pytest.raises(DensityError):
            UniformDensity(0.0, math.inf)

    def test_samples_follow_distribution(self, unit_uniform):
        samples = unit_uniform.sample(np.random.default_rng(0), 5000)
        assert stats.kstest(samples, stats.uniform(loc=-1.0, scale=2.0).cdf).pvalue > 1e-3


class TestNormalDensity:

    def test_matches_scipy(self):
        d = NormalDensity(mu=1.0, sigma=2.0)
        xs = np.linspace(-5.0, 7.0, 13)
        np.testing.assert_allclose(d.pdf(xs), stats.norm(1.0, 2.0).pdf(xs), rtol=1e-12)
        np.testing.assert_allclose(d.cdf(xs), stats.norm(1.0, 2.0).cdf(xs), rtol=1e-12)

    def test_quantile(self, std_normal):
        assert std_normal.cdf(0.0) == 0.5
        assert std_normal.quantile(0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_upper_tail_mass_is_accurate(self, std_normal):
        assert std_normal.mass(8.0, math.inf) == pytest.approx(gaussian_q(8.0), rel=1e-10)
        assert std_normal.mass(8.0, math.inf) > 0

    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.inf])
    def test_invalid_sigma(self, sigma):
        with pytest.raises(InvalidParameterError):
            NormalDensity(0.0, sigma)

    def test_non_finite_mean(self):
        with pytest.raises(InvalidParameterError, match="mu"):
            NormalDensity(math.nan, 1.0)

    def test_samples_follow_distribution(self, std_normal):
        samples = std_normal.sample(np.random.default_rng(1), 5000)
        assert stats.kstest(samples, "norm").pvalue > 1e-3


class TestTableDensity:

    @pytest.fixture
    def triangle(self):
        return TableDensity([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])

    def test_renormalized(self, triangle):
        assert triangle.pdf(1.0) == pytest.approx(1.0)
        assert triangle.pdf(0.5) == pytest.approx(0.5)
        assert triangle.pdf(3.0) == 0.0

    def test_exact_cdf_and_quantile(self, triangle):
        assert triangle.cdf(1.0) == pytest.approx(0.5)
        assert triangle.cdf(0.5) == pytest.approx(0.125)
        assert triangle.quantile(0.125) == pytest.approx(0.5)
        assert triangle.quantile(0.875) == pytest.approx(1.5)
        assert triangle.cdf(5.0) == 1.0
        assert triangle.support == Interval(0.0, 2.0)

    @pytest.mark.parametrize("xs,values", [
        ([0.0], [1.0]),
        ([0.0, 1.0], [1.0]),
        ([1.0, 0.0], [1.0, 1.0]),
        ([0.0, 1.0], [-1.0, 1.0]),
        ([0.0, 1.0], [0.0, 0.0]),
        ([0.0, math.nan], [1.0, 1.0]),
    ])
    def test_invalid_tables(self, xs, values):
        with pytest.raises(DensityError):
            TableDensity(xs, values)


class TestPushforward:

    def test_magnitude_of_normal(self, magnitude, std_normal):
        out = pushforward(magnitude, std_normal)
        assert out.cdf(1.0) == pytest.approx(0.682689, abs=1e-6)
        assert out.pdf(1.0) == pytest.approx(2.0 * stats.norm.pdf(1.0), rel=1e-12)
        assert out.quantile(0.5) == pytest.approx(0.6744898, abs=1e-6)
        assert out.cdf(-1.0) == 0.0

    def test_quantile_inverts_cdf(self, cubic):
        out = pushforward(cubic, NormalDensity(0.0, 5.0))
        ps = np.array([0.01, 0.3, 0.5, 0.9])
        np.testing.assert_allclose(out.cdf(out.quantile(ps)), ps, atol=1e-9)

    def test_samples_follow_distribution(self, magnitude, std_normal):
        samples = pushforward(magnitude, std_normal).sample(np.random.default_rng(2), 5000)
        assert stats.kstest(samples, stats.halfnorm.cdf).pvalue > 1e-3

    def test_unit_mass(self, sqlin, unit_uniform, cubic):
        out = pushforward(sqlin, unit_uniform)
        mass, _ = integrate.quad(out.pdf, 0.0, 1.0, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-8)

        out = pushforward(cubic, NormalDensity(0.0, 5.0))
        lo, hi = out.quantile(1e-12), out.quantile(1.0 - 1e-12)
        kinks = [e for e in cubic.image_endpoints if lo < e < hi]
        mass, _ = integrate.quad(out.pdf, lo, hi, points=kinks, limit=400)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_sampled_histogram_matches_density(self, cubic):
        out = pushforward(cubic, NormalDensity(0.0, 5.0))
        samples = out.sample(np.random.default_rng(4), 100_000)
        edges = out.quantile(np.linspace(0.0, 1.0, 21)[1:-1])
        counts = np.bincount(np.searchsorted(edges, samples), minlength=20)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_support_mismatch(self, std_normal):
        with pytest.raises(SupportMismatchError):
            pushforward(catalog("cosine", L=2), std_normal)


class TestTruncatedSupport:

    def test_infinite_ends_are_cut(self, std_normal):
        window = truncated_support(std_normal, 1e-9)
        assert window.lo == pytest.approx(-6.109, abs=1e-2)
        assert window.hi == pytest.approx(6.109, abs=1e-2)

    def test_finite_support_unchanged(self, unit_uniform):
        assert truncated_support(unit_uniform, 1e-9) == unit_uniform.support

    @pytest.mark.parametrize("mass_eps", [0.6, 0.0, -1e-9, math.nan])
    def test_mass_eps_range(self, std_normal, mass_eps):
        with pytest.raises(InvalidParameterError):
            truncated_support(std_normal, mass_eps)


class TestDensityFactory:

    def test_available(self):
        assert {"uniform", "normal", "table"} <= set(DensityFactory.get_available_densities())

    def test_uniform_forms(self):
        assert builtin("uniform", a=2.0).support == Interval(-2.0, 2.0)
        assert builtin("uniform", lo=0.0, hi=3.0).support == Interval(0.0, 3.0)

    def test_uniform_errors(self):
        with pytest.raises(MissingParameterError):
            builtin("uniform", lo=0.0)
        with pytest.raises(InvalidParameterError):
            builtin("uniform", a=1.0, lo=0.0)
        with pytest.raises(InvalidParameterError):
            builtin("uniform", lo=1.0, hi=0.0)

    @pytest.mark.parametrize("params,missing", [
        ({"lo": 0.0}, "hi"),
        ({"hi": 1.0}, "lo"),
        ({}, "a"),
    ])
    def test_uniform_names_the_missing_bound(self, params, missing):
        with pytest.raises(MissingParameterError, match=f"'{missing}'"):
            builtin("uniform", **params)

    def test_normal(self):
        d = builtin("normal", {"sigma": 2.0, "mu": 1.0})
        assert d.to_dict() == {"kind": "normal", "mu": 1.0, "sigma": 2.0}
        with pytest.raises(InvalidParameterError):
            builtin("normal", sigma=-1.0)

    def test_unknown_and_extra_fields(self):
        with pytest.raises(UnknownCatalogEntryError):
            builtin("laplace")
        with pytest.raises(InvalidParameterError):
            builtin("normal", scale=2.0)

    def test_table_from_points_and_file(self, tmp_path):
        inline = builtin("table", points=[[0.0, 1.0], [1.0, 1.0]])
        assert inline.cdf(0.25) == pytest.approx(0.25)

        path = tmp_path / "pdf.csv"
        path.write_text("x,pdf\n0,0\n1,2\n2,0\n", encoding="utf-8")
        from_file = builtin("table", path=str(path))
        assert from_file.cdf(1.0) == pytest.approx(0.5)

    def test_table_needs_exactly_one_source(self, tmp_path):
        with pytest.raises(InvalidParameterError):
            builtin("table")
        with pytest.raises(DensityError):
            builtin("table", path=str(tmp_path / "missing.csv"))
