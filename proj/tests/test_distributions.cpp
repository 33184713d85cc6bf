#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kwlngb/distributions.hpp"
#include "oracles.hpp"

using namespace kwlngb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Sup distance between the empirical CDF of a sample and a model CDF.
template <class Cdf>
double ks_to(const Sample& s, Cdf cdf) {
    std::vector<double> v(s.values().begin(), s.values().end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double F = cdf(v[i]);
        d = std::max({d, std::abs((i + 1) / n - F), std::abs(i / n - F)});
    }
    return d;
}

} // namespace

TEST_CASE("parameter validation", "[distributions]") {
    CHECK_NOTHROW(KwParams(0.2, 2.5));
    CHECK_THROWS_AS(KwParams(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(KwParams(1.0, -1.0), DomainError);
    CHECK_THROWS_AS(KwParams(INFINITY, 1.0), DomainError);
    CHECK_THROWS_AS(LngbParams(1.0, 1.0, 0.0), DomainError);
    CHECK_THROWS_AS(LngbParams(1.0, NAN, 1.0), DomainError);
}

TEST_CASE("Sample validation", "[distributions]") {
    CHECK_THROWS_AS(Sample(std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(Sample({0.2, 0.0}), DomainError);
    CHECK_THROWS_AS(Sample({0.2, 1.0}), DomainError);
    CHECK_THROWS_AS(Sample({0.2, NAN}), DomainError);
    const Sample s({0.25, 0.5});
    CHECK(s.size() == 2);
    CHECK_THAT(s.sum_log(), WithinRel(std::log(0.125), 1e-15));
    CHECK_THAT(s.sum_log1m(), WithinRel(std::log(0.375), 1e-15));
    CHECK(s.fingerprint() == Sample({0.25, 0.5}).fingerprint());
    CHECK(s.fingerprint() != Sample({0.5, 0.25}).fingerprint());
}

TEST_CASE("KW density, cdf and quantile", "[distributions][kw]") {
    CHECK(kw_log_pdf(KwParams(1, 1), 0.3) == 0.0);
    CHECK_THAT(kw_log_pdf(KwParams(2, 1), 0.5), WithinAbs(0.0, 1e-15));
    CHECK_THAT(kw_log_pdf(KwParams(2, 2.5), 0.4), WithinRel(std::log(oracle::kw_pdf(2, 2.5, 0.4)), 1e-13));
    CHECK_THROWS_AS(kw_log_pdf(KwParams(2, 2.5), 0.0), DomainError);
    CHECK_THROWS_AS(kw_log_pdf(KwParams(2, 2.5), 1.0), DomainError);

    CHECK_THAT(kw_cdf(KwParams(1, 1), 0.7), WithinAbs(0.7, 1e-15));
    CHECK_THAT(kw_cdf(KwParams(2, 1), 0.5), WithinAbs(0.25, 1e-15));
    CHECK_THAT(kw_cdf(KwParams(2, 2.5), 0.4), WithinAbs(1.0 - std::pow(0.84, 2.5), 1e-15));
    CHECK(kw_cdf(KwParams(2, 2.5), 0.0) == 0.0);
    CHECK(kw_cdf(KwParams(2, 2.5), 1.0) == 1.0);

    CHECK_THAT(kw_quantile(KwParams(1, 1), 0.37), WithinAbs(0.37, 1e-15));
    CHECK_THAT(kw_quantile(KwParams(2, 1), 0.25), WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(kw_quantile(KwParams(2, 1), 0.0), DomainError);
    CHECK_THROWS_AS(kw_quantile(KwParams(2, 1), 1.0), DomainError);
    for (double u : {1e-6, 0.1, 0.5, 0.9, 0.999999}) {
        CHECK_THAT(kw_cdf(KwParams(0.5, 2.5), kw_quantile(KwParams(0.5, 2.5), u)), WithinAbs(u, 1e-12));
    }
}

TEST_CASE("LNGB density, cdf and quantile", "[distributions][lngb]") {
    CHECK_THAT(lngb_log_pdf(LngbParams(1, 1, 1), 0.3), WithinAbs(0.0, 1e-15));
    CHECK_THAT(lngb_log_pdf(LngbParams(2, 1, 1), 0.5), WithinAbs(0.0, 1e-15));
    CHECK_THAT(lngb_log_pdf(LngbParams(1.2, 1.5, 0.7), 0.4),
               WithinRel(std::log(oracle::lngb_pdf(1.2, 1.5, 0.7, 0.4)), 1e-13));
    CHECK_THROWS_AS(lngb_log_pdf(LngbParams(1, 1, 1), 1.0), DomainError);

    CHECK_THAT(lngb_cdf(LngbParams(1, 1, 1), 0.6), WithinAbs(0.6, 1e-15));
    CHECK(lngb_cdf(LngbParams(1.2, 1.5, 0.7), 0.0) == 0.0);
    CHECK(lngb_cdf(LngbParams(1.2, 1.5, 0.7), 1.0) == 1.0);
    // x = t^5 removes the x^0.2 kink at the origin.
    const double mass = oracle::integrate_interval(
        [](double t) { return oracle::lngb_pdf(1.2, 1.5, 0.7, std::pow(t, 5)) * 5.0 * std::pow(t, 4); }, 0.0,
        std::pow(0.4, 0.2), 400);
    CHECK_THAT(lngb_cdf(LngbParams(1.2, 1.5, 0.7), 0.4), WithinAbs(mass, 1e-9));

    CHECK_THAT(lngb_quantile(LngbParams(1, 1, 1), 0.42), WithinAbs(0.42, 1e-14));
    CHECK_THAT(lngb_cdf(LngbParams(1.2, 1.5, 0.7), lngb_quantile(LngbParams(1.2, 1.5, 0.7), 0.5)),
               WithinAbs(0.5, 1e-10));
    CHECK_THROWS_AS(lngb_quantile(LngbParams(1, 1, 1), 0.0), DomainError);
    for (double be : {0.2, 1.0, 2.0})
        for (double u : {1e-6, 0.3, 0.5, 0.8, 0.999999}) {
            const LngbParams p(0.3, 2.5, be);
            CHECK_THAT(lngb_cdf(p, lngb_quantile(p, u)), WithinAbs(u, 1e-10));
        }
    SECTION("beta = 1 gives the classical beta quantile") {
        const double q = oracle::bisect([](double x) { return reg_inc_beta(x, 2.5, 0.3) - 0.3; }, 0.0, 1.0);
        CHECK_THAT(lngb_quantile(LngbParams(2.5, 0.3, 1.0), 0.3), WithinAbs(q, 1e-12));
    }
}

TEST_CASE("densities integrate to one", "[distributions][property]") {
    const std::vector<double> shapes{0.3, 1.0, 2.5};
    for (double al : shapes)
        for (double de : shapes) {
            const KwParams p(al, de);
            const double total = integrate_unit([&](double x, double xc) { return std::exp(detail::kw_log_pdf(p, x, xc)); });
            CHECK_THAT(total, WithinAbs(1.0, 1e-8));
        }
    for (double a : shapes)
        for (double b : shapes)
            for (double be : {0.2, 1.0, 2.0}) {
                const LngbParams p(a, b, be);
                const double total =
                    integrate_unit([&](double x, double xc) { return std::exp(detail::lngb_log_pdf(p, x, xc)); });
                INFO("a=" << a << " b=" << b << " beta=" << be);
                CHECK_THAT(total, WithinAbs(1.0, 1e-8));
            }
}

TEST_CASE("nesting", "[distributions][property]") {
    for (double de : {0.3, 1.0, 2.5, 7.0})
        for (int i = 1; i < 200; ++i) {
            const double x = i / 200.0;
            CHECK_THAT(lngb_log_pdf(LngbParams(1.0, de, 1.0), x) - kw_log_pdf(KwParams(1.0, de), x),
                       WithinAbs(0.0, 1e-12));
        }
    for (double a : {0.3, 2.5})
        for (double b : {0.3, 2.5})
            for (double x : {0.01, 0.3, 0.77, 0.99}) {
                const double beta_log = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b);
                CHECK_THAT(lngb_log_pdf(LngbParams(a, b, 1.0), x), WithinAbs(beta_log, 1e-12));
            }
}

TEST_CASE("sampling", "[distributions][sampling]") {
    RandomStream dummy(1);
    CHECK_THROWS_AS(kw_sample(KwParams(1, 1), 0, dummy), DomainError);
    CHECK_THROWS_AS(lngb_sample(LngbParams(1, 1, 1), 0, dummy), DomainError);

    SECTION("inverse-cdf of the stream's uniforms") {
        RandomStream a(17), b(17);
        const Sample s = kw_sample(KwParams(2, 1), 1, a);
        const double u = b.uniform_open();
        CHECK_THAT(s[0], WithinAbs(std::sqrt(u), 1e-15));

        RandomStream c(5), d(5);
        const Sample uni = kw_sample(KwParams(1, 1), 50, c);
        const Sample uni2 = lngb_sample(LngbParams(1, 1, 1), 50, d);
        RandomStream e(5);
        for (std::size_t i = 0; i < 50; ++i) {
            const double u2 = e.uniform_open();
            CHECK_THAT(uni[i], WithinAbs(u2, 1e-15));
            CHECK_THAT(uni2[i], WithinAbs(u2, 1e-14));
        }
    }

    SECTION("deterministic given the seed") {
        RandomStream a(99), b(99);
        CHECK(lngb_sample(LngbParams(1.2, 1.5, 0.7), 100, a).fingerprint() ==
              lngb_sample(LngbParams(1.2, 1.5, 0.7), 100, b).fingerprint());
    }

    SECTION("large samples follow their cdf") {
        RandomStream rng(2024);
        const KwParams kw(2, 2.5);
        const LngbParams lngb(1.2, 1.5, 0.7);
        const Sample s1 = kw_sample(kw, 100000, rng);
        const Sample s2 = lngb_sample(lngb, 100000, rng);
        CHECK(ks_to(s1, [&](double x) { return 1.0 - std::pow(1.0 - x * x, 2.5); }) < 0.01);
        CHECK(ks_to(s2, [&](double x) { return lngb_cdf(lngb, x); }) < 0.01);
        // beta = 1: classical beta draws.
        const Sample s3 = lngb_sample(LngbParams(2.5, 0.3, 1.0), 100000, rng);
        CHECK(ks_to(s3, [](double x) { return reg_inc_beta(x, 2.5, 0.3); }) < 0.01);
    }

    SECTION("extreme shapes stay strictly inside the unit interval") {
        RandomStream rng(3);
        const Sample s = kw_sample(KwParams(0.05, 40.0), 2000, rng);
        for (double x : s.values()) CHECK((x > 0.0 && x < 1.0));
    }
}

TEST_CASE("random stream", "[random]") {
    RandomStream a = RandomStream::derive(7, 3), b = RandomStream::derive(7, 3), c = RandomStream::derive(7, 4);
    const auto va = a(), vb = b(), vc = c();
    CHECK(va == vb);
    CHECK(va != vc);
    RandomStream u(11);
    for (int i = 0; i < 10000; ++i) {
        const double x = u.uniform_open();
        CHECK((x > 0.0 && x < 1.0));
    }
}
