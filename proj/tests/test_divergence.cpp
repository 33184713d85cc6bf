#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "kwlngb/discrimination.hpp"
#include "kwlngb/divergence.hpp"
#include "oracles.hpp"

using namespace kwlngb;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double oracle_kl(double al, double de, double a, double b, double be, bool kw_first) {
    return oracle::integrate([&](double x, double xc) {
        const double f = oracle::kw_pdf(al, de, x, xc), g = oracle::lngb_pdf(a, b, be, x, xc);
        const double p = kw_first ? f : g, q = kw_first ? g : f;
        return p == 0.0 ? 0.0 : p * std::log(p / q);
    });
}

double oracle_affinity(double al, double de, double a, double b, double be) {
    return oracle::integrate([&](double x, double xc) {
        return std::sqrt(oracle::kw_pdf(al, de, x, xc) * oracle::lngb_pdf(a, b, be, x, xc));
    });
}

} // namespace

TEST_CASE("names", "[divergence]") {
    CHECK(std::string(measure_name(Measure::Hellinger)) == "hellinger");
    CHECK(std::string(measure_name(Measure::PowerDivergence)) == "pwd");
    CHECK(std::string(measure_name(Measure::KolmogorovSmirnov)) == "ks");
    CHECK(std::string(method_name(Method::ClosedForm)) == "closed-form");
    CHECK(std::string(direction_name(PwdDirection::LngbFromKw)) == "lngb-from-kw");
}

TEST_CASE("identical laws are at distance zero", "[divergence][property]") {
    for (double d : {0.5, 1.0, 2.5}) {
        const KwParams kw(1.0, d);
        const LngbParams lngb(1.0, d, 1.0);
        const auto h = hellinger(kw, lngb);
        CHECK_THAT(h.value, WithinAbs(0.0, 1e-9));
        CHECK_THAT(*h.hellinger_one_minus, WithinAbs(0.0, 1e-9));
        CHECK_THAT(*hellinger_closed_form(kw, lngb).affinity, WithinAbs(1.0, 1e-9));
        CHECK_THAT(ks_distance(kw, lngb).value, WithinAbs(0.0, 1e-12));
        for (double lam : {-2.0, -1.0, -0.5, 0.0, 1.0}) {
            CHECK_THAT(power_divergence(kw, lngb, lam, PwdDirection::KwFromLngb).value, WithinAbs(0.0, 1e-9));
            CHECK_THAT(power_divergence(kw, lngb, lam, PwdDirection::LngbFromKw).value, WithinAbs(0.0, 1e-9));
        }
    }
}

TEST_CASE("Hellinger", "[divergence][hellinger]") {
    const KwParams kw(2.0, 2.5);
    const LngbParams lngb(1.2, 1.5, 0.7);
    const auto h = hellinger(kw, lngb);
    const double aff = oracle_affinity(2.0, 2.5, 1.2, 1.5, 0.7);
    CHECK(h.measure == Measure::Hellinger);
    CHECK(h.method == Method::Quadrature);
    CHECK_THAT(*h.affinity, WithinAbs(aff, 1e-9));
    CHECK_THAT(h.value, WithinAbs(2.0 - 2.0 * aff, 2e-9));
    CHECK_THAT(*h.hellinger_one_minus, WithinAbs(1.0 - aff, 1e-9));
    // Definitional form: integral of (sqrt f - sqrt g)^2.
    const double direct = oracle::integrate([](double x, double xc) {
        const double d = std::sqrt(oracle::kw_pdf(2.0, 2.5, x, xc)) - std::sqrt(oracle::lngb_pdf(1.2, 1.5, 0.7, x, xc));
        return d * d;
    });
    CHECK_THAT(h.value, WithinAbs(direct, 1e-9));
    CHECK(h.value > 0.0);
}

TEST_CASE("Hellinger closed form", "[divergence][hellinger][closed-form]") {
    SECTION("beta = 1 collapses to a beta-function ratio") {
        const double al = 1.7, de = 2.2, a = 0.8, b = 1.4;
        const double ratio = std::exp(0.5 * std::log(al * de) + std::lgamma(0.5 * (a + al)) + std::lgamma(0.5 * (b + de)) -
                                      std::lgamma(0.5 * (a + b + al + de)) - 0.5 * log_beta(a, b));
        CHECK_THAT(hellinger_affinity_closed_form(KwParams(al, de), LngbParams(a, b, 1.0)), WithinRel(ratio, 1e-12));
    }

    SECTION("matches quadrature on the alpha = 1 grid") {
        for (double de : {0.5, 1.5, 3.0})
            for (double a : {0.5, 1.2, 2.0})
                for (double be : {0.5, 0.7, 1.5}) {
                    const KwParams kw(1.0, de);
                    const LngbParams lngb(a, 1.5, be);
                    INFO("delta=" << de << " a=" << a << " beta=" << be);
                    const auto cf = hellinger_closed_form(kw, lngb);
                    CHECK(cf.method == Method::ClosedForm);
                    CHECK_THAT(*cf.affinity, WithinAbs(hellinger_affinity(kw, lngb), 1e-6));
                }
    }

    SECTION("away from alpha = 1 the closed form is not the affinity") {
        const KwParams kw(2.0, 2.5);
        const LngbParams lngb = pseudo_true_lngb(kw);
        const double quad = hellinger_affinity(kw, lngb);
        const double closed = hellinger_affinity_closed_form(kw, lngb);
        CHECK(quad > 0.9999);
        CHECK(std::abs(closed - quad) > 0.1);
    }
}

TEST_CASE("power divergence", "[divergence][pwd]") {
    const KwParams kw(2.0, 2.5);
    const LngbParams lngb(1.2, 1.5, 0.7);

    SECTION("lambda = -1/2 is four times one minus the affinity") {
        const double aff = hellinger_affinity(kw, lngb);
        for (auto dir : {PwdDirection::KwFromLngb, PwdDirection::LngbFromKw}) {
            CHECK_THAT(power_divergence(kw, lngb, -0.5, dir).value, WithinAbs(4.0 * (1.0 - aff), 1e-8));
        }
    }

    SECTION("limits are directed Kullback-Leibler divergences") {
        const double kl_kw = oracle_kl(2.0, 2.5, 1.2, 1.5, 0.7, true);
        const double kl_lngb = oracle_kl(2.0, 2.5, 1.2, 1.5, 0.7, false);
        CHECK_THAT(power_divergence(kw, lngb, 0.0, PwdDirection::KwFromLngb).value, WithinAbs(kl_kw, 1e-6));
        CHECK_THAT(power_divergence(kw, lngb, -1.0, PwdDirection::KwFromLngb).value, WithinAbs(kl_lngb, 1e-6));
        CHECK_THAT(power_divergence(kw, lngb, 0.0, PwdDirection::LngbFromKw).value, WithinAbs(kl_lngb, 1e-6));
        CHECK_THAT(power_divergence(kw, lngb, -1.0, PwdDirection::LngbFromKw).value, WithinAbs(kl_kw, 1e-6));
    }

    SECTION("continuous at the limit orders") {
        for (auto dir : {PwdDirection::KwFromLngb, PwdDirection::LngbFromKw})
            for (double limit : {0.0, -1.0}) {
                const double at = power_divergence(kw, lngb, limit, dir).value;
                for (double off : {-1e-6, 1e-6}) {
                    CHECK_THAT(power_divergence(kw, lngb, limit + off, dir).value, WithinAbs(at, 1e-4));
                }
            }
    }

    SECTION("swapping the direction reflects lambda") {
        for (double lam : {-2.0, -0.3, 0.5, 1.0}) {
            const double lhs = power_divergence(kw, lngb, lam, PwdDirection::KwFromLngb).value;
            const double rhs = power_divergence(kw, lngb, -1.0 - lam, PwdDirection::LngbFromKw).value;
            CHECK_THAT(lhs, WithinAbs(rhs, 1e-8));
        }
    }

    SECTION("non-negative on a grid") {
        for (double lam : {-2.0, -1.0, -0.5, 0.0, 1.0})
            for (double al : {0.5, 2.0}) {
                const KwParams k(al, 2.5);
                const LngbParams l = pseudo_true_lngb(k);
                for (auto dir : {PwdDirection::KwFromLngb, PwdDirection::LngbFromKw}) {
                    try {
                        CHECK(power_divergence(k, l, lam, dir).value >= -1e-9);
                    } catch (const InfeasibleError&) {
                    }
                }
            }
    }

    SECTION("result metadata") {
        const auto r = power_divergence(kw, lngb, 1.0, PwdDirection::LngbFromKw);
        CHECK(r.measure == Measure::PowerDivergence);
        REQUIRE(r.lambda.has_value());
        CHECK(*r.lambda == 1.0);
        REQUIRE(r.direction.has_value());
        CHECK(*r.direction == PwdDirection::LngbFromKw);
    }

    SECTION("divergent integrals are rejected with the endpoint named") {
        // f = KW(1, 1), g = LNGB(3, 1, 1): (f/g)^2 f ~ x^-4 at zero.
        CHECK_THROWS_WITH(power_divergence(KwParams(1, 1), LngbParams(3, 1, 1), 2.0, PwdDirection::KwFromLngb),
                          ContainsSubstring("x -> 0"));
        CHECK_THROWS_WITH(power_divergence(KwParams(1, 1), LngbParams(1, 3, 1), 2.0, PwdDirection::KwFromLngb),
                          ContainsSubstring("x -> 1"));
        CHECK_THROWS_AS(power_divergence(KwParams(1, 1), LngbParams(3, 1, 1), 2.0, PwdDirection::KwFromLngb),
                        InfeasibleError);
        CHECK_THROWS_AS(power_divergence(kw, lngb, NAN, PwdDirection::KwFromLngb), DomainError);
    }
}

TEST_CASE("Kolmogorov-Smirnov distance", "[divergence][ks]") {
    const auto r = ks_distance(KwParams(1, 1), LngbParams(2, 1, 1));
    CHECK(r.measure == Measure::KolmogorovSmirnov);
    CHECK(r.method == Method::GridSearch);
    CHECK_THAT(r.value, WithinAbs(0.25, 1e-12));
    REQUIRE(r.argmax.has_value());
    CHECK_THAT(*r.argmax, WithinAbs(0.5, 1e-6));

    SECTION("refinement against a dense grid") {
        const KwParams kw(2.0, 2.5);
        const LngbParams lngb(1.2, 1.5, 0.7);
        const double refined = ks_distance(kw, lngb).value;
        double coarse = 0.0, dense = 0.0;
        for (int i = 1; i < 4096; ++i) {
            const double x = i / 4096.0;
            coarse = std::max(coarse, std::abs(kw_cdf(kw, x) - lngb_cdf(lngb, x)));
        }
        for (int i = 1; i < 1000000; ++i) {
            const double x = i / 1e6;
            dense = std::max(dense, std::abs(1.0 - std::pow(1.0 - x * x, 2.5) - lngb_cdf(lngb, x)));
        }
        CHECK(refined >= coarse);
        CHECK_THAT(refined, WithinAbs(dense, 1e-8));
    }

    SECTION("pseudo-true pair") {
        const KwParams kw(2.0, 2.5);
        const LngbParams lngb = pseudo_true_lngb(kw);
        double dense = 0.0;
        for (int i = 1; i < 1000000; ++i) {
            const double x = i / 1e6;
            dense = std::max(dense, std::abs(kw_cdf(kw, x) - lngb_cdf(lngb, x)));
        }
        CHECK_THAT(ks_distance(kw, lngb).value, WithinAbs(dense, 1e-8));
    }
}
