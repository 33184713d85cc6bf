#pragma once

// The always-on property suite. Each check returns a verdict with a short
// detail string so that both the Catch2 suite and the acceptance driver can
// report it.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "kwlngb/kwlngb.hpp"
#include "oracles.hpp"

namespace props {

struct Verdict {
    bool ok = true;
    double worst = 0.0;
    std::string detail;
};

inline Verdict finish(double worst, double limit, const std::string& what) {
    std::ostringstream os;
    os << what << ": worst " << worst << " (limit " << limit << ")";
    return {worst <= limit, worst, os.str()};
}

inline const std::vector<double>& shape_grid() {
    static const std::vector<double> g{0.3, 1.0, 2.5};
    return g;
}

/// Densities integrate to one over the shape grid.
inline Verdict normalization() {
    double worst = 0.0;
    for (double u : shape_grid())
        for (double v : shape_grid()) {
            const kwlngb::KwParams kw(u, v);
            worst = std::max(worst, std::abs(kwlngb::integrate_unit([&](double x, double xc) {
                                        return std::exp(kwlngb::detail::kw_log_pdf(kw, x, xc));
                                    }) - 1.0));
            for (double be : {0.2, 1.0, 2.0}) {
                const kwlngb::LngbParams p(u, v, be);
                worst = std::max(worst, std::abs(kwlngb::integrate_unit([&](double x, double xc) {
                                            return std::exp(kwlngb::detail::lngb_log_pdf(p, x, xc));
                                        }) - 1.0));
            }
        }
    return finish(worst, 1e-8, "normalization");
}

/// KW(1, d) == LNGB(1, d, 1) and LNGB(a, b, 1) == Beta(a, b), pointwise.
inline Verdict nesting() {
    double worst = 0.0;
    for (double d : {0.3, 1.0, 2.5, 6.0})
        for (int i = 1; i < 1000; ++i) {
            const double x = i / 1000.0;
            worst = std::max(worst, std::abs(kwlngb::lngb_log_pdf(kwlngb::LngbParams(1.0, d, 1.0), x) -
                                             kwlngb::kw_log_pdf(kwlngb::KwParams(1.0, d), x)));
        }
    for (double a : shape_grid())
        for (double b : shape_grid())
            for (int i = 1; i < 1000; ++i) {
                const double x = i / 1000.0;
                const double beta_log =
                    (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - kwlngb::log_beta(a, b);
                worst = std::max(worst, std::abs(kwlngb::lngb_log_pdf(kwlngb::LngbParams(a, b, 1.0), x) - beta_log));
            }
    return finish(worst, 1e-12, "nesting");
}

/// cdf(quantile(u)) == u for both families. The upper end stops at 0.995:
/// with delta or b = 0.3 the quantile of 1 - 1e-6 lies within 1e-20 of 1
/// and is not representable as a double.
inline Verdict round_trips() {
    double worst = 0.0;
    for (double u1 : shape_grid())
        for (double u2 : shape_grid())
            for (double u : {1e-9, 1e-6, 0.01, 0.25, 0.5, 0.75, 0.99, 0.995}) {
                const kwlngb::KwParams kw(u1, u2);
                worst = std::max(worst, std::abs(kwlngb::kw_cdf(kw, kwlngb::kw_quantile(kw, u)) - u));
                for (double be : {0.2, 1.0, 2.0}) {
                    const kwlngb::LngbParams p(u1, u2, be);
                    worst = std::max(worst, std::abs(kwlngb::lngb_cdf(p, kwlngb::lngb_quantile(p, u)) - u));
                }
            }
    return finish(worst, 1e-9, "cdf/quantile round trip");
}

template <class Cdf>
double ks_statistic(const kwlngb::Sample& s, Cdf cdf) {
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

/// Samplers of size 1e5 agree with their cdf.
inline Verdict samplers() {
    kwlngb::RandomStream rng(1905);
    double worst = 0.0;
    for (const kwlngb::KwParams& p : {kwlngb::KwParams(2.0, 2.5), kwlngb::KwParams(0.2, 2.5)}) {
        const auto s = kwlngb::kw_sample(p, 100000, rng);
        worst = std::max(worst, ks_statistic(s, [&](double x) { return kwlngb::kw_cdf(p, x); }));
    }
    for (const kwlngb::LngbParams& p : {kwlngb::LngbParams(1.2, 1.5, 0.7), kwlngb::LngbParams(0.2, 1.25, 1.5)}) {
        const auto s = kwlngb::lngb_sample(p, 100000, rng);
        worst = std::max(worst, ks_statistic(s, [&](double x) { return kwlngb::lngb_cdf(p, x); }));
    }
    return finish(worst, 0.01, "sampler KS statistic");
}

/// Analytic scores vs central differences at 50 random points.
inline Verdict scores() {
    kwlngb::RandomStream rng(27182818);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform_open(); };
    double worst = 0.0;
    auto rel = [](double got, double want, double floor) {
        return std::abs(got - want) / std::max(std::abs(want), floor);
    };
    for (int t = 0; t < 50; ++t) {
        const auto s = kwlngb::lngb_sample(kwlngb::LngbParams(uni(0.3, 3), uni(0.3, 3), uni(0.2, 3)), 40, rng);
        const double a = uni(0.3, 3), b = uni(0.3, 3), be = uni(0.2, 3);
        const auto g = kwlngb::lngb_score(kwlngb::LngbParams(a, b, be), s);
        const double floor = 1e-2 * s.size();
        worst = std::max(worst, rel(g[0], oracle::derivative([&](double v) {
                                        return kwlngb::lngb_loglik(kwlngb::LngbParams(v, b, be), s);
                                    }, a), floor));
        worst = std::max(worst, rel(g[1], oracle::derivative([&](double v) {
                                        return kwlngb::lngb_loglik(kwlngb::LngbParams(a, v, be), s);
                                    }, b), floor));
        worst = std::max(worst, rel(g[2], oracle::derivative([&](double v) {
                                        return kwlngb::lngb_loglik(kwlngb::LngbParams(a, b, v), s);
                                    }, be), floor));
        const double al = uni(0.2, 4), de = uni(0.2, 4);
        const auto h = kwlngb::kw_score(kwlngb::KwParams(al, de), s);
        worst = std::max(worst, rel(h[0], oracle::derivative([&](double v) {
                                        return kwlngb::kw_loglik(kwlngb::KwParams(v, de), s);
                                    }, al), floor));
        worst = std::max(worst, rel(h[1], oracle::derivative([&](double v) {
                                        return kwlngb::kw_loglik(kwlngb::KwParams(al, v), s);
                                    }, de), floor));
    }
    return finish(worst, 1e-4, "score vs finite difference (relative)");
}

/// m_per_obs >= 0 under LNGB nulls and <= 0 under KW nulls.
inline Verdict kl_signs() {
    double worst = 0.0;
    for (double a : {0.2, 0.5, 0.9, 1.5, 3.0})
        for (double be : {0.5, 1.5}) {
            const auto h = kwlngb::null_analysis(kwlngb::NullHypothesis::lngb(kwlngb::LngbParams(a, 1.25, be)));
            worst = std::max(worst, -h.m_per_obs);
        }
    for (double al : {0.2, 0.5, 0.9, 1.5, 3.0}) {
        const auto h = kwlngb::null_analysis(kwlngb::NullHypothesis::kw(kwlngb::KwParams(al, 2.5)));
        worst = std::max(worst, h.m_per_obs);
    }
    return finish(std::max(worst, 0.0), 1e-9, "KL sign violation");
}

/// Simulation outcomes are bit-identical at parallelism 1, 4 and 8.
inline Verdict simulation_determinism() {
    kwlngb::SimulationConfig cfg{kwlngb::NullHypothesis::kw(kwlngb::KwParams(0.5, 2.5)), 50, 40, 7, 1};
    const auto ref = kwlngb::run_replicates(cfg);
    double mismatches = 0.0;
    for (unsigned par : {4u, 8u}) {
        cfg.parallelism = par;
        const auto got = kwlngb::run_replicates(cfg);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (std::memcmp(&ref[i].w_n, &got[i].w_n, sizeof(double)) != 0 || ref[i].success != got[i].success ||
                ref[i].fit_ok != got[i].fit_ok)
                mismatches += 1.0;
        }
    }
    return finish(mismatches, 0.0, "replicates differing across parallelism");
}

struct Named {
    const char* name;
    Verdict (*run)();
};

inline const std::vector<Named>& all() {
    static const std::vector<Named> checks{
        {"normalization", normalization}, {"nesting", nesting},       {"round trips", round_trips},
        {"samplers", samplers},           {"scores", scores},         {"KL signs", kl_signs},
        {"simulation determinism", simulation_determinism},
    };
    return checks;
}

} // namespace props
