#pragma once

// Pseudo-distances between a KW and an LNGB law: Hellinger, the power
// divergence family and the Kolmogorov-Smirnov distance.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kwlngb/distributions.hpp"
#include "kwlngb/errors.hpp"
#include "kwlngb/specfun.hpp"

namespace kwlngb {

enum class Measure { Hellinger, PowerDivergence, KolmogorovSmirnov };
enum class Method { Quadrature, ClosedForm, GridSearch };

/// Which law plays f (the reference density) in PWD(f, g; lambda).
enum class PwdDirection {
    KwFromLngb, ///< f = KW, g = LNGB
    LngbFromKw, ///< f = LNGB, g = KW
};

inline const char* measure_name(Measure m) {
    switch (m) {
    case Measure::Hellinger: return "hellinger";
    case Measure::PowerDivergence: return "pwd";
    case Measure::KolmogorovSmirnov: return "ks";
    }
    return "?";
}

inline const char* method_name(Method m) {
    switch (m) {
    case Method::Quadrature: return "quadrature";
    case Method::ClosedForm: return "closed-form";
    case Method::GridSearch: return "grid-search";
    }
    return "?";
}

inline const char* direction_name(PwdDirection d) {
    return d == PwdDirection::KwFromLngb ? "kw-from-lngb" : "lngb-from-kw";
}

struct DivergenceResult {
    Measure measure = Measure::Hellinger;
    double value = 0.0;
    Method method = Method::Quadrature;
    std::optional<double> lambda;
    std::optional<PwdDirection> direction;
    /// Hellinger only: the Bhattacharyya affinity and the "1 - affinity" form.
    std::optional<double> affinity;
    std::optional<double> hellinger_one_minus;
    /// KS only: location of the supremum.
    std::optional<double> argmax;
};

/// Integral of sqrt(f_KW f_LNGB) over (0,1).
inline double hellinger_affinity(const KwParams& kw, const LngbParams& lngb, const QuadratureSpec& q = {}) {
    const double log_norm = detail::lngb_log_norm(lngb);
    return integrate_unit(
        [&](double x, double xc) {
            return std::exp(0.5 * (detail::kw_log_pdf(kw, x, xc) + detail::lngb_log_pdf(lngb, log_norm, x, xc)));
        },
        q);
}

/// Hellinger distance int (sqrt f - sqrt g)^2 = 2 - 2 * affinity, by quadrature.
/// The result also carries 1 - affinity, the other normalization in use.
inline DivergenceResult hellinger(const KwParams& kw, const LngbParams& lngb, const QuadratureSpec& q = {}) {
    const double aff = hellinger_affinity(kw, lngb, q);
    DivergenceResult r;
    r.measure = Measure::Hellinger;
    r.method = Method::Quadrature;
    r.affinity = aff;
    r.value = 2.0 - 2.0 * aff;
    r.hellinger_one_minus = 1.0 - aff;
    return r;
}

/// Hypergeometric closed form of the affinity:
///   sqrt(alpha delta) G((a+alpha)/2) G((b+delta)/2) sqrt(beta^a / B(a,b))
///     * 2F1~((a+b)/2, (a+alpha)/2; (a+b+alpha+delta)/2; 1 - beta).
/// It integrates x^((a+alpha)/2-1) (1-x)^((b+delta)/2-1), i.e. it treats
/// (1 - x^alpha) as (1 - x), so it is exact only on the alpha = 1 slice.
inline double hellinger_affinity_closed_form(const KwParams& kw, const LngbParams& lngb) {
    const double al = kw.alpha(), de = kw.delta();
    const double a = lngb.a(), b = lngb.b(), be = lngb.beta();
    const double f = gauss_2f1_regularized(0.5 * (a + b), 0.5 * (a + al), 0.5 * (a + b + al + de), 1.0 - be);
    if (!(f > 0.0)) throw NumericError("hellinger_closed_form: non-positive hypergeometric factor", f);
    const double log_aff = 0.5 * std::log(al * de) + log_gamma(0.5 * (a + al)) + log_gamma(0.5 * (b + de)) +
                           0.5 * (a * std::log(be) - log_beta(a, b)) + std::log(f);
    return std::exp(log_aff);
}

inline DivergenceResult hellinger_closed_form(const KwParams& kw, const LngbParams& lngb) {
    const double aff = hellinger_affinity_closed_form(kw, lngb);
    DivergenceResult r;
    r.measure = Measure::Hellinger;
    r.method = Method::ClosedForm;
    r.affinity = aff;
    r.value = 2.0 - 2.0 * aff;
    r.hellinger_one_minus = 1.0 - aff;
    return r;
}

namespace detail {

struct EndpointExponents {
    double at_zero;
    double at_one;
};

inline EndpointExponents exponents(const KwParams& p) { return {p.alpha() - 1.0, p.delta() - 1.0}; }
inline EndpointExponents exponents(const LngbParams& p) { return {p.a() - 1.0, p.b() - 1.0}; }

// f^(1+lambda) g^(-lambda) behaves like x^e near each endpoint; the integral
// converges iff e > -1 at both ends.
inline void require_pwd_feasible(const EndpointExponents& f, const EndpointExponents& g, double lambda) {
    const double e0 = (1.0 + lambda) * f.at_zero - lambda * g.at_zero;
    const double e1 = (1.0 + lambda) * f.at_one - lambda * g.at_one;
    auto fail = [&](const char* end, double e) {
        std::ostringstream os;
        os << "power divergence diverges at " << end << ": integrand ~ " << (end[4] == '0' ? "x" : "(1-x)")
           << "^" << e << " with lambda = " << lambda;
        throw InfeasibleError(os.str());
    };
    if (!(e0 > -1.0)) fail("x -> 0", e0);
    if (!(e1 > -1.0)) fail("x -> 1", e1);
}

} // namespace detail

/// Cressie-Read power divergence
///   PWD(f, g; lambda) = 1/(lambda(lambda+1)) int [(f/g)^lambda - 1] f dx,
/// with lambda = 0 and lambda = -1 taken as their limits KL(f||g) and KL(g||f).
inline DivergenceResult power_divergence(const KwParams& kw, const LngbParams& lngb, double lambda,
                                         PwdDirection direction, const QuadratureSpec& q = {}) {
    if (!std::isfinite(lambda)) throw DomainError("power_divergence: lambda must be finite");
    const double log_norm = detail::lngb_log_norm(lngb);
    const bool kw_is_f = direction == PwdDirection::KwFromLngb;
    auto log_f = [&](double x, double xc) {
        return kw_is_f ? detail::kw_log_pdf(kw, x, xc) : detail::lngb_log_pdf(lngb, log_norm, x, xc);
    };
    auto log_g = [&](double x, double xc) {
        return kw_is_f ? detail::lngb_log_pdf(lngb, log_norm, x, xc) : detail::kw_log_pdf(kw, x, xc);
    };

    DivergenceResult r;
    r.measure = Measure::PowerDivergence;
    r.method = Method::Quadrature;
    r.lambda = lambda;
    r.direction = direction;

    if (lambda == 0.0) {
        r.value = integrate_unit([&](double x, double xc) {
            const double lf = log_f(x, xc);
            const double f = std::exp(lf);
            return f == 0.0 ? 0.0 : f * (lf - log_g(x, xc));
        }, q);
        return r;
    }
    if (lambda == -1.0) {
        r.value = integrate_unit([&](double x, double xc) {
            const double lg = log_g(x, xc);
            const double g = std::exp(lg);
            return g == 0.0 ? 0.0 : g * (lg - log_f(x, xc));
        }, q);
        return r;
    }

    const auto ef = kw_is_f ? detail::exponents(kw) : detail::exponents(lngb);
    const auto eg = kw_is_f ? detail::exponents(lngb) : detail::exponents(kw);
    detail::require_pwd_feasible(ef, eg, lambda);

    const double scale = 1.0 / (lambda * (lambda + 1.0));
    r.value = scale * integrate_unit([&](double x, double xc) {
        const double lf = log_f(x, xc);
        const double t = lambda * (lf - log_g(x, xc));
        // f * ((f/g)^lambda - 1)
        if (t > 1.0) return std::exp(lf + t) - std::exp(lf);
        const double f = std::exp(lf);
        return f == 0.0 ? 0.0 : f * std::expm1(t);
    }, q);
    return r;
}

/// sup_x |F_KW(x) - F_LNGB(x)|: a 4096-point grid (uniform, merged with a
/// logistic grid that reaches into both tails) followed by golden-section
/// refinement inside the best bracket.
inline DivergenceResult ks_distance(const KwParams& kw, const LngbParams& lngb) {
    auto gap = [&](double x) { return std::abs(kw_cdf(kw, x) - lngb_cdf(lngb, x)); };

    constexpr int uniform_points = 4096;
    constexpr int tail_points = 512;
    std::vector<double> grid;
    grid.reserve(uniform_points + tail_points + 2);
    for (int i = 1; i < uniform_points; ++i) grid.push_back(static_cast<double>(i) / uniform_points);
    for (int i = 0; i <= tail_points; ++i) {
        const double s = -37.0 + 74.0 * i / tail_points;
        grid.push_back(1.0 / (1.0 + std::exp(-s)));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid.erase(std::remove_if(grid.begin(), grid.end(), [](double x) { return !(x > 0.0 && x < 1.0); }),
               grid.end());

    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = gap(grid[i]);
        if (v > best_val) { best_val = v; best = i; }
    }
    double lo = best == 0 ? 0.0 : grid[best - 1];
    double hi = best + 1 == grid.size() ? 1.0 : grid[best + 1];

    // Golden-section maximization of |F - G| on [lo, hi].
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = gap(x1), f2 = gap(x2);
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * std::max(1.0, std::abs(lo)) && (hi - lo) > 1e-300; ++it) {
        if (f1 < f2) {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + inv_phi * (hi - lo); f2 = gap(x2);
        } else {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - inv_phi * (hi - lo); f1 = gap(x1);
        }
    }
    double arg = grid[best];
    double value = best_val;
    if (f1 > value) { value = f1; arg = x1; }
    if (f2 > value) { value = f2; arg = x2; }

    DivergenceResult r;
    r.measure = Measure::KolmogorovSmirnov;
    r.method = Method::GridSearch;
    r.value = value;
    r.argmax = arg;
    return r;
}

} // namespace kwlngb
