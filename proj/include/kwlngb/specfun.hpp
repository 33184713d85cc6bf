#pragma once

// Special functions and quadrature on the open unit interval.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "kwlngb/errors.hpp"

namespace kwlngb {

namespace detail {

inline void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        std::ostringstream os;
        os << what << ": argument must be positive and finite, got " << x;
        throw DomainError(os.str());
    }
}

// Signed log|Gamma(x)| for any non-pole real x.
inline std::pair<double, int> log_abs_gamma(double x) {
    if (x <= 0.0 && x == std::floor(x)) {
        throw DomainError("log_abs_gamma: pole at non-positive integer");
    }
    int sign = 1;
    const double value = boost::math::lgamma(x, &sign);
    return {value, sign};
}

// 1/Gamma(x), zero at the poles.
inline double reciprocal_gamma(double x) {
    if (x <= 0.0 && x == std::floor(x)) return 0.0;
    const auto [lg, sign] = log_abs_gamma(x);
    return sign * std::exp(-lg);
}

} // namespace detail

/// Natural log of the gamma function for x > 0.
inline double log_gamma(double x) {
    detail::require_positive(x, "log_gamma");
    return boost::math::lgamma(x);
}

inline double digamma(double x) {
    detail::require_positive(x, "digamma");
    return boost::math::digamma(x);
}

inline double trigamma(double x) {
    detail::require_positive(x, "trigamma");
    return boost::math::trigamma(x);
}

inline double log_beta(double a, double b) {
    detail::require_positive(a, "log_beta");
    detail::require_positive(b, "log_beta");
    const double small = std::min(a, b), large = std::max(a, b);
    if (large > 1e3 * small && large > 10.0) {
        // Gamma(large) / Gamma(large + small) directly, avoiding the
        // cancellation between two huge log-gamma values.
        const double ratio = boost::math::tgamma_delta_ratio(large, small);
        if (ratio > 1e-300 && std::isfinite(ratio)) return log_gamma(small) + std::log(ratio);
    }
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
    detail::require_positive(a, "reg_inc_beta");
    detail::require_positive(b, "reg_inc_beta");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("reg_inc_beta: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    return boost::math::ibeta(a, b, x);
}

/// Inverse of reg_inc_beta in x. Returns {q, 1 - q} with the complement
/// computed directly so that values near 1 keep their precision.
inline std::pair<double, double> inv_reg_inc_beta(double u, double a, double b) {
    detail::require_positive(a, "inv_reg_inc_beta");
    detail::require_positive(b, "inv_reg_inc_beta");
    if (!(u > 0.0 && u < 1.0)) throw DomainError("inv_reg_inc_beta: u must lie in (0, 1)");
    if (u <= 0.5) {
        double qc = 0.0;
        const double q = boost::math::ibeta_inv(a, b, u, &qc);
        return {q, qc};
    }
    // I_x(a, b) = u  <=>  I_{1-x}(b, a) = 1 - u
    double q = 0.0;
    const double qc = boost::math::ibeta_inv(b, a, 1.0 - u, &q);
    return {q, qc};
}

inline double std_normal_cdf(double z) {
    if (std::isnan(z)) throw DomainError("std_normal_cdf: NaN argument");
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Upper tail 1 - Phi(z), accurate for large z.
inline double std_normal_sf(double z) {
    if (std::isnan(z)) throw DomainError("std_normal_sf: NaN argument");
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

inline double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("std_normal_quantile: p must lie in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// ---------------------------------------------------------------------------
// Gauss hypergeometric function 2F1(p, q; r; z) for real z < 1.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int hyp_max_terms = 200000;

inline bool near_integer(double x, double tol = 1e-9) {
    return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

inline double hyp2f1_series(double p, double q, double r, double z) {
    double term = 1.0;
    double sum = 1.0;
    int small_in_a_row = 0;
    for (int k = 0; k < hyp_max_terms; ++k) {
        const double kk = k;
        term *= (p + kk) * (q + kk) / ((r + kk) * (kk + 1.0)) * z;
        sum += term;
        if (term == 0.0) return sum;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) {
            if (++small_in_a_row >= 3) return sum;
        } else {
            small_in_a_row = 0;
        }
    }
    std::ostringstream os;
    os << "gauss_2f1: series did not converge for (" << p << ", " << q << "; " << r << "; " << z << ")";
    throw NumericError(os.str(), sum);
}

// Connection formula for z in (0.5, 1); s = r - p - q must not be an integer.
inline double hyp2f1_connection(double p, double q, double r, double z) {
    const double s = r - p - q;
    // 2F1(p,q;r;z) = A * 2F1(p,q;p+q-r+1;1-z) + B * (1-z)^s * 2F1(r-p,r-q;s+1;1-z)
    const double w = 1.0 - z;
    const auto [lg_r, sg_r] = log_abs_gamma(r);
    const auto [lg_s, sg_s] = log_abs_gamma(s);
    const auto [lg_ms, sg_ms] = log_abs_gamma(-s);
    const double first = sg_r * sg_s * std::exp(lg_r + lg_s) * reciprocal_gamma(r - p) *
                         reciprocal_gamma(r - q);
    const double second = sg_r * sg_ms * std::exp(lg_r + lg_ms) * reciprocal_gamma(p) *
                          reciprocal_gamma(q) * std::pow(w, s);
    double total = 0.0;
    if (first != 0.0) total += first * hyp2f1_series(p, q, p + q - r + 1.0, w);
    if (second != 0.0) total += second * hyp2f1_series(r - p, r - q, s + 1.0, w);
    return total;
}

// z in [0, 1).
inline double hyp2f1_unit(double p, double q, double r, double z) {
    if (z <= 0.5) return hyp2f1_series(p, q, r, z);
    const double s = r - p - q;
    if (near_integer(s)) {
        if (z <= 0.9) return hyp2f1_series(p, q, r, z);
        // The connection formula degenerates at integer s. The function is
        // analytic in r, so average symmetric offsets and cancel the e^2 term.
        auto avg = [&](double e) {
            return 0.5 * (hyp2f1_connection(p, q, r + e, z) + hyp2f1_connection(p, q, r - e, z));
        };
        const double e = 2.5e-4 * std::max(1.0, std::abs(r));
        return (4.0 * avg(e) - avg(2.0 * e)) / 3.0;
    }
    return hyp2f1_connection(p, q, r, z);
}

} // namespace detail

/// Gauss hypergeometric 2F1(p, q; r; z), z < 1.
inline double gauss_2f1(double p, double q, double r, double z) {
    if (!(z < 1.0) || !std::isfinite(z)) throw DomainError("gauss_2f1: z must be finite and < 1");
    if (r <= 0.0 && r == std::floor(r)) throw DomainError("gauss_2f1: r is a non-positive integer");
    if (z == 0.0) return 1.0;
    if (z > 0.0) return detail::hyp2f1_unit(p, q, r, z);
    if (z >= -0.5) return detail::hyp2f1_series(p, q, r, z);
    // Pfaff: 2F1(p,q;r;z) = (1-z)^{-p} 2F1(p, r-q; r; z/(z-1)), with z/(z-1) in (1/3, 1).
    const double w = z / (z - 1.0);
    return std::pow(1.0 - z, -p) * detail::hyp2f1_unit(p, r - q, r, w);
}

/// Regularized 2F1(p, q; r; z) / Gamma(r), with the gamma factor applied in log space.
inline double gauss_2f1_regularized(double p, double q, double r, double z) {
    const double f = gauss_2f1(p, q, r, z);
    if (f == 0.0) return 0.0;
    const auto [lg, sign] = detail::log_abs_gamma(r);
    return sign * (f < 0 ? -1.0 : 1.0) * std::exp(std::log(std::abs(f)) - lg);
}

// ---------------------------------------------------------------------------
// Quadrature on (0, 1)
// ---------------------------------------------------------------------------

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    int max_depth = 20;

    void validate() const {
        if (!(abs_tol > 0.0) || !std::isfinite(abs_tol) || !(rel_tol > 0.0) ||
            !std::isfinite(rel_tol)) {
            throw DomainError("QuadratureSpec: tolerances must be positive and finite");
        }
        if (max_depth < 1) throw DomainError("QuadratureSpec: max_depth must be >= 1");
    }
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int levels = 0;
    long evaluations = 0;
};

/// An integrand on (0,1) that receives both x and 1 - x. Supplying the
/// complement exactly lets integrands resolve singularities at x -> 1.
template <class F>
concept UnitIntegrandWithComplement = requires(F f, double x) {
    { f(x, x) } -> std::convertible_to<double>;
};

template <class F>
concept UnitIntegrand = requires(F f, double x) {
    { f(x) } -> std::convertible_to<double>;
};

namespace detail {

// Double-exponential (tanh-sinh) rule mapped onto (0,1):
//   x = 1 / (1 + exp(-2u)),  1 - x = exp(-2u) / (1 + exp(-2u)),  u = (pi/2) sinh t.
// Both tails are generated from the small side so neither x nor 1 - x rounds.
template <UnitIntegrandWithComplement F>
QuadratureResult tanh_sinh_unit(F&& f, const QuadratureSpec& spec) {
    spec.validate();
    constexpr double half_pi = std::numbers::pi / 2.0;
    // Beyond this t the small-side coordinate underflows.
    constexpr double t_max = 6.1;

    QuadratureResult out;
    auto eval_pair = [&](double t) {
        // Contribution of nodes at +t and -t; t > 0.
        const double u = half_pi * std::sinh(t);
        const double e = std::exp(-2.0 * u);
        const double small = e / (1.0 + e);
        const double large = 1.0 / (1.0 + e);
        const double w = std::numbers::pi * std::cosh(t) * e / ((1.0 + e) * (1.0 + e));
        if (w == 0.0 || small == 0.0) return 0.0;
        const double right = f(large, small); // near x = 1
        const double left = f(small, large);  // near x = 0
        out.evaluations += 2;
        if (!std::isfinite(right) || !std::isfinite(left)) {
            std::ostringstream os;
            os << "integrate_unit: integrand not finite near x = " << small << " or 1 - " << small;
            throw NumericError(os.str(), out.value, std::numeric_limits<double>::infinity());
        }
        return w * (right + left);
    };

    double h = 1.0;
    const double centre = f(0.5, 0.5);
    out.evaluations = 1;
    if (!std::isfinite(centre)) throw NumericError("integrate_unit: integrand not finite at 0.5");
    double sum = centre * std::numbers::pi / 4.0;
    for (int k = 1; k * h <= t_max; ++k) sum += eval_pair(k * h);
    double estimate = h * sum;
    out.value = estimate;

    double error = std::numeric_limits<double>::infinity();
    for (int level = 1; level <= spec.max_depth; ++level) {
        h *= 0.5;
        double added = 0.0;
        for (int k = 1; k * h <= t_max; k += 2) added += eval_pair(k * h);
        sum += added;
        const double next = h * sum;
        error = std::abs(next - estimate);
        estimate = next;
        out.value = estimate;
        out.error = error;
        out.levels = level;
        if (level >= 3 && error <= std::max(spec.abs_tol, spec.rel_tol * std::abs(estimate))) {
            return out;
        }
    }
    std::ostringstream os;
    os << "integrate_unit: no convergence within depth " << spec.max_depth << " (estimate "
       << estimate << ", error " << error << ")";
    throw NumericError(os.str(), estimate, error);
}

} // namespace detail

/// Integral of f over (0,1) with its error estimate.
template <class F>
QuadratureResult integrate_unit_detailed(F&& f, const QuadratureSpec& spec = {}) {
    if constexpr (UnitIntegrandWithComplement<F>) {
        return detail::tanh_sinh_unit(std::forward<F>(f), spec);
    } else {
        static_assert(UnitIntegrand<F>, "integrand must be callable as f(x) or f(x, 1 - x)");
        return detail::tanh_sinh_unit([&f](double x, double /*xc*/) { return f(x); }, spec);
    }
}

template <class F>
double integrate_unit(F&& f, const QuadratureSpec& spec = {}) {
    return integrate_unit_detailed(std::forward<F>(f), spec).value;
}

} // namespace kwlngb
