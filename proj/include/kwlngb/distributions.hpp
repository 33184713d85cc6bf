#pragma once

// Kumaraswamy (KW) and Libby-Novick generalized beta (LNGB) laws on (0,1).

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kwlngb/errors.hpp"
#include "kwlngb/random.hpp"
#include "kwlngb/specfun.hpp"

namespace kwlngb {

namespace detail {

inline void require_shape(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << name << " must be positive and finite, got " << v;
        throw DomainError(os.str());
    }
}

inline void require_open_unit(double x, const char* what) {
    if (!(x > 0.0 && x < 1.0)) {
        std::ostringstream os;
        os << what << ": x must lie strictly inside (0, 1), got " << x;
        throw DomainError(os.str());
    }
}

// log(1 - exp(t)) for t < 0.
inline double log1mexp(double t) {
    return t > -std::numbers::ln2 ? std::log(-std::expm1(t)) : std::log1p(-std::exp(t));
}

} // namespace detail

/// Kumaraswamy shape pair. Density alpha*delta*x^(alpha-1)*(1-x^alpha)^(delta-1).
class KwParams {
public:
    KwParams(double alpha, double delta) : alpha_(alpha), delta_(delta) {
        detail::require_shape(alpha, "KW alpha");
        detail::require_shape(delta, "KW delta");
    }

    double alpha() const noexcept { return alpha_; }
    double delta() const noexcept { return delta_; }

    static constexpr int dimension = 2;

    friend bool operator==(const KwParams&, const KwParams&) = default;

private:
    double alpha_;
    double delta_;
};

/// Libby-Novick triple (a, b, beta). beta = 1 gives the classical Beta(a, b).
class LngbParams {
public:
    LngbParams(double a, double b, double beta) : a_(a), b_(b), beta_(beta) {
        detail::require_shape(a, "LNGB a");
        detail::require_shape(b, "LNGB b");
        detail::require_shape(beta, "LNGB beta");
    }

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    double beta() const noexcept { return beta_; }

    static constexpr int dimension = 3;

    friend bool operator==(const LngbParams&, const LngbParams&) = default;

private:
    double a_;
    double b_;
    double beta_;
};

/// Observations strictly inside (0,1), in input order.
///
/// Values equal to 0 or 1 are rejected rather than clamped: both
/// log-likelihoods are -infinity there. The sample also caches the
/// sufficient statistics shared by both fits and a fingerprint that
/// ties fit results to the data they came from.
class Sample {
public:
    explicit Sample(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw DomainError("Sample: at least one observation is required");
        std::vector<std::size_t> bad;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const double x = values_[i];
            if (!(x > 0.0 && x < 1.0)) bad.push_back(i);
        }
        if (!bad.empty()) {
            std::ostringstream os;
            os << "Sample: values must lie strictly inside (0, 1); offending positions:";
            for (std::size_t k = 0; k < bad.size() && k < 20; ++k) os << ' ' << bad[k];
            if (bad.size() > 20) os << " ...";
            throw DomainError(os.str());
        }
        std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
        for (double x : values_) {
            sum_log_ += std::log(x);
            sum_log1m_ += std::log1p(-x);
            std::uint64_t bits = 0;
            std::memcpy(&bits, &x, sizeof bits);
            for (int byte = 0; byte < 8; ++byte) {
                h ^= (bits >> (8 * byte)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        }
        fingerprint_ = h ^ values_.size();
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    double sum_log() const noexcept { return sum_log_; }
    double sum_log1m() const noexcept { return sum_log1m_; }
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

private:
    std::vector<double> values_;
    double sum_log_ = 0.0;
    double sum_log1m_ = 0.0;
    std::uint64_t fingerprint_ = 0;
};

// ---------------------------------------------------------------------------
// Densities evaluated at (x, 1 - x). The complement is passed separately so
// quadrature nodes close to 1 keep full precision.
// ---------------------------------------------------------------------------

namespace detail {

inline double kw_log_pdf(const KwParams& p, double x, double xc) {
    const double lx = x < 0.5 ? std::log(x) : std::log1p(-xc);
    const double log_1m_xa = log1mexp(p.alpha() * lx);
    return std::log(p.alpha()) + std::log(p.delta()) + (p.alpha() - 1.0) * lx +
           (p.delta() - 1.0) * log_1m_xa;
}

inline double lngb_log_norm(const LngbParams& p) {
    return p.a() * std::log(p.beta()) - log_beta(p.a(), p.b());
}

inline double lngb_log_pdf(const LngbParams& p, double log_norm, double x, double xc) {
    const double lx = x < 0.5 ? std::log(x) : std::log1p(-xc);
    const double l1mx = x < 0.5 ? std::log1p(-x) : std::log(xc);
    // (1-x)^(b-1) [1 - (1-beta) x]^-(a+b) = (1-x)^-(a+1) [1 + beta x/(1-x)]^-(a+b)
    return log_norm + (p.a() - 1.0) * lx - (p.a() + 1.0) * l1mx -
           (p.a() + p.b()) * std::log1p(p.beta() * x / xc);
}

inline double lngb_log_pdf(const LngbParams& p, double x, double xc) {
    return lngb_log_pdf(p, lngb_log_norm(p), x, xc);
}

} // namespace detail

inline double kw_log_pdf(const KwParams& p, double x) {
    detail::require_open_unit(x, "kw_log_pdf");
    return detail::kw_log_pdf(p, x, 1.0 - x);
}

inline double kw_pdf(const KwParams& p, double x) { return std::exp(kw_log_pdf(p, x)); }

inline double kw_cdf(const KwParams& p, double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("kw_cdf: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    // 1 - (1 - x^alpha)^delta
    return -std::expm1(p.delta() * detail::log1mexp(p.alpha() * std::log(x)));
}

inline double kw_quantile(const KwParams& p, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("kw_quantile: u must lie in (0, 1)");
    const double inner = -std::expm1(std::log1p(-u) / p.delta()); // 1 - (1-u)^(1/delta)
    return std::exp(std::log(inner) / p.alpha());
}

inline double lngb_log_pdf(const LngbParams& p, double x) {
    detail::require_open_unit(x, "lngb_log_pdf");
    return detail::lngb_log_pdf(p, x, 1.0 - x);
}

inline double lngb_pdf(const LngbParams& p, double x) { return std::exp(lngb_log_pdf(p, x)); }

/// CDF via the change of variable t = beta x / (1 - (1 - beta) x), which maps
/// the LNGB law onto a classical Beta(a, b).
inline double lngb_cdf(const LngbParams& p, double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("lngb_cdf: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double xc = 1.0 - x;
    const double denom = xc + p.beta() * x;
    const double t = p.beta() * x / denom;
    if (t <= 0.5) return boost::math::ibeta(p.a(), p.b(), t);
    const double tc = xc / denom;
    return boost::math::ibetac(p.b(), p.a(), tc);
}

namespace detail {

struct UnitDraw {
    double x;
    double xc;
};

// Beta quantile q pushed through q -> q / (beta + (1 - beta) q).
inline UnitDraw lngb_quantile_pair(const LngbParams& p, double u) {
    const auto [q, qc] = inv_reg_inc_beta(u, p.a(), p.b());
    const double denom = p.beta() * qc + q; // beta + (1 - beta) q
    return {q / denom, p.beta() * qc / denom};
}

} // namespace detail

inline double lngb_quantile(const LngbParams& p, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("lngb_quantile: u must lie in (0, 1)");
    return detail::lngb_quantile_pair(p, u).x;
}

// ---------------------------------------------------------------------------
// Sampling by inversion. Draws that round onto an endpoint are redrawn; this
// happens only for extreme shapes and keeps every value inside (0, 1).
// ---------------------------------------------------------------------------

inline Sample kw_sample(const KwParams& p, std::size_t count, RandomStream& rng) {
    if (count == 0) throw DomainError("kw_sample: count must be positive");
    std::vector<double> out;
    out.reserve(count);
    while (out.size() < count) {
        const double x = kw_quantile(p, rng.uniform_open());
        if (x > 0.0 && x < 1.0) out.push_back(x);
    }
    return Sample(std::move(out));
}

inline Sample lngb_sample(const LngbParams& p, std::size_t count, RandomStream& rng) {
    if (count == 0) throw DomainError("lngb_sample: count must be positive");
    std::vector<double> out;
    out.reserve(count);
    while (out.size() < count) {
        const double x = detail::lngb_quantile_pair(p, rng.uniform_open()).x;
        if (x > 0.0 && x < 1.0) out.push_back(x);
    }
    return Sample(std::move(out));
}

} // namespace kwlngb
