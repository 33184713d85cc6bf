#pragma once

// Maximum-likelihood fits of the KW and LNGB families.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "kwlngb/distributions.hpp"
#include "kwlngb/errors.hpp"
#include "kwlngb/optimize.hpp"
#include "kwlngb/specfun.hpp"

namespace kwlngb {

enum class Family { Kw, Lngb };

inline const char* family_name(Family f) { return f == Family::Kw ? "KW" : "LNGB"; }

template <class Params>
struct FitResult {
    Params params;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    /// LNGB only: |ln beta| reached the identification cap.
    bool at_boundary = false;
    std::size_t n = 0;
    std::uint64_t sample_fingerprint = 0;
    std::string diagnostics;
};

using KwFit = FitResult<KwParams>;
using LngbFit = FitResult<LngbParams>;

struct FitOptions {
    /// Convergence requires the score norm to be at most this times n.
    double score_tol_per_obs = 1e-6;
    /// |ln beta| cap for the weakly identified LNGB direction.
    double log_beta_cap = std::log(1e6);
};

namespace detail {

template <class Params>
void finish_information_criteria(FitResult<Params>& r) {
    constexpr double k = Params::dimension;
    r.aic = 2.0 * k - 2.0 * r.log_likelihood;
    r.bic = k * std::log(static_cast<double>(r.n)) - 2.0 * r.log_likelihood;
}

inline void require_non_degenerate(const Sample& s) {
    const auto v = s.values();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) throw DegenerateSampleError("sample is degenerate: all observations are identical");
}

} // namespace detail

// ---------------------------------------------------------------------------
// KW
// ---------------------------------------------------------------------------

inline double kw_loglik(const KwParams& p, const Sample& s) {
    double sum_l1m = 0.0;
    for (double x : s.values()) sum_l1m += detail::log1mexp(p.alpha() * std::log(x));
    const double n = static_cast<double>(s.size());
    return n * std::log(p.alpha()) + n * std::log(p.delta()) + (p.alpha() - 1.0) * s.sum_log() +
           (p.delta() - 1.0) * sum_l1m;
}

/// (d/d alpha, d/d delta) of the KW log-likelihood.
inline std::array<double, 2> kw_score(const KwParams& p, const Sample& s) {
    double sum_l1m = 0.0;
    double sum_ratio = 0.0; // sum x^a ln x / (1 - x^a)
    for (double x : s.values()) {
        const double lx = std::log(x);
        const double t = p.alpha() * lx;
        sum_l1m += detail::log1mexp(t);
        sum_ratio += lx * std::exp(t) / (-std::expm1(t));
    }
    const double n = static_cast<double>(s.size());
    return {n / p.alpha() + s.sum_log() - (p.delta() - 1.0) * sum_ratio, n / p.delta() + sum_l1m};
}

/// Closed-form delta maximizing the KW likelihood for a fixed alpha.
inline double kw_profile_delta(double alpha, const Sample& s) {
    double sum_l1m = 0.0;
    for (double x : s.values()) sum_l1m += detail::log1mexp(alpha * std::log(x));
    return -static_cast<double>(s.size()) / sum_l1m;
}

/// KW maximum likelihood by the profile method: delta is eliminated in
/// closed form and the profile score in alpha is bracketed and solved.
inline KwFit fit_kw(const Sample& s, const FitOptions& opt = {}) {
    if (s.size() < 2) throw DomainError("fit_kw: at least two observations are required");
    detail::require_non_degenerate(s);

    std::vector<double> logs(s.size());
    std::transform(s.values().begin(), s.values().end(), logs.begin(), [](double x) { return std::log(x); });
    const double n = static_cast<double>(s.size());
    const double sum_log = s.sum_log();

    // Profile score: d/d alpha of l(alpha, delta_hat(alpha)), by the envelope theorem.
    auto profile_score = [&](double alpha) {
        double sum_l1m = 0.0;
        double sum_ratio = 0.0;
        for (double lx : logs) {
            const double t = alpha * lx;
            sum_l1m += detail::log1mexp(t);
            sum_ratio += lx * std::exp(t) / (-std::expm1(t));
        }
        const double delta = -n / sum_l1m;
        return n / alpha + sum_log - (delta - 1.0) * sum_ratio;
    };

    KwFit out{KwParams(1.0, 1.0)};
    out.n = s.size();
    out.sample_fingerprint = s.fingerprint();

    double lo = 1.0, hi = 1.0;
    double f_lo = profile_score(lo);
    double f_hi = f_lo;
    int expansions = 0;
    constexpr int max_expansions = 80;
    if (f_lo > 0.0) {
        while (f_hi > 0.0 && expansions < max_expansions) {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = profile_score(hi);
            ++expansions;
        }
    } else {
        while (f_lo < 0.0 && expansions < max_expansions) {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = profile_score(lo);
            ++expansions;
        }
    }

    double alpha = 1.0;
    std::uintmax_t iters = 0;
    if (!std::isfinite(f_lo) || !std::isfinite(f_hi) || f_lo * f_hi > 0.0) {
        out.converged = false;
        out.diagnostics = "could not bracket the profile score root";
        alpha = (std::abs(f_lo) < std::abs(f_hi)) ? lo : hi;
    } else if (f_lo == 0.0 || f_hi == 0.0) {
        alpha = f_lo == 0.0 ? lo : hi;
    } else {
        iters = 200;
        const auto bracket = boost::math::tools::toms748_solve(
            profile_score, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50), iters);
        alpha = 0.5 * (bracket.first + bracket.second);
    }

    const KwParams p(alpha, kw_profile_delta(alpha, s));
    const auto g = kw_score(p, s);
    out.params = p;
    out.log_likelihood = kw_loglik(p, s);
    out.iterations = static_cast<int>(iters) + expansions;
    out.gradient_norm = std::hypot(g[0], g[1]);
    if (out.diagnostics.empty()) {
        out.converged = out.gradient_norm <= opt.score_tol_per_obs * n && std::isfinite(out.log_likelihood);
        if (!out.converged) out.diagnostics = "score norm above tolerance";
    }
    detail::finish_information_criteria(out);
    return out;
}

// ---------------------------------------------------------------------------
// LNGB
// ---------------------------------------------------------------------------

/// Averages of the beta-dependent terms of the LNGB log-density:
/// L = E ln(1 + beta X / (1 - X)), R1 = E X / (1 - (1-beta) X), R2 = E [X / (1 - (1-beta) X)]^2.
/// L is ln(1 - (1-beta) X) - ln(1 - X), which stays accurate when b is huge.
struct LngbBetaTerms {
    double log_term;
    double ratio;
    double ratio_sq;
};

/// Per-observation sufficient statistics of a sample.
class SampleMoments {
public:
    explicit SampleMoments(const Sample& s)
        : sample_(&s),
          n_(static_cast<double>(s.size())),
          mean_log_(s.sum_log() / n_),
          mean_log1m_(s.sum_log1m() / n_) {}

    double mean_log() const { return mean_log_; }
    double mean_log1m() const { return mean_log1m_; }

    LngbBetaTerms beta_terms(double beta, bool need_second = false) const {
        double l = 0.0, r1 = 0.0, r2 = 0.0;
        for (double x : sample_->values()) {
            const double xc = 1.0 - x;
            const double d = xc + beta * x;
            l += std::log1p(beta * x / xc);
            const double r = x / d;
            r1 += r;
            if (need_second) r2 += r * r;
        }
        return {l / n_, r1 / n_, r2 / n_};
    }

    /// Mean and variance of X.
    std::pair<double, double> mean_var() const {
        double m = 0.0;
        for (double x : sample_->values()) m += x;
        m /= n_;
        double v = 0.0;
        for (double x : sample_->values()) v += (x - m) * (x - m);
        return {m, v / n_};
    }

private:
    const Sample* sample_;
    double n_;
    double mean_log_;
    double mean_log1m_;
};

namespace detail {

// Average LNGB log-density under the distribution summarized by `m`, with
// gradient and Hessian in the natural coordinates (a, b, beta).
template <class Moments>
struct LngbObjective {
    const Moments& m;

    struct Value {
        double value;
        optimize::Vec<3> grad;
        optimize::Mat<3> hess;
    };

    Value operator()(double a, double b, double beta, bool need_hessian) const {
        const LngbBetaTerms t = m.beta_terms(beta, need_hessian);
        const double lb = std::log(beta);
        Value v{};
        v.value = a * lb - log_beta(a, b) + (a - 1.0) * m.mean_log() - (a + 1.0) * m.mean_log1m() -
                  (a + b) * t.log_term;
        const double psi_ab = digamma(a + b);
        v.grad = {lb - digamma(a) + psi_ab + m.mean_log() - m.mean_log1m() - t.log_term,
                  -digamma(b) + psi_ab - t.log_term,
                  a / beta - (a + b) * t.ratio};
        if (need_hessian) {
            const double tri_ab = trigamma(a + b);
            v.hess[0][0] = -trigamma(a) + tri_ab;
            v.hess[0][1] = v.hess[1][0] = tri_ab;
            v.hess[1][1] = -trigamma(b) + tri_ab;
            v.hess[0][2] = v.hess[2][0] = 1.0 / beta - t.ratio;
            v.hess[1][2] = v.hess[2][1] = -t.ratio;
            v.hess[2][2] = -a / (beta * beta) + (a + b) * t.ratio_sq;
        }
        return v;
    }
};

struct LngbMaximum {
    LngbParams params;
    double value;              // average log-density at the optimum
    optimize::Vec<3> gradient; // natural coordinates, per observation
    bool negative_definite;
    bool at_boundary;
    int iterations;
    std::string message;
};

inline optimize::Mat<3> negate(const optimize::Mat<3>& h) {
    optimize::Mat<3> out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = -h[i][j];
    return out;
}

// Hessian of -objective in log coordinates.
inline optimize::Mat<3> log_coord_neg_hessian(const optimize::Vec<3>& p, const optimize::Vec<3>& g,
                                              const optimize::Mat<3>& h) {
    optimize::Mat<3> out{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out[i][j] = -p[i] * p[j] * h[i][j];
        out[i][i] -= p[i] * g[i];
    }
    return out;
}

inline double norm3(const optimize::Vec<3>& g) { return std::sqrt(optimize::dot(g, g)); }

/// Maximizes the average LNGB log-density over (ln a, ln b, ln beta) by BFGS
/// from each start, then polishes the best candidate with Newton steps.
template <class Moments>
LngbMaximum maximize_lngb(const Moments& moments, const std::vector<optimize::Vec<3>>& starts,
                          double grad_tol, double log_beta_cap) {
    const LngbObjective<Moments> obj{moments};
    constexpr double log_shape_cap = 30.0; // a, b in [e^-30, e^30]
    const optimize::Bounds<3> bounds{{-log_shape_cap, -log_shape_cap, -log_beta_cap},
                                     {log_shape_cap, log_shape_cap, log_beta_cap}};

    auto neg_objective = [&](const optimize::Vec<3>& th) {
        const double a = std::exp(th[0]), b = std::exp(th[1]), be = std::exp(th[2]);
        optimize::Evaluation<3> e{};
        try {
            const auto v = obj(a, b, be, false);
            e.value = -v.value;
            e.gradient = {-a * v.grad[0], -b * v.grad[1], -be * v.grad[2]};
        } catch (const DomainError&) {
            e.value = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(e.value) || !std::isfinite(e.gradient[0]) || !std::isfinite(e.gradient[1]) ||
            !std::isfinite(e.gradient[2])) {
            e.value = std::numeric_limits<double>::infinity();
        }
        return e;
    };
    auto natural_grad = [](const optimize::Vec<3>& th, const optimize::Vec<3>& g_log_neg) {
        return optimize::Vec<3>{-g_log_neg[0] / std::exp(th[0]), -g_log_neg[1] / std::exp(th[1]),
                                -g_log_neg[2] / std::exp(th[2])};
    };
    auto stop = [&](const optimize::Vec<3>& th, const optimize::Evaluation<3>& e) {
        return norm3(natural_grad(th, e.gradient)) <= 0.1 * grad_tol;
    };

    std::optional<optimize::BfgsResult<3>> best;
    int total_iterations = 0;
    for (const auto& start : starts) {
        std::optional<optimize::Mat<3>> h0;
        try {
            const double a = std::exp(start[0]), b = std::exp(start[1]), be = std::exp(start[2]);
            const auto v = obj(a, b, be, true);
            h0 = optimize::spd_inverse(log_coord_neg_hessian({a, b, be}, v.grad, v.hess));
        } catch (const DomainError&) {
        }
        auto r = optimize::bfgs_minimize<3>(neg_objective, start, stop, bounds, h0);
        total_iterations += r.iterations;
        if (!std::isfinite(r.at.value)) continue;
        if (!best || r.at.value < best->at.value) best = r;
    }
    if (!best) throw NumericError("LNGB maximization: objective not finite from any start");

    // Newton polish with the analytic Hessian. With `fix_beta` the step is
    // restricted to (ln a, ln b) and beta stays where it is.
    auto polish = [&](optimize::Vec<3> th, bool fix_beta) {
        auto current = neg_objective(th);
        auto grad_norm = [&](const optimize::Vec<3>& g) { return fix_beta ? std::hypot(g[0], g[1]) : norm3(g); };
        for (int k = 0; k < 40; ++k) {
            const double a = std::exp(th[0]), b = std::exp(th[1]), be = std::exp(th[2]);
            const auto v = obj(a, b, be, true);
            if (grad_norm(v.grad) <= 0.01 * grad_tol) break;
            const auto nh = log_coord_neg_hessian({a, b, be}, v.grad, v.hess);
            const optimize::Vec<3> g_log{-a * v.grad[0], -b * v.grad[1], -be * v.grad[2]};
            optimize::Vec<3> step{};
            if (fix_beta) {
                const auto inv = optimize::spd_inverse<2>({{{nh[0][0], nh[0][1]}, {nh[1][0], nh[1][1]}}});
                if (!inv) break;
                const auto s2 = optimize::mat_vec(*inv, optimize::Vec<2>{g_log[0], g_log[1]});
                step = {s2[0], s2[1], 0.0};
            } else {
                const auto inv = optimize::spd_inverse(nh);
                if (!inv) break;
                step = optimize::mat_vec(*inv, g_log);
            }
            bool moved = false;
            for (double scale = 1.0; scale > 1e-6; scale *= 0.5) {
                optimize::Vec<3> trial{};
                for (int i = 0; i < 3; ++i)
                    trial[i] = std::clamp(th[i] - scale * step[i], bounds.lower[i], bounds.upper[i]);
                const auto e = neg_objective(trial);
                if (!std::isfinite(e.value)) continue;
                const double gn_trial = grad_norm(natural_grad(trial, e.gradient));
                if (e.value < current.value || gn_trial < grad_norm(v.grad)) {
                    th = trial;
                    current = e;
                    moved = true;
                    break;
                }
            }
            ++total_iterations;
            if (!moved) break;
        }
        return std::pair{th, current.value};
    };

    auto [th, value] = polish(best->x, false);
    bool capped = false;

    // The likelihood can keep rising along b -> inf, beta -> 0 with b*beta
    // fixed (or a -> inf, beta -> inf with a/beta fixed). When the search
    // stalls or drifts toward the cap, slide along that ridge to the cap and
    // maximize over (a, b) there.
    const bool near_cap = std::abs(th[2]) >= log_beta_cap - 2.0;
    if (!best->converged || near_cap) {
        const double side = th[2] < 0.0 ? -1.0 : 1.0;
        const double shift = std::abs(side * log_beta_cap - th[2]);
        optimize::Vec<3> start = th;
        start[2] = side * log_beta_cap;
        if (side < 0.0) start[1] = std::min(start[1] + shift, log_shape_cap);
        else start[0] = std::min(start[0] + shift, log_shape_cap);
        optimize::Bounds<3> fixed = bounds;
        fixed.lower[2] = fixed.upper[2] = start[2];
        const auto r = optimize::bfgs_minimize<3>(neg_objective, start, stop, fixed);
        total_iterations += r.iterations;
        if (std::isfinite(r.at.value)) {
            auto [th_cap, value_cap] = polish(r.x, true);
            const double a0 = std::exp(th[0]), b0 = std::exp(th[1]), be0 = std::exp(th[2]);
            const auto v0 = obj(a0, b0, be0, true);
            const bool interior_ok = norm3(v0.grad) <= grad_tol && optimize::is_positive_definite(negate(v0.hess));
            if (value_cap < value || (!interior_ok && value_cap <= value + 1e-9 * (1.0 + std::abs(value)))) {
                th = th_cap;
                value = value_cap;
                capped = true;
            }
        }
    }

    const double a = std::exp(th[0]), b = std::exp(th[1]), be = std::exp(th[2]);
    const auto v = obj(a, b, be, true);
    const auto nh = negate(v.hess);
    const bool nd = capped ? optimize::is_positive_definite<2>({{{nh[0][0], nh[0][1]}, {nh[1][0], nh[1][1]}}})
                           : optimize::is_positive_definite(nh);
    LngbMaximum out{LngbParams(a, b, be), v.value, v.grad, nd,
                    capped || std::abs(th[2]) >= log_beta_cap * (1.0 - 1e-12), total_iterations,
                    (capped || best->converged) ? std::string() : best->message};
    return out;
}

inline std::vector<optimize::Vec<3>> lngb_starts(double mean, double var) {
    std::vector<optimize::Vec<3>> starts{{0.0, 0.0, 0.0}};
    if (var > 0.0 && var < mean * (1.0 - mean)) {
        const double common = mean * (1.0 - mean) / var - 1.0;
        const double a0 = std::log(mean * common);
        const double b0 = std::log((1.0 - mean) * common);
        starts.push_back({a0, b0, 0.0});
        starts.push_back({a0, b0, std::log(0.5)});
        starts.push_back({a0, b0, std::log(2.0)});
    } else {
        starts.push_back({0.0, 0.0, std::log(0.5)});
        starts.push_back({0.0, 0.0, std::log(2.0)});
    }
    return starts;
}

} // namespace detail

inline double lngb_loglik(const LngbParams& p, const Sample& s) {
    double sum_log_term = 0.0;
    for (double x : s.values()) sum_log_term += std::log1p(p.beta() * x / (1.0 - x));
    const double n = static_cast<double>(s.size());
    return n * p.a() * std::log(p.beta()) - n * log_beta(p.a(), p.b()) + (p.a() - 1.0) * s.sum_log() -
           (p.a() + 1.0) * s.sum_log1m() - (p.a() + p.b()) * sum_log_term;
}

/// Partial derivatives of the LNGB log-likelihood in (a, b, beta).
inline std::array<double, 3> lngb_score(const LngbParams& p, const Sample& s) {
    const SampleMoments m(s);
    const auto v = detail::LngbObjective<SampleMoments>{m}(p.a(), p.b(), p.beta(), false);
    const double n = static_cast<double>(s.size());
    return {n * v.grad[0], n * v.grad[1], n * v.grad[2]};
}

/// LNGB maximum likelihood over the positive octant. Starts: (1,1,1), the
/// method-of-moments beta fit with beta = 1, and that fit with beta = 0.5 and 2.
inline LngbFit fit_lngb(const Sample& s, const FitOptions& opt = {}) {
    if (s.size() < 3) throw DomainError("fit_lngb: at least three observations are required");
    detail::require_non_degenerate(s);
    const SampleMoments m(s);
    const auto [mean, var] = m.mean_var();
    const double n = static_cast<double>(s.size());

    const auto best = detail::maximize_lngb(m, detail::lngb_starts(mean, var), opt.score_tol_per_obs,
                                            opt.log_beta_cap);
    LngbFit out{best.params};
    out.n = s.size();
    out.sample_fingerprint = s.fingerprint();
    out.log_likelihood = lngb_loglik(best.params, s);
    out.iterations = best.iterations;
    out.at_boundary = best.at_boundary;
    out.gradient_norm = out.at_boundary ? n * std::hypot(best.gradient[0], best.gradient[1])
                                        : n * detail::norm3(best.gradient);
    const bool small_score = out.gradient_norm <= opt.score_tol_per_obs * n;
    out.converged = small_score && best.negative_definite && std::isfinite(out.log_likelihood);
    if (!out.converged) {
        std::ostringstream os;
        if (!small_score) os << "score norm " << out.gradient_norm << " above tolerance; ";
        if (!best.negative_definite) os << "observed curvature not negative definite; ";
        if (!best.message.empty()) os << best.message;
        out.diagnostics = os.str();
    }
    if (out.at_boundary) out.diagnostics += (out.diagnostics.empty() ? "" : "; ") + std::string("beta at identification cap");
    detail::finish_information_criteria(out);
    return out;
}

} // namespace kwlngb
