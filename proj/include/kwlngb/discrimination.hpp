#pragma once

// Likelihood-ratio discrimination between KW and LNGB: pseudo-true
// parameters, asymptotic moments of the per-observation log-ratio,
// probability of correct selection, and minimum sample size.
//
// Sign convention: the per-observation log-ratio is always
//   g(x) = log f_LNGB(x) - log f_KW(x),
// with the true family at its true parameters and the rival at its
// pseudo-true parameters. Its mean is a KL divergence: >= 0 under an
// LNGB null and <= 0 under a KW null.

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "kwlngb/distributions.hpp"
#include "kwlngb/errors.hpp"
#include "kwlngb/fit.hpp"
#include "kwlngb/specfun.hpp"

namespace kwlngb {

struct AnalysisOptions {
    QuadratureSpec quadrature{};
    double stationarity_tol = 1e-7;
    double log_beta_cap = std::log(1e6);
    /// Variances at or below this are treated as the nested (identical-law) case.
    double nested_variance = 1e-12;
};

class NullHypothesis {
public:
    static NullHypothesis lngb(const LngbParams& p) { return NullHypothesis(p); }
    static NullHypothesis kw(const KwParams& p) { return NullHypothesis(p); }

    Family family() const { return std::holds_alternative<KwParams>(params_) ? Family::Kw : Family::Lngb; }
    const KwParams& kw_params() const { return std::get<KwParams>(params_); }
    const LngbParams& lngb_params() const { return std::get<LngbParams>(params_); }

private:
    explicit NullHypothesis(std::variant<KwParams, LngbParams> p) : params_(std::move(p)) {}
    std::variant<KwParams, LngbParams> params_;
};

struct NullAnalysis {
    NullHypothesis null;
    /// Rival-family parameters closest in KL to the null law.
    std::variant<KwParams, LngbParams> pseudo_true;
    double m_per_obs = 0.0;
    double var_per_obs = 0.0;
    bool at_boundary = false;

    Family family() const { return null.family(); }
    bool nested(const AnalysisOptions& opt = {}) const { return var_per_obs <= opt.nested_variance; }
};

// ---------------------------------------------------------------------------
// Expectations by quadrature
// ---------------------------------------------------------------------------

namespace detail {

inline auto lngb_weight(const LngbParams& p) {
    const double log_norm = lngb_log_norm(p);
    return [p, log_norm](double x, double xc) { return std::exp(lngb_log_pdf(p, log_norm, x, xc)); };
}

inline auto kw_weight(const KwParams& p) {
    return [p](double x, double xc) { return std::exp(kw_log_pdf(p, x, xc)); };
}

inline double log_of(double x, double xc) { return x < 0.5 ? std::log(x) : std::log1p(-xc); }
inline double log1m_of(double x, double xc) { return x < 0.5 ? std::log1p(-x) : std::log(xc); }

} // namespace detail

/// E_LNGB[log f_KW(X; rival)] under X ~ LNGB(true).
inline double expected_rival_loglik_under_lngb(const LngbParams& truth, const KwParams& rival,
                                               const QuadratureSpec& q = {}) {
    const auto w = detail::lngb_weight(truth);
    return integrate_unit(
        [&](double x, double xc) {
            const double wx = w(x, xc);
            return wx == 0.0 ? 0.0 : wx * detail::kw_log_pdf(rival, x, xc);
        },
        q);
}

/// E_KW[log f_LNGB(X; rival)] under X ~ KW(true).
inline double expected_rival_loglik_under_kw(const KwParams& truth, const LngbParams& rival,
                                             const QuadratureSpec& q = {}) {
    const auto w = detail::kw_weight(truth);
    const double log_norm = detail::lngb_log_norm(rival);
    return integrate_unit(
        [&](double x, double xc) {
            const double wx = w(x, xc);
            return wx == 0.0 ? 0.0 : wx * detail::lngb_log_pdf(rival, log_norm, x, xc);
        },
        q);
}

/// LNGB sufficient-statistic averages under a KW law, by quadrature.
class KwExpectation {
public:
    KwExpectation(const KwParams& truth, const QuadratureSpec& q) : truth_(truth), q_(q) {
        // X^alpha ~ Beta(1, delta), so E ln X = (psi(1) - psi(1 + delta)) / alpha.
        mean_log_ = (digamma(1.0) - digamma(1.0 + truth.delta())) / truth.alpha();
        const auto w = detail::kw_weight(truth_);
        mean_log1m_ = integrate_unit([&](double x, double xc) {
            const double wx = w(x, xc);
            return wx == 0.0 ? 0.0 : wx * detail::log1m_of(x, xc);
        }, q_);
    }

    double mean_log() const { return mean_log_; }
    double mean_log1m() const { return mean_log1m_; }

    LngbBetaTerms beta_terms(double beta, bool need_second = false) const {
        const auto w = detail::kw_weight(truth_);
        LngbBetaTerms t{};
        t.log_term = integrate_unit([&](double x, double xc) {
            const double wx = w(x, xc);
            return wx == 0.0 ? 0.0 : wx * std::log1p(beta * x / xc);
        }, q_);
        t.ratio = integrate_unit([&](double x, double xc) {
            const double wx = w(x, xc);
            return wx == 0.0 ? 0.0 : wx * x / (xc + beta * x);
        }, q_);
        if (need_second) {
            t.ratio_sq = integrate_unit([&](double x, double xc) {
                const double wx = w(x, xc);
                const double r = x / (xc + beta * x);
                return wx == 0.0 ? 0.0 : wx * r * r;
            }, q_);
        }
        return t;
    }

    /// Mean and variance of X from the KW raw moments E X^r = delta B(1 + r/alpha, delta).
    std::pair<double, double> mean_var() const {
        const double a = truth_.alpha(), d = truth_.delta();
        const double m1 = d * std::exp(log_beta(1.0 + 1.0 / a, d));
        const double m2 = d * std::exp(log_beta(1.0 + 2.0 / a, d));
        return {m1, m2 - m1 * m1};
    }

private:
    KwParams truth_;
    QuadratureSpec q_;
    double mean_log_ = 0.0;
    double mean_log1m_ = 0.0;
};

// ---------------------------------------------------------------------------
// Pseudo-true parameters
// ---------------------------------------------------------------------------

/// KW parameters maximizing E_LNGB[log f_KW]. For fixed alpha the optimal
/// delta is -1 / E[ln(1 - X^alpha)]; the remaining profile score in alpha is
/// bracketed and solved.
inline KwParams pseudo_true_kw(const LngbParams& truth, const AnalysisOptions& opt = {}) {
    const auto w = detail::lngb_weight(truth);
    const auto& q = opt.quadrature;
    const double mean_log = integrate_unit([&](double x, double xc) {
        const double wx = w(x, xc);
        return wx == 0.0 ? 0.0 : wx * detail::log_of(x, xc);
    }, q);

    auto profile_terms = [&](double alpha) {
        const double l1m = integrate_unit([&](double x, double xc) {
            const double wx = w(x, xc);
            return wx == 0.0 ? 0.0 : wx * detail::log1mexp(alpha * detail::log_of(x, xc));
        }, q);
        const double ratio = integrate_unit([&](double x, double xc) {
            const double wx = w(x, xc);
            if (wx == 0.0) return 0.0;
            const double lx = detail::log_of(x, xc);
            const double t = alpha * lx;
            return wx * lx * std::exp(t) / (-std::expm1(t));
        }, q);
        return std::pair{l1m, ratio};
    };
    auto profile_score = [&](double alpha) {
        const auto [l1m, ratio] = profile_terms(alpha);
        const double delta = -1.0 / l1m;
        return 1.0 / alpha + mean_log - (delta - 1.0) * ratio;
    };

    double lo = 1.0, hi = 1.0;
    double f_lo = profile_score(lo), f_hi = f_lo;
    for (int k = 0; k < 60 && f_hi > 0.0 && f_lo > 0.0; ++k) {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = profile_score(hi);
    }
    for (int k = 0; k < 60 && f_lo < 0.0 && f_hi < 0.0; ++k) {
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = profile_score(lo);
    }
    double alpha = lo;
    if (f_lo == 0.0) {
        alpha = lo;
    } else if (f_hi == 0.0) {
        alpha = hi;
    } else if (f_lo > 0.0 && f_hi < 0.0) {
        std::uintmax_t iters = 100;
        const auto br = boost::math::tools::toms748_solve(profile_score, lo, hi, f_lo, f_hi,
                                                          boost::math::tools::eps_tolerance<double>(45), iters);
        alpha = 0.5 * (br.first + br.second);
    } else {
        throw NumericError("pseudo_true_kw: could not bracket the profile score root");
    }
    const auto [l1m, ratio] = profile_terms(alpha);
    const double delta = -1.0 / l1m;
    const double residual = std::hypot(1.0 / alpha + mean_log - (delta - 1.0) * ratio, 1.0 / delta + l1m);
    if (!(residual <= opt.stationarity_tol)) {
        throw NumericError("pseudo_true_kw: stationarity residual above tolerance", residual);
    }
    return KwParams(alpha, delta);
}

struct LngbPseudoTrue {
    LngbParams params;
    bool at_boundary;
    double residual;
};

inline LngbPseudoTrue pseudo_true_lngb_detailed(const KwParams& truth, const AnalysisOptions& opt = {}) {
    const KwExpectation moments(truth, opt.quadrature);
    const auto [mean, var] = moments.mean_var();
    auto starts = detail::lngb_starts(mean, var);
    starts.push_back({std::log(truth.alpha()), std::log(truth.delta()), 0.0});
    const auto best = detail::maximize_lngb(moments, starts, opt.stationarity_tol, opt.log_beta_cap);
    double residual = detail::norm3(best.gradient);
    if (best.at_boundary) residual = std::hypot(best.gradient[0], best.gradient[1]);
    if (!(residual <= opt.stationarity_tol)) {
        throw NumericError("pseudo_true_lngb: stationarity residual above tolerance", residual);
    }
    return {best.params, best.at_boundary, residual};
}

/// LNGB parameters maximizing E_KW[log f_LNGB].
inline LngbParams pseudo_true_lngb(const KwParams& truth, const AnalysisOptions& opt = {}) {
    return pseudo_true_lngb_detailed(truth, opt).params;
}

// ---------------------------------------------------------------------------
// Null analysis and PCS
// ---------------------------------------------------------------------------

namespace detail {

template <class Weight, class Ratio>
std::pair<double, double> mean_and_variance(const Weight& w, const Ratio& g, const QuadratureSpec& q) {
    const double m = integrate_unit([&](double x, double xc) {
        const double wx = w(x, xc);
        return wx == 0.0 ? 0.0 : wx * g(x, xc);
    }, q);
    const double v = integrate_unit([&](double x, double xc) {
        const double wx = w(x, xc);
        if (wx == 0.0) return 0.0;
        const double d = g(x, xc) - m;
        return wx * d * d;
    }, q);
    return {m, std::max(v, 0.0)};
}

} // namespace detail

inline NullAnalysis null_analysis(const NullHypothesis& h, const AnalysisOptions& opt = {}) {
    if (h.family() == Family::Lngb) {
        const LngbParams& truth = h.lngb_params();
        const KwParams rival = pseudo_true_kw(truth, opt);
        const double log_norm = detail::lngb_log_norm(truth);
        const auto g = [&](double x, double xc) {
            return detail::lngb_log_pdf(truth, log_norm, x, xc) - detail::kw_log_pdf(rival, x, xc);
        };
        const auto [m, v] = detail::mean_and_variance(detail::lngb_weight(truth), g, opt.quadrature);
        return NullAnalysis{h, rival, m, v, false};
    }
    const KwParams& truth = h.kw_params();
    const auto pt = pseudo_true_lngb_detailed(truth, opt);
    const LngbParams rival = pt.params;
    const double log_norm = detail::lngb_log_norm(rival);
    const auto g = [&](double x, double xc) {
        return detail::lngb_log_pdf(rival, log_norm, x, xc) - detail::kw_log_pdf(truth, x, xc);
    };
    const auto [m, v] = detail::mean_and_variance(detail::kw_weight(truth), g, opt.quadrature);
    return NullAnalysis{h, rival, m, v, pt.at_boundary};
}

/// Standardized separation sqrt(n) * |M| / sigma signed so that positive
/// values favour correct selection; zero in the nested case.
inline double standardized_separation(const NullAnalysis& h, std::size_t n, const AnalysisOptions& opt = {}) {
    if (n == 0) throw DomainError("PCS: n must be positive");
    if (h.nested(opt)) return 0.0;
    const double signed_m = h.family() == Family::Lngb ? h.m_per_obs : -h.m_per_obs;
    return std::sqrt(static_cast<double>(n)) * signed_m / std::sqrt(h.var_per_obs);
}

/// Phi(sqrt(n) M / sigma) under an LNGB null.
inline double pcs_lngb(const NullAnalysis& h, std::size_t n, const AnalysisOptions& opt = {}) {
    if (h.family() != Family::Lngb) throw UsageError("pcs_lngb requires an LNGB-null analysis");
    return std_normal_cdf(standardized_separation(h, n, opt));
}

/// Phi(-sqrt(n) M / sigma) under a KW null.
inline double pcs_kw(const NullAnalysis& h, std::size_t n, const AnalysisOptions& opt = {}) {
    if (h.family() != Family::Kw) throw UsageError("pcs_kw requires a KW-null analysis");
    return std_normal_cdf(standardized_separation(h, n, opt));
}

inline double pcs(const NullAnalysis& h, std::size_t n, const AnalysisOptions& opt = {}) {
    return std_normal_cdf(standardized_separation(h, n, opt));
}

/// 1 - PCS, without cancellation when PCS is close to 1.
inline double pcs_complement(const NullAnalysis& h, std::size_t n, const AnalysisOptions& opt = {}) {
    return std_normal_sf(standardized_separation(h, n, opt));
}

// ---------------------------------------------------------------------------
// Test statistic and selection
// ---------------------------------------------------------------------------

/// W_n = l_LNGB(fitted) - l_KW(fitted).
inline double w_statistic(const Sample& s, const KwFit& kw, const LngbFit& lngb) {
    if (kw.sample_fingerprint != s.fingerprint() || lngb.sample_fingerprint != s.fingerprint()) {
        throw UsageError("w_statistic: fits were computed on a different sample");
    }
    return lngb.log_likelihood - kw.log_likelihood;
}

struct DiscriminationReport {
    KwFit kw_fit;
    LngbFit lngb_fit;
    double w_n = 0.0;
    double pcs_lngb = 0.5;
    double pcs_kw = 0.5;
    Family selected = Family::Lngb;
    /// Selection by the variance-weighted comparison
    /// -M_KW sqrt(Var_LNGB) > M_LNGB sqrt(Var_KW)  =>  KW.
    Family selected_variance_rule = Family::Lngb;
    std::optional<NullAnalysis> lngb_null;
    std::optional<NullAnalysis> kw_null;
    /// Selection fell back to the sign of W_n.
    bool fallback = false;
    std::vector<std::string> warnings;
};

struct SelectionOptions {
    AnalysisOptions analysis{};
    FitOptions fit{};
    /// Both PCS values below this trigger a "weakly separated" warning.
    double weak_separation_pcs = 0.55;
};

inline Family select_by_variance_rule(const NullAnalysis& lngb_null, const NullAnalysis& kw_null) {
    const double lhs = -kw_null.m_per_obs * std::sqrt(lngb_null.var_per_obs);
    const double rhs = lngb_null.m_per_obs * std::sqrt(kw_null.var_per_obs);
    return lhs > rhs ? Family::Kw : Family::Lngb;
}

/// Fits both families, evaluates each PCS at the fitted parameters and
/// selects KW when PCS_LNGB < PCS_KW, LNGB otherwise.
inline DiscriminationReport select_model(const Sample& s, const SelectionOptions& opt = {}) {
    DiscriminationReport r{fit_kw(s, opt.fit), fit_lngb(s, opt.fit)};
    r.w_n = w_statistic(s, r.kw_fit, r.lngb_fit);
    const std::size_t n = s.size();
    const Family by_sign = r.w_n > 0.0 ? Family::Lngb : Family::Kw;

    if (!r.kw_fit.converged) r.warnings.push_back("KW fit did not converge: " + r.kw_fit.diagnostics);
    if (!r.lngb_fit.converged) r.warnings.push_back("LNGB fit did not converge: " + r.lngb_fit.diagnostics);
    if (!r.kw_fit.converged || !r.lngb_fit.converged) {
        r.fallback = true;
        r.selected = r.selected_variance_rule = by_sign;
        return r;
    }

    try {
        r.lngb_null = null_analysis(NullHypothesis::lngb(r.lngb_fit.params), opt.analysis);
        r.kw_null = null_analysis(NullHypothesis::kw(r.kw_fit.params), opt.analysis);
    } catch (const NumericError& e) {
        r.warnings.push_back(std::string("plug-in null analysis failed: ") + e.what());
        r.fallback = true;
        r.selected = r.selected_variance_rule = by_sign;
        return r;
    }
    r.pcs_lngb = pcs_lngb(*r.lngb_null, n, opt.analysis);
    r.pcs_kw = pcs_kw(*r.kw_null, n, opt.analysis);

    // Compared through the tail probabilities so that PCS values that both
    // round to 1 still order correctly.
    const double miss_lngb = pcs_complement(*r.lngb_null, n, opt.analysis);
    const double miss_kw = pcs_complement(*r.kw_null, n, opt.analysis);
    r.selected = miss_lngb > miss_kw ? Family::Kw : Family::Lngb;

    // The variance rule treats a nested (zero-variance) side as zero separation,
    // matching the PCS = 0.5 convention.
    NullAnalysis ln = *r.lngb_null, kn = *r.kw_null;
    if (ln.nested(opt.analysis)) ln.m_per_obs = 0.0;
    if (kn.nested(opt.analysis)) kn.m_per_obs = 0.0;
    if (ln.nested(opt.analysis) || kn.nested(opt.analysis)) {
        // Zero-variance sides would make the product form degenerate; compare
        // standardized separations directly.
        const double zl = standardized_separation(ln, n, opt.analysis);
        const double zk = standardized_separation(kn, n, opt.analysis);
        r.selected_variance_rule = zk > zl ? Family::Kw : Family::Lngb;
    } else {
        r.selected_variance_rule = select_by_variance_rule(ln, kn);
    }
    if (r.selected != r.selected_variance_rule) {
        r.warnings.push_back("PCS comparison and variance-weighted rule disagree");
    }
    if (r.pcs_lngb < opt.weak_separation_pcs && r.pcs_kw < opt.weak_separation_pcs) {
        r.warnings.push_back("weakly separated: both PCS values are close to 0.5");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Minimum sample size
// ---------------------------------------------------------------------------

struct SampleSizeResult {
    double protection_level = 0.5;
    std::optional<double> tolerance_distance;
    std::size_t n_required = 1;
    bool paper_formula = false;
};

/// Smallest n with PCS >= p: ceil(z_p^2 Var / M^2), at least 1. Levels
/// p <= 0.5 are met by every n because PCS >= 0.5. With `paper_formula`
/// the denominator is |M| instead of M^2 and z_p^2 is used for every p.
inline SampleSizeResult min_sample_size(const NullAnalysis& h, double p, bool paper_formula = false,
                                        std::optional<double> tolerance_distance = std::nullopt,
                                        const AnalysisOptions& opt = {}) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("min_sample_size: p must lie in (0, 1)");
    if (h.m_per_obs == 0.0 || h.nested(opt)) {
        throw InfeasibleError("min_sample_size: models indistinguishable at this tolerance (M = 0)");
    }
    SampleSizeResult out{p, tolerance_distance, 1, paper_formula};
    double raw = 0.0;
    if (paper_formula) {
        const double z = std_normal_quantile(p);
        raw = z * z * h.var_per_obs / std::abs(h.m_per_obs);
    } else if (p > 0.5) {
        const double z = std_normal_quantile(p);
        raw = z * z * h.var_per_obs / (h.m_per_obs * h.m_per_obs);
    }
    if (!std::isfinite(raw) || raw > 1e15) throw InfeasibleError("min_sample_size: required n overflows");
    out.n_required = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw)));
    return out;
}

} // namespace kwlngb
