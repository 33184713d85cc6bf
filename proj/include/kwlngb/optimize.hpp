#pragma once

// Small dense quasi-Newton minimizer used by the LNGB fits.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>

namespace kwlngb::optimize {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
using Mat = std::array<std::array<double, N>, N>;

template <std::size_t N>
struct Evaluation {
    double value;
    Vec<N> gradient;
};

template <std::size_t N>
struct Bounds {
    Vec<N> lower;
    Vec<N> upper;
};

struct BfgsOptions {
    int max_iterations = 400;
    int max_backtracks = 60;
    double armijo = 1e-4;
};

template <std::size_t N>
struct BfgsResult {
    Vec<N> x{};
    Evaluation<N> at{};
    int iterations = 0;
    bool converged = false;
    bool at_bound = false;
    std::string message;
};

template <std::size_t N>
double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
Vec<N> mat_vec(const Mat<N>& m, const Vec<N>& v) {
    Vec<N> out{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) out[i] += m[i][j] * v[j];
    return out;
}

template <std::size_t N>
Mat<N> identity() {
    Mat<N> m{};
    for (std::size_t i = 0; i < N; ++i) m[i][i] = 1.0;
    return m;
}

/// Inverse of a symmetric positive definite matrix by Cholesky; nullopt if not SPD.
template <std::size_t N>
std::optional<Mat<N>> spd_inverse(const Mat<N>& a) {
    Mat<N> l{};
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Mat<N> inv{};
    for (std::size_t col = 0; col < N; ++col) {
        Vec<N> y{};
        for (std::size_t i = 0; i < N; ++i) {
            double s = (i == col) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= l[i][k] * y[k];
            y[i] = s / l[i][i];
        }
        Vec<N> x{};
        for (std::size_t ii = N; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < N; ++k) s -= l[k][ii] * x[k];
            x[ii] = s / l[ii][ii];
        }
        for (std::size_t i = 0; i < N; ++i) inv[i][col] = x[i];
    }
    return inv;
}

template <std::size_t N>
bool is_positive_definite(const Mat<N>& a) {
    return spd_inverse(a).has_value();
}

/// BFGS minimization with projected backtracking onto a box.
///
/// `objective(x)` returns value and gradient; non-finite values mark the
/// trial point as infeasible. `stop(x, eval)` decides convergence.
/// Coordinates sitting on a bound with the gradient pushing outward are
/// frozen for the step direction.
template <std::size_t N, class Objective, class Stop>
BfgsResult<N> bfgs_minimize(Objective&& objective, Vec<N> x0, Stop&& stop,
                            const Bounds<N>& bounds, std::optional<Mat<N>> inverse_hessian = {},
                            const BfgsOptions& opt = {}) {
    BfgsResult<N> res;
    auto clamp = [&](Vec<N>& x) {
        bool hit = false;
        for (std::size_t i = 0; i < N; ++i) {
            if (x[i] <= bounds.lower[i]) { x[i] = bounds.lower[i]; hit = true; }
            if (x[i] >= bounds.upper[i]) { x[i] = bounds.upper[i]; hit = true; }
        }
        return hit;
    };
    auto frozen = [&](const Vec<N>& x, const Vec<N>& g, std::size_t i) {
        return (x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0);
    };

    clamp(x0);
    Vec<N> x = x0;
    Evaluation<N> cur = objective(x);
    if (!std::isfinite(cur.value)) {
        res.x = x;
        res.at = cur;
        res.message = "objective not finite at the starting point";
        return res;
    }
    Mat<N> h = inverse_hessian.value_or(identity<N>());

    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it;
        Vec<N> g_free = cur.gradient;
        bool any_frozen = false;
        for (std::size_t i = 0; i < N; ++i) {
            if (frozen(x, cur.gradient, i)) { g_free[i] = 0.0; any_frozen = true; }
        }
        if (stop(x, Evaluation<N>{cur.value, g_free})) {
            res.converged = true;
            break;
        }
        Vec<N> dir = mat_vec(h, g_free);
        for (std::size_t i = 0; i < N; ++i) {
            dir[i] = -dir[i];
            if (any_frozen && frozen(x, cur.gradient, i)) dir[i] = 0.0;
        }
        double slope = dot(dir, g_free);
        if (!(slope < 0.0)) {
            // Lost descent: restart from steepest descent.
            h = identity<N>();
            for (std::size_t i = 0; i < N; ++i) dir[i] = -g_free[i];
            slope = dot(dir, g_free);
            if (!(slope < 0.0)) break;
        }

        double step = 1.0;
        Vec<N> trial{};
        Evaluation<N> next{};
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < N; ++i) trial[i] = x[i] + step * dir[i];
            clamp(trial);
            next = objective(trial);
            if (std::isfinite(next.value)) {
                Vec<N> moved{};
                for (std::size_t i = 0; i < N; ++i) moved[i] = trial[i] - x[i];
                if (next.value <= cur.value + opt.armijo * dot(moved, g_free)) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.message = "line search failed";
            break;
        }

        Vec<N> s{}, y{};
        for (std::size_t i = 0; i < N; ++i) {
            s[i] = trial[i] - x[i];
            y[i] = next.gradient[i] - cur.gradient[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            if (it == 0 && !inverse_hessian) {
                const double scale = sy / dot(y, y);
                h = identity<N>();
                for (std::size_t i = 0; i < N; ++i) h[i][i] = scale;
            }
            const Vec<N> hy = mat_vec(h, y);
            const double yhy = dot(y, hy);
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j)
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
        x = trial;
        cur = next;
        res.iterations = it + 1;
    }

    res.x = x;
    res.at = cur;
    for (std::size_t i = 0; i < N; ++i)
        if (x[i] <= bounds.lower[i] || x[i] >= bounds.upper[i]) res.at_bound = true;
    if (!res.converged && res.message.empty()) res.message = "iteration limit reached";
    return res;
}

} // namespace kwlngb::optimize
