#pragma once

// Seeded Monte Carlo estimate of the probability of correct selection.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "kwlngb/discrimination.hpp"
#include "kwlngb/distributions.hpp"
#include "kwlngb/errors.hpp"
#include "kwlngb/fit.hpp"
#include "kwlngb/random.hpp"

namespace kwlngb {

struct SimulationConfig {
    NullHypothesis null;
    std::size_t n = 100;
    std::size_t reps = 2000;
    std::uint64_t seed = 1;
    unsigned parallelism = 1;

    void validate() const {
        if (n < 3) throw DomainError("simulation: n must be at least 3 (the LNGB fit needs three points)");
        if (reps == 0) throw DomainError("simulation: reps must be positive");
        if (parallelism == 0) throw DomainError("simulation: parallelism must be positive");
    }
};

struct ReplicateOutcome {
    bool success = false;
    double w_n = 0.0;
    bool fit_ok = false;
};

struct SimulationResult {
    SimulationConfig config;
    std::size_t successes = 0;
    double empirical_pcs = 0.0;
    /// Absent when the null analysis itself failed numerically.
    std::optional<double> asymptotic_pcs;
    std::size_t fit_failures = 0;
    /// More than 5% of the replicates lost to fit failures.
    bool unreliable = false;
    std::chrono::duration<double> wall_time{};
};

/// One pass of the protocol: draw n points from the null, fit both
/// families and score W_n = l_LNGB - l_KW. The replicate is correct when
/// W_n points at the null family (W_n > 0 for LNGB, W_n < 0 for KW).
inline ReplicateOutcome run_replicate(const NullHypothesis& null, std::size_t n, RandomStream& stream,
                                      const FitOptions& fit_opt = {}) {
    const Sample s = null.family() == Family::Kw ? kw_sample(null.kw_params(), n, stream)
                                                 : lngb_sample(null.lngb_params(), n, stream);
    ReplicateOutcome out;
    try {
        const KwFit kw = fit_kw(s, fit_opt);
        const LngbFit lngb = fit_lngb(s, fit_opt);
        out.w_n = w_statistic(s, kw, lngb);
        out.fit_ok = kw.converged && lngb.converged;
    } catch (const DomainError&) {
        out.fit_ok = false;
    } catch (const NumericError&) {
        out.fit_ok = false;
    }
    if (out.fit_ok) out.success = null.family() == Family::Lngb ? out.w_n > 0.0 : out.w_n < 0.0;
    return out;
}

/// Runs `reps` replicates; replicate i uses RandomStream::derive(seed, i), so
/// the outcome does not depend on the number of worker threads.
inline std::vector<ReplicateOutcome> run_replicates(const SimulationConfig& cfg, const FitOptions& fit_opt = {}) {
    cfg.validate();
    std::vector<ReplicateOutcome> outcomes(cfg.reps);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};

    auto worker = [&] {
        try {
            for (std::size_t i = next++; i < cfg.reps && !failed; i = next++) {
                RandomStream stream = RandomStream::derive(cfg.seed, i);
                outcomes[i] = run_replicate(cfg.null, cfg.n, stream, fit_opt);
            }
        } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
        }
    };

    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(cfg.parallelism, cfg.reps));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return outcomes;
}

inline SimulationResult run_simulation(const SimulationConfig& cfg, const AnalysisOptions& analysis = {},
                                       const FitOptions& fit_opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    const auto outcomes = run_replicates(cfg, fit_opt);

    SimulationResult r{cfg};
    for (const auto& o : outcomes) {
        if (!o.fit_ok) ++r.fit_failures;
        else if (o.success) ++r.successes;
    }
    r.empirical_pcs = static_cast<double>(r.successes) / static_cast<double>(cfg.reps);
    r.unreliable = static_cast<double>(r.fit_failures) > 0.05 * static_cast<double>(cfg.reps);
    try {
        r.asymptotic_pcs = pcs(null_analysis(cfg.null, analysis), cfg.n, analysis);
    } catch (const NumericError&) {
        r.asymptotic_pcs.reset();
    }
    r.wall_time = std::chrono::steady_clock::now() - start;
    return r;
}

struct PcsCell {
    std::optional<double> asymptotic;
    /// Present when the table was built with reps > 0.
    std::optional<SimulationResult> empirical;
};

using PcsTable = std::vector<std::vector<PcsCell>>;

/// Rows follow `nulls`, columns follow `ns`. With reps = 0 only the
/// asymptotic entries are filled. Each cell's simulation seed is derived
/// from (seed, cell index).
inline PcsTable pcs_table(const std::vector<NullHypothesis>& nulls, const std::vector<std::size_t>& ns,
                          std::size_t reps, std::uint64_t seed, unsigned parallelism = 1,
                          const AnalysisOptions& analysis = {}, const FitOptions& fit_opt = {}) {
    PcsTable table;
    table.reserve(nulls.size());
    for (std::size_t row = 0; row < nulls.size(); ++row) {
        std::optional<NullAnalysis> h;
        try {
            h = null_analysis(nulls[row], analysis);
        } catch (const NumericError&) {
        }
        std::vector<PcsCell> cells;
        cells.reserve(ns.size());
        for (std::size_t col = 0; col < ns.size(); ++col) {
            PcsCell cell;
            if (h) cell.asymptotic = pcs(*h, ns[col], analysis);
            if (reps > 0) {
                const std::uint64_t cell_seed = RandomStream::derive(seed, row * ns.size() + col)();
                SimulationConfig cfg{nulls[row], ns[col], reps, cell_seed, parallelism};
                cell.empirical = run_simulation(cfg, analysis, fit_opt);
            }
            cells.push_back(std::move(cell));
        }
        table.push_back(std::move(cells));
    }
    return table;
}

} // namespace kwlngb
