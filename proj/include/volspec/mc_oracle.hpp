#pragma once

// Monte Carlo cross-check: exact daily sampling of the lattice chain and the
// discretely sampled realized variance (1/T) sum ((F_i - F_{i-1}) / F_{i-1})^2.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volspec/pricing.hpp"

namespace volspec {

struct PathConfig {
    std::size_t n_paths = 100000;
    int steps_per_year = kTradingDaysPerYear;
    double horizon = 5.0;
    // Observation times (calendar years, each <= horizon); empty means
    // {horizon}. Each is rounded to the nearest whole step.
    std::vector<double> observations;
    std::uint64_t seed = 20240101;
    std::optional<std::size_t> start_state;  // default: the model's start state
    std::size_t threads = 0;

    void validate() const;
};

// One-step kernel for day `day_index` (calendar [i, i+1] / steps_per_year).
TransitionKernel daily_kernel(const Engine& engine, std::size_t day_index,
                              int steps_per_year = kTradingDaysPerYear);

// Row-wise cumulative distributions of one-step kernels, cached by the
// financial-time increment (a single entry under the identity time change).
class DailyKernelCache {
public:
    DailyKernelCache(const Engine& engine, int steps_per_year);

    // Cumulative rows of the kernel over day `day_index`; row s occupies
    // [s * dim, (s + 1) * dim) and ends at exactly 1.
    const std::vector<double>& cumulative(std::size_t day_index);
    std::size_t size() const { return cache_.size(); }
    const KernelDiagnostics& diagnostics() const { return diagnostics_; }

private:
    const Engine& engine_;
    int steps_per_year_;
    std::map<long long, std::vector<double>> cache_;
    KernelDiagnostics diagnostics_;
    std::mutex mutex_;
};

struct SimulationResult {
    std::vector<double> observations;            // calendar years actually used
    std::vector<std::vector<double>> sigma;      // [observation][path], annualized
    std::vector<std::vector<std::uint32_t>> terminal;  // [observation][path] state
    KernelDiagnostics kernel_diagnostics;
    std::size_t distinct_kernels = 0;
};

SimulationResult simulate(const PathConfig& config, const Engine& engine);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

Estimate mc_price(std::span<const double> sigma_samples, const VariancePayoff& payoff);

// One row of the Monte Carlo vs spectral comparison. Variance and
// volatility swaps are in vol terms; options pay (Sigma - (a K_0)^2)^+ with
// K_0 = sqrt(E[Sigma]) of the same method and are quoted as 100 x price.
struct ComparisonRow {
    std::string method;  // "mc" or "spectral"
    std::size_t paths = 0;
    double maturity = 0.0;
    double var_swap = 0.0;
    double var_swap_se = 0.0;
    double vol_swap = 0.0;
    double vol_swap_se = 0.0;
    std::vector<double> options;
    std::vector<double> options_se;
};

inline const std::vector<double>& comparison_moneyness() {
    static const std::vector<double> a{0.8, 1.0, 1.2};
    return a;
}

ComparisonRow summarize_mc(std::span<const double> sigma_samples, double maturity);
ComparisonRow summarize_spectral(const VariancePdf& pdf, double maturity);

void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows);

}  // namespace volspec
