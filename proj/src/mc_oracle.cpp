#include "volspec/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "volspec/parallel.hpp"

namespace volspec {

void PathConfig::validate() const {
    if (n_paths < 1) throw DomainError("need at least one path");
    if (steps_per_year < 1) throw DomainError("steps_per_year must be positive");
    if (!(horizon > 0.0)) throw DomainError("simulation horizon must be positive");
    for (double t : observations)
        if (!(t > 0.0) || t > horizon + 1e-12)
            throw DomainError("observation times must lie in (0, horizon]");
}

TransitionKernel daily_kernel(const Engine& engine, std::size_t day_index, int steps_per_year) {
    const double spy = static_cast<double>(steps_per_year);
    return engine.kernel(static_cast<double>(day_index) / spy,
                         static_cast<double>(day_index + 1) / spy);
}

DailyKernelCache::DailyKernelCache(const Engine& engine, int steps_per_year)
    : engine_(engine), steps_per_year_(steps_per_year) {}

const std::vector<double>& DailyKernelCache::cumulative(std::size_t day_index) {
    const double spy = static_cast<double>(steps_per_year_);
    const double dt = engine_.horizon(static_cast<double>(day_index) / spy,
                                      static_cast<double>(day_index + 1) / spy);
    // Increments equal up to rounding share one kernel.
    const auto key = std::llround(dt * 1e12);
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    const auto kernel = transition_kernel(engine_.decomposition(), static_cast<double>(key) * 1e-12);
    diagnostics_.merge(kernel.diagnostics);
    const auto n = kernel.matrix.rows();
    std::vector<double> cdf(static_cast<std::size_t>(n * n));
    for (Eigen::Index s = 0; s < n; ++s) {
        const double total = kernel.matrix.row(s).sum();
        double acc = 0.0;
        for (Eigen::Index y = 0; y < n; ++y) {
            acc += kernel.matrix(s, y);
            cdf[static_cast<std::size_t>(s * n + y)] = acc / total;
        }
        cdf[static_cast<std::size_t>(s * n + n - 1)] = 1.0;
    }
    return cache_.emplace(key, std::move(cdf)).first->second;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SimulationResult simulate(const PathConfig& config, const Engine& engine) {
    config.validate();
    const std::size_t dim = engine.dim();
    const std::size_t start = config.start_state.value_or(engine.start_state());
    if (start >= dim) throw DomainError("simulate: start state out of range");
    const auto& levels = engine.state_levels();

    std::vector<double> obs = config.observations;
    if (obs.empty()) obs.push_back(config.horizon);
    std::sort(obs.begin(), obs.end());
    const double spy = static_cast<double>(config.steps_per_year);
    std::vector<std::size_t> obs_steps;
    SimulationResult result;
    for (double t : obs) {
        const auto steps = static_cast<std::size_t>(std::max(1L, std::lround(t * spy)));
        obs_steps.push_back(steps);
        result.observations.push_back(static_cast<double>(steps) / spy);
    }
    const std::size_t total_steps = obs_steps.back();

    // Build every distinct kernel up front so paths only read the cache.
    DailyKernelCache cache(engine, config.steps_per_year);
    std::vector<const double*> day_cdf(total_steps);
    for (std::size_t i = 0; i < total_steps; ++i) day_cdf[i] = cache.cumulative(i).data();
    result.kernel_diagnostics = cache.diagnostics();
    result.distinct_kernels = cache.size();

    result.sigma.assign(obs.size(), std::vector<double>(config.n_paths, 0.0));
    result.terminal.assign(obs.size(), std::vector<std::uint32_t>(config.n_paths, 0));

    const std::size_t chunk = 256;
    const std::size_t chunks = (config.n_paths + chunk - 1) / chunk;
    parallel_for(chunks, resolve_threads(config.threads), [&](std::size_t c) {
        const std::size_t end = std::min(config.n_paths, (c + 1) * chunk);
        for (std::size_t p = c * chunk; p < end; ++p) {
            std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(p)));
            std::size_t state = start;
            double acc = 0.0;
            std::size_t next_obs = 0;
            for (std::size_t step = 0; step < total_steps; ++step) {
                const double* row = day_cdf[step] + state * dim;
                const double u = uniform01(rng);
                const auto next = static_cast<std::size_t>(std::upper_bound(row, row + dim, u) - row);
                const std::size_t to = std::min(next, dim - 1);
                const double r = (levels[to] - levels[state]) / levels[state];
                acc += r * r;
                state = to;
                while (next_obs < obs_steps.size() && obs_steps[next_obs] == step + 1) {
                    result.sigma[next_obs][p] = acc / result.observations[next_obs];
                    result.terminal[next_obs][p] = static_cast<std::uint32_t>(state);
                    ++next_obs;
                }
            }
        }
    });
    return result;
}

Estimate mc_price(std::span<const double> sigma_samples, const VariancePayoff& payoff) {
    if (sigma_samples.empty()) throw DomainError("mc_price: empty sample");
    payoff.validate();
    double sum = 0.0;
    for (double s : sigma_samples) sum += payoff(s);
    const double n = static_cast<double>(sigma_samples.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (double s : sigma_samples) {
        const double d = payoff(s) - mean;
        ss += d * d;
    }
    const double var = sigma_samples.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n), sigma_samples.size()};
}

ComparisonRow summarize_mc(std::span<const double> sigma_samples, double maturity) {
    ComparisonRow row;
    row.method = "mc";
    row.paths = sigma_samples.size();
    row.maturity = maturity;
    const auto var = mc_price(sigma_samples, VariancePayoff::var_swap());
    const auto vol = mc_price(sigma_samples, VariancePayoff::vol_swap());
    row.var_swap = vol_terms(var.mean);
    // Delta method: d(100 sqrt(v)) = 50 / sqrt(v) dv.
    row.var_swap_se = var.mean > 0.0 ? 50.0 * var.std_error / std::sqrt(var.mean) : 0.0;
    row.vol_swap = 100.0 * vol.mean;
    row.vol_swap_se = 100.0 * vol.std_error;
    for (double a : comparison_moneyness()) {
        const auto opt = mc_price(sigma_samples, VariancePayoff::var_swaption(a * a * var.mean));
        row.options.push_back(100.0 * opt.mean);
        row.options_se.push_back(100.0 * opt.std_error);
    }
    return row;
}

ComparisonRow summarize_spectral(const VariancePdf& pdf, double maturity) {
    ComparisonRow row;
    row.method = "spectral";
    row.maturity = maturity;
    const auto strikes = fair_strikes(pdf);
    row.var_swap = vol_terms(strikes.k_var);
    row.vol_swap = 100.0 * strikes.k_vol;
    for (double a : comparison_moneyness()) {
        const auto payoff = VariancePayoff::var_swaption(a * a * strikes.k_var);
        row.options.push_back(100.0 * pdf.expect([&](double s) { return payoff(s); }));
        row.options_se.push_back(0.0);
    }
    return row;
}

void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows) {
    os << "method,paths,T,var_swap,var_swap_se,vol_swap,vol_swap_se";
    for (double a : comparison_moneyness()) {
        const int pct = static_cast<int>(std::lround(100.0 * a));
        os << ",option_a" << pct << ",option_a" << pct << "_se";
    }
    os << '\n' << std::setprecision(6);
    for (const auto& r : rows) {
        os << r.method << ',' << r.paths << ',' << r.maturity << ',' << r.var_swap << ','
           << r.var_swap_se << ',' << r.vol_swap << ',' << r.vol_swap_se;
        for (std::size_t i = 0; i < r.options.size(); ++i)
            os << ',' << r.options[i] << ',' << r.options_se[i];
        os << '\n';
    }
}

}  // namespace volspec
