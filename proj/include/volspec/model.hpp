#pragma once

// Lattice domains and the regime-switching jump-diffusion generator for the
// forward price.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "volspec/common.hpp"

namespace volspec {

// Ordered forward levels F(x), x = 0..N-1, all positive and strictly
// increasing; levels[spot_index] is exactly the spot.
struct StateGrid {
    std::vector<double> levels;
    std::size_t spot_index = 0;

    std::size_t size() const { return levels.size(); }
    double level(std::size_t x) const { return levels[x]; }
    double spot() const { return levels[spot_index]; }
    void validate() const;
};

// Log-space sinh-stretched grid: dense around spot, sparse towards the
// endpoints, with spot an exact node and the extremes hitting bottom / top.
StateGrid build_elliptical_grid(std::size_t n_points, double spot, double top, double bottom,
                                double stretch = 4.0);

struct RegimeParams {
    double sigma = 0.2;      // base CEV volatility
    double beta = 1.0;       // CEV exponent
    double sigma_bar = 0.6;  // local volatility cap
    double nu_minus = 0.0;   // down-jump variance rate
    double nu_plus = 0.0;    // up-jump variance rate
    double level = 100.0;    // anchor F_gamma of the partition of unity

    void validate() const;
};

// Relative local volatility min(sigma (F / reference)^{beta-1}, sigma_bar).
double local_volatility(const RegimeParams& p, double level, double reference);

struct SwitchGenerator {
    RMatrix matrix;
    void validate() const;
};

// Dense generator on a product space of spot_states x regimes states, laid
// out regime-major: index = regime * spot_states + x.
class MarkovGenerator {
public:
    MarkovGenerator() = default;
    MarkovGenerator(RMatrix entries, std::size_t spot_states, std::size_t regimes = 1);

    const RMatrix& entries() const { return entries_; }
    RMatrix& entries() { return entries_; }
    std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }
    std::size_t spot_states() const { return spot_states_; }
    std::size_t regimes() const { return regimes_; }

    std::size_t index(std::size_t x, std::size_t regime) const { return regime * spot_states_ + x; }
    std::size_t spot_of(std::size_t state) const { return state % spot_states_; }
    std::size_t regime_of(std::size_t state) const { return state / spot_states_; }

    double max_row_sum() const;
    double min_off_diagonal() const;
    // Throws NumericalError if a row sum exceeds tol * max|L| or an
    // off-diagonal entry is below -1e-12.
    void validate(double row_tol = 1e-10) const;

private:
    RMatrix entries_;
    std::size_t spot_states_ = 0;
    std::size_t regimes_ = 1;
};

// Tridiagonal CEV chain: each interior row matches zero drift and the
// second moment v(F)^2, boundary rows are absorbing (zero).
MarkovGenerator build_cev_generator(const StateGrid& grid, const RegimeParams& p,
                                    double reference);

// Squared local variance v(F(x))^2 for every node.
std::vector<double> cev_second_moments(const StateGrid& grid, const RegimeParams& p,
                                       double reference);

// Asymmetric jumps by subordination: strict upper triangle from
// -phi_+(-L), strict lower triangle from -phi_-(-L) with
// phi(l) = log(1 + l nu) / nu, followed by martingale repair, second-moment
// rescale to v_target and diagonal fill.
MarkovGenerator subordinate(const MarkovGenerator& gen, const StateGrid& grid, double nu_plus,
                            double nu_minus, std::span<const double> v_target);

// Piecewise-linear hat functions over strictly increasing anchors with flat
// extension at both ends.
std::vector<double> partition_of_unity(std::span<const double> anchors, double level);

MarkovGenerator assemble_regime_generator(std::span<const MarkovGenerator> per_regime,
                                          std::span<const SwitchGenerator> switches,
                                          std::span<const double> anchors,
                                          const StateGrid& grid);

// Piecewise-linear map through ordered (x, y) knots, extrapolated linearly
// beyond both ends.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots);

    double operator()(double x) const;
    const std::vector<std::pair<double, double>>& knots() const { return knots_; }
    bool empty() const { return knots_.empty(); }

private:
    std::vector<std::pair<double, double>> knots_;
};

// Calendar time -> financial time. Knots must start at (0, 0) and be
// strictly increasing in both coordinates.
class TimeChange {
public:
    TimeChange();  // identity
    explicit TimeChange(std::vector<std::pair<double, double>> knots);

    static TimeChange identity() { return TimeChange(); }

    double operator()(double t) const;
    bool is_identity() const { return identity_; }
    const std::vector<std::pair<double, double>>& knots() const { return curve_.knots(); }

private:
    PiecewiseLinear curve_;
    bool identity_ = true;
};

double financial_time(const TimeChange& tc, double t);

// Deterministic short rate r(t) and dividend yield q(t), each given as a
// piecewise-linear curve (a single knot means flat).
class DiscountCurve {
public:
    DiscountCurve() : DiscountCurve(0.0, 0.0) {}
    DiscountCurve(double r, double q);
    DiscountCurve(PiecewiseLinear r, PiecewiseLinear q);

    double rate(double t) const { return r_(t); }
    double dividend_yield(double t) const { return q_(t); }
    // exp(-(r(T) T - r(t) t))
    double discount(double t, double T) const;
    // S_T = exp(-(r(T) - q(T)) T) F
    double spot_from_forward(double T, double forward) const;
    bool is_zero() const;
    const PiecewiseLinear& rate_curve() const { return r_; }
    const PiecewiseLinear& dividend_curve() const { return q_; }

private:
    PiecewiseLinear r_;
    PiecewiseLinear q_;
};

struct GridSpec {
    std::size_t n = 76;
    double spot = 100.0;
    double top = 10000.0;
    double bottom = 1.0;
    double stretch = 4.0;
};

struct ModelConfig {
    GridSpec grid;
    std::vector<RegimeParams> regimes;
    std::vector<SwitchGenerator> switch_generators;
    TimeChange time_change;
    DiscountCurve discount;
    std::size_t start_regime = 1;
    // Level at which the CEV factor (F / reference)^{beta-1} equals one;
    // zero means "use the spot".
    double cev_reference = 0.0;
    std::string description;

    double reference_level() const { return cev_reference > 0.0 ? cev_reference : grid.spot; }
    void validate() const;

    // Two-regime calibrated S&P setup: N = 76, start in regime 1.
    static ModelConfig calibrated_defaults();
};

// Everything needed downstream: the grid, the assembled generator on
// Omega x V, and the start state.
struct BuiltModel {
    ModelConfig config;
    StateGrid grid;
    MarkovGenerator generator;

    std::size_t start_state() const {
        return generator.index(grid.spot_index, config.start_regime);
    }
    // F for every product state.
    std::vector<double> state_levels() const;
};

BuiltModel build_model(const ModelConfig& config);

}  // namespace volspec
