#pragma once

// European, forward-start, realized-variance and VIX pricing on the
// regime-switching lattice model.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "volspec/lift.hpp"
#include "volspec/model.hpp"
#include "volspec/spectral.hpp"

namespace volspec {

// The built model together with the spectral decomposition of its generator
// (financial time). Kernels over [t, T] use f(T) - f(t).
class Engine {
public:
    explicit Engine(const ModelConfig& config, const DiagonalizeOptions& opts = {});

    const BuiltModel& model() const { return model_; }
    const ModelConfig& config() const { return model_.config; }
    const SpectralDecomposition& decomposition() const { return dec_; }
    const std::vector<double>& state_levels() const { return levels_; }
    std::size_t dim() const { return levels_.size(); }
    std::size_t start_state() const { return model_.start_state(); }
    double forward() const { return model_.grid.spot(); }

    double horizon(double t, double T) const;
    KernelRow kernel_row(std::size_t state, double t, double T) const;
    TransitionKernel kernel(double t, double T) const;

    // Q(x, regime) of the assembled generator.
    const std::vector<double>& instantaneous_variance() const { return q_; }

private:
    BuiltModel model_;
    SpectralDecomposition dec_;
    std::vector<double> levels_;
    std::vector<double> q_;
};

enum class OptionKind { Call, Put };

struct VanillaSpec {
    OptionKind kind = OptionKind::Call;
    double strike = 100.0;
    double maturity = 1.0;
    void validate() const;
};

double vanilla_payoff(OptionKind kind, double strike, double spot);

// Payoff values h(S(y)) for every terminal state, with S = e^{-(r-q)T} F(y).
std::vector<double> terminal_payoff(std::span<const double> levels, double T,
                                    const DiscountCurve& curve,
                                    const std::function<double(double)>& h);

// Discounted expectation of per-state payoff values under a kernel row.
// Throws NumericalError if the row mass is more than 1e-6 away from 1.
double price_european(std::span<const double> kernel_row, std::span<const double> payoff, double t,
                      double T, const DiscountCurve& curve);

double price_vanilla(const Engine& engine, const VanillaSpec& spec);
double price_vanilla(const Engine& engine, const VanillaSpec& spec, std::size_t start_state);

// Symmetric-difference Greeks of a European payoff across the spot lattice
// in one regime; boundary nodes are omitted.
struct GreeksProfile {
    std::size_t regime = 0;
    std::vector<std::size_t> nodes;  // spot indices
    std::vector<double> levels;
    std::vector<double> price;
    std::vector<double> delta;
    std::vector<double> gamma;
    std::vector<double> vega;
};

GreeksProfile greeks_profile(const Engine& engine, const VanillaSpec& spec);
GreeksProfile greeks_profile(const Engine& engine, std::span<const double> payoff, double T,
                             std::size_t regime);

// Black-Scholes on spot S with continuous rate r and yield q.
double black_scholes(OptionKind kind, double S, double K, double tau, double r, double q,
                     double sigma);

// Safeguarded Newton/bisection inversion to 1e-10. Throws DomainError when
// the price is outside the no-arbitrage bounds. At intrinsic value returns 0.
double implied_vol(double price, OptionKind kind, double S, double K, double tau, double r = 0.0,
                   double q = 0.0);

struct ForwardStartSpec {
    double t_prime = 0.25;
    double maturity = 1.25;
    double forward_strike = 1.0;  // a in (S_T - a S_{T'})^+
    void validate() const;
};

double price_forward_start(const Engine& engine, const ForwardStartSpec& spec);
double price_forward_start(const Engine& engine, const ForwardStartSpec& spec,
                           std::size_t start_state);
// Prices for several forward strikes sharing the two kernels.
std::vector<double> price_forward_start_strip(const Engine& engine, double t_prime,
                                              double maturity, std::span<const double> strikes);

// sigma' solving price = S0 * BS(1, T - T', a, r', sigma').
double forward_implied_vol(double price, const ForwardStartSpec& spec, double spot,
                           double r_prime = 0.0);

// Payoffs on annualized realized variance Sigma.
struct VariancePayoff {
    enum class Kind { VarSwap, VolSwap, VarSwaption, VolSwaption, CappedVolSwap, Custom };
    Kind kind = Kind::VarSwap;
    double strike = 0.0;  // K_var or K_vol
    double cap = 0.0;     // sigma_m
    std::function<double(double)> custom;

    static VariancePayoff var_swap(double k_var = 0.0);
    static VariancePayoff vol_swap(double k_vol = 0.0);
    static VariancePayoff var_swaption(double k_var);
    static VariancePayoff vol_swaption(double k_vol);
    static VariancePayoff capped_vol_swap(double k_vol, double sigma_m);
    static VariancePayoff from_function(std::function<double(double)> h);

    void validate() const;
    double operator()(double sigma2) const;
};

// Realized-variance distribution setup for a maturity: C and spacing.
struct LiftParams {
    int c_max = 100;
    std::optional<double> fixed_spacing;  // otherwise the alpha schedule
    BlockOptions blocks;
    JointOptions joint;
    LeakageGuard guard;

    // Spacing 0.42^2 (f(T) - f(t)) / C unless fixed.
    VarianceGrid grid_for(double t, double T, const TimeChange& tc) const;
};

struct VarianceDistribution {
    JointDistribution joint;
    VariancePdf pdf;
    double leakage = 0.0;
    bool leakage_warning = false;
};

VarianceDistribution variance_distribution(const Engine& engine, double t, double T,
                                           const LiftParams& params = {});
VarianceDistribution variance_distribution(const Engine& engine, std::size_t start_state, double t,
                                           double T, const LiftParams& params = {});

double price_variance_derivative(const VariancePdf& pdf, const VariancePayoff& payoff, double t,
                                 double T, const DiscountCurve& curve);

struct FairStrikes {
    double k_var = 0.0;  // E[Sigma]
    double k_vol = 0.0;  // E[sqrt(Sigma)]
};
FairStrikes fair_strikes(const VariancePdf& pdf);

// (2/T) E[-log(F_T / F_0)] in variance units.
double log_contract(const Engine& engine, double T);
double log_contract(const Engine& engine, double T, std::size_t start_state);

struct VixSpec {
    double tenor = 1.0 / 12.0;
    // Explicit strikes (increasing); empty means `default_strikes`
    // geometric strikes spanning the lattice.
    std::vector<double> strikes;
    std::size_t default_strikes = 2001;
    void validate() const;
};

std::vector<double> default_vix_strikes(std::span<const double> levels, std::size_t count);

// sigma_VIX^2 from the out-of-the-money strip priced with `kernel_row`
// (probabilities of the terminal states over `tenor`) and forward F. Strip
// prices are forward expectations, each scaled by `growth` (e^{rT}).
double vix_portfolio(std::span<const double> strikes, std::span<const double> kernel_row,
                     std::span<const double> levels, double forward, double tenor,
                     double growth = 1.0);

// Portfolio for the model's own kernel from the start state over `T`.
double vix_portfolio(const Engine& engine, double T, const VixSpec& spec = {});

struct VixPdf {
    double t = 0.0;
    double bin_width = 0.0;
    std::vector<double> bin_lower;  // VIX level of the left edge
    std::vector<double> weights;
    // Per attainable state at t: probability and conditional VIX level.
    std::vector<double> state_probability;
    std::vector<double> state_vix;

    double mass() const;
};

VixPdf vix_pdf(const Engine& engine, double t, const VixSpec& spec, double bin_width);

}  // namespace volspec
