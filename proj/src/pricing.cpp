#include "volspec/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace volspec {

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

void check_mass(std::span<const double> row, const char* what) {
    double mass = 0.0;
    for (double p : row) mass += p;
    if (std::abs(mass - 1.0) > 1e-6) {
        std::ostringstream msg;
        msg << what << ": kernel row mass " << mass << " is not 1";
        throw NumericalError(msg.str(), mass);
    }
}

std::span<const double> as_span(const RVector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

Engine::Engine(const ModelConfig& config, const DiagonalizeOptions& opts)
    : model_(build_model(config)) {
    dec_ = diagonalize(model_.generator.entries(), opts);
    levels_ = model_.state_levels();
    q_ = volspec::instantaneous_variance(model_.generator, levels_);
}

double Engine::horizon(double t, double T) const {
    if (t < 0.0 || T < t) throw DomainError("kernel horizon requires 0 <= t <= T");
    return config().time_change(T) - config().time_change(t);
}

KernelRow Engine::kernel_row(std::size_t state, double t, double T) const {
    if (state >= dim()) throw DomainError("kernel_row: state out of range");
    return transition_kernel_row(dec_, state, horizon(t, T));
}

TransitionKernel Engine::kernel(double t, double T) const {
    return transition_kernel(dec_, horizon(t, T));
}

void VanillaSpec::validate() const {
    if (!(strike > 0.0)) throw DomainError("vanilla strike must be positive");
    if (!(maturity > 0.0)) throw DomainError("vanilla maturity must be positive");
}

double vanilla_payoff(OptionKind kind, double strike, double spot) {
    return kind == OptionKind::Call ? std::max(spot - strike, 0.0) : std::max(strike - spot, 0.0);
}

std::vector<double> terminal_payoff(std::span<const double> levels, double T,
                                    const DiscountCurve& curve,
                                    const std::function<double(double)>& h) {
    std::vector<double> out(levels.size());
    for (std::size_t y = 0; y < levels.size(); ++y)
        out[y] = h(curve.spot_from_forward(T, levels[y]));
    return out;
}

double price_european(std::span<const double> kernel_row, std::span<const double> payoff, double t,
                      double T, const DiscountCurve& curve) {
    if (kernel_row.size() != payoff.size()) throw DomainError("price_european: size mismatch");
    check_mass(kernel_row, "price_european");
    double acc = 0.0;
    for (std::size_t y = 0; y < payoff.size(); ++y) acc += kernel_row[y] * payoff[y];
    return curve.discount(t, T) * acc;
}

double price_vanilla(const Engine& engine, const VanillaSpec& spec) {
    return price_vanilla(engine, spec, engine.start_state());
}

double price_vanilla(const Engine& engine, const VanillaSpec& spec, std::size_t start_state) {
    spec.validate();
    const auto& curve = engine.config().discount;
    const auto payoff = terminal_payoff(engine.state_levels(), spec.maturity, curve, [&](double s) {
        return vanilla_payoff(spec.kind, spec.strike, s);
    });
    const auto row = engine.kernel_row(start_state, 0.0, spec.maturity);
    return price_european(as_span(row.probabilities), payoff, 0.0, spec.maturity, curve);
}

GreeksProfile greeks_profile(const Engine& engine, const VanillaSpec& spec) {
    spec.validate();
    const auto payoff =
        terminal_payoff(engine.state_levels(), spec.maturity, engine.config().discount,
                        [&](double s) { return vanilla_payoff(spec.kind, spec.strike, s); });
    return greeks_profile(engine, payoff, spec.maturity, engine.config().start_regime);
}

GreeksProfile greeks_profile(const Engine& engine, std::span<const double> payoff, double T,
                             std::size_t regime) {
    const auto& gen = engine.model().generator;
    const auto& grid = engine.model().grid;
    const std::size_t n = gen.spot_states();
    if (n < 3) throw DomainError("greeks_profile needs at least 3 spot nodes");
    if (regime >= gen.regimes()) throw DomainError("greeks_profile: regime out of range");
    if (payoff.size() != engine.dim()) throw DomainError("greeks_profile: payoff size mismatch");

    const auto kernel = engine.kernel(0.0, T);
    const Eigen::Map<const RVector> h(payoff.data(), static_cast<Eigen::Index>(payoff.size()));
    const RVector values = engine.config().discount.discount(0.0, T) * (kernel.matrix * h);
    auto value = [&](std::size_t x, std::size_t r) {
        return values(static_cast<Eigen::Index>(gen.index(x, r)));
    };

    const auto& regimes = engine.config().regimes;
    const bool has_neighbor = gen.regimes() > 1;
    const std::size_t other = regime + 1 < gen.regimes() ? regime + 1 : (regime > 0 ? regime - 1 : regime);

    GreeksProfile out;
    out.regime = regime;
    for (std::size_t x = 1; x + 1 < n; ++x) {
        const double up = value(x + 1, regime);
        const double down = value(x - 1, regime);
        const double mid = value(x, regime);
        const double h_up = grid.level(x + 1) - grid.level(x);
        const double h_down = grid.level(x) - grid.level(x - 1);
        const double span = h_up + h_down;
        out.nodes.push_back(x);
        out.levels.push_back(grid.level(x));
        out.price.push_back(mid);
        out.delta.push_back((up - down) / span);
        // Three-point second difference; equals 4 (up + down - 2 mid) / span^2
        // on evenly spaced nodes and vanishes on linear payoffs.
        out.gamma.push_back(2.0 * ((up - mid) / h_up - (mid - down) / h_down) / span);
        double vega = 0.0;
        if (has_neighbor) {
            const double dsigma = regimes[other].sigma - regimes[regime].sigma;
            if (dsigma != 0.0) vega = (value(x, other) - mid) / dsigma;
        }
        out.vega.push_back(vega);
    }
    return out;
}

double black_scholes(OptionKind kind, double S, double K, double tau, double r, double q,
                     double sigma) {
    const double df_r = std::exp(-r * tau);
    const double df_q = std::exp(-q * tau);
    const double fwd_intrinsic =
        kind == OptionKind::Call ? S * df_q - K * df_r : K * df_r - S * df_q;
    if (tau <= 0.0 || sigma <= 0.0) return std::max(fwd_intrinsic, 0.0);
    const double sd = sigma * std::sqrt(tau);
    const double d1 = (std::log(S / K) + (r - q) * tau) / sd + 0.5 * sd;
    const double d2 = d1 - sd;
    if (kind == OptionKind::Call) return S * df_q * norm_cdf(d1) - K * df_r * norm_cdf(d2);
    return K * df_r * norm_cdf(-d2) - S * df_q * norm_cdf(-d1);
}

double implied_vol(double price, OptionKind kind, double S, double K, double tau, double r,
                   double q) {
    if (!(S > 0.0) || !(K > 0.0) || !(tau > 0.0)) throw DomainError("implied_vol: bad inputs");
    const double df_r = std::exp(-r * tau);
    const double df_q = std::exp(-q * tau);
    const double lower =
        std::max(kind == OptionKind::Call ? S * df_q - K * df_r : K * df_r - S * df_q, 0.0);
    const double upper = kind == OptionKind::Call ? S * df_q : K * df_r;
    const double slack = 1e-12 * std::max(1.0, upper);
    if (price < lower - slack || price > upper + slack) {
        std::ostringstream msg;
        msg << "implied_vol: price " << price << " outside no-arbitrage bounds [" << lower << ", "
            << upper << "]";
        throw DomainError(msg.str());
    }
    if (price <= lower + slack * 1e-3) return 0.0;

    double lo = 0.0;
    double hi = 1.0;
    while (black_scholes(kind, S, K, tau, r, q, hi) < price && hi < 1e3) hi *= 2.0;
    double sigma = 0.5 * (lo + hi);
    for (int iter = 0; iter < 300; ++iter) {
        const double diff = black_scholes(kind, S, K, tau, r, q, sigma) - price;
        if (diff > 0.0)
            hi = sigma;
        else
            lo = sigma;
        if (hi - lo < 1e-14 || diff == 0.0) break;
        const double sd = sigma * std::sqrt(tau);
        const double d1 = (std::log(S / K) + (r - q) * tau) / sd + 0.5 * sd;
        const double vega = S * df_q * norm_pdf(d1) * std::sqrt(tau);
        double next = vega > 0.0 ? sigma - diff / vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - sigma) < 1e-15) {
            sigma = next;
            break;
        }
        sigma = next;
    }
    return sigma;
}

void ForwardStartSpec::validate() const {
    if (!(t_prime > 0.0) || !(maturity > t_prime))
        throw DomainError("forward start requires 0 < T' < T");
    if (forward_strike < 0.0) throw DomainError("forward strike must be non-negative");
}

std::vector<double> price_forward_start_strip(const Engine& engine, double t_prime,
                                              double maturity, std::span<const double> strikes) {
    for (double a : strikes) ForwardStartSpec{t_prime, maturity, a}.validate();
    const auto& levels = engine.state_levels();
    const auto& curve = engine.config().discount;
    const std::size_t n = engine.dim();
    const auto later = engine.kernel(t_prime, maturity);
    const auto first = engine.kernel_row(engine.start_state(), 0.0, t_prime);
    check_mass(as_span(first.probabilities), "price_forward_start");

    std::vector<double> s_t(n), s_tp(n);
    for (std::size_t y = 0; y < n; ++y) {
        s_t[y] = curve.spot_from_forward(maturity, levels[y]);
        s_tp[y] = curve.spot_from_forward(t_prime, levels[y]);
    }
    const double df_later = curve.discount(t_prime, maturity);
    const double df_first = curve.discount(0.0, t_prime);

    std::vector<double> out;
    out.reserve(strikes.size());
    for (double a : strikes) {
        double price = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double p = first.probabilities(static_cast<Eigen::Index>(s));
            if (p == 0.0) continue;
            double h = 0.0;
            for (std::size_t y = 0; y < n; ++y)
                h += later.matrix(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(y)) *
                     std::max(s_t[y] - a * s_tp[s], 0.0);
            price += p * df_later * h;
        }
        out.push_back(df_first * price);
    }
    return out;
}

double price_forward_start(const Engine& engine, const ForwardStartSpec& spec) {
    spec.validate();
    const double a = spec.forward_strike;
    return price_forward_start_strip(engine, spec.t_prime, spec.maturity, {&a, 1}).front();
}

double price_forward_start(const Engine& engine, const ForwardStartSpec& spec,
                           std::size_t start_state) {
    spec.validate();
    const auto& levels = engine.state_levels();
    const auto& curve = engine.config().discount;
    const std::size_t n = engine.dim();
    const auto later = engine.kernel(spec.t_prime, spec.maturity);
    const auto first = engine.kernel_row(start_state, 0.0, spec.t_prime);
    double price = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double strike = spec.forward_strike * curve.spot_from_forward(spec.t_prime, levels[s]);
        double h = 0.0;
        for (std::size_t y = 0; y < n; ++y)
            h += later.matrix(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(y)) *
                 std::max(curve.spot_from_forward(spec.maturity, levels[y]) - strike, 0.0);
        price += first.probabilities(static_cast<Eigen::Index>(s)) * h;
    }
    return curve.discount(0.0, spec.t_prime) * curve.discount(spec.t_prime, spec.maturity) * price;
}

double forward_implied_vol(double price, const ForwardStartSpec& spec, double spot,
                           double r_prime) {
    spec.validate();
    if (!(spot > 0.0)) throw DomainError("forward_implied_vol: spot must be positive");
    return implied_vol(price / spot, OptionKind::Call, 1.0, spec.forward_strike,
                       spec.maturity - spec.t_prime, r_prime, 0.0);
}

VariancePayoff VariancePayoff::var_swap(double k_var) {
    return {Kind::VarSwap, k_var, 0.0, {}};
}
VariancePayoff VariancePayoff::vol_swap(double k_vol) {
    return {Kind::VolSwap, k_vol, 0.0, {}};
}
VariancePayoff VariancePayoff::var_swaption(double k_var) {
    return {Kind::VarSwaption, k_var, 0.0, {}};
}
VariancePayoff VariancePayoff::vol_swaption(double k_vol) {
    return {Kind::VolSwaption, k_vol, 0.0, {}};
}
VariancePayoff VariancePayoff::capped_vol_swap(double k_vol, double sigma_m) {
    return {Kind::CappedVolSwap, k_vol, sigma_m, {}};
}
VariancePayoff VariancePayoff::from_function(std::function<double(double)> h) {
    return {Kind::Custom, 0.0, 0.0, std::move(h)};
}

void VariancePayoff::validate() const {
    if (strike < 0.0) throw DomainError("variance payoff strike must be non-negative");
    if (kind == Kind::CappedVolSwap && !(cap > 0.0))
        throw DomainError("capped vol swap needs a positive cap");
    if (kind == Kind::Custom && !custom) throw DomainError("custom variance payoff is empty");
}

double VariancePayoff::operator()(double sigma2) const {
    const double vol = std::sqrt(std::max(sigma2, 0.0));
    switch (kind) {
        case Kind::VarSwap: return sigma2 - strike;
        case Kind::VolSwap: return vol - strike;
        case Kind::VarSwaption: return std::max(sigma2 - strike, 0.0);
        case Kind::VolSwaption: return std::max(vol - strike, 0.0);
        case Kind::CappedVolSwap: return std::min(vol, cap) - strike;
        case Kind::Custom: return custom(sigma2);
    }
    return 0.0;
}

VarianceGrid LiftParams::grid_for(double t, double T, const TimeChange& tc) const {
    VarianceGrid g;
    g.c_max = c_max;
    g.spacing = fixed_spacing ? *fixed_spacing
                              : alpha_schedule(T, c_max, tc) - alpha_schedule(t, c_max, tc);
    g.validate();
    return g;
}

VarianceDistribution variance_distribution(const Engine& engine, double t, double T,
                                           const LiftParams& params) {
    return variance_distribution(engine, engine.start_state(), t, T, params);
}

VarianceDistribution variance_distribution(const Engine& engine, std::size_t start_state, double t,
                                           double T, const LiftParams& params) {
    const auto& tc = engine.config().time_change;
    const VarianceGrid grid = params.grid_for(t, T, tc);
    const auto blocks = BlockFamily::build(engine.model().generator, engine.instantaneous_variance(),
                                           grid, params.blocks);
    VarianceDistribution out;
    out.joint = joint_distribution(blocks, start_state, t, T, tc, params.joint);
    out.pdf = marginal_variance_pdf(out.joint);
    out.leakage = leakage_probability(out.joint, params.guard.tail_buckets);
    out.leakage_warning = check_leakage(out.joint, params.guard);
    return out;
}

double price_variance_derivative(const VariancePdf& pdf, const VariancePayoff& payoff, double t,
                                 double T, const DiscountCurve& curve) {
    payoff.validate();
    return curve.discount(t, T) * pdf.expect([&](double s) { return payoff(s); });
}

FairStrikes fair_strikes(const VariancePdf& pdf) {
    return {pdf.mean(), pdf.expect([](double s) { return std::sqrt(std::max(s, 0.0)); })};
}

double log_contract(const Engine& engine, double T) {
    return log_contract(engine, T, engine.start_state());
}

double log_contract(const Engine& engine, double T, std::size_t start_state) {
    if (!(T > 0.0)) throw DomainError("log_contract: maturity must be positive");
    const auto& levels = engine.state_levels();
    const double f0 = levels[start_state];
    std::vector<double> payoff(levels.size());
    for (std::size_t y = 0; y < levels.size(); ++y) payoff[y] = -std::log(levels[y] / f0);
    const auto row = engine.kernel_row(start_state, 0.0, T);
    // Forward-measure expectation: the fair variance strike is undiscounted.
    return 2.0 / T * price_european(as_span(row.probabilities), payoff, 0.0, T, DiscountCurve());
}

void VixSpec::validate() const {
    if (!(tenor > 0.0)) throw DomainError("VIX tenor must be positive");
    if (!strikes.empty()) {
        if (strikes.size() < 2) throw DomainError("VIX strike grid needs at least two strikes");
        for (std::size_t i = 0; i < strikes.size(); ++i) {
            if (!(strikes[i] > 0.0)) throw DomainError("VIX strikes must be positive");
            if (i > 0 && !(strikes[i] > strikes[i - 1]))
                throw DomainError("VIX strikes must be increasing");
        }
    } else if (default_strikes < 2) {
        throw DomainError("VIX strike grid needs at least two strikes");
    }
}

std::vector<double> default_vix_strikes(std::span<const double> levels, std::size_t count) {
    if (levels.empty() || count < 2) throw DomainError("default_vix_strikes: empty input");
    const auto [lo_it, hi_it] = std::minmax_element(levels.begin(), levels.end());
    const double lo = std::log(*lo_it);
    const double hi = std::log(*hi_it);
    std::vector<double> k(count);
    for (std::size_t i = 0; i < count; ++i)
        k[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    k.front() = *lo_it;
    k.back() = *hi_it;
    return k;
}

double vix_portfolio(std::span<const double> strikes, std::span<const double> kernel_row,
                     std::span<const double> levels, double forward, double tenor, double growth) {
    if (strikes.size() < 2) throw DomainError("vix_portfolio: strike grid needs two strikes");
    if (kernel_row.size() != levels.size()) throw DomainError("vix_portfolio: size mismatch");
    if (!(tenor > 0.0)) throw DomainError("vix_portfolio: tenor must be positive");

    // K_0: largest strike not above the forward.
    std::size_t k0 = 0;
    for (std::size_t i = 0; i < strikes.size(); ++i)
        if (strikes[i] <= forward) k0 = i;

    std::vector<std::size_t> support;
    for (std::size_t y = 0; y < levels.size(); ++y)
        if (kernel_row[y] != 0.0) support.push_back(y);

    auto option = [&](double k, bool call) {
        double acc = 0.0;
        for (std::size_t y : support)
            acc += kernel_row[y] * (call ? std::max(levels[y] - k, 0.0) : std::max(k - levels[y], 0.0));
        return acc;
    };

    const std::size_t m = strikes.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double dk;
        if (i == 0)
            dk = strikes[1] - strikes[0];
        else if (i + 1 == m)
            dk = strikes[m - 1] - strikes[m - 2];
        else
            dk = 0.5 * (strikes[i + 1] - strikes[i - 1]);
        double q;
        if (i < k0)
            q = option(strikes[i], false);
        else if (i > k0)
            q = option(strikes[i], true);
        else
            q = 0.5 * (option(strikes[i], false) + option(strikes[i], true));
        sum += dk / (strikes[i] * strikes[i]) * growth * q;
    }
    const double corr = forward / strikes[k0] - 1.0;
    return 2.0 / tenor * sum - corr * corr / tenor;
}

double vix_portfolio(const Engine& engine, double T, const VixSpec& spec) {
    spec.validate();
    const auto& levels = engine.state_levels();
    const auto strikes =
        spec.strikes.empty() ? default_vix_strikes(levels, spec.default_strikes) : spec.strikes;
    const auto row = engine.kernel_row(engine.start_state(), 0.0, T);
    return vix_portfolio(strikes, as_span(row.probabilities), levels,
                         levels[engine.start_state()], T);
}

double VixPdf::mass() const {
    double acc = 0.0;
    for (double w : weights) acc += w;
    return acc;
}

VixPdf vix_pdf(const Engine& engine, double t, const VixSpec& spec, double bin_width) {
    if (!(t > 0.0)) throw DomainError("vix_pdf: horizon must be positive");
    if (!(bin_width > 0.0)) throw DomainError("vix_pdf: bin width must be positive");
    spec.validate();
    const auto& levels = engine.state_levels();
    const auto strikes =
        spec.strikes.empty() ? default_vix_strikes(levels, spec.default_strikes) : spec.strikes;
    const auto first = engine.kernel_row(engine.start_state(), 0.0, t);
    const auto window = engine.kernel(t, t + spec.tenor);

    VixPdf out;
    out.t = t;
    out.bin_width = bin_width;
    out.state_probability.assign(levels.size(), 0.0);
    out.state_vix.assign(levels.size(), 0.0);
    std::map<long, double> bins;
    std::vector<double> row(levels.size());
    for (std::size_t s = 0; s < levels.size(); ++s) {
        const double p = first.probabilities(static_cast<Eigen::Index>(s));
        out.state_probability[s] = p;
        if (p == 0.0) continue;
        for (std::size_t y = 0; y < levels.size(); ++y)
            row[y] = window.matrix(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(y));
        const double vix = vol_terms(vix_portfolio(strikes, row, levels, levels[s], spec.tenor));
        out.state_vix[s] = vix;
        bins[static_cast<long>(std::floor(vix / bin_width))] += p;
    }
    if (!bins.empty()) {
        const long last = bins.rbegin()->first;
        for (long b = 0; b <= last; ++b) {
            out.bin_lower.push_back(static_cast<double>(b) * bin_width);
            const auto it = bins.find(b);
            out.weights.push_back(it == bins.end() ? 0.0 : it->second);
        }
    }
    return out;
}

}  // namespace volspec
