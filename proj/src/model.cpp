#include "volspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "volspec/spectral.hpp"

namespace volspec {

void StateGrid::validate() const {
    if (levels.size() < 2) throw DomainError("state grid needs at least two levels");
    if (levels.front() <= 0.0) throw DomainError("state grid levels must be positive");
    for (std::size_t x = 1; x < levels.size(); ++x)
        if (!(levels[x] > levels[x - 1]))
            throw DomainError("state grid levels must be strictly increasing");
    if (spot_index >= levels.size()) throw DomainError("state grid spot index out of range");
}

StateGrid build_elliptical_grid(std::size_t n_points, double spot, double top, double bottom,
                                double stretch) {
    if (n_points < 5) throw DomainError("elliptical grid needs at least 5 points");
    if (!(bottom > 0.0 && bottom < spot && spot < top))
        throw DomainError("elliptical grid requires 0 < bottom < spot < top");
    if (!(stretch > 0.0)) throw DomainError("elliptical grid stretch must be positive");

    // u runs uniformly over [-1, 0] below the spot node and over [0, 1] above
    // it, so the spot sits exactly on u = 0 for odd and even point counts.
    const std::size_t centre = (n_points - 1) / 2;
    const std::size_t above = n_points - 1 - centre;
    const double scale_up = std::log(top / spot) / std::sinh(stretch);
    const double scale_down = std::log(spot / bottom) / std::sinh(stretch);

    StateGrid grid;
    grid.levels.resize(n_points);
    grid.spot_index = centre;
    for (std::size_t x = 0; x < n_points; ++x) {
        double u;
        if (x <= centre)
            u = -1.0 + static_cast<double>(x) / static_cast<double>(centre);
        else
            u = static_cast<double>(x - centre) / static_cast<double>(above);
        const double s = std::sinh(stretch * u);
        grid.levels[x] = spot * std::exp((u < 0.0 ? scale_down : scale_up) * s);
    }
    grid.levels.front() = bottom;
    grid.levels.back() = top;
    grid.levels[centre] = spot;
    grid.validate();
    return grid;
}

void RegimeParams::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("regime sigma must be positive");
    if (!(sigma_bar > 0.0)) throw ConfigError("regime sigma_bar must be positive");
    if (nu_minus < 0.0 || nu_plus < 0.0) throw ConfigError("jump variance rates must be >= 0");
    if (!std::isfinite(beta)) throw ConfigError("regime beta must be finite");
    if (!(level > 0.0)) throw ConfigError("regime anchor level must be positive");
}

double local_volatility(const RegimeParams& p, double level, double reference) {
    return std::min(p.sigma * std::pow(level / reference, p.beta - 1.0), p.sigma_bar);
}

void SwitchGenerator::validate() const {
    if (matrix.rows() != matrix.cols()) throw ConfigError("switch generator must be square");
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        if (std::abs(matrix.row(i).sum()) > 1e-12)
            throw ConfigError("switch generator rows must sum to zero");
        for (Eigen::Index j = 0; j < matrix.cols(); ++j)
            if (i != j && matrix(i, j) < 0.0)
                throw ConfigError("switch generator off-diagonal entries must be >= 0");
    }
}

MarkovGenerator::MarkovGenerator(RMatrix entries, std::size_t spot_states, std::size_t regimes)
    : entries_(std::move(entries)), spot_states_(spot_states), regimes_(regimes) {
    if (entries_.rows() != entries_.cols())
        throw DomainError("generator matrix must be square");
    if (static_cast<std::size_t>(entries_.rows()) != spot_states_ * regimes_)
        throw DomainError("generator dimension does not match its state space");
}

double MarkovGenerator::max_row_sum() const {
    if (entries_.size() == 0) return 0.0;
    return entries_.rowwise().sum().cwiseAbs().maxCoeff();
}

double MarkovGenerator::min_off_diagonal() const {
    double m = 0.0;
    for (Eigen::Index i = 0; i < entries_.rows(); ++i)
        for (Eigen::Index j = 0; j < entries_.cols(); ++j)
            if (i != j) m = std::min(m, entries_(i, j));
    return m;
}

void MarkovGenerator::validate(double row_tol) const {
    const double scale = entries_.size() ? entries_.cwiseAbs().maxCoeff() : 0.0;
    const double rs = max_row_sum();
    if (rs > row_tol * std::max(scale, 1.0)) {
        std::ostringstream msg;
        msg << "generator row sum " << rs << " violates probability conservation";
        throw NumericalError(msg.str(), rs);
    }
    const double off = min_off_diagonal();
    if (off < -1e-12) {
        std::ostringstream msg;
        msg << "generator has negative off-diagonal rate " << off;
        throw NumericalError(msg.str(), off);
    }
}

std::vector<double> cev_second_moments(const StateGrid& grid, const RegimeParams& p,
                                       double reference) {
    std::vector<double> out(grid.size());
    for (std::size_t x = 0; x < grid.size(); ++x) {
        const double v = grid.level(x) * local_volatility(p, grid.level(x), reference);
        out[x] = v * v;
    }
    return out;
}

MarkovGenerator build_cev_generator(const StateGrid& grid, const RegimeParams& p,
                                    double reference) {
    grid.validate();
    const std::size_t n = grid.size();
    const auto second = cev_second_moments(grid, p, reference);
    RMatrix l = RMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t x = 1; x + 1 < n; ++x) {
        const double down = grid.level(x) - grid.level(x - 1);
        const double up = grid.level(x + 1) - grid.level(x);
        // a * (-down) + b * up = 0 and a * down^2 + b * up^2 = v^2.
        const double a = second[x] / (down * (down + up));
        const double b = second[x] / (up * (down + up));
        if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
            std::ostringstream msg;
            msg << "CEV moment matching yields an invalid rate at node " << x;
            throw ConfigError(msg.str());
        }
        const auto i = static_cast<Eigen::Index>(x);
        l(i, i - 1) = a;
        l(i, i + 1) = b;
        l(i, i) = -(a + b);
    }
    return MarkovGenerator(std::move(l), n, 1);
}

namespace {

constexpr double kNegativeNoise = 1e-10;

// -phi(-L) with phi(l) = log(1 + nu l) / nu; identity when nu == 0.
RMatrix bernstein_generator(const SpectralDecomposition& dec, const RMatrix& l, double nu) {
    if (nu == 0.0) return l;
    const CMatrix m = apply_function(dec, [nu](Complex lambda) {
        return -std::log(1.0 - nu * lambda) / nu;
    });
    const double residue = m.imag().cwiseAbs().maxCoeff();
    if (residue > 1e-6) {
        std::ostringstream msg;
        msg << "subordinated generator has imaginary residue " << residue;
        throw NumericalError(msg.str(), residue);
    }
    return m.real();
}

}  // namespace

MarkovGenerator subordinate(const MarkovGenerator& gen, const StateGrid& grid, double nu_plus,
                            double nu_minus, std::span<const double> v_target) {
    if (nu_plus < 0.0 || nu_minus < 0.0) throw DomainError("jump variance rates must be >= 0");
    if (nu_plus == 0.0 && nu_minus == 0.0) return gen;
    const std::size_t n = grid.size();
    if (gen.dim() != n || v_target.size() != n)
        throw DomainError("subordinate: generator, grid and target sizes differ");

    const RMatrix& l = gen.entries();
    const SpectralDecomposition dec = diagonalize(l);
    const RMatrix up = bernstein_generator(dec, l, nu_plus);
    const RMatrix down = bernstein_generator(dec, l, nu_minus);

    RMatrix out = RMatrix::Zero(l.rows(), l.cols());
    for (std::size_t xs = 1; xs + 1 < n; ++xs) {
        const auto x = static_cast<Eigen::Index>(xs);
        const double fx = grid.level(xs);
        for (Eigen::Index y = 0; y < l.cols(); ++y) {
            if (y == x) continue;
            double rate = y > x ? up(x, y) : down(x, y);
            if (rate < 0.0) {
                if (rate < -kNegativeNoise * std::max(1.0, std::abs(l(x, x)))) {
                    std::ostringstream msg;
                    msg << "subordination produced negative rate " << rate << " in row " << xs;
                    throw NumericalError(msg.str(), rate);
                }
                rate = 0.0;
            }
            out(x, y) = rate;
        }

        double drift = 0.0;
        for (Eigen::Index y = 0; y < l.cols(); ++y)
            drift += out(x, y) * (grid.level(static_cast<std::size_t>(y)) - fx);
        if (drift > 0.0)
            out(x, x - 1) += drift / (fx - grid.level(xs - 1));
        else if (drift < 0.0)
            out(x, x + 1) += -drift / (grid.level(xs + 1) - fx);

        double second = 0.0;
        for (Eigen::Index y = 0; y < l.cols(); ++y) {
            const double dy = grid.level(static_cast<std::size_t>(y)) - fx;
            second += out(x, y) * dy * dy;
        }
        if (v_target[xs] == 0.0) {
            out.row(x).setZero();
        } else {
            if (!(second > 0.0)) {
                std::ostringstream msg;
                msg << "cannot rescale row " << xs << " with vanishing second moment";
                throw NumericalError(msg.str(), second);
            }
            out.row(x) *= v_target[xs] / second;
        }
        out(x, x) = 0.0;
        out(x, x) = -out.row(x).sum();
    }
    return MarkovGenerator(std::move(out), n, 1);
}

std::vector<double> partition_of_unity(std::span<const double> anchors, double level) {
    const std::size_t m = anchors.size();
    std::vector<double> w(m, 0.0);
    if (m == 0) return w;
    if (level <= anchors.front()) {
        w.front() = 1.0;
        return w;
    }
    if (level >= anchors.back()) {
        w.back() = 1.0;
        return w;
    }
    for (std::size_t g = 0; g + 1 < m; ++g) {
        if (level <= anchors[g + 1]) {
            const double t = (level - anchors[g]) / (anchors[g + 1] - anchors[g]);
            w[g + 1] = t;
            w[g] = 1.0 - t;
            break;
        }
    }
    return w;
}

MarkovGenerator assemble_regime_generator(std::span<const MarkovGenerator> per_regime,
                                          std::span<const SwitchGenerator> switches,
                                          std::span<const double> anchors,
                                          const StateGrid& grid) {
    const std::size_t m = per_regime.size();
    const std::size_t n = grid.size();
    if (m == 0) throw ConfigError("at least one regime is required");
    if (switches.size() != m || anchors.size() != m)
        throw ConfigError("number of regimes, switch generators and anchors must agree");
    for (std::size_t g = 1; g < m; ++g)
        if (!(anchors[g] > anchors[g - 1]))
            throw ConfigError("regime anchor levels must be strictly increasing");
    for (const auto& s : switches)
        if (static_cast<std::size_t>(s.matrix.rows()) != m || s.matrix.cols() != s.matrix.rows())
            throw ConfigError("switch generators must be M x M");
    for (const auto& g : per_regime)
        if (g.dim() != n) throw ConfigError("per-regime generators must live on the grid");

    MarkovGenerator out(RMatrix::Zero(static_cast<Eigen::Index>(m * n),
                                      static_cast<Eigen::Index>(m * n)),
                        n, m);
    RMatrix& l = out.entries();
    for (std::size_t a = 0; a < m; ++a)
        l.block(static_cast<Eigen::Index>(a * n), static_cast<Eigen::Index>(a * n),
                static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) =
            per_regime[a].entries();

    for (std::size_t x = 0; x < n; ++x) {
        const auto weights = partition_of_unity(anchors, grid.level(x));
        RMatrix local = RMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t g = 0; g < m; ++g) local += weights[g] * switches[g].matrix;
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                l(static_cast<Eigen::Index>(out.index(x, a)),
                  static_cast<Eigen::Index>(out.index(x, b))) +=
                    local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    return out;
}

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (!(knots_[i].first > knots_[i - 1].first))
            throw ConfigError("piecewise-linear knots must have increasing abscissae");
}

double PiecewiseLinear::operator()(double x) const {
    if (knots_.empty()) return 0.0;
    if (knots_.size() == 1) return knots_.front().second;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                               [](double v, const auto& k) { return v < k.first; });
    std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
    hi = std::clamp<std::size_t>(hi, 1, knots_.size() - 1);
    const auto& [x0, y0] = knots_[hi - 1];
    const auto& [x1, y1] = knots_[hi];
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
}

TimeChange::TimeChange() : curve_({{0.0, 0.0}, {1.0, 1.0}}), identity_(true) {}

TimeChange::TimeChange(std::vector<std::pair<double, double>> knots) : identity_(false) {
    if (knots.size() < 2) throw ConfigError("time change needs at least two knots");
    if (knots.front().first != 0.0 || knots.front().second != 0.0)
        throw ConfigError("time change must start at (0, 0)");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i].first > knots[i - 1].first) || !(knots[i].second > knots[i - 1].second))
            throw ConfigError("time change knots must be strictly increasing");
    identity_ = std::all_of(knots.begin(), knots.end(),
                            [](const auto& k) { return k.first == k.second; });
    curve_ = PiecewiseLinear(std::move(knots));
}

double TimeChange::operator()(double t) const {
    if (identity_) return t;
    return curve_(t);
}

double financial_time(const TimeChange& tc, double t) {
    if (t < 0.0) throw DomainError("financial_time: negative calendar time");
    return tc(t);
}

DiscountCurve::DiscountCurve(double r, double q)
    : r_({{0.0, r}}), q_({{0.0, q}}) {}

DiscountCurve::DiscountCurve(PiecewiseLinear r, PiecewiseLinear q)
    : r_(std::move(r)), q_(std::move(q)) {}

double DiscountCurve::discount(double t, double T) const {
    return std::exp(-(rate(T) * T - rate(t) * t));
}

double DiscountCurve::spot_from_forward(double T, double forward) const {
    return std::exp(-(rate(T) - dividend_yield(T)) * T) * forward;
}

bool DiscountCurve::is_zero() const {
    auto zero = [](const PiecewiseLinear& c) {
        return std::all_of(c.knots().begin(), c.knots().end(),
                           [](const auto& k) { return k.second == 0.0; });
    };
    return zero(r_) && zero(q_);
}

void ModelConfig::validate() const {
    if (grid.n < 5) throw ConfigError("grid.n must be at least 5");
    if (!(grid.bottom > 0.0 && grid.bottom < grid.spot && grid.spot < grid.top))
        throw ConfigError("grid requires 0 < bottom < spot < top");
    if (regimes.empty()) throw ConfigError("at least one regime is required");
    for (const auto& r : regimes) r.validate();
    if (switch_generators.size() != regimes.size())
        throw ConfigError("one switch generator per regime is required");
    for (const auto& s : switch_generators) {
        s.validate();
        if (static_cast<std::size_t>(s.matrix.rows()) != regimes.size())
            throw ConfigError("switch generators must be M x M");
    }
    for (std::size_t g = 1; g < regimes.size(); ++g)
        if (!(regimes[g].level > regimes[g - 1].level))
            throw ConfigError("regime anchor levels must be strictly increasing");
    if (start_regime >= regimes.size()) throw ConfigError("start_regime out of range");
}

ModelConfig ModelConfig::calibrated_defaults() {
    ModelConfig c;
    c.description = "two-regime CEV jump-diffusion calibrated to the S&P 500 surface";
    c.regimes = {
        {0.16, -0.8, 0.60, 0.18, 0.0, 95.0},
        {0.13, -0.3, 0.60, 0.15, 0.0, 100.0},
    };
    SwitchGenerator g0{RMatrix(2, 2)};
    g0.matrix << -1.0, 1.0, 5.0, -5.0;
    SwitchGenerator g1{RMatrix(2, 2)};
    g1.matrix << -5.0, 5.0, 7.0, -7.0;
    c.switch_generators = {g0, g1};
    c.start_regime = 1;
    return c;
}

std::vector<double> BuiltModel::state_levels() const {
    std::vector<double> out(generator.dim());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = grid.level(generator.spot_of(s));
    return out;
}

BuiltModel build_model(const ModelConfig& config) {
    config.validate();
    BuiltModel model;
    model.config = config;
    model.grid = build_elliptical_grid(config.grid.n, config.grid.spot, config.grid.top,
                                       config.grid.bottom, config.grid.stretch);
    const double reference = config.reference_level();

    std::vector<MarkovGenerator> per_regime;
    std::vector<double> anchors;
    for (const auto& p : config.regimes) {
        const MarkovGenerator cev = build_cev_generator(model.grid, p, reference);
        const auto target = cev_second_moments(model.grid, p, reference);
        per_regime.push_back(subordinate(cev, model.grid, p.nu_plus, p.nu_minus, target));
        anchors.push_back(p.level);
    }
    model.generator =
        assemble_regime_generator(per_regime, config.switch_generators, anchors, model.grid);
    model.generator.validate();
    return model;
}

}  // namespace volspec
