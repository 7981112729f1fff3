#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "volspec/model.hpp"
#include "volspec/spectral.hpp"

using namespace volspec;

namespace {

StateGrid three_point_grid() { return StateGrid{{90.0, 100.0, 110.0}, 1}; }

double first_moment(const RMatrix& l, const std::vector<double>& f, Eigen::Index x) {
    double acc = 0.0;
    for (Eigen::Index y = 0; y < l.cols(); ++y) acc += l(x, y) * (f[static_cast<std::size_t>(y)] - f[static_cast<std::size_t>(x)]);
    return acc;
}

double second_moment(const RMatrix& l, const std::vector<double>& f, Eigen::Index x) {
    double acc = 0.0;
    for (Eigen::Index y = 0; y < l.cols(); ++y) {
        const double d = f[static_cast<std::size_t>(y)] - f[static_cast<std::size_t>(x)];
        acc += l(x, y) * d * d;
    }
    return acc;
}

}  // namespace

TEST(EllipticalGrid, EndpointsAndSpot) {
    const auto g = build_elliptical_grid(76, 100.0, 1e4, 1.0);
    ASSERT_EQ(g.size(), 76u);
    EXPECT_DOUBLE_EQ(g.levels.front(), 1.0);
    EXPECT_DOUBLE_EQ(g.levels.back(), 1e4);
    EXPECT_DOUBLE_EQ(g.spot(), 100.0);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g.levels[i], g.levels[i - 1]);
}

TEST(EllipticalGrid, SmallGridContainsSpot) {
    const auto g = build_elliptical_grid(5, 100.0, 200.0, 50.0);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_NE(std::find(g.levels.begin(), g.levels.end(), 100.0), g.levels.end());
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g.levels[i], g.levels[i - 1]);
}

TEST(EllipticalGrid, DenseAtSpotSparseAtExtremes) {
    const auto g = build_elliptical_grid(76, 100.0, 1e4, 1.0);
    const std::size_t s = g.spot_index;
    const double at_spot = std::log(g.levels[s + 1] / g.levels[s]);
    EXPECT_LT(at_spot, std::log(g.levels[1] / g.levels[0]));
    EXPECT_LT(at_spot, std::log(g.levels.back() / g.levels[g.size() - 2]));
    // Log-spacing grows monotonically away from the spot on both sides.
    for (std::size_t i = s + 1; i + 1 < g.size(); ++i)
        EXPECT_GT(std::log(g.levels[i + 1] / g.levels[i]), std::log(g.levels[i] / g.levels[i - 1]) - 1e-12);
    for (std::size_t i = s; i >= 2; --i)
        EXPECT_GT(std::log(g.levels[i - 1] / g.levels[i - 2]), std::log(g.levels[i] / g.levels[i - 1]) - 1e-12);
}

TEST(EllipticalGrid, RejectsBadBounds) {
    EXPECT_THROW(build_elliptical_grid(4, 100.0, 200.0, 50.0), DomainError);
    EXPECT_THROW(build_elliptical_grid(10, 100.0, 90.0, 50.0), DomainError);
    EXPECT_THROW(build_elliptical_grid(10, 100.0, 200.0, 150.0), DomainError);
}

TEST(CevGenerator, HandSolvedThreePointRow) {
    const RegimeParams p{0.2, 1.0, 10.0, 0.0, 0.0, 100.0};
    const auto gen = build_cev_generator(three_point_grid(), p, 100.0);
    const RMatrix& l = gen.entries();
    EXPECT_NEAR(l(1, 0), 2.0, 1e-12);
    EXPECT_NEAR(l(1, 1), -4.0, 1e-12);
    EXPECT_NEAR(l(1, 2), 2.0, 1e-12);
    EXPECT_EQ(l.row(0).cwiseAbs().sum(), 0.0);
    EXPECT_EQ(l.row(2).cwiseAbs().sum(), 0.0);
}

TEST(CevGenerator, ZeroVolatilityGivesZeroRows) {
    const RegimeParams p{1e-300, 1.0, 10.0, 0.0, 0.0, 100.0};
    const auto gen = build_cev_generator(build_elliptical_grid(21, 100.0, 400.0, 25.0), p, 100.0);
    EXPECT_EQ(gen.entries().cwiseAbs().maxCoeff(), 0.0);
}

TEST(CevGenerator, MomentConditionsAndAbsorbingBoundary) {
    const auto grid = build_elliptical_grid(76, 100.0, 1e4, 1.0);
    for (const auto& p : ModelConfig::calibrated_defaults().regimes) {
        const auto gen = build_cev_generator(grid, p, 100.0);
        const auto target = cev_second_moments(grid, p, 100.0);
        const RMatrix& l = gen.entries();
        const auto last = static_cast<Eigen::Index>(grid.size() - 1);
        EXPECT_EQ(l.row(0).cwiseAbs().sum(), 0.0);
        EXPECT_EQ(l.row(last).cwiseAbs().sum(), 0.0);
        for (Eigen::Index x = 1; x < last; ++x) {
            EXPECT_NEAR(l.row(x).sum(), 0.0, 1e-10 * l.cwiseAbs().maxCoeff());
            EXPECT_NEAR(first_moment(l, grid.levels, x), 0.0, 1e-8 * grid.levels[static_cast<std::size_t>(x)]);
            const double v2 = target[static_cast<std::size_t>(x)];
            EXPECT_NEAR(second_moment(l, grid.levels, x), v2, 1e-8 * v2);
            const double f = grid.levels[static_cast<std::size_t>(x)];
            const double expected = f * local_volatility(p, f, 100.0);
            EXPECT_NEAR(v2, expected * expected, 1e-10 * v2);
        }
    }
}

TEST(LocalVolatility, CapAndReference) {
    const RegimeParams p{0.16, -0.8, 0.6, 0.0, 0.0, 95.0};
    EXPECT_DOUBLE_EQ(local_volatility(p, 100.0, 100.0), 0.16);
    EXPECT_DOUBLE_EQ(local_volatility(p, 1.0, 100.0), 0.6);
    EXPECT_NEAR(local_volatility(p, 200.0, 100.0), 0.16 * std::pow(2.0, -1.8), 1e-15);
}

TEST(Subordinate, ZeroRatesIsIdentity) {
    const auto grid = build_elliptical_grid(31, 100.0, 1e3, 10.0);
    const RegimeParams p{0.2, 0.5, 0.6, 0.0, 0.0, 100.0};
    const auto gen = build_cev_generator(grid, p, 100.0);
    const auto target = cev_second_moments(grid, p, 100.0);
    const auto out = subordinate(gen, grid, 0.0, 0.0, target);
    EXPECT_EQ((out.entries() - gen.entries()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Subordinate, ThreeStateMomentIdentities) {
    const auto grid = three_point_grid();
    const RegimeParams p{0.2, 1.0, 10.0, 0.0, 0.0, 100.0};
    const auto gen = build_cev_generator(grid, p, 100.0);
    const auto target = cev_second_moments(grid, p, 100.0);
    const auto out = subordinate(gen, grid, 0.0, 0.15, target);
    const RMatrix& l = out.entries();
    EXPECT_NEAR(l.row(1).sum(), 0.0, 1e-12);
    EXPECT_NEAR(first_moment(l, grid.levels, 1), 0.0, 1e-10);
    EXPECT_NEAR(second_moment(l, grid.levels, 1), target[1], 1e-8 * target[1]);
    EXPECT_EQ(l.row(0).cwiseAbs().sum(), 0.0);
    EXPECT_EQ(l.row(2).cwiseAbs().sum(), 0.0);
}

TEST(Subordinate, FunctionalCalculusResidueIsTiny) {
    const auto grid = build_elliptical_grid(76, 100.0, 1e4, 1.0);
    const RegimeParams p = ModelConfig::calibrated_defaults().regimes[0];
    const auto gen = build_cev_generator(grid, p, 100.0);
    const auto dec = diagonalize(gen.entries());
    const double nu = p.nu_minus;
    const CMatrix sub = apply_function(dec, [nu](Complex l) { return -std::log(1.0 - nu * l) / nu; });
    EXPECT_LE(sub.imag().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Subordinate, TableOneRegimesKeepGeneratorInvariants) {
    const auto grid = build_elliptical_grid(76, 100.0, 1e4, 1.0);
    for (const auto& p : ModelConfig::calibrated_defaults().regimes) {
        const auto gen = build_cev_generator(grid, p, 100.0);
        const auto target = cev_second_moments(grid, p, 100.0);
        const auto out = subordinate(gen, grid, p.nu_plus, p.nu_minus, target);
        const RMatrix& l = out.entries();
        EXPECT_GE(out.min_off_diagonal(), -1e-12);
        for (Eigen::Index x = 1; x + 1 < l.rows(); ++x) {
            EXPECT_NEAR(l.row(x).sum(), 0.0, 1e-10 * l.cwiseAbs().maxCoeff());
            EXPECT_NEAR(first_moment(l, grid.levels, x), 0.0, 1e-8 * grid.levels[static_cast<std::size_t>(x)]);
            const double v2 = target[static_cast<std::size_t>(x)];
            EXPECT_NEAR(second_moment(l, grid.levels, x), v2, 1e-8 * v2);
        }
        // Down jumps only: nothing above the super-diagonal.
        for (Eigen::Index x = 0; x < l.rows(); ++x)
            for (Eigen::Index y = x + 2; y < l.cols(); ++y) EXPECT_EQ(l(x, y), 0.0);
    }
}

TEST(PartitionOfUnity, Examples) {
    const std::vector<double> anchors{95.0, 100.0};
    EXPECT_EQ(partition_of_unity(anchors, 95.0), (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(partition_of_unity(anchors, 97.5), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(partition_of_unity(anchors, 120.0), (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(partition_of_unity(anchors, 10.0), (std::vector<double>{1.0, 0.0}));
}

TEST(PartitionOfUnity, SumsToOne) {
    const std::vector<double> anchors{80.0, 95.0, 100.0, 130.0};
    for (double f = 1.0; f < 300.0; f += 0.37) {
        const auto w = partition_of_unity(anchors, f);
        double total = 0.0;
        for (double v : w) {
            EXPECT_GE(v, 0.0);
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-15);
    }
}

TEST(AssembleRegimes, SingleRegimeIsUnchanged) {
    const auto grid = three_point_grid();
    const auto gen = build_cev_generator(grid, RegimeParams{0.2, 1.0, 10.0, 0.0, 0.0, 100.0}, 100.0);
    SwitchGenerator g{RMatrix::Zero(1, 1)};
    const std::vector<MarkovGenerator> per{gen};
    const std::vector<SwitchGenerator> sw{g};
    const std::vector<double> anchors{100.0};
    const auto out = assemble_regime_generator(per, sw, anchors, grid);
    EXPECT_EQ((out.entries() - gen.entries()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleRegimes, ZeroSwitchesGiveBlockDiagonal) {
    const auto grid = three_point_grid();
    const auto a = build_cev_generator(grid, RegimeParams{0.2, 1.0, 10.0, 0.0, 0.0, 95.0}, 100.0);
    const auto b = build_cev_generator(grid, RegimeParams{0.3, 1.0, 10.0, 0.0, 0.0, 100.0}, 100.0);
    const std::vector<MarkovGenerator> per{a, b};
    const std::vector<SwitchGenerator> sw{{RMatrix::Zero(2, 2)}, {RMatrix::Zero(2, 2)}};
    const std::vector<double> anchors{95.0, 100.0};
    const auto out = assemble_regime_generator(per, sw, anchors, grid);
    RMatrix expected = RMatrix::Zero(6, 6);
    expected.block(0, 0, 3, 3) = a.entries();
    expected.block(3, 3, 3, 3) = b.entries();
    EXPECT_EQ((out.entries() - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleRegimes, MismatchIsConfigError) {
    const auto grid = three_point_grid();
    const auto a = build_cev_generator(grid, RegimeParams{0.2, 1.0, 10.0, 0.0, 0.0, 95.0}, 100.0);
    const std::vector<MarkovGenerator> per{a, a};
    const std::vector<SwitchGenerator> sw{{RMatrix::Zero(2, 2)}};
    const std::vector<double> anchors{95.0, 100.0};
    EXPECT_THROW(assemble_regime_generator(per, sw, anchors, grid), ConfigError);
}

TEST(BuiltModel, TableOneGeneratorInvariants) {
    const auto model = build_model(ModelConfig::calibrated_defaults());
    const auto& gen = model.generator;
    ASSERT_EQ(gen.dim(), 152u);
    const RMatrix& l = gen.entries();
    const double scale = l.cwiseAbs().maxCoeff();
    EXPECT_LE(gen.max_row_sum(), 1e-10 * scale);
    EXPECT_GE(gen.min_off_diagonal(), -1e-12);
    const auto levels = model.state_levels();
    for (Eigen::Index s = 0; s < l.rows(); ++s) {
        const std::size_t x = gen.spot_of(static_cast<std::size_t>(s));
        if (x == 0 || x + 1 == gen.spot_states()) continue;
        EXPECT_NEAR(first_moment(l, levels, s), 0.0, 1e-8 * levels[static_cast<std::size_t>(s)]);
    }
    EXPECT_EQ(model.start_state(), 76u + model.grid.spot_index);
}

TEST(TimeChange, Examples) {
    EXPECT_DOUBLE_EQ(financial_time(TimeChange(), 2.0), 2.0);
    const TimeChange tc({{0.0, 0.0}, {1.0, 1.1}});
    EXPECT_NEAR(financial_time(tc, 0.5), 0.55, 1e-15);
    EXPECT_NEAR(financial_time(tc, 2.0), 2.2, 1e-15);
    EXPECT_DOUBLE_EQ(financial_time(tc, 0.0), 0.0);
    EXPECT_THROW(TimeChange({{0.0, 0.0}, {1.0, 0.9}, {2.0, 0.8}}), ConfigError);
    EXPECT_THROW(TimeChange({{0.1, 0.0}, {1.0, 1.0}}), ConfigError);
}

TEST(DiscountCurve, FlatRates) {
    const DiscountCurve zero;
    EXPECT_TRUE(zero.is_zero());
    EXPECT_DOUBLE_EQ(zero.discount(0.0, 3.0), 1.0);
    const DiscountCurve c(0.05, 0.02);
    EXPECT_NEAR(c.discount(0.0, 2.0), std::exp(-0.1), 1e-15);
    EXPECT_NEAR(c.spot_from_forward(2.0, 100.0), 100.0 * std::exp(-0.06), 1e-12);
}

TEST(ModelConfig, ValidationErrors) {
    auto c = ModelConfig::calibrated_defaults();
    c.start_regime = 2;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig::calibrated_defaults();
    c.regimes[0].sigma = -0.1;
    EXPECT_ANY_THROW(c.validate());
    c = ModelConfig::calibrated_defaults();
    c.switch_generators[0].matrix(0, 1) = -1.0;
    EXPECT_ANY_THROW(c.validate());
}
