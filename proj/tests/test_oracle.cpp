#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "overrec/finite_oracle.hpp"
#include "overrec/rntk_engine.hpp"
#include "overrec/verification.hpp"

using namespace overrec;
using namespace overrec::oracle;

namespace {

OracleSettings settings(int width, int trials, std::uint64_t seed = 7) {
    OracleSettings s;
    s.width = width;
    s.trials = trials;
    s.seed = seed;
    s.input_width = 4;
    return s;
}

void expect_within(const KernelEstimate& e, double analytic, double z = 3.0) {
    EXPECT_LE(std::abs(e.mean - analytic), z * e.std_error)
        << "mean " << e.mean << " se " << e.std_error << " analytic " << analytic;
}

}  // namespace

TEST(FiniteNetwork, ForwardMatchesHandComputation) {
    HyperParams p;
    p.sigma_w = 2.0;
    p.sigma_u = 0.5;
    p.sigma_v = 3.0;
    std::mt19937_64 rng(1);
    FiniteRnnWeights w = sample_weights(2, 2, 1, 1, false, rng);
    w.layers[0].u << 1.0, -1.0, 2.0, 4.0;
    w.layers[0].w << 0.5, 0.0, -1.0, 1.0;
    w.layers[0].b.setZero();
    w.v << 1.0, 2.0;
    // t=1, item 0: g = 0.5 * (1, 2) -> h = (0.5, 1).
    // t=2, item 1: g = 0.5 * (-1, 4) + 2/sqrt2 * (0.25, 0.5) -> h = (0, 2 + 1/sqrt2 * 0.5).
    const VectorXd out = forward(w, ItemSequence({0, 1}), p);
    const double h2 = 2.0 + std::sqrt(2.0) * 0.5;
    const double h1 = std::max(0.0, -0.5 + std::sqrt(2.0) * 0.25);
    ASSERT_EQ(out.size(), 1);
    EXPECT_NEAR(out[0], 3.0 / std::sqrt(2.0) * (1.0 * h1 + 2.0 * h2), 1e-14);
}

TEST(FiniteNetwork, FlattenAssignRoundTrip) {
    std::mt19937_64 rng(4);
    FiniteRnnWeights w = sample_weights(5, 3, 2, 2, false, rng);
    const VectorXd flat = w.flatten();
    EXPECT_EQ(static_cast<std::size_t>(flat.size()), w.parameter_count());
    EXPECT_EQ(w.parameter_count(), (25u + 15u + 5u) + (25u + 25u + 5u) + 10u);
    FiniteRnnWeights other = sample_weights(5, 3, 2, 2, false, rng);
    other.assign(flat);
    EXPECT_EQ(other.flatten(), flat);

    const FiniteRnnWeights tied = sample_weights(5, 3, 0, 1, true, rng);
    EXPECT_EQ(tied.output_width, 3);
    EXPECT_EQ(tied.parameter_count(), 25u + 15u + 5u);
    EXPECT_EQ(tied.output_row(2), tied.layers.front().u.col(2));
}

TEST(FiniteNetwork, GradientMatchesFiniteDifferences) {
    const verify::SuiteReport r = verify::gradient_check(99, 6);
    for (const auto& line : r.lines) EXPECT_TRUE(line.passed) << line.name << ": " << line.detail;
}

TEST(FiniteNetwork, RejectsItemsOutsideInputWidth) {
    std::mt19937_64 rng(4);
    const FiniteRnnWeights w = sample_weights(4, 2, 1, 1, false, rng);
    EXPECT_THROW(forward(w, ItemSequence({2}), HyperParams{}), std::invalid_argument);
}

TEST(Oracle, SingleStepKernels) {
    const std::vector<ItemSequence> pool{ItemSequence({0}), ItemSequence({1})};
    const PoolSamples ps = sample_pool(pool, HyperParams{}, settings(1024, 200));
    expect_within(ps.nngp_estimate(ps.pair_index(0, 0)), 0.5);
    expect_within(ps.nngp_estimate(ps.pair_index(0, 1)), 1.0 / (2.0 * std::numbers::pi));
    expect_within(ps.ntk_estimate(ps.pair_index(0, 0)), 1.0);
    expect_within(ps.ntk_estimate(ps.pair_index(1, 0)), 1.0 / (2.0 * std::numbers::pi));
}

TEST(Oracle, TwoStepNtk) {
    const ItemSequence aa({0, 0});
    expect_within(empirical_ntk(aa, aa, HyperParams{}, settings(1024, 200)), 1.75);
}

TEST(Oracle, TinyNetworkIsFinite) {
    const KernelEstimate e = empirical_ntk(ItemSequence({0}), ItemSequence({1}), HyperParams{}, settings(2, 2));
    EXPECT_TRUE(std::isfinite(e.mean));
    EXPECT_TRUE(std::isfinite(e.std_error));
    EXPECT_EQ(e.trials, 2);
}

TEST(Oracle, SeedDeterminismAndSymmetry) {
    const ItemSequence x({0, 2});
    const ItemSequence y({1, 2, 3});
    HyperParams p;
    p.layers = 2;
    OracleSettings s = settings(64, 20, 123);
    const KernelEstimate a = empirical_nngp(x, y, p, s);
    const KernelEstimate b = empirical_nngp(x, y, p, s);
    const KernelEstimate c = empirical_nngp(y, x, p, s);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(empirical_ntk(x, y, p, s).mean, empirical_ntk(y, x, p, s).mean);
    s.threads = 4;
    EXPECT_EQ(empirical_nngp(x, y, p, s).mean, a.mean);
    s.seed = 124;
    EXPECT_NE(empirical_nngp(x, y, p, s).mean, a.mean);
}

TEST(Oracle, ReadoutFactorAdjudication) {
    // With sigma_u != sigma_v only the sigma_v^2 readout factor in the final
    // NTK line agrees with the finite network.
    HyperParams p;
    p.sigma_u = 0.5;
    p.sigma_v = 1.2;
    const ItemSequence x({0, 1});
    const ItemSequence y({2, 1});
    const KernelEstimate e = empirical_ntk(x, y, p, settings(512, 200));
    const double with_v = rntk(x, y, p, FinalLayerScale::OutputVariance).ntk;
    const double with_u = rntk(x, y, p, FinalLayerScale::InputVariance).ntk;
    expect_within(e, with_v);
    EXPECT_GT(std::abs(e.mean - with_u), 6.0 * e.std_error);
    EXPECT_EQ(kFinalLayerScale, FinalLayerScale::OutputVariance);
}

TEST(Oracle, TiedMatchesUntiedBeyondOneStep) {
    HyperParams p;
    p.layers = 2;
    const ItemSequence x({0, 1});
    const ItemSequence y({1, 1});
    OracleSettings s = settings(512, 100);
    const KernelEstimate untied = empirical_ntk(x, y, p, s);
    s.tied = true;
    const KernelEstimate tied = empirical_ntk(x, y, p, s);
    EXPECT_LT(std::abs(untied.mean - tied.mean), 3.0 * (untied.std_error + tied.std_error));
}

TEST(Sweep, ErrorShrinksWithWidth) {
    const ItemSequence a({0});
    const std::vector<int> widths{16, 64, 256, 1024};
    const auto sweep = convergence_sweep(a, a, HyperParams{}, widths, settings(0, 100));
    ASSERT_EQ(sweep.size(), 4u);
    int decreasing = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i) decreasing += sweep[i].nngp_rms_error <= sweep[i - 1].nngp_rms_error ? 1 : 0;
    EXPECT_GE(decreasing, 2);
    std::vector<double> errs;
    for (const auto& pt : sweep) errs.push_back(pt.nngp_rms_error);
    const auto slope = log_log_slope(widths, errs);
    ASSERT_TRUE(slope.has_value());
    EXPECT_LT(*slope, -0.3);
}

TEST(Sweep, SingleWidthHasNoSlope) {
    const std::vector<int> widths{64};
    const auto sweep = convergence_sweep(ItemSequence({0}), ItemSequence({1}), HyperParams{}, widths, settings(0, 10));
    ASSERT_EQ(sweep.size(), 1u);
    const std::vector<double> errs{sweep[0].ntk_rms_error};
    EXPECT_FALSE(log_log_slope(widths, errs).has_value());
}

TEST(Sweep, ZeroReadoutGivesZeroError) {
    HyperParams p;
    p.sigma_v = 0.0;
    const std::vector<int> widths{16, 64};
    const auto sweep = convergence_sweep(ItemSequence({0, 1}), ItemSequence({1}), p, widths, settings(0, 5));
    for (const auto& pt : sweep) {
        EXPECT_EQ(pt.nngp_abs_error, 0.0);
        EXPECT_EQ(pt.ntk_abs_error, 0.0);
        EXPECT_EQ(pt.nngp_rms_error, 0.0);
    }
}

TEST(Sweep, RejectsUnsortedWidths) {
    const std::vector<int> widths{256, 64};
    EXPECT_THROW(convergence_sweep(ItemSequence({0}), ItemSequence({0}), HyperParams{}, widths, settings(0, 5)),
                 std::invalid_argument);
}
