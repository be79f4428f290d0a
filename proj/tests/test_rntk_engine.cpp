#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "overrec/rntk_engine.hpp"

using overrec::FinalLayerScale;
using overrec::HyperParams;
using overrec::ItemSequence;
using overrec::KernelValues;

namespace {

using Real = long double;

struct Block {
    Real k1, k2, k3;
};

Real ref_v(const Block& b) {
    if (b.k1 <= 0 || b.k2 <= 0) return 0;
    const Real c = std::clamp<Real>(b.k3 / std::sqrt(b.k1 * b.k2), -1, 1);
    const Real th = std::acos(c);
    return std::sqrt(b.k1 * b.k2) * (std::sin(th) + (std::numbers::pi_v<Real> - th) * c) / (2 * std::numbers::pi_v<Real>);
}

Real ref_vp(const Block& b) {
    if (b.k1 <= 0 || b.k2 <= 0) return 0;
    const Real c = std::clamp<Real>(b.k3 / std::sqrt(b.k1 * b.k2), -1, 1);
    return (std::numbers::pi_v<Real> - std::acos(c)) / (2 * std::numbers::pi_v<Real>);
}

// Straight transcription of the network: a padded step is a zero input, so it
// contributes nothing and its hidden state stays at zero (sigma_b = 0).
KernelValues<Real> reference(const ItemSequence& x, const ItemSequence& y, const HyperParams& p, bool readout_is_v = true) {
    const std::size_t T = std::max(x.length(), y.length());
    const auto at = [T](const ItemSequence& s, std::size_t t) -> long long {
        const std::size_t off = T - s.length();
        return t < off ? -1 : static_cast<long long>(s.items[t - off]);
    };
    const int L = p.layers;
    const Real w2 = Real(p.sigma_w) * p.sigma_w, u2 = Real(p.sigma_u) * p.sigma_u, b2 = Real(p.sigma_b) * p.sigma_b,
               v2 = Real(p.sigma_v) * p.sigma_v;
    // [l][t] with t = 0 the zero initial state.
    std::vector<std::vector<Block>> k(L + 1, std::vector<Block>(T + 1, Block{0, 0, 0}));
    std::vector<std::vector<Real>> psi(L + 1, std::vector<Real>(T + 1, 0));
    for (std::size_t t = 1; t <= T; ++t) {
        const long long xi = at(x, t - 1), yi = at(y, t - 1);
        for (int l = 1; l <= L; ++l) {
            const Block prev = k[l][t - 1];
            Block in;
            if (l == 1) {
                in = Block{xi >= 0 ? u2 : 0, yi >= 0 ? u2 : 0, (xi >= 0 && xi == yi) ? u2 : 0};
            } else {
                const Block below = k[l - 1][t];
                const Real vb = ref_v(below);
                in = Block{u2 * ref_v({below.k1, below.k1, below.k1}), u2 * ref_v({below.k2, below.k2, below.k2}), u2 * vb};
            }
            Block cur{in.k1 + w2 * ref_v({prev.k1, prev.k1, prev.k1}) + b2, in.k2 + w2 * ref_v({prev.k2, prev.k2, prev.k2}) + b2,
                      in.k3 + w2 * ref_v(prev) + b2};
            k[l][t] = cur;
            Real ps = cur.k3 + w2 * psi[l][t - 1] * ref_vp(prev);
            if (l > 1) ps += u2 * psi[l - 1][t] * ref_vp(k[l - 1][t]);
            psi[l][t] = ps;
        }
    }
    const Block top = k[L][T];
    const Real out2 = readout_is_v ? v2 : u2;
    KernelValues<Real> r;
    r.nngp = v2 * ref_v(top);
    r.ntk = r.nngp + out2 * psi[L][T] * ref_vp(top);
    return r;
}

ItemSequence random_sequence(std::mt19937_64& rng, std::size_t max_len, int vocab) {
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::uniform_int_distribution<int> item(0, vocab - 1);
    ItemSequence s;
    s.items.resize(len(rng));
    for (auto& v : s.items) v = static_cast<overrec::ItemId>(item(rng));
    return s;
}

HyperParams unit(int layers) {
    HyperParams p;
    p.layers = layers;
    return p;
}

}  // namespace

TEST(RntkEngine, HandTracedSingleLayer) {
    const HyperParams p = unit(1);
    const auto aa = overrec::rntk(ItemSequence({0}), ItemSequence({0}), p);
    const auto ab = overrec::rntk(ItemSequence({0}), ItemSequence({1}), p);
    const auto aaaa = overrec::rntk(ItemSequence({0, 0}), ItemSequence({0, 0}), p);
    EXPECT_NEAR(aa.nngp, 0.5, 1e-12);
    EXPECT_NEAR(aa.ntk, 1.0, 1e-12);
    EXPECT_NEAR(ab.nngp, 1.0 / (2.0 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(ab.ntk, 1.0 / (2.0 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(aaaa.nngp, 0.75, 1e-12);
    EXPECT_NEAR(aaaa.ntk, 1.75, 1e-12);
}

TEST(RntkEngine, HandTracedTwoLayers) {
    // Sigma^(1,1) = 1, Sigma^(2,1) = V(1) = 1/2, K = V(1/2) = 1/4;
    // Psi^(2,1) = 1/2 + 1 * 1/2, Theta = 1/4 + 1 * 1/2.
    const auto r = overrec::rntk(ItemSequence({3}), ItemSequence({3}), unit(2));
    EXPECT_NEAR(r.nngp, 0.25, 1e-12);
    EXPECT_NEAR(r.ntk, 0.75, 1e-12);
}

TEST(RntkEngine, MatchesReferenceRecursion) {
    std::mt19937_64 rng(11);
    const std::vector<double> grid{0.3, 0.5, 0.8, 1.0, 1.2, std::numbers::sqrt2};
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        const ItemSequence x = random_sequence(rng, 7, 4);
        const ItemSequence y = random_sequence(rng, 7, 4);
        HyperParams p;
        p.sigma_w = grid[pick(rng)];
        p.sigma_u = grid[pick(rng)];
        p.sigma_v = grid[pick(rng)];
        p.layers = 1 + trial % 3;
        const auto got = overrec::rntk(x, y, p);
        const auto want = reference(x, y, p);
        EXPECT_NEAR(got.nngp, static_cast<double>(want.nngp), 1e-12 * (1 + std::abs(static_cast<double>(want.nngp))));
        EXPECT_NEAR(got.ntk, static_cast<double>(want.ntk), 1e-12 * (1 + std::abs(static_cast<double>(want.ntk))));
    }
}

TEST(RntkEngine, BiasAllowedForEqualLengths) {
    HyperParams p = unit(2);
    p.sigma_b = 0.5;
    const ItemSequence x({0, 1, 2});
    const ItemSequence y({2, 1, 0});
    const auto got = overrec::rntk(x, y, p);
    const auto want = reference(x, y, p);
    EXPECT_NEAR(got.nngp, static_cast<double>(want.nngp), 1e-12);
    EXPECT_NEAR(got.ntk, static_cast<double>(want.ntk), 1e-12);
    EXPECT_THROW(overrec::rntk(x, ItemSequence({1}), p), std::invalid_argument);
}

TEST(RntkEngine, ReadoutScaleVariants) {
    HyperParams p = unit(2);
    p.sigma_u = 0.5;
    p.sigma_v = 1.2;
    const ItemSequence x({0, 1});
    const ItemSequence y({0, 2, 1});
    const auto with_v = overrec::rntk(x, y, p, FinalLayerScale::OutputVariance);
    const auto with_u = overrec::rntk(x, y, p, FinalLayerScale::InputVariance);
    EXPECT_NEAR(with_v.ntk, static_cast<double>(reference(x, y, p, true).ntk), 1e-12);
    EXPECT_NEAR(with_u.ntk, static_cast<double>(reference(x, y, p, false).ntk), 1e-12);
    EXPECT_EQ(with_v.nngp, with_u.nngp);
    EXPECT_GT(std::abs(with_v.ntk - with_u.ntk), 1e-3);
    EXPECT_EQ(overrec::kFinalLayerScale, FinalLayerScale::OutputVariance);

    p.sigma_u = p.sigma_v;
    EXPECT_EQ(overrec::rntk(x, y, p, FinalLayerScale::OutputVariance).ntk,
              overrec::rntk(x, y, p, FinalLayerScale::InputVariance).ntk);
}

TEST(RntkEngine, SymmetricBitwise) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const ItemSequence x = random_sequence(rng, 9, 6);
        const ItemSequence y = random_sequence(rng, 9, 6);
        const HyperParams p = unit(1 + i % 3);
        const auto a = overrec::rntk(x, y, p);
        const auto b = overrec::rntk(y, x, p);
        EXPECT_EQ(a.ntk, b.ntk);
        EXPECT_EQ(a.nngp, b.nngp);
    }
}

TEST(RntkEngine, SharedPaddingIsExact) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        const ItemSequence x = random_sequence(rng, 6, 5);
        const ItemSequence y = random_sequence(rng, 6, 5);
        const HyperParams p = unit(1 + i % 2);
        const auto base = overrec::pair_trace(x, y, p);
        for (std::size_t q = 1; q <= 5; ++q) {
            const auto padded = overrec::pair_trace(x, y, p, q);
            EXPECT_EQ(padded.values.ntk, base.values.ntk);
            EXPECT_EQ(padded.values.nngp, base.values.nngp);
            EXPECT_EQ(padded.sigma.leftCols(static_cast<Eigen::Index>(q)).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(RntkEngine, SelfTraceMatchesDiagonalPair) {
    const ItemSequence x({4, 1, 4, 2});
    const HyperParams p = unit(3);
    const auto self = overrec::self_trace(x, p);
    const auto pair = overrec::pair_trace(x, x, p);
    EXPECT_EQ(self.sigma, pair.sigma);
    EXPECT_EQ(self.layers(), 3);
    EXPECT_EQ(self.steps(), 4);
}

TEST(RntkEngine, PrecomputedTracesGiveSameValues) {
    const HyperParams p = unit(2);
    const ItemSequence x({1, 2});
    const ItemSequence y({3, 2, 1, 2});
    const auto sx = overrec::self_trace(x, p);
    const auto sy = overrec::self_trace(y, p);
    const auto a = overrec::rntk(x, sx, y, sy, p);
    const auto b = overrec::rntk(x, y, p);
    EXPECT_EQ(a.ntk, b.ntk);
    EXPECT_EQ(a.nngp, b.nngp);
    EXPECT_THROW(overrec::rntk(x, sy, y, sx, p), std::invalid_argument);
}

TEST(RntkEngine, ZeroReadoutIsZero) {
    HyperParams p = unit(2);
    p.sigma_v = 0.0;
    const auto r = overrec::rntk(ItemSequence({0, 1}), ItemSequence({1, 1}), p);
    EXPECT_EQ(r.ntk, 0.0);
    EXPECT_EQ(r.nngp, 0.0);
}

TEST(RntkEngine, RejectsInvalidInput) {
    const HyperParams p = unit(1);
    EXPECT_THROW(overrec::rntk(ItemSequence{}, ItemSequence({1}), p), std::invalid_argument);
    HyperParams bad = p;
    bad.layers = 0;
    EXPECT_THROW(overrec::rntk(ItemSequence({1}), ItemSequence({1}), bad), std::invalid_argument);
    bad = p;
    bad.sigma_w = -1.0;
    EXPECT_THROW(overrec::rntk(ItemSequence({1}), ItemSequence({1}), bad), std::invalid_argument);
}

TEST(RntkEngine, FloatInstantiationAgrees) {
    overrec::KernelHyperParams<float> pf;
    pf.layers = 2;
    const HyperParams pd = unit(2);
    const ItemSequence x({0, 1, 2});
    const ItemSequence y({1, 2});
    const auto f = overrec::rntk(x, y, pf);
    const auto d = overrec::rntk(x, y, pd);
    EXPECT_NEAR(f.ntk, d.ntk, 1e-5);
    EXPECT_NEAR(f.nngp, d.nngp, 1e-5);
}

TEST(RntkEngine, LeftPaddingAlignsEnds) {
    const auto a = overrec::align_pair(ItemSequence({7}), ItemSequence({1, 2, 3}), 1);
    ASSERT_EQ(a.length(), 4u);
    EXPECT_EQ(a.x.back(), 7u);
    EXPECT_EQ(a.pad_x, (std::vector<std::uint8_t>{1, 1, 1, 0}));
    EXPECT_EQ(a.pad_y, (std::vector<std::uint8_t>{1, 0, 0, 0}));
}
